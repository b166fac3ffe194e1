//! Least-squares power-law fits `y ≈ c·x^{−p}` and tail sums of such laws.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Result of a log–log linear regression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    /// Prefactor `c`.
    pub c: f64,
    /// Decay exponent `p` in `y ≈ c x^{−p}`.
    pub p: f64,
    /// Largest absolute residual in `ln y`.
    pub max_log_residual: f64,
}

impl PowerFit {
    /// Evaluate `c x^{−p}`.
    pub fn eval(&self, x: f64) -> f64 {
        self.c * x.powf(-self.p)
    }

    /// `Σ_{n ≥ start} c n^{−p}` (requires `p > 1`), summed explicitly for a
    /// stretch and closed with an Euler–Maclaurin remainder.
    pub fn tail_sum(&self, start: usize) -> Result<f64> {
        if self.p <= 1.0 {
            return Err(Error::Truncation(format!("power-law tail with p = {} diverges", self.p)));
        }
        let stop = start.max(1) + 2000;
        let mut s: f64 = (start.max(1)..stop).map(|n| (n as f64).powf(-self.p)).sum();
        let n = stop as f64;
        let p = self.p;
        s += n.powf(1.0 - p) / (p - 1.0) + 0.5 * n.powf(-p) + p * n.powf(-p - 1.0) / 12.0;
        Ok(self.c * s)
    }
}

/// Fit `y ≈ c x^{−p}` by least squares on `(ln x, ln y)`; all values must be
/// positive.
pub fn power_law_fit(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Parameter("power-law fit needs at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Parameter("power-law fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("power-law fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let max_log_residual = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - (icpt + slope * a)).abs())
        .fold(0.0, f64::max);
    Ok(PowerFit { c: icpt.exp(), p: -slope, max_log_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let x = [3.0, 5.0, 8.0, 13.0];
        let y: Vec<f64> = x.iter().map(|x: &f64| 2.5 * x.powf(-1.7)).collect();
        let f = power_law_fit(&x, &y).unwrap();
        assert!((f.p - 1.7).abs() < 1e-12 && (f.c - 2.5).abs() < 1e-12);
        assert!(f.max_log_residual < 1e-12);
    }

    #[test]
    fn tail_sum_matches_zeta() {
        // Σ_{n≥1} n^{-2} = π²/6.
        let f = PowerFit { c: 1.0, p: 2.0, max_log_residual: 0.0 };
        let s = f.tail_sum(1).unwrap();
        assert!((s - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-10);
        assert!(PowerFit { c: 1.0, p: 1.0, max_log_residual: 0.0 }.tail_sum(5).is_err());
    }

    #[test]
    fn rejects_bad_data() {
        assert!(power_law_fit(&[1.0], &[1.0]).is_err());
        assert!(power_law_fit(&[1.0, 2.0], &[1.0, -1.0]).is_err());
    }
}
