//! Radial grids, quadrature, spherical-Bessel transforms, angular-momentum
//! sector kernels and Legendre projections.
//!
//! Conventions used across the crate:
//!
//! * A [`RadialGrid`] carries weights for `∫₀^∞ f(r) r² dr`.
//! * A [`RadialFunction`] with sector `L` stores the radial profile `f` of the
//!   three-dimensional function `f(r)·√(2L+1)·P_L(cosθ)`, i.e. `f(r)·√(4π)·Y_L0`.
//!   For `L = 0` this is the plain radial function, and the three-dimensional
//!   norm is `‖f‖² = 4π Σ w_i f(r_i)²` in every sector.
//! * Momentum grids are ordinary radial grids in the variable `k`; the
//!   transform pair of [`fourier_radial`] is the unitary order-`L` Hankel
//!   transform `F(k) = √(2/π) ∫ f(r) j_L(kr) r² dr`.

mod identity;
mod interp;
mod kernel;
mod legendre;
mod transform;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use identity::{composition_constant_quadrature, INVERSE_SQUARE_COMPOSITION};
pub use interp::{EvenInterpolator, Tail};
pub use kernel::{sector_kernel, KernelKind, SectorKernel};
pub use legendre::{legendre_project, AngularGrid, TensorField};
pub use transform::{fourier_radial, hankel_transform};

/// Node placement rule of a [`RadialGrid`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridScheme {
    /// `r_i = i·h`, `i = 1..=n`, `h = r_max/n`, with Gregory end corrections.
    Uniform,
    /// Geometric nodes from `r_max·1e-5` to `r_max` (trapezoid in `ln r`).
    LogUniform,
}

impl std::str::FromStr for GridScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "log-uniform" => Ok(Self::LogUniform),
            other => Err(Error::Parameter(format!("unknown grid scheme '{other}'"))),
        }
    }
}

/// Discretization of `[0, r_max]` with weights for `∫ f(r) r² dr`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    /// Strictly increasing positive nodes; the last equals `r_max`.
    pub r: Vec<f64>,
    /// Quadrature weights including the `r²` measure.
    pub w: Vec<f64>,
    /// Outer radius.
    pub r_max: f64,
    /// Number of nodes.
    pub n: usize,
    /// Node placement rule.
    pub scheme: GridScheme,
}

/// Build a radial grid; see [`GridScheme`] for the node rules.
pub fn build_grid(n: usize, r_max: f64, scheme: GridScheme) -> Result<RadialGrid> {
    if n < 16 {
        return Err(Error::Parameter(format!("grid needs n >= 16, got {n}")));
    }
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::Parameter(format!("grid needs r_max > 0, got {r_max}")));
    }
    let (r, w) = match scheme {
        GridScheme::Uniform => {
            let h = r_max / n as f64;
            let r: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
            let omega = gregory_weights(n, h);
            let w = r.iter().zip(&omega).map(|(r, o)| r * r * o).collect();
            (r, w)
        }
        GridScheme::LogUniform => {
            let ratio: f64 = 1e-5;
            let delta = -ratio.ln() / (n - 1) as f64;
            let r: Vec<f64> = (0..n).map(|i| r_max * (-((n - 1 - i) as f64) * delta).exp()).collect();
            // ∫ f r² dr = ∫ f r³ d(ln r): uniform rule in ln r with Gregory
            // corrections at both ends, plus the core ball below r_0.
            let omega = gregory_weights_both(n, delta);
            let mut w: Vec<f64> = r.iter().zip(&omega).map(|(r, o)| r.powi(3) * o).collect();
            w[0] += r[0].powi(3) / 3.0;
            let total: f64 = w.iter().sum();
            let scale = r_max.powi(3) / 3.0 / total;
            w.iter_mut().for_each(|v| *v *= scale);
            (r, w)
        }
    };
    Ok(RadialGrid { r, w, r_max, n, scheme })
}

/// Composite trapezoid weights on `h, 2h, …, nh` (the origin carries no
/// weight for integrands vanishing there) with a Gregory correction at the
/// outer end that makes quadratics exact.
fn gregory_weights(n: usize, h: f64) -> Vec<f64> {
    let mut o = vec![h; n];
    o[n - 1] = 3.0 * h / 8.0;
    o[n - 2] = 7.0 * h / 6.0;
    o[n - 3] = 23.0 * h / 24.0;
    o
}

/// Uniform-spacing weights on `n` nodes including both ends, with the
/// third-order Gregory correction at each end.
fn gregory_weights_both(n: usize, h: f64) -> Vec<f64> {
    let mut o = vec![h; n];
    for (a, b) in [(0, n - 1), (1, n - 2), (2, n - 3)] {
        let c = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0][a];
        o[a] = c * h;
        o[b] = c * h;
    }
    o
}

impl RadialGrid {
    /// Uniform spacing; `None` for non-uniform schemes.
    pub fn spacing(&self) -> Option<f64> {
        match self.scheme {
            GridScheme::Uniform => Some(self.r_max / self.n as f64),
            GridScheme::LogUniform => None,
        }
    }

    /// `∫ f(r) r² dr` of sampled values.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.w.iter().zip(f).map(|(w, f)| w * f).sum()
    }

    /// Line weights `ω_i = w_i / r_i²` for `∫ g(r) dr`.
    pub fn line_weights(&self) -> Vec<f64> {
        self.w.iter().zip(&self.r).map(|(w, r)| w / (r * r)).collect()
    }
}

/// Samples of a sector-`L` radial profile on a shared grid.
#[derive(Clone, Debug)]
pub struct RadialFunction {
    /// Grid the samples live on.
    pub grid: Arc<RadialGrid>,
    /// Samples `f(r_i)`.
    pub values: Vec<f64>,
    /// Angular-momentum index `L`.
    pub sector: usize,
}

impl RadialFunction {
    /// Wrap samples, checking the length and finiteness.
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, sector: usize) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Parameter(format!(
                "expected {} samples, got {}",
                grid.n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("radial function has non-finite samples".into()));
        }
        Ok(Self { grid, values, sector })
    }

    /// `Σ w_i f_i²`, the radial part of the norm.
    pub fn radial_norm_sq(&self) -> f64 {
        self.grid.w.iter().zip(&self.values).map(|(w, f)| w * f * f).sum()
    }

    /// Three-dimensional norm squared, `4π Σ w_i f_i²`.
    pub fn norm_sq(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.radial_norm_sq()
    }

    /// Three-dimensional inner product with another function of the same sector.
    pub fn dot(&self, other: &RadialFunction) -> f64 {
        4.0 * std::f64::consts::PI
            * self
                .grid
                .w
                .iter()
                .zip(self.values.iter().zip(&other.values))
                .map(|(w, (a, b))| w * a * b)
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_invariants() {
        for &n in &[16usize, 100, 2000] {
            let g = build_grid(n, 10.0, GridScheme::Uniform).unwrap();
            assert_eq!(g.r.len(), n);
            assert!((g.r[n - 1] - 10.0).abs() < 1e-14);
            assert!(g.w.iter().all(|w| *w > 0.0));
            let s: f64 = g.w.iter().sum();
            assert!((s / (1000.0 / 3.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_grid_invariants() {
        let g = build_grid(400, 40.0, GridScheme::LogUniform).unwrap();
        assert!(g.r.windows(2).all(|p| p[1] > p[0]));
        assert!((g.r[399] - 40.0).abs() < 1e-12);
        let s: f64 = g.w.iter().sum();
        assert!((s / (40f64.powi(3) / 3.0) - 1.0).abs() < 1e-12);
        let e: f64 = g.integrate(&g.r.iter().map(|r| (-r).exp()).collect::<Vec<_>>());
        assert!((e - 2.0).abs() < 1e-5, "{e}");
    }

    #[test]
    fn exponential_moment() {
        let g = build_grid(2000, 40.0, GridScheme::Uniform).unwrap();
        let f: Vec<f64> = g.r.iter().map(|r| (-r).exp()).collect();
        assert!((g.integrate(&f) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_grid(4, 4.0, GridScheme::Uniform).is_err());
        assert!(build_grid(100, 0.0, GridScheme::Uniform).is_err());
        assert!(build_grid(100, f64::NAN, GridScheme::Uniform).is_err());
    }
}
