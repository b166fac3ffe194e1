//! Legendre projection of axially symmetric fields onto `Y_L0` sectors.

use std::sync::Arc;

use super::{RadialFunction, RadialGrid};
use crate::special::{gauss_legendre, legendre_p_array};
use crate::{Error, Result};

/// Gauss–Legendre nodes in `cos θ`.
#[derive(Clone, Debug)]
pub struct AngularGrid {
    /// Nodes `t_a ∈ (−1, 1)`.
    pub t: Vec<f64>,
    /// Weights, summing to 2.
    pub w: Vec<f64>,
}

impl AngularGrid {
    /// `m`-node rule, exact for projections up to `L = m − 1`.
    pub fn new(m: usize) -> Self {
        let (t, w) = gauss_legendre(m);
        Self { t, w }
    }
}

impl Default for AngularGrid {
    fn default() -> Self {
        Self::new(64)
    }
}

/// An axially symmetric field `f(r, cos θ)` sampled on a radial grid times an
/// angular grid; `values[i * m + a] = f(r_i, t_a)`.
#[derive(Clone, Debug)]
pub struct TensorField {
    /// Radial grid.
    pub grid: Arc<RadialGrid>,
    /// Angular grid.
    pub angular: AngularGrid,
    /// Row-major samples.
    pub values: Vec<f64>,
}

impl TensorField {
    /// Sample `f(r, t)` on the tensor grid.
    pub fn sample<F: Fn(f64, f64) -> f64>(grid: Arc<RadialGrid>, angular: AngularGrid, f: F) -> Self {
        let values = grid
            .r
            .iter()
            .flat_map(|&r| angular.t.iter().map(move |&t| (r, t)).collect::<Vec<_>>())
            .map(|(r, t)| f(r, t))
            .collect();
        Self { grid, angular, values }
    }

    /// Three-dimensional norm squared `2π ∫ r² dr ∫ dt |f|²`.
    pub fn norm_sq(&self) -> f64 {
        let m = self.angular.t.len();
        let mut acc = 0.0;
        for (i, wr) in self.grid.w.iter().enumerate() {
            let row = &self.values[i * m..(i + 1) * m];
            acc += wr * row.iter().zip(&self.angular.w).map(|(f, w)| w * f * f).sum::<f64>();
        }
        2.0 * std::f64::consts::PI * acc
    }
}

/// Sector components `f_L(r) = (√(2L+1)/2) ∫ f(r, t) P_L(t) dt` for
/// `L = 0..=l_max`, so that `f = Σ_L f_L √(2L+1) P_L` and the norms add up.
pub fn legendre_project(field: &TensorField, l_max: usize) -> Result<Vec<RadialFunction>> {
    let m = field.angular.t.len();
    if l_max >= m {
        return Err(Error::Parameter(format!(
            "l_max = {l_max} needs more than the {m} angular nodes"
        )));
    }
    // p[a][L] · weight · √(2L+1)/2
    let mut table = vec![0.0; m * (l_max + 1)];
    let mut p = vec![0.0; l_max + 1];
    for a in 0..m {
        legendre_p_array(l_max, field.angular.t[a], &mut p);
        for l in 0..=l_max {
            table[a * (l_max + 1) + l] = field.angular.w[a] * p[l] * ((2 * l + 1) as f64).sqrt() / 2.0;
        }
    }
    let n = field.grid.n;
    let mut out = vec![vec![0.0; n]; l_max + 1];
    for i in 0..n {
        let row = &field.values[i * m..(i + 1) * m];
        for (a, f) in row.iter().enumerate() {
            for l in 0..=l_max {
                out[l][i] += f * table[a * (l_max + 1) + l];
            }
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(l, v)| RadialFunction::new(field.grid.clone(), v, l))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_core::{build_grid, GridScheme};

    fn grid() -> Arc<RadialGrid> {
        Arc::new(build_grid(800, 12.0, GridScheme::Uniform).unwrap())
    }

    #[test]
    fn radial_field_has_only_l0() {
        let f = TensorField::sample(grid(), AngularGrid::default(), |r, _| (-r * r).exp());
        let s = legendre_project(&f, 10).unwrap();
        for c in &s[1..] {
            assert!(c.values.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn cos_field_is_pure_l1() {
        let f = TensorField::sample(grid(), AngularGrid::default(), |r, t| t * (-r).exp());
        let s = legendre_project(&f, 6).unwrap();
        for (l, c) in s.iter().enumerate() {
            let m = c.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if l == 1 {
                assert!(m > 0.1);
            } else {
                assert!(m < 1e-12, "L={l}: {m}");
            }
        }
    }

    #[test]
    fn shifted_field_parseval() {
        let s0: f64 = 0.5;
        let f = TensorField::sample(grid(), AngularGrid::default(), |r, t| {
            let d2 = r * r + s0 * s0 - 2.0 * r * s0 * t;
            (-d2).exp()
        });
        let parts = legendre_project(&f, 40).unwrap();
        let total: f64 = parts.iter().map(|p| p.norm_sq()).sum();
        let exact = (std::f64::consts::PI / 2.0).powf(1.5);
        assert!((total / exact - 1.0).abs() < 1e-6);
        assert!((f.norm_sq() / exact - 1.0).abs() < 1e-6);
    }

    #[test]
    fn too_many_sectors_is_an_error() {
        let f = TensorField::sample(grid(), AngularGrid::new(8), |_, _| 1.0);
        assert!(legendre_project(&f, 8).is_err());
    }
}
