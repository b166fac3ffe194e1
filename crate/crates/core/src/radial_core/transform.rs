//! Unitary spherical-Bessel (Hankel) transforms between radial grids.

use std::sync::Arc;

use rayon::prelude::*;

use super::{RadialFunction, RadialGrid};
use crate::special::{sinc, sph_bessel_array};

/// Order-`L` unitary Hankel transform of samples `f` on `from` evaluated at
/// the nodes of `to`: `F(k) = √(2/π) Σ_i w_i f_i j_L(k r_i)`.
///
/// The same formula inverts the transform, so calling it twice round-trips.
pub fn hankel_transform(f: &[f64], from: &RadialGrid, to: &RadialGrid, sector: usize) -> Vec<f64> {
    let pref = (2.0 / std::f64::consts::PI).sqrt();
    let wf: Vec<f64> = from.w.iter().zip(f).map(|(w, f)| w * f).collect();
    to.r.par_iter()
        .map(|&k| {
            let mut acc = 0.0;
            if sector == 0 {
                for (r, a) in from.r.iter().zip(&wf) {
                    acc += a * sinc(k * r);
                }
            } else {
                let mut buf = vec![0.0; sector + 1];
                for (r, a) in from.r.iter().zip(&wf) {
                    if *a == 0.0 {
                        continue;
                    }
                    sph_bessel_array(sector, k * r, &mut buf);
                    acc += a * buf[sector];
                }
            }
            pref * acc
        })
        .collect()
}

/// Spherical-Bessel transform of a sector-`L` radial function onto a
/// momentum grid, normalized so that `Σ w_k F(k)² = Σ w_r f(r)²`.
pub fn fourier_radial(f: &RadialFunction, kgrid: &Arc<RadialGrid>) -> RadialFunction {
    let values = hankel_transform(&f.values, &f.grid, kgrid, f.sector);
    RadialFunction { grid: kgrid.clone(), values, sector: f.sector }
}
