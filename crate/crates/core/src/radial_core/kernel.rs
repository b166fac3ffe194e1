//! Angular-momentum sector reductions of rotation-invariant two-point kernels.
//!
//! A kernel `k(|x−y|)` is expanded as `Σ_L k_L(r, s) P_L(cos γ)`; the matrix of
//! a [`SectorKernel`] samples `k_L(r_i, r_j)`. Kernels carry no coupling
//! constant: the inverse-square kind is the positive function `1/|x−y|²`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RadialGrid;
use crate::special::{gauss_legendre_on, legendre_q_array, sph_bessel_array, tanh_sinh};
use crate::{Error, Result};

/// Which two-point kernel is reduced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `1/|x−y|`, sector coefficient `r_<^L / r_>^{L+1}`.
    Coulomb,
    /// `1/|x−y|²`, sector coefficient `(2L+1) Q_L(χ) / (2rs)`.
    InverseSquare,
    /// `1/|x−y|²` with Fourier modes `|k| > K` removed, sector coefficient
    /// `(2L+1) ∫₀^K j_L(kr) j_L(ks) k dk`.
    InverseSquareCutoff(f64),
}

/// Samples of one sector coefficient of a two-point kernel.
#[derive(Clone, Debug)]
pub struct SectorKernel {
    /// Sector index.
    pub l: usize,
    /// Kernel reduced.
    pub kind: KernelKind,
    /// `matrix[(i, j)] = k_L(r_i, r_j)`.
    pub matrix: DMatrix<f64>,
}

/// `χ − 1 = (r − s)² / (2rs)` given the difference separately, so that nearby
/// radii keep full relative precision.
fn chi_minus_one(r: f64, s: f64, diff: f64) -> f64 {
    diff * diff / (2.0 * r * s)
}

/// Inverse-square sector coefficient `(2L+1) Q_L(χ)/(2rs)` off the diagonal.
pub(crate) fn inverse_square_coefficient(l: usize, r: f64, s: f64, diff: f64, buf: &mut Vec<f64>) -> f64 {
    buf.resize(l + 1, 0.0);
    legendre_q_array(l, chi_minus_one(r, s, diff), buf);
    (2 * l + 1) as f64 * buf[l] / (2.0 * r * s)
}

/// Average of the inverse-square sector coefficient `k_L(r, ·)` over the cell
/// `[r − a, r + b]`; the logarithmic singularity at `r` is integrable.
pub(crate) fn inverse_square_cell_average(l: usize, r: f64, a: f64, b: f64) -> f64 {
    let mut buf = Vec::new();
    let mut left = tanh_sinh(
        |s, _dl, dr| inverse_square_coefficient(l, r, s, dr, &mut buf),
        r - a,
        r,
        1.0 / 64.0,
    );
    let mut buf2 = Vec::new();
    let right = tanh_sinh(
        |s, dl, _dr| inverse_square_coefficient(l, r, s, dl, &mut buf2),
        r,
        r + b,
        1.0 / 64.0,
    );
    left += right;
    left / (a + b)
}

/// Reduce `kind` to sector `l` on `grid`.
///
/// The diagonal of the uncut inverse-square kernel (a logarithmic
/// singularity) is replaced by the average of the kernel over the node's
/// quadrature cell.
pub fn sector_kernel(grid: &RadialGrid, l: usize, kind: KernelKind) -> Result<SectorKernel> {
    let n = grid.n;
    let r = &grid.r;
    let matrix = match kind {
        KernelKind::Coulomb => DMatrix::from_fn(n, n, |i, j| {
            let (lo, hi) = if r[i] < r[j] { (r[i], r[j]) } else { (r[j], r[i]) };
            (lo / hi).powi(l as i32) / hi
        }),
        KernelKind::InverseSquare => {
            let rows: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut buf = Vec::new();
                    (0..n)
                        .map(|j| {
                            if i == j {
                                let below = if i == 0 { r[0] } else { r[i] - r[i - 1] };
                                let above = if i + 1 == n { below } else { r[i + 1] - r[i] };
                                inverse_square_cell_average(l, r[i], 0.5 * below, 0.5 * above)
                            } else {
                                inverse_square_coefficient(l, r[i], r[j], r[i] - r[j], &mut buf)
                            }
                        })
                        .collect()
                })
                .collect();
            DMatrix::from_fn(n, n, |i, j| 0.5 * (rows[i][j] + rows[j][i]))
        }
        KernelKind::InverseSquareCutoff(k_max) => {
            if !(k_max > 0.0 && k_max.is_finite()) {
                return Err(Error::Parameter(format!("cutoff must be positive and finite, got {k_max}")));
            }
            cutoff_matrix(r, l, k_max)
        }
    };
    Ok(SectorKernel { l, kind, matrix })
}

/// `(2L+1) ∫₀^K j_L(k r_i) j_L(k r_j) k dk` for all pairs, by composite
/// Gauss–Legendre quadrature resolving the fastest oscillation.
fn cutoff_matrix(r: &[f64], l: usize, k_max: f64) -> DMatrix<f64> {
    let r_top = r.iter().cloned().fold(0.0, f64::max);
    let panels = ((2.0 * k_max * r_top / std::f64::consts::PI).ceil() as usize).max(4);
    let width = k_max / panels as f64;
    let mut k_nodes = Vec::with_capacity(panels * 10);
    let mut k_weights = Vec::with_capacity(panels * 10);
    for p in 0..panels {
        let (x, w) = gauss_legendre_on(10, p as f64 * width, (p + 1) as f64 * width);
        k_nodes.extend(x);
        k_weights.extend(w);
    }
    let nk = k_nodes.len();
    let n = r.len();
    // Columns j_L(k r_i) √(k w_k).
    let cols: Vec<Vec<f64>> = (0..nk)
        .into_par_iter()
        .map(|a| {
            let mut buf = vec![0.0; l + 1];
            let scale = (k_nodes[a] * k_weights[a]).sqrt();
            r.iter()
                .map(|ri| {
                    sph_bessel_array(l, k_nodes[a] * ri, &mut buf);
                    buf[l] * scale
                })
                .collect()
        })
        .collect();
    let b = DMatrix::from_fn(n, nk, |i, a| cols[a][i]);
    let mut m = &b * b.transpose();
    m *= (2 * l + 1) as f64;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_core::{build_grid, GridScheme};
    use crate::special::{gauss_legendre_on as gl, legendre_p_array};

    #[test]
    fn l0_closed_form() {
        let mut buf = Vec::new();
        let v = inverse_square_coefficient(0, 1.0, 2.0, -1.0, &mut buf);
        assert!((v - 3f64.ln() / 4.0).abs() < 1e-14);
    }

    #[test]
    fn heine_reconstruction() {
        let (r, s) = (1.0, 2.0);
        let t = 0.5;
        let mut p = vec![0.0; 41];
        legendre_p_array(40, t, &mut p);
        let mut buf = Vec::new();
        let sum: f64 = (0..=40).map(|l| inverse_square_coefficient(l, r, s, r - s, &mut buf) * p[l]).sum();
        assert!((sum - 1.0 / 3.0).abs() < 1e-4);
        // Random pairs at L_max = 60.
        let pairs = [(0.3, 0.9, 0.1), (1.7, 0.4, -0.8), (2.5, 3.1, 0.7), (0.05, 4.0, 0.95), (1.0, 1.4, -0.3)];
        let mut p = vec![0.0; 61];
        for (r, s, t) in pairs {
            legendre_p_array(60, t, &mut p);
            let sum: f64 = (0..=60).map(|l| inverse_square_coefficient(l, r, s, r - s, &mut buf) * p[l]).sum();
            let exact = 1.0 / (r * r + s * s - 2.0 * r * s * t);
            assert!((sum / exact - 1.0).abs() < 1e-3, "{r} {s} {t}: {sum} vs {exact}");
        }
    }

    #[test]
    fn coulomb_reconstruction() {
        let g = build_grid(16, 4.0, GridScheme::Uniform).unwrap();
        let (i, j) = (3, 9);
        let t: f64 = 0.3;
        let mut p = vec![0.0; 80];
        legendre_p_array(79, t, &mut p);
        let sum: f64 = (0..80)
            .map(|l| sector_kernel(&g, l, KernelKind::Coulomb).unwrap().matrix[(i, j)] * p[l])
            .sum();
        let (r, s) = (g.r[i], g.r[j]);
        assert!((sum - 1.0 / (r * r + s * s - 2.0 * r * s * t).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn diagonal_is_finite_and_symmetric() {
        let g = build_grid(40, 8.0, GridScheme::Uniform).unwrap();
        for l in [0, 3] {
            let k = sector_kernel(&g, l, KernelKind::InverseSquare).unwrap();
            assert!(k.matrix.iter().all(|v| v.is_finite() && *v > 0.0));
            assert!((&k.matrix - k.matrix.transpose()).amax() <= 1e-12 * k.matrix.amax());
            // The cell average exceeds the neighbouring samples (log peak).
            assert!(k.matrix[(10, 10)] > k.matrix[(10, 11)]);
        }
    }

    #[test]
    fn cell_average_l0_matches_closed_form() {
        // ∫ ln((r+s)/|r−s|)/(2rs) ds has antiderivative expressible by
        // x ln x terms; compare with a brute-force midpoint sum instead.
        let (r, a, b) = (1.0, 0.1, 0.1);
        let avg = inverse_square_cell_average(0, r, a, b);
        let m = 200_000;
        let mut acc = 0.0;
        let mut buf = Vec::new();
        for q in 0..m {
            let s = r - a + (q as f64 + 0.5) * (a + b) / m as f64;
            acc += inverse_square_coefficient(0, r, s, r - s, &mut buf);
        }
        acc /= m as f64;
        assert!((avg / acc - 1.0).abs() < 1e-4, "{avg} vs {acc}");
    }

    #[test]
    fn cutoff_converges_to_uncut() {
        let g = build_grid(20, 5.0, GridScheme::Uniform).unwrap();
        let full = sector_kernel(&g, 0, KernelKind::InverseSquare).unwrap();
        let mut errs = Vec::new();
        let ks = [10.0, 20.0, 40.0, 80.0, 160.0];
        for k in ks {
            let c = sector_kernel(&g, 0, KernelKind::InverseSquareCutoff(k)).unwrap();
            assert!((&c.matrix - c.matrix.transpose()).amax() <= 1e-12 * c.matrix.amax());
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..20 {
                for j in 0..20 {
                    if i != j {
                        num += (c.matrix[(i, j)] - full.matrix[(i, j)]).powi(2);
                        den += full.matrix[(i, j)].powi(2);
                    }
                }
            }
            errs.push((num / den).sqrt());
        }
        // The pointwise error oscillates like sin(K|r−s|)/K; the envelope
        // decays, so test the fitted log–log slope.
        let x: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
        let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let (mx, my) = (x.iter().sum::<f64>() / 5.0, y.iter().sum::<f64>() / 5.0);
        let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
            / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
        assert!(slope < -0.5, "{slope} {errs:?}");
        assert!(errs[4] < 0.2 * errs[0], "{errs:?}");
        // Direct 1D Bessel-integral oracle for one pair.
        let c = sector_kernel(&g, 2, KernelKind::InverseSquareCutoff(10.0)).unwrap();
        let (x, w) = gl(400, 0.0, 10.0);
        let (r, s) = (g.r[4], g.r[7]);
        let direct: f64 = 5.0
            * x.iter()
                .zip(&w)
                .map(|(k, w)| w * k * crate::special::sph_bessel(2, k * r) * crate::special::sph_bessel(2, k * s))
                .sum::<f64>();
        assert!((c.matrix[(4, 7)] - direct).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_cutoff() {
        let g = build_grid(16, 4.0, GridScheme::Uniform).unwrap();
        assert!(sector_kernel(&g, 0, KernelKind::InverseSquareCutoff(0.0)).is_err());
    }
}
