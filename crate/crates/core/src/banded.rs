//! Symmetric banded matrices: LDLᵀ factorization, Sylvester inertia counts,
//! lowest eigenpairs by bisection plus inverse iteration, and the
//! fourth-order finite-difference radial Schrödinger operator built on them.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Symmetric matrix with `bw` non-zero super-diagonals.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    /// `bands[d][i] = A[i, i + d]`.
    bands: Vec<Vec<f64>>,
}

/// `A = L D Lᵀ` with unit lower-triangular banded `L`.
#[derive(Clone, Debug)]
pub struct BandedLdl {
    n: usize,
    bw: usize,
    /// `l[d][j] = L[j + d, j]` for `d ≥ 1`.
    l: Vec<Vec<f64>>,
    d: Vec<f64>,
}

impl SymBanded {
    /// Zero matrix of order `n` with bandwidth `bw`.
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bands = (0..=bw).map(|d| vec![0.0; n.saturating_sub(d)]).collect();
        Self { n, bw, bands }
    }

    /// Order.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry `A[i, j]` (zero outside the band).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let d = j - i;
        if d > self.bw {
            0.0
        } else {
            self.bands[d][i]
        }
    }

    /// Set `A[i, j] = A[j, i] = v`; `|i − j|` must lie within the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.bands[j - i][i] = v;
    }

    /// Main diagonal.
    pub fn diag(&self) -> &[f64] {
        &self.bands[0]
    }

    /// Mutable main diagonal.
    pub fn diag_mut(&mut self) -> &mut [f64] {
        &mut self.bands[0]
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.bands[0].iter().zip(x).map(|(a, x)| a * x).collect();
        for d in 1..=self.bw {
            for (i, a) in self.bands[d].iter().enumerate() {
                y[i] += a * x[i + d];
                y[i + d] += a * x[i];
            }
        }
        y
    }

    /// `A − σ I`.
    pub fn shifted(&self, sigma: f64) -> Self {
        let mut s = self.clone();
        s.bands[0].iter_mut().for_each(|v| *v -= sigma);
        s
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut rad = 0.0;
            for d in 1..=self.bw {
                if i + d < self.n {
                    rad += self.bands[d][i].abs();
                }
                if i >= d {
                    rad += self.bands[d][i - d].abs();
                }
            }
            lo = lo.min(self.bands[0][i] - rad);
            hi = hi.max(self.bands[0][i] + rad);
        }
        (lo, hi)
    }

    /// Dense copy.
    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Unpivoted LDLᵀ factorization; exactly zero pivots are nudged by the
    /// smallest normal multiple of the matrix scale, which leaves inertia
    /// counts unchanged for all practical purposes.
    pub fn ldl(&self) -> BandedLdl {
        let (n, bw) = (self.n, self.bw);
        let scale = self.bands[0].iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let mut l: Vec<Vec<f64>> = (0..=bw).map(|d| vec![0.0; n.saturating_sub(d)]).collect();
        let mut dv = vec![0.0; n];
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut djj = self.bands[0][j];
            for k in k0..j {
                let ljk = l[j - k][k];
                djj -= ljk * ljk * dv[k];
            }
            if djj == 0.0 {
                djj = f64::EPSILON * scale;
            }
            dv[j] = djj;
            for i in j + 1..=(j + bw).min(n - 1) {
                let mut a = self.bands[i - j][j];
                for k in i.saturating_sub(bw)..j {
                    a -= l[i - k][k] * l[j - k][k] * dv[k];
                }
                l[i - j][j] = a / djj;
            }
        }
        BandedLdl { n, bw, l, d: dv }
    }

    /// Number of eigenvalues strictly below `sigma` (Sylvester's law of inertia).
    pub fn count_below(&self, sigma: f64) -> usize {
        self.shifted(sigma).ldl().negatives()
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection on inertia counts.
    pub fn eigenvalue(&self, k: usize, tol: f64) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (hi - lo).abs().max(1.0);
        lo -= pad;
        hi += pad;
        while hi - lo > tol * (1.0 + lo.abs().min(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Lowest eigenpair: bisection to near machine precision followed by
    /// inverse iteration with a shift just below the eigenvalue. The
    /// eigenvector has unit Euclidean norm and a positive sum.
    pub fn lowest_eigenpair(&self) -> Result<(f64, Vec<f64>)> {
        let lambda = self.eigenvalue(0, 1e-15);
        let (lo, hi) = self.gershgorin();
        let sigma = lambda - 1e-10 * (hi - lo).abs().max(1.0);
        let fact = self.shifted(sigma).ldl();
        let mut v = vec![1.0 / (self.n as f64).sqrt(); self.n];
        let mut last = 0.0;
        for it in 0..50 {
            let mut x = fact.solve(&v);
            let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Solver("inverse iteration broke down".into()));
            }
            x.iter_mut().for_each(|a| *a /= norm);
            let change: f64 = x.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = x;
            if it > 1 && (change < 1e-14 || (change - last).abs() < 1e-16) {
                break;
            }
            last = change;
        }
        if v.iter().sum::<f64>() < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        let av = self.matvec(&v);
        let rayleigh = av.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        Ok((rayleigh, v))
    }
}

impl BandedLdl {
    /// Number of negative pivots.
    pub fn negatives(&self) -> usize {
        self.d.iter().filter(|d| **d < 0.0).count()
    }

    /// Pivots `D`.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in i.saturating_sub(bw)..i {
                y[i] -= self.l[i - k][k] * y[k];
            }
        }
        for (yi, d) in y.iter_mut().zip(&self.d) {
            *yi /= d;
        }
        for i in (0..n).rev() {
            for j in i + 1..=(i + bw).min(n - 1) {
                y[i] -= self.l[j - i][i] * y[j];
            }
        }
        y
    }
}

/// Fourth-order radial operator `−d²/dr² + L(L+1)/r² + V(r)` acting on
/// `u = r f` sampled at `r_i = i h`, `i = 1..=n`, symmetrized with the line
/// weights `ω` as `Ω^{-1/2} (h D) Ω^{-1/2} + diag(potential)`.
///
/// `D` is the five-point stencil `(1, −16, 30, −16, 1)/(12h²)` with a
/// parity ghost `u(−r) = (−1)^{L+1} u(r)` at the origin and homogeneous
/// Dirichlet data beyond the last node.
pub fn radial_fd_operator(h: f64, omega: &[f64], l: usize, potential: &[f64]) -> SymBanded {
    let n = omega.len();
    let mut a = SymBanded::zeros(n, 2);
    let c = 1.0 / (12.0 * h * h);
    let ghost = if l.is_multiple_of(2) { -1.0 } else { 1.0 };
    for i in 0..n {
        let mut d = 30.0 * c;
        if i == 0 {
            d += ghost * c;
        }
        let r = (i + 1) as f64 * h;
        a.diag_mut()[i] = h * d / omega[i] + potential[i] + (l * (l + 1)) as f64 / (r * r);
        if i + 1 < n {
            a.set(i, i + 1, -16.0 * c * h / (omega[i] * omega[i + 1]).sqrt());
        }
        if i + 2 < n {
            a.set(i, i + 2, c * h / (omega[i] * omega[i + 2]).sqrt());
        }
    }
    a
}

/// Kinetic part of [`radial_fd_operator`] alone (no centrifugal or potential
/// term) applied to the quadratic form `vᵀ (Ω^{-1/2} h D Ω^{-1/2}) v`.
pub fn radial_fd_kinetic_form(h: f64, omega: &[f64], l: usize, v: &[f64]) -> f64 {
    let zero = vec![0.0; omega.len()];
    let mut a = radial_fd_operator(h, omega, l, &zero);
    let n = omega.len();
    for i in 0..n {
        let r = (i + 1) as f64 * h;
        a.diag_mut()[i] -= (l * (l + 1)) as f64 / (r * r);
    }
    a.matvec(v).iter().zip(v).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_band(n: usize, bw: usize) -> SymBanded {
        let mut a = SymBanded::zeros(n, bw);
        let mut s = 12345u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for d in 0..=bw {
                if i + d < n {
                    a.set(i, i + d, next());
                }
            }
        }
        a
    }

    #[test]
    fn ldl_solve_and_inertia_match_dense() {
        let a = random_band(30, 2);
        let dense = a.to_dense();
        let eig = dense.clone().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for sigma in [-1.0, -0.3, 0.0, 0.2, 0.9] {
            let expect = ev.iter().filter(|v| **v < sigma).count();
            assert_eq!(a.count_below(sigma), expect);
        }
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = a.shifted(0.05).ldl().solve(&b);
        let r = a.shifted(0.05).matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-9);
        }
        assert!((a.eigenvalue(0, 1e-14) - ev[0]).abs() < 1e-12);
        assert!((a.eigenvalue(4, 1e-14) - ev[4]).abs() < 1e-12);
        let (l0, v) = a.lowest_eigenpair().unwrap();
        assert!((l0 - ev[0]).abs() < 1e-12);
        let av = a.matvec(&v);
        assert!(av.iter().zip(&v).all(|(x, y)| (x - l0 * y).abs() < 1e-9));
    }

    #[test]
    fn hydrogen_ground_state() {
        // −u'' − 2u/r: lowest eigenvalue −1 for L = 0, −1/4 for L = 1.
        let n = 4000;
        let h = 40.0 / n as f64;
        let omega = vec![h; n];
        let pot: Vec<f64> = (1..=n).map(|i| -2.0 / (i as f64 * h)).collect();
        let (e0, _) = radial_fd_operator(h, &omega, 0, &pot).lowest_eigenpair().unwrap();
        assert!((e0 + 1.0).abs() < 1e-4, "{e0}");
        let (e1, _) = radial_fd_operator(h, &omega, 1, &pot).lowest_eigenpair().unwrap();
        assert!((e1 + 0.25).abs() < 1e-6, "{e1}");
    }

    #[test]
    fn harmonic_oscillator_is_fourth_order() {
        // −u'' + r² u: lowest eigenvalue 3 (L = 0), 5 (L = 1).
        let errs: Vec<f64> = [200usize, 400]
            .iter()
            .map(|&n| {
                let h = 8.0 / n as f64;
                let omega = vec![h; n];
                let pot: Vec<f64> = (1..=n).map(|i| (i as f64 * h).powi(2)).collect();
                let (e, _) = radial_fd_operator(h, &omega, 0, &pot).lowest_eigenpair().unwrap();
                (e - 3.0).abs()
            })
            .collect();
        assert!(errs[1] < 1e-7);
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
        let h = 8.0 / 400.0;
        let pot: Vec<f64> = (1..=400).map(|i| (i as f64 * h).powi(2)).collect();
        let (e, _) = radial_fd_operator(h, &vec![h; 400], 1, &pot).lowest_eigenpair().unwrap();
        assert!((e - 5.0).abs() < 1e-6);
    }
}
