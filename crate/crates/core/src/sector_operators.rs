//! Electron-sector Schrödinger operators, the reduced resolvent, coupling
//! columns and the Hessian blocks `H_L = 1 − 4T_L` of the field functional.
//!
//! The field variable is represented in momentum space. A field mode is a
//! pair `(k, L)`; the coupling of mode `k` to the electron is the plane wave
//! `ĥ_x(k) = −(G/k) e^{−ik·x}` with `G = g√(π/2)`, whose sector-`L` radial
//! profile (in the `√(2L+1) P_L` convention) is `(G/k)√(2L+1) j_L(kr)`.
//! Rotation invariance makes the Hessian kernel
//! `T(k, k') = Σ_L (2L+1)/(4π) T_L(k, k') P_L(k̂·k̂')` with
//! `T_L(k, k') = (8π³g²/(k k')) ⟨ψ j_L(k·)| R_L |ψ j_L(k'·)⟩_{r² dr}`.
//!
//! Field-space quadrature uses composite Gauss–Legendre panels whose
//! breakpoints include every cutoff of interest, so that the momentum cutoff
//! `K` is the exact restriction of the node set to `k ≤ K`. Matrices are
//! stored in the symmetric weighted basis `√w_j T(k_j, k_l) √w_l`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::{radial_fd_operator, BandedLdl, SymBanded};
use crate::pekar_scf::PekarSolution;
use crate::radial_core::RadialFunction;
use crate::special::{gauss_legendre_on, sph_bessel_array};
use crate::{Error, Result};

/// Meaning of a [`SectorOperator`] matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorMeaning {
    /// `h^Pek_L` on the electron grid.
    Schrodinger,
    /// `H_L` block of the field Hessian.
    HessianBlock,
    /// `T_L` block.
    TKernel,
    /// Orthogonal projector.
    Projector,
}

/// Dense symmetric matrix of a rotation-invariant operator in one sector,
/// in the symmetric weighted basis.
#[derive(Clone, Debug)]
pub struct SectorOperator {
    /// Sector index.
    pub l: usize,
    /// What the matrix represents.
    pub meaning: OperatorMeaning,
    /// The matrix.
    pub matrix: DMatrix<f64>,
}

impl SectorOperator {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Largest relative asymmetry `max|M − Mᵀ| / max|M|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.matrix.amax().max(f64::MIN_POSITIVE);
        (&self.matrix - self.matrix.transpose()).amax() / scale
    }
}

/// One panel family of the field grid: nodes on `[start, end]` split into
/// panels of the given width, each with `nodes` Gauss–Legendre points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    /// Upper end of this family.
    pub end: f64,
    /// Panel width.
    pub width: f64,
    /// Nodes per panel.
    pub nodes: usize,
}

/// Momentum quadrature for the field variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    /// Nodes, ascending.
    pub k: Vec<f64>,
    /// Weights for `∫ f(k) k² dk`.
    pub w: Vec<f64>,
    /// Panel breakpoints (every cutoff must be one of them).
    pub breakpoints: Vec<f64>,
}

impl FieldGrid {
    /// Build from panel families covering `[0, last end]`.
    pub fn from_panels(panels: &[PanelSpec]) -> Result<Self> {
        let mut k = Vec::new();
        let mut w = Vec::new();
        let mut breakpoints = vec![0.0];
        let mut start = 0.0;
        for p in panels {
            if !(p.end > start && p.width > 0.0 && p.nodes > 0) {
                return Err(Error::Parameter(format!("invalid field panel {p:?}")));
            }
            let count = ((p.end - start) / p.width).round().max(1.0) as usize;
            let width = (p.end - start) / count as f64;
            for q in 0..count {
                let a = start + q as f64 * width;
                let b = if q + 1 == count { p.end } else { a + width };
                let (x, v) = gauss_legendre_on(p.nodes, a, b);
                for (x, v) in x.into_iter().zip(v) {
                    k.push(x);
                    w.push(v * x * x);
                }
                breakpoints.push(b);
            }
            start = p.end;
        }
        Ok(Self { k, w, breakpoints })
    }

    /// Default grid in units where the Choquard coefficient is `c`: dense
    /// panels up to `20/c`, progressively coarser up to the `∞`-proxy
    /// `200/c`, with breakpoints at `{20, 40, 80, 160, 200}/c`.
    pub fn default_for(choquard: f64) -> Self {
        let s = 1.0 / choquard;
        Self::from_panels(&[
            PanelSpec { end: 10.0 * s, width: 1.0 * s, nodes: 12 },
            PanelSpec { end: 20.0 * s, width: 2.0 * s, nodes: 12 },
            PanelSpec { end: 40.0 * s, width: 5.0 * s, nodes: 10 },
            PanelSpec { end: 80.0 * s, width: 10.0 * s, nodes: 10 },
            PanelSpec { end: 160.0 * s, width: 20.0 * s, nodes: 10 },
            PanelSpec { end: 200.0 * s, width: 20.0 * s, nodes: 10 },
        ])
        .expect("default panels are valid")
    }

    /// Largest node momentum's panel end (the `∞`-proxy).
    pub fn k_max(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Number of nodes with `k ≤ cutoff`; the cutoff must be a breakpoint.
    pub fn count_below(&self, cutoff: f64) -> Result<usize> {
        if cutoff >= self.k_max() {
            return Ok(self.k.len());
        }
        if !self.breakpoints.iter().any(|b| (b - cutoff).abs() <= 1e-12 * cutoff.max(1.0)) {
            return Err(Error::Parameter(format!(
                "cutoff {cutoff} is not a field-grid breakpoint"
            )));
        }
        Ok(self.k.iter().filter(|k| **k <= cutoff).count())
    }
}

/// `8π³g²`: squared coupling of a field mode in the sector expansion.
pub fn mode_coupling_sq(sol: &PekarSolution) -> f64 {
    8.0 * PI.powi(3) * sol.units.coupling * sol.units.coupling
}

/// Electron-side data shared by all sectors: grid spacing, line weights and
/// the weighted ground state `√(w_i) ψ_i`.
#[derive(Clone, Debug)]
pub struct ElectronSpace<'a> {
    /// Solution the operators are built from.
    pub sol: &'a PekarSolution,
    h: f64,
    omega: Vec<f64>,
    /// `√(w_i) ψ_i`, with `Σ psi_w² = 1/(4π)`.
    pub psi_w: Vec<f64>,
}

impl<'a> ElectronSpace<'a> {
    /// Prepare the electron space of a solution on a uniform grid.
    pub fn new(sol: &'a PekarSolution) -> Result<Self> {
        let h = sol
            .grid
            .spacing()
            .ok_or_else(|| Error::Parameter("sector operators need a uniform grid".into()))?;
        let omega = sol.grid.line_weights();
        let psi_w = sol.grid.w.iter().zip(&sol.psi.values).map(|(w, p)| w.sqrt() * p).collect();
        Ok(Self { sol, h, omega, psi_w })
    }

    /// Number of electron nodes.
    pub fn n(&self) -> usize {
        self.psi_w.len()
    }

    /// `h^Pek_L = −d²/dr² + L(L+1)/r² + V^φ − λ^Pek` in the weighted basis.
    pub fn banded(&self, l: usize) -> SymBanded {
        let pot: Vec<f64> = self.sol.v_eff.values.iter().map(|v| v - self.sol.lambda_pek).collect();
        radial_fd_operator(self.h, &self.omega, l, &pot)
    }

    /// Factorized reduced resolvent of sector `l`.
    pub fn resolvent(&self, l: usize) -> Result<Resolvent> {
        let op = self.banded(l);
        if l > 0 {
            let ldl = op.ldl();
            if ldl.negatives() > 0 || ldl.pivots().iter().any(|d| *d <= 0.0) {
                return Err(Error::Operator(format!("h^Pek_{l} is not positive definite")));
            }
            return Ok(Resolvent { l, ldl, q: None, op: None });
        }
        // Rank-one lift of the null direction at the peak of ψ; the lifted
        // matrix is positive definite and agrees with h^Pek_0 on ψ^⊥.
        let norm = self.psi_w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let q: Vec<f64> = self.psi_w.iter().map(|x| x / norm).collect();
        let j = q
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let mut lifted = op.clone();
        let mu = op.diag().iter().fold(0.0f64, |a, d| a.max(d.abs()));
        lifted.diag_mut()[j] += mu;
        let ldl = lifted.ldl();
        if ldl.negatives() > 0 {
            return Err(Error::Operator("lifted h^Pek_0 is not positive definite".into()));
        }
        Ok(Resolvent { l, ldl, q: Some(q), op: Some(op) })
    }
}

/// Reduced resolvent `R_L = Q (h^Pek_L)^{-1} Q` (`Q = 1 − |ψ⟩⟨ψ|` for
/// `L = 0`, identity otherwise) in the weighted basis.
#[derive(Clone, Debug)]
pub struct Resolvent {
    /// Sector.
    pub l: usize,
    ldl: BandedLdl,
    q: Option<Vec<f64>>,
    op: Option<SymBanded>,
}

impl Resolvent {
    fn project(&self, x: &mut [f64]) {
        if let Some(q) = &self.q {
            let c: f64 = q.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(q).for_each(|(x, q)| *x -= c * q);
        }
    }

    /// `R_L b` for a weighted-basis vector `b`.
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = b.to_vec();
        self.project(&mut rhs);
        let mut x = self.ldl.solve(&rhs);
        self.project(&mut x);
        // One step of iterative refinement against the unlifted operator.
        if let Some(op) = &self.op {
            let hx = op.matvec(&x);
            let mut r: Vec<f64> = rhs.iter().zip(&hx).map(|(a, b)| a - b).collect();
            self.project(&mut r);
            let mut dx = self.ldl.solve(&r);
            self.project(&mut dx);
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        }
        x
    }
}

/// Dense matrix of `h^Pek_L` (weighted basis); intended for small grids.
pub fn schrodinger_block(sol: &PekarSolution, l: usize) -> Result<SectorOperator> {
    let space = ElectronSpace::new(sol)?;
    Ok(SectorOperator { l, meaning: OperatorMeaning::Schrodinger, matrix: space.banded(l).to_dense() })
}

/// Smallest eigenvalue of `h^Pek_L` by banded inertia bisection.
pub fn schrodinger_min_eigenvalue(sol: &PekarSolution, l: usize) -> Result<f64> {
    let space = ElectronSpace::new(sol)?;
    Ok(space.banded(l).eigenvalue(0, 1e-14))
}

/// Solve `h^Pek_L x = Q rhs` with `x ⊥ ψ` for `L = 0`.
pub fn apply_resolvent(sol: &PekarSolution, l: usize, rhs: &RadialFunction) -> Result<RadialFunction> {
    if rhs.sector != l {
        return Err(Error::Parameter(format!("rhs is in sector {}, expected {l}", rhs.sector)));
    }
    let space = ElectronSpace::new(sol)?;
    let res = space.resolvent(l)?;
    let sw: Vec<f64> = sol.grid.w.iter().map(|w| w.sqrt()).collect();
    let b: Vec<f64> = rhs.values.iter().zip(&sw).map(|(v, s)| v * s).collect();
    let x = res.apply(&b);
    let values = x.iter().zip(&sw).map(|(x, s)| x / s).collect();
    RadialFunction::new(sol.grid.clone(), values, l)
}

/// Coupling columns of sector `L`: for each field node `k_j ≤ K` the
/// electron radial profile `(G/k_j) √(2L+1) j_L(k_j r) ψ(r)`.
///
/// With this normalization `⟨ψ|col_{0,k}⟩ = Φ(k)` and
/// `T_L(k, k') = (4π/(2L+1)) ⟨col_{L,k}| R_L col_{L,k'}⟩`.
#[derive(Clone, Debug)]
pub struct CouplingColumn {
    /// Sector.
    pub l: usize,
    /// Cutoff (`None` for the full field grid).
    pub cutoff: Option<f64>,
    /// Field nodes used.
    pub k: Vec<f64>,
    /// `samples[(i, j)]` = column `j` at electron node `i`.
    pub samples: DMatrix<f64>,
}

/// Build the coupling columns of sector `l`.
pub fn coupling_columns(sol: &PekarSolution, field: &FieldGrid, l: usize, cutoff: Option<f64>) -> Result<CouplingColumn> {
    let m = match cutoff {
        Some(c) => field.count_below(c)?,
        None => field.k.len(),
    };
    let g_mode = sol.units.coupling * (PI / 2.0).sqrt();
    let n = sol.grid.n;
    let pref = ((2 * l + 1) as f64).sqrt();
    let cols: Vec<Vec<f64>> = field.k[..m]
        .par_iter()
        .map(|&k| {
            let mut buf = vec![0.0; l + 1];
            sol.grid
                .r
                .iter()
                .zip(&sol.psi.values)
                .map(|(r, p)| {
                    sph_bessel_array(l, k * r, &mut buf);
                    g_mode / k * pref * buf[l] * p
                })
                .collect()
        })
        .collect();
    let samples = DMatrix::from_fn(n, m, |i, j| cols[j][i]);
    Ok(CouplingColumn { l, cutoff, k: field.k[..m].to_vec(), samples })
}

/// Weighted column matrix `Ĉ[i, j] = √(w_j) (√(8π³) g/k_j) √(w^e_i) ψ_i j_L(k_j r_i)`
/// so that `T_sym = Ĉᵀ R Ĉ`.
fn weighted_columns(space: &ElectronSpace, field: &FieldGrid, l: usize) -> DMatrix<f64> {
    let gs = mode_coupling_sq(space.sol).sqrt();
    let r = &space.sol.grid.r;
    let n = space.n();
    let cols: Vec<Vec<f64>> = field
        .k
        .par_iter()
        .zip(&field.w)
        .map(|(&k, &w)| {
            let mut buf = vec![0.0; l + 1];
            let s = w.sqrt() * gs / k;
            r.iter()
                .zip(&space.psi_w)
                .map(|(r, p)| {
                    if *p == 0.0 {
                        return 0.0;
                    }
                    sph_bessel_array(l, k * r, &mut buf);
                    s * p * buf[l]
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, field.k.len(), |i, j| cols[j][i])
}

/// `T_L` on the full field grid (uncut), weighted basis.
pub fn t_block(space: &ElectronSpace, field: &FieldGrid, l: usize) -> Result<SectorOperator> {
    let c = weighted_columns(space, field, l);
    let res = space.resolvent(l)?;
    let m = c.ncols();
    let solved: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| res.apply(c.column(j).as_slice()))
        .collect();
    let y = DMatrix::from_fn(c.nrows(), m, |i, j| solved[j][i]);
    let t = c.transpose() * y;
    let sym = (&t + t.transpose()) * 0.5;
    Ok(SectorOperator { l, meaning: OperatorMeaning::TKernel, matrix: sym })
}

/// Normalized zero-mode direction of sector 1 in the weighted field basis:
/// the radial profile of `∂_z φ`, proportional to `k Φ(k)`.
pub fn zero_mode(sol: &PekarSolution, field: &FieldGrid) -> Vec<f64> {
    let phi_hat = phi_hat_at(sol, &field.k);
    let z: Vec<f64> = field.k.iter().zip(&field.w).zip(&phi_hat).map(|((k, w), f)| w.sqrt() * k * f).collect();
    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    z.iter().map(|x| x / norm).collect()
}

/// `Φ(k) = g√(π/2) ρ̂(k)/k` at arbitrary momenta.
pub fn phi_hat_at(sol: &PekarSolution, k: &[f64]) -> Vec<f64> {
    let rho: Vec<f64> = sol.psi.values.iter().map(|p| p * p).collect();
    let wr: Vec<f64> = sol.grid.w.iter().zip(&rho).map(|(w, p)| 4.0 * PI * w * p).collect();
    let g_mode = sol.units.coupling * (PI / 2.0).sqrt();
    k.par_iter()
        .map(|&k| {
            let rh: f64 = sol.grid.r.iter().zip(&wr).map(|(r, a)| a * crate::special::sinc(k * r)).sum();
            g_mode * rh / k
        })
        .collect()
}

/// Hessian block of one sector at one cutoff.
#[derive(Clone, Debug)]
pub struct HessianBlock {
    /// Sector.
    pub l: usize,
    /// Cutoff (`None` = the `∞`-proxy, all field nodes).
    pub cutoff: Option<f64>,
    /// Field nodes retained (`k ≤ K`).
    pub m: usize,
    /// `T_K = P_K T P_K` restricted to retained nodes.
    pub t: SectorOperator,
    /// `1 − 4 T_K` without zero-mode treatment.
    pub raw: SectorOperator,
    /// `1 − 4 Π₁ T_K Π₁` (equal to `raw` outside sector 1); the zero-mode
    /// direction carries eigenvalue one so that `A = 1`, `B = 0` there.
    pub deflated: SectorOperator,
    /// Zero-mode direction restricted to retained nodes (sector 1 only).
    pub zero_mode: Option<Vec<f64>>,
}

/// Assemble `H_L` at cutoff `K` from a precomputed uncut `T_L`.
pub fn hessian_from_t(
    sol: &PekarSolution,
    field: &FieldGrid,
    t_full: &SectorOperator,
    cutoff: Option<f64>,
) -> Result<HessianBlock> {
    let l = t_full.l;
    let m = match cutoff {
        Some(c) => field.count_below(c)?,
        None => field.k.len(),
    };
    let t = t_full.matrix.view((0, 0), (m, m)).into_owned();
    let id = DMatrix::<f64>::identity(m, m);
    let raw = &id - &t * 4.0;
    let (deflated, zm) = if l == 1 {
        let z_full = zero_mode(sol, field);
        let z = DVector::from_column_slice(&z_full[..m]);
        let p1 = &id - &z * z.transpose();
        let tp = &p1 * &t * &p1;
        (&id - tp * 4.0, Some(z_full[..m].to_vec()))
    } else {
        (raw.clone(), None)
    };
    Ok(HessianBlock {
        l,
        cutoff,
        m,
        t: SectorOperator { l, meaning: OperatorMeaning::TKernel, matrix: t },
        raw: SectorOperator { l, meaning: OperatorMeaning::HessianBlock, matrix: raw },
        deflated: SectorOperator { l, meaning: OperatorMeaning::HessianBlock, matrix: deflated },
        zero_mode: zm,
    })
}

/// `H_L` at cutoff `K` (assembles `T_L` first).
pub fn hessian_block(sol: &PekarSolution, field: &FieldGrid, l: usize, cutoff: Option<f64>) -> Result<HessianBlock> {
    let space = ElectronSpace::new(sol)?;
    let t = t_block(&space, field, l)?;
    hessian_from_t(sol, field, &t, cutoff)
}

/// Smallest eigenpair of a symmetric matrix.
pub fn lowest_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let (i, v) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, v)| (i, *v))
        .unwrap();
    (v, eig.eigenvectors.column(i).into_owned())
}

/// Diagonal `T_L(k, k)` for `L = l_from..` at one momentum, continuing in
/// `L` until the terms `(2L+1) T_L(k, k)` drop below `rel_tol` of the running
/// sum (and `L` exceeds the classical turning point `k·r_ψ`).
#[derive(Clone, Debug)]
pub struct PartialWaveDiagonal {
    /// Momentum.
    pub k: f64,
    /// `T_L(k, k)` for `L = 0, 1, …`.
    pub t: Vec<f64>,
}

impl PartialWaveDiagonal {
    /// `Σ_{L ≥ from} (2L+1) T_L(k, k)`.
    pub fn sum_from(&self, from: usize) -> f64 {
        self.t.iter().enumerate().skip(from).map(|(l, t)| (2 * l + 1) as f64 * t).sum()
    }
}

/// Cache of electron resolvents for many sectors.
pub struct ResolventLadder {
    resolvents: Vec<Resolvent>,
}

impl ResolventLadder {
    /// Factorize sectors `0..=l_cap`.
    pub fn new(space: &ElectronSpace, l_cap: usize) -> Result<Self> {
        let resolvents = (0..=l_cap).into_par_iter().map(|l| space.resolvent(l)).collect::<Result<Vec<_>>>()?;
        Ok(Self { resolvents })
    }

    /// Highest sector available.
    pub fn l_cap(&self) -> usize {
        self.resolvents.len() - 1
    }
}

/// Median radius of the electron density: half of `∫ρ` lies inside it.
pub fn psi_extent(sol: &PekarSolution) -> f64 {
    let mut acc = 0.0;
    for ((r, w), p) in sol.grid.r.iter().zip(&sol.grid.w).zip(&sol.psi.values) {
        acc += 4.0 * PI * w * p * p;
        if acc >= 0.5 {
            return *r;
        }
    }
    sol.grid.r_max
}

/// Partial-wave diagonals at the given momenta.
pub fn partial_wave_diagonals(
    space: &ElectronSpace,
    ladder: &ResolventLadder,
    ks: &[f64],
    rel_tol: f64,
) -> Result<Vec<PartialWaveDiagonal>> {
    let gs2 = mode_coupling_sq(space.sol);
    let extent = psi_extent(space.sol);
    let r = &space.sol.grid.r;
    ks.par_iter()
        .map(|&k| {
            let l_cap = ladder.l_cap();
            let mut table = vec![0.0; l_cap + 1];
            // bessel[i][L]
            let mut bessel = vec![0.0; r.len() * (l_cap + 1)];
            for (i, ri) in r.iter().enumerate() {
                if space.psi_w[i] == 0.0 {
                    continue;
                }
                sph_bessel_array(l_cap, k * ri, &mut table);
                bessel[i * (l_cap + 1)..(i + 1) * (l_cap + 1)].copy_from_slice(&table);
            }
            let mut t = Vec::new();
            let mut total = 0.0;
            for l in 0..=l_cap {
                let c: Vec<f64> = space
                    .psi_w
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p * bessel[i * (l_cap + 1) + l])
                    .collect();
                let x = ladder.resolvents[l].apply(&c);
                let v = gs2 / (k * k) * c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
                t.push(v);
                let term = (2 * l + 1) as f64 * v;
                total += term;
                if l as f64 > k * extent && term < rel_tol * total {
                    return Ok(PartialWaveDiagonal { k, t });
                }
            }
            Err(Error::Truncation(format!(
                "partial-wave sum at k = {k} not converged by L = {l_cap}"
            )))
        })
        .collect()
}

/// Large-`k` form of `Σ_L (2L+1) T_L(k, k) = 4π T(k, k)`:
/// `(8π³g²/(4π k²)) [1/k² + (4/3)‖∇ψ‖²/k⁴]`.
pub fn asymptotic_diagonal_sum(sol: &PekarSolution, k: f64) -> f64 {
    mode_coupling_sq(sol) / (4.0 * PI * k * k) * (1.0 / (k * k) + 4.0 / 3.0 * sol.kinetic / k.powi(4))
}

/// `∫_a^b k² Σ_L (2L+1) T_L(k, k) dk` from [`asymptotic_diagonal_sum`],
/// in closed form (`b = ∞` allowed).
pub fn asymptotic_trace(sol: &PekarSolution, a: f64, b: f64) -> f64 {
    let c = mode_coupling_sq(sol) / (4.0 * PI);
    let q = 4.0 / 3.0 * sol.kinetic;
    let prim = |k: f64| if k.is_infinite() { 0.0 } else { -1.0 / k - q / (3.0 * k.powi(3)) };
    c * (prim(b) - prim(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pekar_scf::{solve_pekar, ScfConfig};
    use crate::radial_core::{build_grid, GridScheme};

    fn sol(n: usize) -> PekarSolution {
        let g = build_grid(n, 40.0, GridScheme::Uniform).unwrap();
        solve_pekar(&g, &ScfConfig::default()).unwrap()
    }

    #[test]
    fn field_grid_integrates_and_respects_cutoffs() {
        let f = FieldGrid::default_for(1.0);
        let v: f64 = f.k.iter().zip(&f.w).map(|(k, w)| w * (-k).exp()).sum();
        assert!((v - 2.0).abs() < 1e-12);
        for c in [20.0, 40.0, 80.0, 160.0] {
            let m = f.count_below(c).unwrap();
            assert!(f.k[m - 1] < c && (m == f.k.len() || f.k[m] > c));
        }
        assert!(f.count_below(33.0).is_err());
    }

    #[test]
    fn schrodinger_sectors() {
        let s = sol(1000);
        assert!(schrodinger_min_eigenvalue(&s, 0).unwrap().abs() < 1e-8);
        let e1 = schrodinger_min_eigenvalue(&s, 1).unwrap();
        assert!(e1 > 0.0);
        let e10 = schrodinger_min_eigenvalue(&s, 10).unwrap();
        assert!(e10 >= 110.0 / (40.0f64 * 40.0));
        // Ground state of the L = 0 block is ψ.
        let space = ElectronSpace::new(&s).unwrap();
        let (_, v) = space.banded(0).lowest_eigenpair().unwrap();
        let norm: f64 = space.psi_w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let overlap: f64 = v.iter().zip(&space.psi_w).map(|(a, b)| a * b).sum::<f64>() / norm;
        assert!(overlap.abs() > 1.0 - 1e-8);
    }

    #[test]
    fn resolvent_contract() {
        let s = sol(1000);
        let x = apply_resolvent(&s, 0, &s.psi).unwrap();
        assert!(x.values.iter().all(|v| v.abs() < 1e-8));
        let space = ElectronSpace::new(&s).unwrap();
        for l in [0usize, 1, 3] {
            let rhs: Vec<f64> = s.grid.r.iter().map(|r| r.powi(l as i32 + 1) * (-r).exp()).collect();
            let f = RadialFunction::new(s.grid.clone(), rhs, l).unwrap();
            let x = apply_resolvent(&s, l, &f).unwrap();
            if l == 0 {
                assert!(x.dot(&s.psi).abs() < 1e-10);
            }
            let sw: Vec<f64> = s.grid.w.iter().map(|w| w.sqrt()).collect();
            let xv: Vec<f64> = x.values.iter().zip(&sw).map(|(a, b)| a * b).collect();
            let mut b: Vec<f64> = f.values.iter().zip(&sw).map(|(a, b)| a * b).collect();
            if l == 0 {
                let n2: f64 = space.psi_w.iter().map(|p| p * p).sum();
                let c: f64 = space.psi_w.iter().zip(&b).map(|(p, b)| p * b).sum::<f64>() / n2;
                b.iter_mut().zip(&space.psi_w).for_each(|(b, p)| *b -= c * p);
            }
            let hx = space.banded(l).matvec(&xv);
            let res = hx.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let nb = b.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(res <= 1e-10 * nb, "L={l}: {res} vs {nb}");
        }
    }

    #[test]
    fn columns_recover_field() {
        let s = sol(1000);
        let f = FieldGrid::default_for(1.0);
        let c = coupling_columns(&s, &f, 0, Some(20.0)).unwrap();
        let phi = phi_hat_at(&s, &c.k);
        for j in [0, 10, 50] {
            let col = RadialFunction::new(s.grid.clone(), c.samples.column(j).iter().cloned().collect(), 0).unwrap();
            let v = col.dot(&s.psi);
            assert!((v - phi[j]).abs() < 1e-12 * phi[0], "{v} {}", phi[j]);
        }
        // Column norms decay with L at fixed k.
        let norms: Vec<f64> = (0..6)
            .map(|l| coupling_columns(&s, &f, l, Some(20.0)).unwrap().samples.column(5).norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    }

    #[test]
    fn hessian_blocks_in_unit_interval() {
        let s = sol(2000);
        let f = FieldGrid::default_for(1.0);
        for l in 0..4 {
            let b = hessian_block(&s, &f, l, None).unwrap();
            let ev = b.raw.eigenvalues();
            assert!(ev[0] > -1e-6 && *ev.last().unwrap() < 1.0 + 1e-6, "L={l}: {} {}", ev[0], ev.last().unwrap());
            assert!(b.raw.asymmetry() < 1e-10);
            if l == 1 {
                let (e, v) = lowest_eigenpair(&b.raw.matrix);
                let z = DVector::from_vec(b.zero_mode.clone().unwrap());
                assert!(e.abs() < 1e-3, "{e}");
                assert!(v.dot(&z).abs() > 0.999);
            } else {
                assert!(ev[0] > 0.05, "L={l}: {}", ev[0]);
            }
        }
    }

    #[test]
    fn partial_waves_match_asymptotics() {
        let s = sol(1000);
        let space = ElectronSpace::new(&s).unwrap();
        let ladder = ResolventLadder::new(&space, 400).unwrap();
        let d = partial_wave_diagonals(&space, &ladder, &[10.0], 1e-10).unwrap();
        let pw = d[0].sum_from(0);
        let asym = asymptotic_diagonal_sum(&s, 10.0);
        assert!((pw / asym - 1.0).abs() < 2e-3, "{pw} {asym}");
    }
}
