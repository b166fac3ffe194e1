//! Invariant suites run against a Pekar solution and the objects derived
//! from it. Every check reports the measured value, the tolerance and the
//! verdict so that reports are machine readable.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bogoliubov::{
    fock_oracle, half_trace_sqrt_minus_one, quadratic_coefficients, HessianModel, HessianSet, TraceReport,
};
use crate::gaussian_weights::{displacement_norms, q_monotonicity, WeightKernel, YGrid};
use crate::pekar_scf::{composition_route, gaussian_trial, newton_route, PekarSolution};
use crate::radial_core::{composition_constant_quadrature, INVERSE_SQUARE_COMPOSITION};
use crate::sector_operators::lowest_eigenpair;
use crate::Result;

/// One verified invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Suite the check belongs to.
    pub suite: String,
    /// Short identifier.
    pub name: String,
    /// Measured value.
    pub measured: f64,
    /// Threshold the value is compared against.
    pub tolerance: f64,
    /// Verdict.
    pub passed: bool,
}

impl Check {
    /// `measured ≤ tolerance`.
    pub fn at_most(suite: &str, name: &str, measured: f64, tolerance: f64) -> Self {
        Self { suite: suite.into(), name: name.into(), measured, tolerance, passed: measured <= tolerance }
    }

    /// `measured ≥ tolerance`.
    pub fn at_least(suite: &str, name: &str, measured: f64, tolerance: f64) -> Self {
        Self { suite: suite.into(), name: name.into(), measured, tolerance, passed: measured >= tolerance }
    }
}

/// Tolerance of the relative virial residuals.
pub const VIRIAL_TOLERANCE: f64 = 1e-6;

/// Relative tolerance of the two potential routes on `r ≤ r_max/2`.
pub const DUAL_PATH_TOLERANCE: f64 = 1e-6;

/// Lower bound required of the spectral gap in sectors `L ≠ 1`.
pub const GAP_THRESHOLD: f64 = 0.1;

/// Largest relative disagreement of the potential routes on `r ≤ r_max/2`.
pub fn dual_path_residual(sol: &PekarSolution) -> Result<f64> {
    let rho: Vec<f64> = sol.psi.values.iter().map(|p| p * p).collect();
    let a = newton_route(&sol.grid, &rho, &sol.units)?;
    let b = composition_route(&sol.grid, &rho, &sol.units)?;
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bulk = 0.5 * sol.grid.r_max;
    Ok(sol
        .grid
        .r
        .iter()
        .zip(a.iter().zip(&b))
        .filter(|(r, _)| **r <= bulk)
        .map(|(_, (x, y))| (x - y).abs())
        .fold(0.0f64, f64::max)
        / scale)
}

/// Virial identities, the Gaussian-trial bound, the two `‖φ‖²` evaluations
/// and both potential routes.
pub fn pekar_suite(sol: &PekarSolution) -> Result<Vec<Check>> {
    let s = "pekar";
    let [v1, v2, v3] = sol.virial_residuals();
    let (_, e_gauss) = gaussian_trial(&sol.units);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    Ok(vec![
        Check::at_most(s, "virial_kinetic", v1, VIRIAL_TOLERANCE),
        Check::at_most(s, "virial_eigenvalue", v2, VIRIAL_TOLERANCE),
        Check::at_most(s, "virial_field_norm", v3, VIRIAL_TOLERANCE),
        Check::at_most(s, "gaussian_trial_bound", sol.e_pek - e_gauss, 0.0),
        Check::at_most(s, "phi_norm_parseval", rel(sol.phi_norm_sq_fourier(), sol.phi_norm_sq), 1e-8),
        Check::at_most(s, "phi_norm_direct", rel(sol.phi_norm_sq_direct(), sol.phi_norm_sq), 1e-6),
        Check::at_most(s, "mass_is_four_lambda", rel(sol.m_lp, 4.0 * sol.lambda_gauss), 1e-14),
        Check::at_most(s, "scf_residual", sol.residual, 1e-8),
        Check::at_most(s, "potential_dual_path", dual_path_residual(sol)?, DUAL_PATH_TOLERANCE),
        Check::at_most(
            s,
            "composition_constant",
            rel(composition_constant_quadrature(1.0), INVERSE_SQUARE_COMPOSITION),
            1e-6,
        ),
    ])
}

/// Spectral facts of the uncut Hessian blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    /// `(L, min eigenvalue, max eigenvalue)` of `1 − 4T_L`.
    pub sectors: Vec<(usize, f64, f64)>,
    /// Lowest eigenvalue of the sector-1 block.
    pub l1_min: f64,
    /// `|⟨v_min|∂φ⟩|` with the normalized translation mode.
    pub l1_overlap: f64,
    /// Smallest eigenvalue over `L ∈ {0, 2, 3}`.
    pub gap: f64,
    /// Largest asymmetry of the blocks.
    pub max_asymmetry: f64,
}

/// Eigenvalue ranges, the translation mode and the gap.
pub fn spectrum_summary(set: &HessianSet) -> Result<SpectrumSummary> {
    let blocks = set.blocks(None)?;
    let mut sectors = Vec::new();
    let mut l1_min = f64::NAN;
    let mut l1_overlap = f64::NAN;
    let mut gap = f64::INFINITY;
    let mut max_asymmetry = 0.0f64;
    for b in &blocks {
        let ev = b.raw.eigenvalues();
        let (lo, hi) = (ev[0], *ev.last().unwrap_or(&ev[0]));
        sectors.push((b.l, lo, hi));
        max_asymmetry = max_asymmetry.max(b.raw.asymmetry());
        if b.l == 1 {
            let (e, v) = lowest_eigenpair(&b.raw.matrix);
            let z = DVector::from_column_slice(b.zero_mode.as_deref().unwrap_or(&[]));
            l1_min = e;
            l1_overlap = if z.len() == v.len() { v.dot(&z).abs() } else { 0.0 };
        } else if b.l <= 3 {
            gap = gap.min(lo);
        }
    }
    Ok(SpectrumSummary { sectors, l1_min, l1_overlap, gap, max_asymmetry })
}

/// Spectrum checks: `0 ≤ H ≤ 1` per sector, the translation
/// mode and the gap.
pub fn hessian_suite(summary: &SpectrumSummary) -> Vec<Check> {
    let s = "hessian";
    let mut out: Vec<Check> = summary
        .sectors
        .iter()
        .flat_map(|&(l, lo, hi)| {
            [
                Check::at_least(s, &format!("sector_{l}_min_eigenvalue"), lo, -1e-6),
                Check::at_most(s, &format!("sector_{l}_max_eigenvalue"), hi, 1.0 + 1e-6),
            ]
        })
        .collect();
    out.push(Check::at_most(s, "sector_1_zero_mode_eigenvalue", summary.l1_min.abs(), 1e-6));
    out.push(Check::at_least(s, "sector_1_zero_mode_overlap", summary.l1_overlap, 0.999));
    out.push(Check::at_least(s, "gap_sectors_0_2_3", summary.gap, GAP_THRESHOLD));
    out.push(Check::at_most(s, "block_asymmetry", summary.max_asymmetry, 1e-10));
    out
}

/// One comparison of the truncated-Fock ground energy with `½Tr(√H − 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    /// Description of the test matrix.
    pub label: String,
    /// Number of modes.
    pub modes: usize,
    /// `½Tr(√H − 1)`.
    pub exact: f64,
    /// Truncated-Fock ground energy.
    pub oracle: f64,
    /// Truncation diagnostic of the oracle.
    pub truncation_delta: f64,
    /// `|oracle − exact|`.
    pub error: f64,
    /// `error ≤ max(10·truncation_delta, 1e−8)`.
    pub passed: bool,
}

fn oracle_row(label: String, h: &DMatrix<f64>, n_occ: usize) -> Result<OracleRow> {
    let (s, t) = quadratic_coefficients(h);
    let r = fock_oracle(&s, &t, n_occ)?;
    let exact = half_trace_sqrt_minus_one(h);
    let error = (r.energy - exact).abs();
    Ok(OracleRow {
        label,
        modes: h.nrows(),
        exact,
        oracle: r.energy,
        truncation_delta: r.truncation_delta,
        error,
        passed: error <= (10.0 * r.truncation_delta).max(1e-8),
    })
}

/// The one-mode closed form `h = 1/4` and `count` random principal
/// submatrices (2–3 modes) of the real blocks in sectors `L ≠ 1`.
pub fn oracle_rows(model: &HessianModel, count: usize, seed: u64) -> Result<Vec<OracleRow>> {
    let mut rows = vec![oracle_row("closed form h = 0.25".into(), &DMatrix::from_element(1, 1, 0.25), 60)?];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sectors: Vec<_> = model.sectors.iter().filter(|s| s.l != 1).collect();
    for _ in 0..count {
        let sec = sectors[rng.random_range(0..sectors.len())];
        // Nodes where the block departs visibly from the identity.
        let active: Vec<usize> = (0..sec.h.nrows()).filter(|&i| sec.h[(i, i)] < 0.999).collect();
        let pool = if active.len() >= 3 { active } else { (0..sec.h.nrows()).collect() };
        let modes = rng.random_range(2..=3usize);
        let mut idx: Vec<usize> = sample(&mut rng, pool.len(), modes).into_iter().map(|i| pool[i]).collect();
        idx.sort_unstable();
        let h = DMatrix::from_fn(modes, modes, |i, j| sec.h[(idx[i], idx[j])]);
        rows.push(oracle_row(format!("sector {} nodes {idx:?}", sec.l), &h, 24)?);
    }
    Ok(rows)
}

/// Trace consistency, Bogoliubov invariants and the Fock-oracle rows.
pub fn bogoliubov_suite(
    set: &HessianSet,
    model: &HessianModel,
    report: &TraceReport,
    seed: u64,
) -> Result<(Vec<Check>, Vec<OracleRow>)> {
    let s = "bogoliubov";
    let direct = set.direct_trace_one_minus_h(model.cutoff)?;
    let h = &report.tr_one_minus_h;
    let sector_sum = h.finite_sum + h.tail_fit.unwrap_or(f64::NAN);
    let rows = oracle_rows(model, 5, seed)?;
    let invariants = model
        .sectors
        .iter()
        .map(|s| {
            let (a, b) = s.invariant_residuals();
            a.max(b)
        })
        .fold(0.0f64, f64::max);
    let mut out = vec![
        Check::at_most(s, "sector_sum_vs_direct_integral", ((sector_sum - direct) / direct).abs(), 0.01),
        Check::at_most(
            s,
            "sqrt_trace_below_linear_trace",
            report.tr_one_minus_sqrt_h.total - report.tr_one_minus_h.total,
            0.0,
        ),
        Check::at_least(s, "tail_fit_exponent", h.fit.map_or(f64::NAN, |f| f.p), 1.2),
        Check::at_most(s, "trace_correction_sign", report.trace_sqrt_h_minus_one, 0.0),
        Check::at_most(s, "vacuum_identity", report.vacuum_identity_residual, 1e-8),
        Check::at_most(s, "theta_and_bogoliubov_relations", invariants, 1e-8),
    ];
    out.extend(rows.iter().map(|r| Check::at_most(s, &format!("fock_oracle: {}", r.label), r.error, (10.0 * r.truncation_delta).max(1e-8))));
    Ok((out, rows))
}

/// Displacement-norm consistency at one coupling on the radial grid.
pub fn weights_suite(kernel: &WeightKernel, alpha: f64) -> Result<Vec<Check>> {
    let s = "weights";
    let grid = YGrid::standard(kernel.sol.grid.r_max, false)?;
    let prof = displacement_norms(kernel, alpha, 0.0, &grid)?;
    let split = prof.nodes.iter().map(|n| (n.w_sq - n.w0_sq - n.w1_sq).abs()).fold(0.0f64, f64::max);
    let closed = prof.nodes.iter().map(|n| (n.w_sq - n.closed_w_sq).abs()).fold(0.0f64, f64::max);
    let small: Vec<&_> = prof.nodes.iter().filter(|n| n.s <= 12.0).collect();
    let projection = small.iter().map(|n| (n.w0_sq - n.w0_explicit_sq).abs()).fold(0.0f64, f64::max);
    let cert = q_monotonicity(kernel, &grid.s)?;
    let nonneg = prof.nodes.iter().map(|n| -n.wt_sq.min(n.w_sq)).fold(0.0f64, f64::max);
    Ok(vec![
        Check::at_most(s, "truncation_residual", prof.max_truncation_residual, 1e-6),
        Check::at_most(s, "orthogonal_split", split, 1e-8),
        Check::at_most(s, "closed_form_norm", closed, 1e-6),
        Check::at_most(s, "explicit_projection_s_le_12", projection, 1e-6),
        Check::at_most(s, "q_monotone_decrease", cert.max_decrease, 1e-10),
        Check::at_most(s, "norms_nonnegative", nonneg, 0.0),
    ])
}
