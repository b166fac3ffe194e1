//! The parabolic upper bound on the energy–momentum relation and its
//! comparison curves.
//!
//! For `|P|/α ≤ c` the ground-state energy of the fiber Hamiltonian obeys
//!
//! `E_α(P) ≤ e^Pek + Tr(√H − 1)/(2α²) + P²/(2α⁴M) + C_{c,ε} α^{−5/2+ε}`.
//!
//! The constant `C_{c,ε}` is not available, so the error term is carried as
//! symbolic metadata only. The table is expressed in the units where the
//! phonon energy is one (coupling `g = 1/(2π²)`); constants computed in other
//! units are rescaled (energies scale as `c²`, the mass as `c⁴` in the
//! Choquard coefficient `c`, the trace is dimensionless).

use serde::{Deserialize, Serialize};

use crate::bogoliubov::TraceReport;
use crate::pekar_scf::{PekarSolution, Units};
use crate::{Error, Result};

/// Scalar constants entering the bound, in phonon-energy units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// `e^Pek`.
    pub e_pek: f64,
    /// `Tr(√H − 1)` (negative).
    pub trace_correction: f64,
    /// `M^LP = (2/3)‖∇φ‖²`.
    pub m_lp: f64,
    /// Cutoff the trace was evaluated at (`None` = `∞`).
    pub k_cutoff_used: Option<f64>,
    /// Checksum of the Pekar artifact the constants derive from.
    pub source_checksum: String,
}

impl BoundConstants {
    /// Collect the constants, checking that the trace report was computed
    /// from the same Pekar artifact as the solution.
    pub fn new(
        sol: &PekarSolution,
        solution_checksum: &str,
        traces: &TraceReport,
        traces_checksum: &str,
    ) -> Result<Self> {
        if solution_checksum != traces_checksum {
            return Err(Error::Provenance(format!(
                "trace report derives from {traces_checksum}, solution is {solution_checksum}"
            )));
        }
        let scale = sol.units.choquard() / Units::phonon().choquard();
        Ok(Self {
            e_pek: sol.e_pek / scale.powi(2),
            trace_correction: traces.trace_sqrt_h_minus_one,
            m_lp: sol.m_lp / scale.powi(4),
            k_cutoff_used: traces.cutoff,
            source_checksum: solution_checksum.to_string(),
        })
    }

    /// Two-term energy at rest, `e^Pek + Tr(√H − 1)/(2α²)`.
    pub fn rest_energy(&self, alpha: f64) -> f64 {
        self.e_pek + self.trace_correction / (2.0 * alpha * alpha)
    }

    /// `E_upper(P) = e^Pek + Tr(√H−1)/(2α²) + P²/(2α⁴M)`.
    pub fn e_upper(&self, alpha: f64, p: f64) -> f64 {
        self.rest_energy(alpha) + p * p / (2.0 * alpha.powi(4) * self.m_lp)
    }

    /// Bottom of the continuous spectrum, `E(0) + α⁻²`, with `E(0)` replaced
    /// by its two-term expansion.
    pub fn continuum_edge(&self, alpha: f64) -> f64 {
        self.rest_energy(alpha) + 1.0 / (alpha * alpha)
    }

    /// Momentum where the parabola meets the continuum edge, `√(2M)·α`.
    pub fn crossing_momentum(&self, alpha: f64) -> f64 {
        (2.0 * self.m_lp).sqrt() * alpha
    }
}

/// One row of the bound table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    /// `|P|`.
    pub p: f64,
    /// Right side of the bound without the error term.
    pub e_upper: f64,
    /// Quasi-particle energy `E(0) + P²/(2M_eff)` with `E(0)` at two terms
    /// and `M_eff = α⁴M^LP`.
    pub quasiparticle_reference: f64,
    /// `E(0) + α⁻²`.
    pub continuum_edge_reference: f64,
}

/// Symbolic description of the unassigned error term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTerm {
    /// Human-readable form.
    pub expression: String,
    /// Leading exponent of `α` (to be increased by any `ε > 0`).
    pub alpha_exponent: f64,
    /// The constant, which is not known.
    pub constant: Option<f64>,
}

impl Default for ErrorTerm {
    fn default() -> Self {
        Self { expression: "C_{c,eps} * alpha^(-5/2 + eps)".into(), alpha_exponent: -2.5, constant: None }
    }
}

/// The bound surface at one coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    /// Coupling.
    pub alpha: f64,
    /// Admissible ratio `|P|/α ≤ c`.
    pub c_max: f64,
    /// Rows in the order of the requested momenta.
    pub rows: Vec<BoundRow>,
    /// Constants used.
    pub constants: BoundConstants,
    /// The error term, symbolic.
    pub error_term: ErrorTerm,
}

/// Default admissible ratio `|P|/α ≤ 1`.
pub const DEFAULT_C_MAX: f64 = 1.0;

/// Tabulate the bound for the given momenta.
pub fn assemble_bound(constants: &BoundConstants, alpha: f64, p_list: &[f64], c_max: f64) -> Result<BoundTable> {
    if !(alpha > 0.0) || !(c_max > 0.0) {
        return Err(Error::Parameter(format!("need α > 0 and c > 0, got α = {alpha}, c = {c_max}")));
    }
    if let Some(p) = p_list.iter().find(|p| !(p.abs() / alpha <= c_max)) {
        return Err(Error::Parameter(format!("|P|/α = {} exceeds c = {c_max}", p.abs() / alpha)));
    }
    let rows = p_list
        .iter()
        .map(|&p| {
            let e_upper = constants.e_upper(alpha, p);
            BoundRow {
                p: p.abs(),
                e_upper,
                quasiparticle_reference: constants.rest_energy(alpha) + p * p / (2.0 * alpha.powi(4) * constants.m_lp),
                continuum_edge_reference: constants.continuum_edge(alpha),
            }
        })
        .collect();
    Ok(BoundTable { alpha, c_max, rows, constants: constants.clone(), error_term: ErrorTerm::default() })
}

impl BoundTable {
    /// CSV rows `alpha,P,E_upper,continuum_edge,quasiparticle_ref`.
    pub fn csv(&self) -> String {
        let mut out = String::from("alpha,P,E_upper,continuum_edge,quasiparticle_ref\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.10e},{:.15e},{:.15e},{:.15e}\n",
                self.alpha, r.p, r.e_upper, r.continuum_edge_reference, r.quasiparticle_reference
            ));
        }
        out
    }
}

/// The scaled bound `α²(E_upper(αP) − e^Pek − Tr/(2α²))` against `P²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjectureEnvelope {
    /// Coupling of the table.
    pub alpha: f64,
    /// `(P², scaled value)` with `P = |P_row|/α`.
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope through the origin.
    pub slope: f64,
    /// `1/(2M^LP)`.
    pub expected_slope: f64,
    /// Largest `|value − P²/(2M)|`.
    pub max_deviation: f64,
}

/// Tabulate the scaled envelope of a bound table.
pub fn conjecture_envelope(table: &BoundTable) -> ConjectureEnvelope {
    let a = table.alpha;
    let c = &table.constants;
    let points: Vec<(f64, f64)> = table
        .rows
        .iter()
        .map(|r| {
            let p = r.p / a;
            (p * p, a * a * (r.e_upper - c.e_pek - c.trace_correction / (2.0 * a * a)))
        })
        .collect();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let expected_slope = 1.0 / (2.0 * c.m_lp);
    let slope = if sxx > 0.0 { sxy / sxx } else { expected_slope };
    let max_deviation = points.iter().map(|(x, y)| (y - expected_slope * x).abs()).fold(0.0, f64::max);
    ConjectureEnvelope { alpha: a, points, slope, expected_slope, max_deviation }
}
