//! Displacement fields, the Gaussian weight function and the leading-order
//! classical integrals of the trial-state analysis.
//!
//! Field functions are handled through their unitary Fourier transforms.
//! With `y = s ŷ` as polar axis the shift `e^{−ik·y}` expands in Legendre
//! polynomials, so every displacement field is a sum of partial waves whose
//! radial profiles live on the momentum nodes of the Hessian model, where
//! `Θ = H^{1/4}` acts sector by sector. The momentum `P` enters through
//! `ξ_P = (P·∇)φ/(α²M)`, whose transform `i(P·k)Φ(k)/(α²M)` couples
//! neighbouring partial waves: the component of `P` along `y` stays in
//! `m = 0`, the transverse component populates `m = 1`.
//!
//! Independent closed forms on the Pekar momentum grid (angular averages of
//! `e^{ik·y}`, `k̂_i k̂_j e^{ik·y}`) cross-check the partial-wave sums.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bogoliubov::HessianModel;
use crate::fit::{power_law_fit, PowerFit};
use crate::pekar_scf::{autocorrelation_at, PekarSolution};
use crate::radial_core::{EvenInterpolator, RadialFunction, Tail};
use crate::sector_operators::{phi_hat_at, FieldGrid};
use crate::special::{gauss_legendre, gauss_legendre_on, one_minus_j0, sph_bessel_array};
use crate::{Error, Result};

/// Relative tolerance on the partial-wave reconstruction of `‖w_{P,y}‖²`.
pub const TRUNCATION_TOLERANCE: f64 = 1e-4;

/// Relative amplitude below which momentum nodes are dropped from the
/// displacement profiles.
const ACTIVE_THRESHOLD: f64 = 1e-13;

/// The shifted classical field `φ_P = φ + iξ_P` for `P` along the polar axis.
#[derive(Clone, Debug)]
pub struct ShiftedField {
    /// Coupling `α`.
    pub alpha: f64,
    /// `|P|`.
    pub p: f64,
    /// `φ` in position space.
    pub phi: RadialFunction,
    /// Momentum profile of `ξ_P` in sector 1, normalised so that
    /// `xi_hat.norm_sq() = ‖ξ_P‖²`.
    pub xi_hat: RadialFunction,
    /// `‖ξ_P‖²`.
    pub xi_norm_sq: f64,
}

impl ShiftedField {
    /// Build `φ_P` from a Pekar solution.
    pub fn new(sol: &PekarSolution, alpha: f64, p: f64) -> Result<Self> {
        if !(alpha > 0.0) || !p.is_finite() {
            return Err(Error::Parameter(format!("need α > 0 and finite P, got α = {alpha}, P = {p}")));
        }
        let ratio = p.abs() / (alpha * alpha * sol.m_lp);
        let values: Vec<f64> = sol
            .kgrid
            .r
            .iter()
            .zip(&sol.phi_hat.values)
            .map(|(k, f)| ratio * k * f / 3f64.sqrt())
            .collect();
        let xi_hat = RadialFunction::new(sol.kgrid.clone(), values, 1)?;
        let xi_norm_sq = xi_hat.norm_sq();
        Ok(Self { alpha, p: p.abs(), phi: sol.phi.clone(), xi_hat, xi_norm_sq })
    }

    /// `|P|/(α²M)`.
    pub fn ratio(&self, m_lp: f64) -> f64 {
        self.p / (self.alpha * self.alpha * m_lp)
    }
}

/// Tensor grid of separations `y`: geometric radii and Gauss–Legendre nodes
/// in `cos γ`, the angle between `y` and `P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YGrid {
    /// Radii `s = |y|`, ascending.
    pub s: Vec<f64>,
    /// Weights for `∫₀^{s_max} f(s) s² ds` (trapezoid in `ln s` plus the
    /// ball below the first node).
    pub s_weights: Vec<f64>,
    /// Angular nodes `cos γ`.
    pub cos_gamma: Vec<f64>,
    /// Angular weights, summing to 2.
    pub cos_weights: Vec<f64>,
}

impl YGrid {
    /// `n` geometric radii in `[s_min, s_max]` and `angular` nodes in `cos γ`
    /// (`angular = 1` places a single node for radial profiles).
    pub fn geometric(s_min: f64, s_max: f64, n: usize, angular: usize) -> Result<Self> {
        if !(s_min > 0.0 && s_max > s_min) || n < 3 || angular == 0 {
            return Err(Error::Parameter(format!(
                "invalid y-grid: s ∈ [{s_min}, {s_max}], {n} radii, {angular} angles"
            )));
        }
        let dt = (s_max / s_min).ln() / (n - 1) as f64;
        let s: Vec<f64> = (0..n).map(|i| s_min * (i as f64 * dt).exp()).collect();
        let mut s_weights: Vec<f64> = s.iter().map(|s| s.powi(3) * dt).collect();
        s_weights[0] *= 0.5;
        s_weights[n - 1] *= 0.5;
        s_weights[0] += s_min.powi(3) / 3.0;
        let (cos_gamma, cos_weights) = if angular == 1 { (vec![1.0], vec![2.0]) } else { gauss_legendre(angular) };
        Ok(Self { s, s_weights, cos_gamma, cos_weights })
    }

    /// Default grid: 80 radii from `10⁻³` to `r_max/2`, 16 angles when
    /// `angular` is set, one otherwise.
    pub fn standard(r_max: f64, angular: bool) -> Result<Self> {
        Self::geometric(1e-3, 0.5 * r_max, 80, if angular { 16 } else { 1 })
    }

    /// Largest radius.
    pub fn s_max(&self) -> f64 {
        *self.s.last().unwrap_or(&0.0)
    }

    /// Index of the angular node mirrored under `y → −y`.
    pub fn mirror(&self, c: usize) -> usize {
        if self.cos_gamma.len() == 1 {
            c
        } else {
            self.cos_gamma.len() - 1 - c
        }
    }
}

/// Momentum-space data shared by all displacement-field evaluations: the
/// active field nodes, `√H` and `H^{−1/2}` per sector, and the Pekar
/// momentum grid for closed forms.
#[derive(Clone, Debug)]
pub struct WeightKernel<'a> {
    /// Pekar solution.
    pub sol: &'a PekarSolution,
    /// Cutoff of the Hessian model (`None` = `∞`).
    pub cutoff: Option<f64>,
    k: Vec<f64>,
    sw: Vec<f64>,
    phi: Vec<f64>,
    z: Vec<f64>,
    sqrt_h: Vec<DMatrix<f64>>,
    inv_sqrt_h: Vec<DMatrix<f64>>,
    kq: Vec<f64>,
    mq: Vec<f64>,
    grad_sq: f64,
    theta_phi_sq: f64,
}

impl<'a> WeightKernel<'a> {
    /// Prepare from a solution, its Hessian model and the field grid the
    /// model was built on.
    pub fn new(sol: &'a PekarSolution, model: &HessianModel, field: &FieldGrid) -> Result<Self> {
        if model.sectors.len() < 2 {
            return Err(Error::Parameter("the Hessian model needs sectors 0 and 1".into()));
        }
        let m = model.k.len();
        if m > field.k.len() || model.k.iter().zip(&field.k).any(|(a, b)| a != b) {
            return Err(Error::Parameter("Hessian model and field grid disagree".into()));
        }
        let phi_all = phi_hat_at(sol, &field.k);
        let amp: Vec<f64> = (0..field.k.len()).map(|j| (phi_all[j] * field.k[j]).abs() * field.w[j].sqrt()).collect();
        let peak = amp.iter().cloned().fold(0.0, f64::max);
        let n = amp.iter().rposition(|a| *a > ACTIVE_THRESHOLD * peak).map_or(0, |j| j + 1);
        if n == 0 {
            return Err(Error::Parameter("field profile vanishes on the field grid".into()));
        }
        let k = field.k[..n].to_vec();
        let sw: Vec<f64> = field.w[..n].iter().map(|w| w.sqrt()).collect();
        let phi = phi_all[..n].to_vec();
        let mut z: Vec<f64> = (0..n).map(|j| sw[j] * k[j] * phi[j]).collect();
        let zn = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        z.iter_mut().for_each(|x| *x /= zn);

        let mm = m.min(n);
        let block = |sec: &crate::bogoliubov::SectorModel, f: &dyn Fn(f64) -> f64| {
            let v = &sec.eigenvectors;
            let mut out = DMatrix::<f64>::identity(n, n);
            for i in 0..mm {
                for j in 0..mm {
                    out[(i, j)] = (0..v.ncols()).map(|c| v[(i, c)] * f(sec.eigenvalues[c]) * v[(j, c)]).sum();
                }
            }
            out
        };
        let (sqrt_h, inv_sqrt_h): (Vec<_>, Vec<_>) = model
            .sectors
            .par_iter()
            .map(|sec| (block(sec, &|x| x.sqrt()), block(sec, &|x| 1.0 / x.sqrt())))
            .unzip();

        let kq = sol.kgrid.r.clone();
        let mq: Vec<f64> =
            sol.kgrid.w.iter().zip(&sol.phi_hat.values).map(|(w, f)| 4.0 * PI * w * f * f).collect();
        let grad_sq = kq.iter().zip(&mq).map(|(k, m)| k * k * m).sum();
        let u0 = DVector::from_iterator(n, (0..n).map(|j| sw[j] * phi[j]));
        let theta_phi_sq = 4.0 * PI * u0.dot(&(&sqrt_h[0] * &u0));
        Ok(Self { sol, cutoff: model.cutoff, k, sw, phi, z, sqrt_h, inv_sqrt_h, kq, mq, grad_sq, theta_phi_sq })
    }

    /// Number of active momentum nodes.
    pub fn active_nodes(&self) -> usize {
        self.k.len()
    }

    /// Highest sector with an explicit `Θ`; higher sectors use `Θ = 1`.
    pub fn l_max(&self) -> usize {
        self.sqrt_h.len() - 1
    }

    /// `‖∇φ‖²` on the Pekar momentum grid.
    pub fn grad_phi_sq(&self) -> f64 {
        self.grad_sq
    }

    /// `⟨φ|√H φ⟩`.
    pub fn theta_phi_sq(&self) -> f64 {
        self.theta_phi_sq
    }

    /// `q(s) = ‖φ‖² − (φ∗φ)(s) = ∫|Φ|²(1 − j₀(ks)) dk`.
    pub fn q(&self, s: f64) -> f64 {
        self.kq.iter().zip(&self.mq).map(|(k, m)| m * one_minus_j0(k * s)).sum()
    }

    /// `‖φ‖²` on the Pekar momentum grid.
    pub fn phi_norm_sq(&self) -> f64 {
        self.mq.iter().sum()
    }

    /// Closed forms at one node: `(‖w‖², ‖w⁰‖²)` from the angular averages
    /// of `e^{ik·y}` and `k̂_i k̂_j e^{ik·y}`.
    fn closed_forms(&self, s: f64, cos_g: f64, ratio: f64) -> (f64, f64) {
        let sin_g = (1.0 - cos_g * cos_g).max(0.0).sqrt();
        let g = self.grad_sq;
        let (mut u_sq, mut v_avg, mut m1, mut c1, mut c2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut jb = [0.0; 3];
        for (k, m) in self.kq.iter().zip(&self.mq) {
            let q = k * s;
            sph_bessel_array(2, q, &mut jb);
            let j1q = if q < 1e-3 { 1.0 / 3.0 - q * q / 30.0 } else { jb[1] / q };
            u_sq += 2.0 * m * one_minus_j0(q);
            v_avg += 2.0 * m * k * k * (1.0 / 3.0 - j1q + cos_g * cos_g * jb[2]);
            m1 += m * k * jb[1];
            c1 += m * k * k * j1q;
            c2 += m * k * k * jb[2];
        }
        let w_sq = u_sq + ratio * ratio * v_avg;
        let ix = ratio * sin_g * (g / 3.0 - c1);
        let iz = ratio * cos_g * (g / 3.0 - c1 + c2);
        let w0_sq = 3.0 * m1 * m1 / g + 3.0 * (ix * ix + iz * iz) / g;
        (w_sq, w0_sq)
    }

    /// All norms at one node `y = s ŷ`, `cos γ = ŷ·P̂`.
    fn node(&self, s: f64, cos_g: f64, ratio: f64) -> WeightNode {
        let n = self.k.len();
        let k_top = self.k[n - 1];
        let l_cap = ((k_top * s).ceil() as usize + 40).min(4000);
        let lc = l_cap + 1;
        let stride = lc + 1;
        let mut abar = vec![Complex::new(0.0, 0.0); n * stride];
        let mut jb = vec![0.0; stride];
        for j in 0..n {
            let x = self.k[j] * s;
            sph_bessel_array(lc, x, &mut jb);
            abar[j * stride] = Complex::new(one_minus_j0(x), 0.0);
            for l in 1..=lc {
                abar[j * stride + l] = -minus_i_pow(l) * ((2 * l + 1) as f64 * jb[l]);
            }
        }
        let at = |j: usize, l: isize| if l < 0 { Complex::new(0.0, 0.0) } else { abar[j * stride + l as usize] };
        let sin_g = (1.0 - cos_g * cos_g).max(0.0).sqrt();
        let i = Complex::new(0.0, 1.0);
        let mut acc = Acc::default();
        for l in 0..=l_cap {
            let lf = l as f64;
            let li = l as isize;
            let nu0 = 4.0 * PI / (2.0 * lf + 1.0);
            let nu1 = 2.0 * PI * lf * (lf + 1.0) / (2.0 * lf + 1.0);
            let u: Vec<Complex<f64>> = (0..n).map(|j| at(j, li) * (self.sw[j] * self.phi[j])).collect();
            self.accumulate(&mut acc, l, u, nu0, false);
            if ratio != 0.0 {
                let kappa = |j: usize| ratio * self.k[j] * self.phi[j] * self.sw[j];
                if cos_g != 0.0 {
                    let b: Vec<Complex<f64>> = (0..n)
                        .map(|j| {
                            let lo = if l == 0 { Complex::new(0.0, 0.0) } else { at(j, li - 1) * (lf / (2.0 * lf - 1.0)) };
                            i * (kappa(j) * cos_g) * (lo + at(j, li + 1) * ((lf + 1.0) / (2.0 * lf + 3.0)))
                        })
                        .collect();
                    self.accumulate(&mut acc, l, b, nu0, true);
                }
                if l >= 1 && sin_g != 0.0 {
                    let d: Vec<Complex<f64>> = (0..n)
                        .map(|j| {
                            i * (kappa(j) * sin_g)
                                * (at(j, li - 1) / (2.0 * lf - 1.0) - at(j, li + 1) / (2.0 * lf + 3.0))
                        })
                        .collect();
                    self.accumulate(&mut acc, l, d, nu1, true);
                }
            }
        }
        let (closed_w_sq, w0_explicit_sq) = self.closed_forms(s, cos_g, ratio);
        WeightNode {
            s,
            cos_gamma: cos_g,
            w_sq: acc.w,
            w0_sq: acc.w0,
            w0_explicit_sq,
            w1_sq: acc.w1,
            wt_sq: acc.w0 + acc.wt1,
            closed_w_sq,
        }
    }

    /// Add one partial-wave component (`imaginary` selects `Im w`, which is
    /// weighted with `Θ⁻¹` instead of `Θ`).
    fn accumulate(&self, acc: &mut Acc, l: usize, mut x: Vec<Complex<f64>>, nu: f64, imaginary: bool) {
        let norm = |x: &[Complex<f64>]| x.iter().map(|c| c.norm_sqr()).sum::<f64>();
        acc.w += nu * norm(&x);
        if l == 1 {
            let c: Complex<f64> = x.iter().zip(&self.z).map(|(a, z)| a * *z).sum();
            acc.w0 += nu * c.norm_sqr();
            x.iter_mut().zip(&self.z).for_each(|(a, z)| *a -= c * *z);
        }
        acc.w1 += nu * norm(&x);
        let op = if imaginary { self.inv_sqrt_h.get(l) } else { self.sqrt_h.get(l) };
        acc.wt1 += nu
            * match op {
                Some(m) => {
                    let re = DVector::from_iterator(x.len(), x.iter().map(|c| c.re));
                    let im = DVector::from_iterator(x.len(), x.iter().map(|c| c.im));
                    re.dot(&(m * &re)) + im.dot(&(m * &im))
                }
                None => norm(&x),
            };
    }
}

#[derive(Default)]
struct Acc {
    w: f64,
    w0: f64,
    w1: f64,
    wt1: f64,
}

/// `(−i)^l`.
fn minus_i_pow(l: usize) -> Complex<f64> {
    match l % 4 {
        0 => Complex::new(1.0, 0.0),
        1 => Complex::new(0.0, -1.0),
        2 => Complex::new(-1.0, 0.0),
        _ => Complex::new(0.0, 1.0),
    }
}

/// Norms of the displacement field at one separation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightNode {
    /// `|y|`.
    pub s: f64,
    /// `cos γ`.
    pub cos_gamma: f64,
    /// `‖w_{P,y}‖²` from the partial-wave sum.
    pub w_sq: f64,
    /// `‖w⁰_{P,y}‖²` from the sector-1 projection.
    pub w0_sq: f64,
    /// `‖w⁰_{P,y}‖²` from the explicit `Π₀` formula.
    pub w0_explicit_sq: f64,
    /// `‖w¹_{P,y}‖²`.
    pub w1_sq: f64,
    /// `‖w̃_{P,y}‖² = ‖w⁰‖² + ‖Θ Re w¹‖² + ‖Θ⁻¹ Im w¹‖²`.
    pub wt_sq: f64,
    /// `‖w_{P,y}‖²` from the closed angular average.
    pub closed_w_sq: f64,
}

/// Displacement norms on a y-grid at fixed `(α, P, K)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    /// Coupling.
    pub alpha: f64,
    /// `|P|`.
    pub p: f64,
    /// Cutoff of the Hessian model (`None` = `∞`).
    pub cutoff: Option<f64>,
    /// Separation grid.
    pub grid: YGrid,
    /// Nodes, radius-major (`index = i_s·n_angles + i_c`).
    pub nodes: Vec<WeightNode>,
    /// `lim_{s→∞} ‖w_{P,y}‖² = 2‖φ‖² + 2‖ξ_P‖²`.
    pub plateau_w_sq: f64,
    /// `lim_{s→∞} ‖w̃_{P,y}‖² = ⟨φ|√Hφ⟩ + ‖φ‖² + 2‖ξ_P‖²`.
    pub plateau_wt_sq: f64,
    /// Largest relative mismatch between partial-wave and closed `‖w‖²`.
    pub max_truncation_residual: f64,
    /// Largest relative mismatch between projected and explicit `‖w⁰‖²`.
    pub max_projection_residual: f64,
}

impl WeightProfile {
    /// Node at radius index `i` and angle index `c`.
    pub fn node(&self, i: usize, c: usize) -> &WeightNode {
        &self.nodes[i * self.grid.cos_gamma.len() + c]
    }

    /// CSV rows `s,cos_gamma,w_sq,w0_sq,w1_sq,wt_sq,n`.
    pub fn csv(&self, n_values: &[f64]) -> String {
        let mut out = String::from("s,cos_gamma,w_sq,w0_sq,w1_sq,wt_sq,n\n");
        for (nd, n) in self.nodes.iter().zip(n_values) {
            out.push_str(&format!(
                "{:.10e},{:.10e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                nd.s, nd.cos_gamma, nd.w_sq, nd.w0_sq, nd.w1_sq, nd.wt_sq, n
            ));
        }
        out
    }
}

/// Evaluate `‖w‖², ‖w⁰‖², ‖w¹‖², ‖w̃‖²` on every node of `grid` for `P`
/// along the polar axis of `cos γ`.
pub fn displacement_norms(kernel: &WeightKernel, alpha: f64, p: f64, grid: &YGrid) -> Result<WeightProfile> {
    let shifted = ShiftedField::new(kernel.sol, alpha, p)?;
    let ratio = shifted.ratio(kernel.sol.m_lp);
    let pairs: Vec<(f64, f64)> =
        grid.s.iter().flat_map(|&s| grid.cos_gamma.iter().map(move |&c| (s, c))).collect();
    let nodes: Vec<WeightNode> = pairs.par_iter().map(|&(s, c)| kernel.node(s, c, ratio)).collect();
    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { (a - b).abs() / b.abs() };
    let max_truncation_residual = nodes.iter().map(|n| rel(n.w_sq, n.closed_w_sq)).fold(0.0, f64::max);
    let max_projection_residual = nodes.iter().map(|n| rel(n.w0_sq, n.w0_explicit_sq)).fold(0.0, f64::max);
    if max_truncation_residual > TRUNCATION_TOLERANCE {
        return Err(Error::Resolution(format!(
            "partial-wave sum misses {max_truncation_residual:.2e} of ‖w‖²"
        )));
    }
    let phi_sq = kernel.phi_norm_sq();
    Ok(WeightProfile {
        alpha,
        p: shifted.p,
        cutoff: kernel.cutoff,
        grid: grid.clone(),
        nodes,
        plateau_w_sq: 2.0 * phi_sq + 2.0 * shifted.xi_norm_sq,
        plateau_wt_sq: kernel.theta_phi_sq + phi_sq + 2.0 * shifted.xi_norm_sq,
        max_truncation_residual,
        max_projection_residual,
    })
}

/// Weight values `n_{δ,η}(y)` on the profile nodes and on the plateau.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightValues {
    /// `δ`.
    pub delta: f64,
    /// `η`.
    pub eta: f64,
    /// Values in node order of the profile.
    pub values: Vec<f64>,
    /// Value at the `s → ∞` plateau.
    pub plateau: f64,
}

/// `n_{δ,η}(y) = exp(−η α^{2(1−δ)} ‖w̃_{P,y}‖²/2)`.
pub fn weight_function(profile: &WeightProfile, delta: f64, eta: f64) -> Result<WeightValues> {
    if !(0.0..1.0).contains(&delta) || !(eta > 0.0) {
        return Err(Error::Parameter(format!("need δ ∈ [0,1) and η > 0, got δ = {delta}, η = {eta}")));
    }
    let rate = 0.5 * eta * profile.alpha.powf(2.0 * (1.0 - delta));
    Ok(WeightValues {
        delta,
        eta,
        values: profile.nodes.iter().map(|n| (-rate * n.wt_sq).exp()).collect(),
        plateau: (-rate * profile.plateau_wt_sq).exp(),
    })
}

/// Weight `g` multiplying the integrands of the Gaussian comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GFunction {
    /// `g ≡ 0`.
    Zero,
    /// `g ≡ 1` (not integrable against the plateau).
    One,
    /// `g = H = ψ∗ψ`.
    Autocorrelation,
}

/// `∫|y|^n g n_{δ,η}`, `∫|y|^n g e^{−ηλα^{2(1−δ)}y²}` and `∫|y|^n g |n − Gaussian|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Coupling.
    pub alpha: f64,
    /// Power `n` of `|y|`.
    pub n_power: i32,
    /// Integral against the weight function.
    pub weighted: f64,
    /// Integral against the Gaussian.
    pub gaussian: f64,
    /// Integral of the absolute difference.
    pub difference: f64,
    /// Part of `weighted` carried by the analytic plateau.
    pub plateau_part: f64,
}

/// Compare the weight function with its Gaussian approximation.
pub fn gaussian_comparison(
    kernel: &WeightKernel,
    profile: &WeightProfile,
    g: GFunction,
    n_power: i32,
    delta: f64,
    eta: f64,
) -> Result<Comparison> {
    let nv = weight_function(profile, delta, eta)?;
    let alpha = profile.alpha;
    if g == GFunction::Zero {
        return Ok(Comparison { alpha, n_power, weighted: 0.0, gaussian: 0.0, difference: 0.0, plateau_part: 0.0 });
    }
    if g == GFunction::One {
        return Err(Error::Integration(format!(
            "g ≡ 1 is not integrable against the plateau value {:.3e} of the weight",
            nv.plateau
        )));
    }
    let a = eta * kernel.sol.lambda_gauss * alpha.powf(2.0 * (1.0 - delta));
    let grid = &profile.grid;
    let h = autocorrelation_at(kernel.sol, &grid.s);
    let na = grid.cos_gamma.len();
    let (mut weighted, mut gaussian, mut difference) = (0.0, 0.0, 0.0);
    for (i, &s) in grid.s.iter().enumerate() {
        let gs = h[i] * s.powi(n_power) * grid.s_weights[i] * 2.0 * PI;
        let gauss = (-a * s * s).exp();
        for c in 0..na {
            let n = nv.values[i * na + c];
            let cw = grid.cos_weights[c];
            weighted += gs * cw * n;
            gaussian += gs * cw * gauss;
            difference += gs * cw * (n - gauss).abs();
        }
    }
    let s_max = grid.s_max();
    let s_far = 2.0 * kernel.sol.grid.r_max;
    let mut plateau_part = 0.0;
    if s_far > s_max {
        let (x, w) = gauss_legendre_on(96, s_max, s_far);
        let hb = autocorrelation_at(kernel.sol, &x);
        for ((s, w), hv) in x.iter().zip(&w).zip(&hb) {
            let m = 4.0 * PI * w * s.powi(n_power + 2) * hv;
            let gauss = (-a * s * s).exp();
            plateau_part += m * nv.plateau;
            gaussian += m * gauss;
            difference += m * (nv.plateau - gauss).abs();
        }
    }
    weighted += plateau_part;
    if !weighted.is_finite() || !difference.is_finite() {
        return Err(Error::Integration("non-finite weight integral".into()));
    }
    Ok(Comparison { alpha, n_power, weighted, gaussian, difference, plateau_part })
}

/// A comparison evaluated over an α-ladder with the fitted decay of the
/// difference, `difference ≈ c·α^{−p}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonLadder {
    /// `|P|` (the same for every rung).
    pub p: f64,
    /// One comparison per α.
    pub rows: Vec<Comparison>,
    /// Fit of the difference.
    pub difference_fit: PowerFit,
}

/// Run [`gaussian_comparison`] over an α-ladder at fixed `|P|`.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_ladder(
    kernel: &WeightKernel,
    grid: &YGrid,
    alphas: &[f64],
    p: f64,
    g: GFunction,
    n_power: i32,
    delta: f64,
    eta: f64,
) -> Result<ComparisonLadder> {
    let rows = alphas
        .iter()
        .map(|&a| {
            let profile = displacement_norms(kernel, a, p, grid)?;
            gaussian_comparison(kernel, &profile, g, n_power, delta, eta)
        })
        .collect::<Result<Vec<_>>>()?;
    let d: Vec<f64> = rows.iter().map(|r| r.difference).collect();
    let difference_fit = power_law_fit(alphas, &d)?;
    Ok(ComparisonLadder { p, rows, difference_fit })
}

/// `𝒩₀₁ = ∫H(y) n_{0,1}(y) dy` against its Gaussian value `(π/(λα²))^{3/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    /// Coupling.
    pub alpha: f64,
    /// `𝒩₀₁`.
    pub n01: f64,
    /// `(π/(λα²))^{3/2}`.
    pub gaussian: f64,
    /// `|𝒩₀₁ − (π/(λα²))^{3/2}|`.
    pub deviation: f64,
}

/// Leading-order norm of the trial state.
pub fn leading_norm(kernel: &WeightKernel, profile: &WeightProfile) -> Result<NormValue> {
    let c = gaussian_comparison(kernel, profile, GFunction::Autocorrelation, 0, 0.0, 1.0)?;
    let gaussian = (PI / (kernel.sol.lambda_gauss * profile.alpha.powi(2))).powf(1.5);
    Ok(NormValue { alpha: profile.alpha, n01: c.weighted, gaussian, deviation: (c.weighted - gaussian).abs() })
}

/// [`leading_norm`] over an α-ladder with fitted decays of the deviation
/// and of the Gaussian value itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormLadder {
    /// `|P|`.
    pub p: f64,
    /// One row per α.
    pub rows: Vec<NormValue>,
    /// Fit of the deviation.
    pub deviation_fit: PowerFit,
    /// Fit of the Gaussian value (exponent 3).
    pub gaussian_fit: PowerFit,
}

/// Evaluate the leading norm over an α-ladder.
pub fn norm_ladder(kernel: &WeightKernel, grid: &YGrid, alphas: &[f64], p: f64) -> Result<NormLadder> {
    let rows = alphas
        .iter()
        .map(|&a| leading_norm(kernel, &displacement_norms(kernel, a, p, grid)?))
        .collect::<Result<Vec<_>>>()?;
    let dev: Vec<f64> = rows.iter().map(|r| r.deviation).collect();
    let gau: Vec<f64> = rows.iter().map(|r| r.gaussian).collect();
    Ok(NormLadder { p, rows, deviation_fit: power_law_fit(alphas, &dev)?, gaussian_fit: power_law_fit(alphas, &gau)? })
}

/// Least-squares scaling law `y ≈ c·s^{exponent}` over a window of nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Lower end of the window.
    pub lo: f64,
    /// Upper end of the window.
    pub hi: f64,
    /// Growth exponent.
    pub exponent: f64,
    /// Prefactor.
    pub c: f64,
    /// Largest log residual of the fit.
    pub max_log_residual: f64,
}

/// Fit `|y| ≈ c s^{exponent}` on the nodes with `lo ≤ s ≤ hi`.
pub fn envelope_fit(s: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<Envelope> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        s.iter().zip(y).filter(|(s, _)| **s >= lo && **s <= hi).map(|(s, y)| (*s, y.abs())).unzip();
    let f = power_law_fit(&xs, &ys)?;
    Ok(Envelope { lo, hi, exponent: -f.p, c: f.c, max_log_residual: f.max_log_residual })
}

/// Sampled `v(y) = ⟨l_y|w_{0,y}⟩` and the scaled Gaussian integrals of the
/// `−3/2` energy term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeHalvesReport {
    /// Radii.
    pub s: Vec<f64>,
    /// `v(s)`.
    pub v: Vec<f64>,
    /// `λ = ‖∇φ‖²/6`.
    pub lambda: f64,
    /// `(α, (2α²/3)(λα²/π)^{3/2} ∫v e^{−λα²y²} dy)`.
    pub scaled: Vec<(f64, f64)>,
    /// Envelope of `|v(y) + λy²|` for small `y`.
    pub small_y: Envelope,
}

/// `v(s)` on the given radii.
///
/// With `h_x(z) = −g/|x−z|²` one has `⟨h_x|φ⟩ = V(x)/2`, so
/// `v(y) = H(y) q(y) + ½∫ψ(x)ψ(x+y)(V(x) − V(x−y)) dx`; the three-centre
/// integral is done in cylindrical coordinates about `y`.
pub fn v_profile(kernel: &WeightKernel, s: &[f64]) -> Result<Vec<f64>> {
    let sol = kernel.sol;
    let h = sol
        .grid
        .spacing()
        .ok_or_else(|| Error::Parameter("the v-integral needs a uniform electron grid".into()))?;
    let psi = EvenInterpolator::new(&sol.psi.values, h, Tail::Zero);
    let pot = EvenInterpolator::new(&sol.v_eff.values, h, Tail::InverseR);
    let r = sol.grid.r_max.min(30.0);
    let panels = r.ceil() as usize;
    let (rho, wr) = panel_rule(0.0, r, panels, 12);
    let (t, wt) = panel_rule(-r, r, 2 * panels, 12);
    let mut pts: Vec<[f64; 5]> = Vec::with_capacity(rho.len() * t.len());
    for (p, wp) in rho.iter().zip(&wr) {
        for (z, wz) in t.iter().zip(&wt) {
            let rr = (p * p + z * z).sqrt();
            let ps = psi.eval(rr);
            if ps == 0.0 {
                continue;
            }
            pts.push([2.0 * PI * p * wp * wz * ps, pot.eval(rr), p * p, *z, 0.0]);
        }
    }
    let peak = pts.iter().map(|p| p[0].abs()).fold(0.0, f64::max);
    pts.retain(|p| p[0].abs() > 1e-24 * peak);
    let hs = autocorrelation_at(sol, s);
    let v = s
        .par_iter()
        .zip(&hs)
        .map(|(&s, &hv)| {
            let j: f64 = pts
                .iter()
                .map(|p| {
                    let plus = (p[2] + (p[3] + s).powi(2)).sqrt();
                    let minus = (p[2] + (p[3] - s).powi(2)).sqrt();
                    p[0] * psi.eval(plus) * (p[1] - pot.eval(minus))
                })
                .sum();
            hv * kernel.q(s) + 0.5 * j
        })
        .collect();
    Ok(v)
}

fn panel_rule(a: f64, b: f64, panels: usize, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let width = (b - a) / panels as f64;
    let mut x = Vec::with_capacity(panels * nodes);
    let mut w = Vec::with_capacity(panels * nodes);
    for i in 0..panels {
        let (xi, wi) = gauss_legendre_on(nodes, a + i as f64 * width, a + (i + 1) as f64 * width);
        x.extend(xi);
        w.extend(wi);
    }
    (x, w)
}

/// Evaluate `v` on the radii of `grid` and the scaled integrals over an
/// α-ladder; the small-y envelope is fitted on `[0.01, 0.1]`.
pub fn minus_three_halves(kernel: &WeightKernel, grid: &YGrid, alphas: &[f64]) -> Result<ThreeHalvesReport> {
    let v = v_profile(kernel, &grid.s)?;
    let lambda = kernel.sol.lambda_gauss;
    let scaled = alphas
        .iter()
        .map(|&a| {
            let b = lambda * a * a;
            let integral: f64 =
                grid.s.iter().zip(&grid.s_weights).zip(&v).map(|((s, w), v)| 4.0 * PI * w * v * (-b * s * s).exp()).sum();
            (a, 2.0 * a * a / 3.0 * (b / PI).powf(1.5) * integral)
        })
        .collect();
    let dev: Vec<f64> = grid.s.iter().zip(&v).map(|(s, v)| v + lambda * s * s).collect();
    let small_y = envelope_fit(&grid.s, &dev, 0.01, 0.1)?;
    Ok(ThreeHalvesReport { s: grid.s.clone(), v, lambda, scaled, small_y })
}

/// Certificate that `q(s) = ‖φ‖² − (φ∗φ)(s)` is monotone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QCertificate {
    /// Radii.
    pub s: Vec<f64>,
    /// `q(s)`.
    pub q: Vec<f64>,
    /// Largest decrease between consecutive nodes (0 if monotone).
    pub max_decrease: f64,
    /// `min q(s)/s²` over `s ≤ 1`.
    pub c0: f64,
    /// `q(s_max)/‖φ‖²`.
    pub limit_ratio: f64,
}

/// Sample `q` and certify monotonicity; a decrease beyond `1e−10` is
/// reported as a resolution error.
pub fn q_monotonicity(kernel: &WeightKernel, s: &[f64]) -> Result<QCertificate> {
    let q: Vec<f64> = s.par_iter().map(|&s| kernel.q(s)).collect();
    let max_decrease = q.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max);
    if max_decrease > 1e-10 {
        return Err(Error::Resolution(format!("q decreases by {max_decrease:.3e}")));
    }
    let c0 = s.iter().zip(&q).filter(|(s, _)| **s <= 1.0).map(|(s, q)| q / (s * s)).fold(f64::INFINITY, f64::min);
    let limit_ratio = q.last().copied().unwrap_or(0.0) / kernel.phi_norm_sq();
    Ok(QCertificate { s: s.to_vec(), q, max_decrease, c0, limit_ratio })
}

/// `m₄(b) = ∫₀¹ x⁴ cos(bx) dx`.
fn m4(b: f64) -> f64 {
    if b.abs() < 2.0 {
        let b2 = b * b;
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 0..30 {
            sum += term / (2 * n + 5) as f64;
            term *= -b2 / ((2 * n + 1) * (2 * n + 2)) as f64;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        let (sn, cs) = b.sin_cos();
        sn * (1.0 / b - 12.0 / b.powi(3) + 24.0 / b.powi(5)) + cs * (4.0 / b.powi(2) - 24.0 / b.powi(4))
    }
}

/// `∫₀¹ w(t) ⟨φ|e^{−ty∇}(y∇)³(P∇)φ⟩ dt` for `y = s ŷ`, `P·ŷ = p cos γ`.
fn third_order_integral(kernel: &WeightKernel, p: f64, s: f64, cos_g: f64, weight: impl Fn(f64) -> f64) -> f64 {
    let (t, w) = gauss_legendre_on(128, 0.0, 1.0);
    let inner = |tt: f64| -> f64 {
        kernel.kq.iter().zip(&kernel.mq).map(|(k, m)| m * k.powi(4) * m4(tt * k * s)).sum::<f64>()
    };
    let integral: f64 = t.iter().zip(&w).map(|(t, w)| w * weight(*t) * inner(*t)).sum();
    s.powi(3) * p * cos_g * integral
}

/// `g_P(y) = −(2/M)∫₀¹ ds ⟨φ|e^{−sy∇}(y∇)³(P∇)φ⟩` on `(s, cos γ)` nodes,
/// in the Fourier representation with Gauss quadrature in the interpolation
/// variable.
pub fn phase_g(kernel: &WeightKernel, p: f64, nodes: &[(f64, f64)]) -> Vec<f64> {
    let m = kernel.sol.m_lp;
    nodes.par_iter().map(|&(s, c)| -2.0 / m * third_order_integral(kernel, p, s, c, |_| 1.0)).collect()
}

/// `α²Im⟨φ_P|e^{−y∇}φ_P⟩ − P·y` in closed form on `(s, cos γ)` nodes.
pub fn phase_remainder(kernel: &WeightKernel, p: f64, nodes: &[(f64, f64)]) -> Vec<f64> {
    let m = kernel.sol.m_lp;
    nodes
        .par_iter()
        .map(|&(s, c)| {
            let mut jb = [0.0; 2];
            let first: f64 = kernel
                .kq
                .iter()
                .zip(&kernel.mq)
                .map(|(k, mm)| {
                    sph_bessel_array(1, k * s, &mut jb);
                    mm * k * jb[1]
                })
                .sum();
            2.0 / m * p * c * first - p * s * c
        })
        .collect()
}

/// The same remainder as the Taylor integral with weight `(1−t)²/2`.
pub fn phase_remainder_quadrature(kernel: &WeightKernel, p: f64, nodes: &[(f64, f64)]) -> Vec<f64> {
    let m = kernel.sol.m_lp;
    nodes
        .par_iter()
        .map(|&(s, c)| -2.0 / m * third_order_integral(kernel, p, s, c, |t| 0.5 * (1.0 - t).powi(2)))
        .collect()
}

/// `|⟨φ|(y∇)(P∇)φ⟩ + (P·y) M/2|` per unit `P·y`.
pub fn phase_identity_residual(kernel: &WeightKernel) -> f64 {
    (-kernel.grad_sq / 3.0 + kernel.sol.m_lp / 2.0).abs()
}
