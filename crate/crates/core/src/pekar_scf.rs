//! Self-consistent solution of the Pekar (Choquard) problem.
//!
//! The coupling function is `h_x(y) = −g/|x−y|²`. The optimal field is
//! `φ = g |ψ|² ∗ |x|⁻²`, the polarization potential is `V^φ = −2c U` with
//! the Choquard coefficient `c = g²π³` and the Newton potential
//! `U = |ψ|² ∗ |x|⁻¹`, and the electronic
//! functional is `ℰ(ψ) = ‖∇ψ‖² − c ∬ |ψ(x)|²|ψ(y)|²/|x−y|`.
//!
//! [`Units::phonon`] uses `g = 1/(2π²)` (so `c = 1/(4π)`); [`Units::reduced`]
//! uses `g = π^{-3/2}` (`c = 1`), where all length scales are `4π` times
//! smaller and energies `(4π)²` times larger.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::{radial_fd_kinetic_form, radial_fd_operator};
use crate::radial_core::{
    build_grid, hankel_transform, GridScheme, RadialFunction, RadialGrid, INVERSE_SQUARE_COMPOSITION,
};
use crate::special::{dawson, erf, sinc};
use crate::{Error, Result};

/// Physical units, fixed by the coupling constant `g` of `h_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Units {
    /// Coupling constant `g` in `h_x(y) = −g/|x−y|²`.
    pub coupling: f64,
}

impl Units {
    /// `g = 1/(2π²)`.
    pub fn phonon() -> Self {
        Self { coupling: 1.0 / (2.0 * PI * PI) }
    }

    /// `g = π^{-3/2}`, for which the Choquard coefficient is one.
    pub fn reduced() -> Self {
        Self { coupling: PI.powf(-1.5) }
    }

    /// Choquard coefficient `c = g² π³`.
    pub fn choquard(&self) -> f64 {
        self.coupling * self.coupling * INVERSE_SQUARE_COMPOSITION
    }

    /// Length unit relative to reduced units (`4π` in phonon units).
    pub fn length_scale(&self) -> f64 {
        1.0 / self.choquard()
    }
}

impl Default for Units {
    fn default() -> Self {
        Self::reduced()
    }
}

/// Settings of the self-consistent iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScfConfig {
    /// Damping `θ` of `V ← (1−θ)V_old + θV_new`.
    pub mixing: f64,
    /// Absolute tolerance on the potential residual and eigenvalue increment.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Units of the problem.
    pub units: Units,
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self { mixing: 0.5, tol: 1e-10, max_iter: 500, units: Units::reduced() }
    }
}

/// Converged Pekar minimizer with its scalar constants.
#[derive(Clone, Debug)]
pub struct PekarSolution {
    /// Units the solution is expressed in.
    pub units: Units,
    /// Electron grid.
    pub grid: Arc<RadialGrid>,
    /// Momentum grid used for Fourier quantities.
    pub kgrid: Arc<RadialGrid>,
    /// Ground state `ψ > 0`, `‖ψ‖ = 1`.
    pub psi: RadialFunction,
    /// Optimal field `φ`.
    pub phi: RadialFunction,
    /// Polarization potential `V^φ`.
    pub v_eff: RadialFunction,
    /// Converged self-consistent input potential the solution was built
    /// from (differs from `v_eff` by at most the SCF tolerance).
    pub scf_potential: Vec<f64>,
    /// Unitary transform `Ψ(k)` of `ψ` on `kgrid`.
    pub psi_hat: RadialFunction,
    /// Unitary transform `Φ(k) = (2π)^{-3/2} g (2π²/k) ρ̂(k)` of `φ`.
    pub phi_hat: RadialFunction,
    /// Density transform `ρ̂(k) = ∫ |ψ|² e^{−ik·x} dx`, `ρ̂(0) = 1`.
    pub rho_hat: Vec<f64>,
    /// Pekar energy `e^Pek`.
    pub e_pek: f64,
    /// Electronic eigenvalue `λ^Pek = e^Pek − ‖φ‖²`.
    pub lambda_pek: f64,
    /// `‖∇ψ‖²`.
    pub kinetic: f64,
    /// `‖φ‖²`.
    pub phi_norm_sq: f64,
    /// `‖∇φ‖²`.
    pub grad_phi_sq: f64,
    /// `‖Δφ‖²`.
    pub laplacian_phi_sq: f64,
    /// Landau–Pekar mass `(2/3)‖∇φ‖²`.
    pub m_lp: f64,
    /// Gaussian rate `‖∇φ‖²/6`.
    pub lambda_gauss: f64,
    /// SCF iterations used.
    pub iterations: usize,
    /// Final potential residual.
    pub residual: f64,
    /// Potential residual after each iteration.
    pub history: Vec<f64>,
}

/// Default momentum grid paired with a position grid: uniform, 3000 nodes,
/// `k_max = 60·(40/r_max)` (i.e. 60 and spacing 0.02 for the default grid).
pub fn default_momentum_grid(grid: &RadialGrid) -> Result<RadialGrid> {
    build_grid(3000, 60.0 * 40.0 / grid.r_max, GridScheme::Uniform)
}

/// Width `a` of the normalized Gaussian `(πa²)^{-3/4} e^{−r²/(2a²)}` that
/// minimizes `ℰ`, and the minimum `−c²/(3π)`.
pub fn gaussian_trial(units: &Units) -> (f64, f64) {
    let c = units.choquard();
    (3.0 * PI.sqrt() / (c * 2f64.sqrt()), -c * c / (3.0 * PI))
}

fn uniform_spacing(grid: &RadialGrid) -> Result<f64> {
    grid.spacing()
        .ok_or_else(|| Error::Parameter("the finite-difference solver needs a uniform grid".into()))
}

/// Newton potential `U = ρ ∗ |x|⁻¹` of a radial density by Numerov
/// integration of `u'' = −4π r ρ`, `u = rU`, with `u(0) = 0` and
/// `u(r_max) = ∫ρ`.
pub fn newton_potential(grid: &RadialGrid, rho: &[f64]) -> Result<Vec<f64>> {
    let h = uniform_spacing(grid)?;
    let n = grid.n;
    let q: f64 = 4.0 * PI * grid.integrate(rho);
    let f: Vec<f64> = grid.r.iter().zip(rho).map(|(r, p)| -4.0 * PI * r * p).collect();
    let fm = |i: isize| if i < 0 { 0.0 } else { f[i as usize] };
    // Unknowns u_1..u_{n−1} (indices 0..n−2); u_n = q.
    let m = n - 1;
    let mut rhs: Vec<f64> = (0..m)
        .map(|i| h * h / 12.0 * (fm(i as isize - 1) + 10.0 * f[i] + f[i + 1]))
        .collect();
    rhs[m - 1] -= q;
    // Thomas algorithm for tridiag(1, −2, 1).
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = 1.0 / -2.0;
    d[0] = rhs[0] / -2.0;
    for i in 1..m {
        let den = -2.0 - c[i - 1];
        c[i] = 1.0 / den;
        d[i] = (rhs[i] - d[i - 1]) / den;
    }
    let mut u = vec![0.0; n];
    u[n - 1] = q;
    u[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        u[i] = d[i] - c[i] * u[i + 1];
    }
    Ok(u.iter().zip(&grid.r).map(|(u, r)| u / r).collect())
}

/// Pieces of the Fourier route shared by `φ` and `V^φ`.
struct DensityTransform {
    rho_hat: Vec<f64>,
    /// Gaussian width matched to the second moment.
    a: f64,
}

fn density_transform(grid: &RadialGrid, kgrid: &RadialGrid, rho: &[f64]) -> DensityTransform {
    let unitary = hankel_transform(rho, grid, kgrid, 0);
    let scale = 4.0 * PI * (PI / 2.0).sqrt();
    let rho_hat: Vec<f64> = unitary.iter().map(|v| v * scale).collect();
    let q = 4.0 * PI * grid.integrate(rho);
    let r2: Vec<f64> = grid.r.iter().zip(rho).map(|(r, p)| r * r * p).collect();
    let second = 4.0 * PI * grid.integrate(&r2) / q;
    DensityTransform { rho_hat, a: (2.0 * second / 3.0).sqrt() }
}

/// `∫₀^∞ (ρ̂ − e^{−a²k²/4})(k) · kernel(k) dk` by the trapezoid rule on the
/// uniform momentum grid (the integrand vanishes at `k = 0`).
fn remainder_integral<F: Fn(f64) -> f64>(kgrid: &RadialGrid, dt: &DensityTransform, kernel: F) -> f64 {
    let dk = kgrid.r[0];
    let n = kgrid.n;
    let mut acc = 0.0;
    for (j, (&k, &rh)) in kgrid.r.iter().zip(&dt.rho_hat).enumerate() {
        let wgt = if j + 1 == n { 0.5 * dk } else { dk };
        acc += wgt * (rh - (-dt.a * dt.a * k * k / 4.0).exp()) * kernel(k);
    }
    acc
}

/// Optimal field `φ = g |ψ|² ∗ |x|⁻²` on the grid of `psi`.
///
/// Computed as `g ∫ ρ̂(k) j₀(kr) k dk`, with the Gaussian of matching second
/// moment treated in closed form (`(2g/(a r)) F(r/a)`, `F` Dawson's
/// integral) so that the remaining trapezoid sum converges spectrally.
pub fn pekar_field(psi: &RadialFunction, units: &Units) -> Result<RadialFunction> {
    let kgrid = default_momentum_grid(&psi.grid)?;
    let rho: Vec<f64> = psi.values.iter().map(|p| p * p).collect();
    let g = units.coupling;
    if rho.iter().all(|v| *v == 0.0) {
        return RadialFunction::new(psi.grid.clone(), vec![0.0; psi.grid.n], 0);
    }
    let dt = density_transform(&psi.grid, &kgrid, &rho);
    let values = psi
        .grid
        .r
        .iter()
        .map(|&r| {
            let gauss = 2.0 * g / (dt.a * r) * dawson(r / dt.a);
            gauss + g * remainder_integral(&kgrid, &dt, |k| k * sinc(k * r))
        })
        .collect();
    RadialFunction::new(psi.grid.clone(), values, 0)
}

/// Polarization potential `V^φ[ψ]` by the Newton route (`−2c U`, with the
/// verified composition constant inside `c`), cross-checked against the
/// momentum-space composition `V̂ = −2g (2π²/k) φ̂` of the two
/// inverse-square kernels. Disagreement beyond `1e−6` relative (on
/// `r ≤ r_max/2`) is a convention error.
pub fn effective_potential(psi: &RadialFunction, units: &Units) -> Result<RadialFunction> {
    let rho: Vec<f64> = psi.values.iter().map(|p| p * p).collect();
    if rho.iter().all(|v| *v == 0.0) {
        return RadialFunction::new(psi.grid.clone(), vec![0.0; psi.grid.n], 0);
    }
    let newton = newton_route(&psi.grid, &rho, units)?;
    let composed = composition_route(&psi.grid, &rho, units)?;
    let scale = newton.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let bulk = psi.grid.r_max / 2.0;
    let worst = psi
        .grid
        .r
        .iter()
        .zip(newton.iter().zip(&composed))
        .filter(|(r, _)| **r <= bulk)
        .map(|(_, (a, b))| (a - b).abs())
        .fold(0.0f64, f64::max)
        / scale;
    if worst > 1e-6 {
        return Err(Error::Convention(format!(
            "Newton and momentum-composition potentials differ by {worst:.3e} relative"
        )));
    }
    RadialFunction::new(psi.grid.clone(), newton, 0)
}

/// `V = −2 g² π³ U` with `U` the Newton potential of `ρ`.
pub fn newton_route(grid: &RadialGrid, rho: &[f64], units: &Units) -> Result<Vec<f64>> {
    let u = newton_potential(grid, rho)?;
    let c = units.choquard();
    Ok(u.iter().map(|u| -2.0 * c * u).collect())
}

/// `V(r) = (1/(2π²)) ∫ V̂(k) j₀(kr) k² dk` with `V̂ = −2g (2π²/k)·g (2π²/k) ρ̂`,
/// the product of the two inverse-square transforms; no composition
/// constant enters.
pub fn composition_route(grid: &RadialGrid, rho: &[f64], units: &Units) -> Result<Vec<f64>> {
    let kgrid = default_momentum_grid(grid)?;
    let dt = density_transform(grid, &kgrid, rho);
    let g = units.coupling;
    // (1/(2π²)) · (−2g²·4π⁴/k²) · k² = −4π² g².
    let pref = -4.0 * PI * PI * g * g;
    // Closed-form Gaussian part: pref ∫ e^{−a²k²/4} j₀(kr) dk = pref (π/2) erf(r/a)/r.
    Ok(grid
        .r
        .iter()
        .map(|&r| pref * (0.5 * PI * erf(r / dt.a) / r + remainder_integral(&kgrid, &dt, |k| sinc(k * r))))
        .collect())
}

/// Autocorrelation `H(s) = ∫ ψ(x) ψ(x + s) dx = 4π ∫ Ψ(k)² j₀(ks) k² dk`,
/// sampled on the electron grid.
pub fn psi_autocorrelation(sol: &PekarSolution) -> RadialFunction {
    let values = autocorrelation_at(sol, &sol.grid.r);
    RadialFunction { grid: sol.grid.clone(), values, sector: 0 }
}

/// `H(s)` at arbitrary separations.
pub fn autocorrelation_at(sol: &PekarSolution, s: &[f64]) -> Vec<f64> {
    let wpsi: Vec<f64> = sol.kgrid.w.iter().zip(&sol.psi_hat.values).map(|(w, p)| w * p * p).collect();
    s.iter()
        .map(|&s| 4.0 * PI * sol.kgrid.r.iter().zip(&wpsi).map(|(k, a)| a * sinc(k * s)).sum::<f64>())
        .collect()
}

/// Lowest eigenpair of `−Δ + V` in the `L = 0` sector; returns `λ`, `ψ`
/// normalized to `4π Σ w ψ² = 1`, and `‖∇ψ‖²`.
pub fn ground_state(grid: &RadialGrid, v: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
    let h = uniform_spacing(grid)?;
    let omega = grid.line_weights();
    let op = radial_fd_operator(h, &omega, 0, v);
    let (lambda, mut vec) = op.lowest_eigenpair()?;
    let scale = 1.0 / (4.0 * PI).sqrt();
    vec.iter_mut().for_each(|x| *x *= scale);
    let kinetic = 4.0 * PI * radial_fd_kinetic_form(h, &omega, 0, &vec);
    let peak = vec.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut psi = Vec::with_capacity(grid.n);
    for ((x, o), r) in vec.iter().zip(&omega).zip(&grid.r) {
        if *x < -1e-12 * peak {
            return Err(Error::Solver("ground state changed sign".into()));
        }
        psi.push(x.abs() / (o.sqrt() * r));
    }
    Ok((lambda, psi, kinetic))
}

/// Solve the Pekar problem by damped potential mixing.
pub fn solve_pekar(grid: &RadialGrid, cfg: &ScfConfig) -> Result<PekarSolution> {
    if !(cfg.mixing > 0.0 && cfg.mixing <= 1.0) {
        return Err(Error::Parameter(format!("mixing must lie in (0, 1], got {}", cfg.mixing)));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {}", cfg.tol)));
    }
    uniform_spacing(grid)?;
    let units = cfg.units;
    let (a, _) = gaussian_trial(&units);
    let norm = (PI * a * a).powf(-0.75);
    let rho0: Vec<f64> = grid.r.iter().map(|r| (norm * (-r * r / (2.0 * a * a)).exp()).powi(2)).collect();
    let mut v = newton_route(grid, &rho0, &units)?;
    let mut lambda_prev = f64::INFINITY;
    let mut history = Vec::new();
    for it in 1..=cfg.max_iter {
        let (lambda, psi, _) = ground_state(grid, &v)?;
        let rho: Vec<f64> = psi.iter().map(|p| p * p).collect();
        let v_new = newton_route(grid, &rho, &units)?;
        let res = v.iter().zip(&v_new).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dl = (lambda - lambda_prev).abs();
        history.push(res);
        if res < cfg.tol && dl < cfg.tol {
            return solution_from_potential(grid, &units, v_new, it, res, history);
        }
        lambda_prev = lambda;
        for (a, b) in v.iter_mut().zip(&v_new) {
            *a = (1.0 - cfg.mixing) * *a + cfg.mixing * b;
        }
    }
    let residual = *history.last().unwrap_or(&f64::NAN);
    Err(Error::NotConverged { iterations: cfg.max_iter, residual, history })
}

/// Assemble a [`PekarSolution`] from a converged self-consistent potential:
/// the ground state of `−Δ + V`, its field, transforms and constants.
pub fn solution_from_potential(
    grid: &RadialGrid,
    units: &Units,
    v: Vec<f64>,
    iterations: usize,
    residual: f64,
    history: Vec<f64>,
) -> Result<PekarSolution> {
    let grid = Arc::new(grid.clone());
    let kgrid = Arc::new(default_momentum_grid(&grid)?);
    let (lambda, psi_v, kinetic) = ground_state(&grid, &v)?;
    let psi = RadialFunction::new(grid.clone(), psi_v, 0)?;
    let v_eff = effective_potential(&psi, units)?;
    let rho: Vec<f64> = psi.values.iter().map(|p| p * p).collect();
    // ‖φ‖² = c ∫ρU = −½ ∫ρV.
    let vrho: Vec<f64> = rho.iter().zip(&v_eff.values).map(|(p, v)| p * v).collect();
    let potential_energy = 4.0 * PI * grid.integrate(&vrho);
    let phi_norm_sq = -0.5 * potential_energy;
    let e_pek = lambda + phi_norm_sq;
    let phi = pekar_field(&psi, units)?;
    let psi_hat = RadialFunction::new(kgrid.clone(), hankel_transform(&psi.values, &grid, &kgrid, 0), 0)?;
    let dt = density_transform(&grid, &kgrid, &rho);
    let g = units.coupling;
    let phi_hat_v: Vec<f64> = kgrid
        .r
        .iter()
        .zip(&dt.rho_hat)
        .map(|(k, rh)| (2.0 * PI).powf(-1.5) * g * 2.0 * PI * PI / k * rh)
        .collect();
    let phi_hat = RadialFunction::new(kgrid.clone(), phi_hat_v, 0)?;
    let moment = |p: i32| {
        4.0 * PI
            * kgrid
                .w
                .iter()
                .zip(&kgrid.r)
                .zip(&phi_hat.values)
                .map(|((w, k), f)| w * f * f * k.powi(p))
                .sum::<f64>()
    };
    let grad_phi_sq = moment(2);
    let laplacian_phi_sq = moment(4);
    Ok(PekarSolution {
        units: *units,
        grid,
        kgrid,
        psi,
        phi,
        v_eff,
        scf_potential: v,
        psi_hat,
        phi_hat,
        rho_hat: dt.rho_hat,
        e_pek,
        lambda_pek: lambda,
        kinetic,
        phi_norm_sq,
        grad_phi_sq,
        laplacian_phi_sq,
        m_lp: 2.0 / 3.0 * grad_phi_sq,
        lambda_gauss: grad_phi_sq / 6.0,
        iterations,
        residual,
        history,
    })
}

impl PekarSolution {
    /// Relative virial residuals `(|e + ‖∇ψ‖²|, |λ − 3e|, |‖φ‖² + 2e|) / |e|`.
    pub fn virial_residuals(&self) -> [f64; 3] {
        let e = self.e_pek;
        [
            (e + self.kinetic).abs() / e.abs(),
            (self.lambda_pek - 3.0 * e).abs() / e.abs(),
            (self.phi_norm_sq + 2.0 * e).abs() / e.abs(),
        ]
    }

    /// `‖φ‖² = 4π ∫ Φ(k)² k² dk = 2π²g² ∫ ρ̂(k)² dk` (Parseval); the trapezoid
    /// includes the `k = 0` endpoint where `ρ̂ = 1`.
    pub fn phi_norm_sq_fourier(&self) -> f64 {
        let g = self.units.coupling;
        let dk = self.kgrid.r[0];
        let n = self.kgrid.n;
        let sum: f64 = self
            .rho_hat
            .iter()
            .enumerate()
            .map(|(j, r)| if j + 1 == n { 0.5 * dk * r * r } else { dk * r * r })
            .sum();
        2.0 * PI * PI * g * g * (sum + 0.5 * dk)
    }

    /// Radial moment `⟨r^p⟩ = ∫ |ψ|² |x|^p dx`.
    pub fn density_moment(&self, p: i32) -> f64 {
        let f: Vec<f64> = self.grid.r.iter().zip(&self.psi.values).map(|(r, v)| r.powi(p) * v * v).collect();
        4.0 * PI * self.grid.integrate(&f)
    }

    /// Multipole expansion of the field beyond the density,
    /// `φ(r) ≈ (g/r²)(1 + ⟨s²⟩/(3r²) + ⟨s⁴⟩/(5r⁴))`.
    pub fn phi_far_field(&self, r: f64) -> f64 {
        let g = self.units.coupling;
        let (m2, m4) = (self.density_moment(2), self.density_moment(4));
        g / (r * r) * (1.0 + m2 / (3.0 * r * r) + m4 / (5.0 * r.powi(4)))
    }

    /// `‖φ‖²` from the sampled field: quadrature on the grid plus the
    /// multipole tail beyond `r_max`.
    pub fn phi_norm_sq_direct(&self) -> f64 {
        let g = self.units.coupling;
        let (m2, m4) = (self.density_moment(2), self.density_moment(4));
        let big_r = self.grid.r_max;
        let tail = 4.0
            * PI
            * g
            * g
            * (1.0 / big_r
                + 2.0 * m2 / (9.0 * big_r.powi(3))
                + (m2 * m2 / 9.0 + 2.0 * m4 / 5.0) / (5.0 * big_r.powi(5)));
        self.phi.norm_sq() + tail
    }
}
