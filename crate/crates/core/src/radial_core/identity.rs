//! The composition constant of two inverse-square kernels,
//! `∫ dz |u−z|⁻² |v−z|⁻² = c / |u−v|`, settled by direct quadrature.

use crate::special::tanh_sinh;

/// Verified value of `c`: `π³`.
pub const INVERSE_SQUARE_COMPOSITION: f64 = std::f64::consts::PI
    * std::f64::consts::PI
    * std::f64::consts::PI;

/// Three-dimensional quadrature of `∫ dz |z|⁻² |z − d·ê|⁻²`, returned
/// multiplied by `d`, i.e. the constant `c`.
///
/// Spherical coordinates centred on the first singular point: the azimuth is
/// integrated exactly (the integrand does not depend on it), the polar
/// variable `σ = 1 − cos θ` and the radius are integrated by nested
/// tanh–sinh rules, splitting the radius at `d` (where the second singularity
/// sits) and mapping `[2d, ∞)` to a finite interval.
pub fn composition_constant_quadrature(d: f64) -> f64 {
    let step = 1.0 / 48.0;
    // For |z| = r with |r − d| = δ, the polar integrand is
    // 1 / (δ² + 2 r d σ), σ ∈ [0, 2].
    let polar = |r: f64, delta: f64| -> f64 {
        tanh_sinh(|_, sigma, _| 1.0 / (delta * delta + 2.0 * r * d * sigma), 0.0, 2.0, step)
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    // Radial measure r² dr cancels |z|⁻².
    let inner = tanh_sinh(|r, _, dr| polar(r, dr), 0.0, d, step);
    let middle = tanh_sinh(|r, dl, _| polar(r, dl), d, 2.0 * d, step);
    // r = 2d/u, dr = 2d/u² du, u ∈ (0, 1].
    let outer = tanh_sinh(
        |u, _, _| {
            let r = 2.0 * d / u;
            polar(r, r - d) * 2.0 * d / (u * u)
        },
        0.0,
        1.0,
        step,
    );
    two_pi * (inner + middle + outer) * d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_pi_cubed() {
        for d in [1.0, 2.0, 0.5] {
            let c = composition_constant_quadrature(d);
            assert!((c / INVERSE_SQUARE_COMPOSITION - 1.0).abs() < 1e-6, "d={d}: {c}");
        }
    }

    #[test]
    fn reciprocal_constant_is_excluded() {
        let c = composition_constant_quadrature(1.0);
        let other = 1.0 / INVERSE_SQUARE_COMPOSITION;
        assert!((c - other).abs() > 30.0);
    }
}
