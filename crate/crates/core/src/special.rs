//! Special functions and fixed quadrature rules used throughout the crate.
//!
//! Everything here is deterministic and allocation-light: spherical Bessel
//! functions by Miller/upward recurrence, Legendre functions of the first and
//! second kind, Gauss–Legendre nodes, tanh–sinh quadrature for integrands with
//! endpoint singularities, and Dawson's integral.

use std::f64::consts::PI;

/// Spherical Bessel functions `j_0(x) ..= j_lmax(x)` written into `out`.
///
/// Upward recurrence is used when `x` exceeds `lmax` (where it is stable);
/// otherwise Miller's downward recurrence is normalized against the closed
/// forms of `j_0` and `j_1`.
pub fn sph_bessel_array(lmax: usize, x: f64, out: &mut [f64]) {
    assert!(out.len() > lmax);
    let x = x.abs();
    if x == 0.0 {
        out[0] = 1.0;
        out[1..=lmax].iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let (s, c) = x.sin_cos();
    let j0 = sinc(x);
    if lmax == 0 {
        out[0] = j0;
        return;
    }
    if x > lmax as f64 + 1.0 {
        let j1 = s / (x * x) - c / x;
        out[0] = j0;
        out[1] = j1;
        for l in 1..lmax {
            out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        }
        return;
    }
    let start = lmax + 30 + (10.0 * (lmax as f64 + x)).sqrt() as usize;
    let mut f_next = 0.0;
    let mut f = 1e-100;
    for l in (1..=start).rev() {
        if l <= lmax {
            out[l] = f;
        }
        let f_prev = (2 * l + 1) as f64 / x * f - f_next;
        f_next = f;
        f = f_prev;
        if f.abs() > 1e200 {
            f *= 1e-200;
            f_next *= 1e-200;
            if l <= lmax {
                out[l..=lmax].iter_mut().for_each(|v| *v *= 1e-200);
            }
        }
    }
    out[0] = f;
    let norm = out[0].abs().max(out[1].abs());
    out[..=lmax].iter_mut().for_each(|v| *v /= norm);
    let scale = if x < 1.0 || j0.abs() > 0.3 * (1.0 / x) {
        j0 / out[0]
    } else {
        let j1 = s / (x * x) - c / x;
        (j0 * out[0] + j1 * out[1]) / (out[0] * out[0] + out[1] * out[1])
    };
    out[..=lmax].iter_mut().for_each(|v| *v *= scale);
}

/// Single spherical Bessel function `j_l(x)`.
pub fn sph_bessel(l: usize, x: f64) -> f64 {
    let mut buf = vec![0.0; l + 1];
    sph_bessel_array(l, x, &mut buf);
    buf[l]
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}

/// `1 − j_0(x)` without cancellation at small `x`.
pub fn one_minus_j0(x: f64) -> f64 {
    if x.abs() < 0.2 {
        let x2 = x * x;
        x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0))))
    } else {
        1.0 - x.sin() / x
    }
}

/// Legendre polynomials `P_0(t) ..= P_lmax(t)`.
pub fn legendre_p_array(lmax: usize, t: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if lmax == 0 {
        return;
    }
    out[1] = t;
    for l in 1..lmax {
        out[l + 1] = ((2 * l + 1) as f64 * t * out[l] - l as f64 * out[l - 1]) / (l + 1) as f64;
    }
}

/// Legendre functions of the second kind `Q_0(χ) ..= Q_lmax(χ)` for `χ > 1`,
/// parameterized by `d = χ − 1 > 0` so that arguments near the diagonal keep
/// full relative precision.
pub fn legendre_q_array(lmax: usize, d: f64, out: &mut [f64]) {
    assert!(d > 0.0, "legendre_q_array requires chi > 1");
    let chi = 1.0 + d;
    let q0 = 0.5 * (2.0 / d).ln_1p();
    out[0] = q0;
    if lmax == 0 {
        return;
    }
    // acosh(1 + d) without cancellation.
    let mu = (d + (d * (d + 2.0)).sqrt()).ln_1p();
    if lmax as f64 * mu < 2.0 {
        out[1] = chi * q0 - 1.0;
        for l in 1..lmax {
            out[l + 1] = ((2 * l + 1) as f64 * chi * out[l] - l as f64 * out[l - 1]) / (l + 1) as f64;
        }
        return;
    }
    let start = lmax + (40.0 / mu) as usize + 10;
    let mut q_next = 0.0;
    let mut q = 1e-280;
    for l in (1..=start).rev() {
        if l <= lmax {
            out[l] = q;
        }
        let q_prev = ((2 * l + 1) as f64 * chi * q - (l + 1) as f64 * q_next) / l as f64;
        q_next = q;
        q = q_prev;
        if q.abs() > 1e200 {
            q *= 1e-200;
            q_next *= 1e-200;
            if l <= lmax {
                out[l..=lmax].iter_mut().for_each(|v| *v *= 1e-200);
            }
        }
    }
    let scale = q0 / q;
    out[1..=lmax].iter_mut().for_each(|v| *v *= scale);
    out[0] = q0;
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 1..n {
                let p2 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    (x.iter().map(|t| m + h * t).collect(), w.iter().map(|v| v * h).collect())
}

/// Tanh–sinh (double exponential) quadrature of `f` over `[a, b]`.
///
/// The integrand receives the abscissa together with its distances to the
/// left and right endpoints, computed without cancellation, so that
/// integrable endpoint singularities can be evaluated accurately.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(mut f: F, a: f64, b: f64, step: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    let tmax = 3.5;
    let n = (tmax / step).ceil() as i64;
    for j in -n..=n {
        let t = j as f64 * step;
        let u = 0.5 * PI * t.sinh();
        let ch = u.cosh();
        // 1 − tanh(u) and 1 + tanh(u) evaluated stably.
        let e = (-2.0 * u.abs()).exp();
        let small = 2.0 * e / (1.0 + e);
        let (dl, dr) = if u >= 0.0 { (2.0 - small, small) } else { (small, 2.0 - small) };
        let wgt = 0.5 * PI * t.cosh() / (ch * ch);
        let (xl, xr) = (half * dl, half * dr);
        if xl <= 0.0 || xr <= 0.0 {
            continue;
        }
        sum += wgt * f(a + xl, xl, xr);
    }
    sum * half * step
}

/// Dawson's integral `F(x) = e^{-x²} ∫₀ˣ e^{t²} dt`.
///
/// Rybicki's exponentially convergent sampling formula with step 0.2 for
/// moderate arguments, a Maclaurin series near the origin and an asymptotic
/// series far out.
pub fn dawson(x: f64) -> f64 {
    let ax = x.abs();
    let sign = x.signum();
    if ax < 0.2 {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        for n in 1..12 {
            term *= -2.0 * x2 / (2 * n + 1) as f64;
            sum += term;
        }
        return sum;
    }
    if ax > 40.0 {
        let y = 1.0 / (2.0 * ax * ax);
        return sign / (2.0 * ax) * (1.0 + y * (1.0 + 3.0 * y * (1.0 + 5.0 * y)));
    }
    let h = 0.2;
    let n0 = 2 * ((0.5 * ax / h).round() as i64);
    let xp = ax - n0 as f64 * h;
    let mut sum = 0.0;
    for k in 0..40 {
        let m = (2 * k + 1) as f64;
        let plus = (-(xp - m * h).powi(2)).exp() / (n0 as f64 + m);
        let minus = if n0 as f64 - m != 0.0 {
            (-(xp + m * h).powi(2)).exp() / (n0 as f64 - m)
        } else {
            0.0
        };
        sum += plus + minus;
    }
    sign * sum / PI.sqrt()
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    statrs::function::erf::erf(x)
}
