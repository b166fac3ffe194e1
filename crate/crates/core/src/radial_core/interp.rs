//! High-order interpolation of smooth even radial profiles on uniform grids.

/// Eight-point Lagrange interpolation of samples `f(i·h)`, `i = 1..=n`, of a
/// function that is smooth and even in `r` (so the origin and the mirrored
/// nodes can be used in the stencil). Beyond the last node the value is
/// continued by the supplied far-field rule.
#[derive(Clone, Debug)]
pub struct EvenInterpolator<'a> {
    values: &'a [f64],
    h: f64,
    tail: Tail,
}

/// Continuation of an interpolated profile past the last grid node.
#[derive(Clone, Copy, Debug)]
pub enum Tail {
    /// Identically zero (exponentially decaying profiles).
    Zero,
    /// `c / r` matched to the last sample (Newton potentials).
    InverseR,
}

impl<'a> EvenInterpolator<'a> {
    /// Interpolator over samples at `h, 2h, …, n·h`.
    pub fn new(values: &'a [f64], h: f64, tail: Tail) -> Self {
        assert!(values.len() >= 8);
        Self { values, h, tail }
    }

    fn sample(&self, i: i64) -> f64 {
        // Even extension: f(-i h) = f(i h); index 0 is the origin.
        let j = i.unsigned_abs() as usize;
        self.values[j - 1]
    }

    /// Value at radius `r ≥ 0`.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.values.len();
        let r_last = n as f64 * self.h;
        if r >= r_last {
            return match self.tail {
                Tail::Zero => 0.0,
                Tail::InverseR => self.values[n - 1] * r_last / r,
            };
        }
        let x = r / self.h;
        let base = x.floor() as i64;
        // Nodes base-3 ..= base+4, skipping the origin (not sampled) by
        // shifting the window; clamp at the outer end.
        let mut lo = base - 3;
        if lo + 7 > n as i64 {
            lo = n as i64 - 7;
        }
        let mut nodes = [0i64; 8];
        let mut k = 0;
        let mut i = lo;
        while k < 8 {
            if i != 0 {
                nodes[k] = i;
                k += 1;
            }
            i += 1;
        }
        let mut sum = 0.0;
        for (a, &ia) in nodes.iter().enumerate() {
            let mut l = 1.0;
            for (b, &ib) in nodes.iter().enumerate() {
                if a != b {
                    l *= (x - ib as f64) / (ia - ib) as f64;
                }
            }
            sum += l * self.sample(ia);
        }
        sum
    }
}
