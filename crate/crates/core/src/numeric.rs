//! Small numeric helpers shared across modules: compensated summation and a
//! stable `log cosh`.

/// Error-free transformation: returns `(s, e)` with `s = fl(a + b)` and
/// `a + b = s + e` exactly (Knuth two-sum).
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Kahan–Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.sum, x);
        self.sum = s;
        self.comp += e;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Unevaluated double-double pair used for long monotone prefix sums where
/// sequential rounding error would spoil certified accuracy.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// Add a single f64, renormalising the pair.
    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        let lo = self.lo + e;
        let (hi, lo) = two_sum(s, lo);
        self.hi = hi;
        self.lo = lo;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// `ln cosh z` without overflow for large `|z|`.
#[inline]
pub fn log_cosh(z: f64) -> f64 {
    let a = z.abs();
    // cosh z = e^a (1 + e^{-2a}) / 2
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `ln(sum_i e^{x_i})`, stable for widely spread exponents.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add((x - max).exp());
    }
    max + acc.value().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::new();
        k.add(1e16);
        for _ in 0..10_000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 10_000.0);
    }

    #[test]
    fn double_double_prefix_sums_are_monotone() {
        let mut dd = DoubleDouble::default();
        let mut prev = 0.0;
        for k in 1..100_000u64 {
            dd.add((k as f64).powf(-2.0));
            let v = dd.value();
            assert!(v >= prev);
            prev = v;
        }
        assert!((prev - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-4);
    }

    #[test]
    fn log_cosh_matches_naive_in_safe_range() {
        for z in [-3.0, -0.5, 0.0, 0.1, 2.0, 20.0] {
            let naive = (z as f64).cosh().ln();
            assert!((log_cosh(z) - naive).abs() < 1e-12, "z={z}");
        }
        // No overflow far outside the naive range.
        assert!((log_cosh(1e4) - (1e4 - std::f64::consts::LN_2)).abs() < 1e-9);
    }
}
