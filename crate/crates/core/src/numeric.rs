//! Log-domain helpers and compensated summation.

use crate::scalar::Scalar;

/// Logistic function, evaluated without overflow for large |x|.
#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// `ln(p / (1 - p))`.
#[inline]
pub fn logit<S: Scalar>(p: S) -> S {
    p.ln() - (-p).ln_1p()
}

/// `ln(1 - e^x)` for `x <= 0`. Returns `-inf` at `x = 0`.
#[inline]
pub fn ln_one_minus_exp<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        return S::neg_infinity();
    }
    // Mächler's switch point ln 2 keeps both branches accurate.
    if x > -S::LN_2() {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(e^a + e^b)`; `-inf` operands are absorbed.
#[inline]
pub fn log_add_exp<S: Scalar>(a: S, b: S) -> S {
    if a == S::neg_infinity() {
        return b;
    }
    if b == S::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{x_i}` with max-shift. Empty or all `-inf` input gives `-inf`.
pub fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
    if max == S::neg_infinity() {
        return max;
    }
    let mut acc = NeumaierSum::default();
    for &x in xs {
        acc.add((x - max).exp());
    }
    max + acc.total().ln()
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum<S> {
    sum: S,
    comp: S,
}

impl<S: Scalar> NeumaierSum<S> {
    #[inline]
    pub fn add(&mut self, x: S) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Merges another partial sum into this one.
    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn total(&self) -> S {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_one_minus_exp_matches_naive_away_from_zero() {
        for x in [-1e-10, -1e-3, -0.5, -0.7, -1.0, -5.0, -40.0] {
            let naive = (1.0 - f64::exp(x)).ln();
            assert_relative_eq!(ln_one_minus_exp(x), naive, max_relative = 1e-6);
        }
        assert_eq!(ln_one_minus_exp(0.0), f64::NEG_INFINITY);
        // tiny arguments where the naive form loses everything
        assert_relative_eq!(ln_one_minus_exp(-1e-300f64), (1e-300f64).ln(), max_relative = 1e-12);
    }

    #[test]
    fn sigmoid_and_logit_invert() {
        for p in [1e-9, 0.02, 0.5, 0.93, 1.0 - 1e-9] {
            assert_relative_eq!(sigmoid(logit(p)), p, max_relative = 1e-9);
        }
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64) >= 0.0);
        assert_eq!(sigmoid(800.0f64), 1.0);
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_relative_eq!(log_sum_exp(&[0.0, f64::NEG_INFINITY]), 0.0);
        assert_relative_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln());
        assert_relative_eq!(log_add_exp(2f64.ln(), 3f64.ln()), 5f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let mut s = NeumaierSum::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.total(), 2.0);
    }
}
