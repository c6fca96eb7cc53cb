//! Scalar helpers for the logistic distribution.

use libm::{exp, expm1, log1p};

/// Logistic CDF, evaluated without overflow.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `ln Λ(x)`.
pub fn log_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -log1p(exp(-x))
    } else {
        x - log1p(exp(x))
    }
}

/// Inverse logistic CDF.
pub fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

/// `ln(Λ(b) - Λ(a))` for `a < b`, either possibly infinite.
pub fn log_logistic_diff(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return log_logistic(b);
    }
    if b == f64::INFINITY {
        return log_logistic(-a);
    }
    // Λ(b) - Λ(a) = Λ(b) Λ(-a) (1 - e^{a-b})
    log_logistic(b) + log_logistic(-a) + libm::log(-expm1(a - b))
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_matches_naive_form() {
        for &x in &[-30.0, -3.0, -0.5, 0.0, 0.5, 3.0, 30.0] {
            let naive = 1.0 / (1.0 + libm::exp(-x));
            assert!((logistic(x) - naive).abs() < 1e-15);
            assert!((log_logistic(x) - libm::log(naive)).abs() < 1e-12);
        }
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0 && logistic(800.0) == 1.0);
    }

    #[test]
    fn diff_matches_direct_difference() {
        let cases = [(-1.0, 0.5), (0.0, 1.57), (2.0, 2.0001), (-40.0, -39.0)];
        for &(a, b) in &cases {
            let direct = logistic(b) - logistic(a);
            let rel = (libm::exp(log_logistic_diff(a, b)) - direct).abs() / direct;
            assert!(rel < 1e-9, "{a} {b}");
        }
        assert!((log_logistic_diff(f64::NEG_INFINITY, 0.0) - libm::log(0.5)).abs() < 1e-15);
        assert!((log_logistic_diff(0.0, f64::INFINITY) - libm::log(0.5)).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }
}
