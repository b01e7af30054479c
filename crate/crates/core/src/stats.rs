//! Scalar distribution helpers shared by the models, estimators and bounds.
//!
//! The probit pieces are written to stay finite far out in the tails: naive
//! `pdf^2 / (cdf * (1 - cdf))` turns into 0/0 once the cdf rounds to 1, so
//! everything past |x| = 8 goes through logarithms instead.

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Log of the standard normal density; exact even where the density underflows.
pub fn ln_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Log of the standard normal CDF.
///
/// erfc stays representable down to roughly x = -37; below that an
/// asymptotic Mills-ratio expansion takes over.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x >= -37.0 {
        (0.5 * libm::erfc(-x * FRAC_1_SQRT_2)).ln()
    } else {
        let t = -x;
        let t2 = t * t;
        let series = -1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2);
        ln_norm_pdf(x) - t.ln() + series.ln_1p()
    }
}

/// Inverse Mills ratio `pdf(x) / cdf(x)`.
pub fn mills_ratio(x: f64) -> f64 {
    if x.abs() <= 8.0 {
        norm_pdf(x) / norm_cdf(x)
    } else {
        (ln_norm_pdf(x) - ln_norm_cdf(x)).exp()
    }
}

/// Probit information weight `pdf(x)^2 / (cdf(x) * (1 - cdf(x)))`.
///
/// Decays to zero in both tails; the log-space branch keeps it from
/// producing NaN where the direct quotient would underflow.
pub fn probit_weight(x: f64) -> f64 {
    if x.abs() <= 8.0 {
        let p = norm_cdf(x);
        let d = norm_pdf(x);
        d * d / (p * (1.0 - p))
    } else {
        (2.0 * ln_norm_pdf(x) - ln_norm_cdf(x) - ln_norm_cdf(-x)).exp()
    }
}

/// Logistic sigmoid `1 / (1 + exp(-x))`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic density `p (1 - p)`, evaluated symmetrically so neither tail
/// cancels to zero prematurely.
pub fn logistic_weight(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    let d = 1.0 + e;
    e / (d * d)
}

/// `ln(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Moment-based sample skewness `m3 / m2^(3/2)`; 0 for a constant sample,
/// where asymmetry is undefined and reports must stay free of NaN.
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    if m2 == 0.0 {
        return 0.0;
    }
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_reference_points() {
        assert_relative_eq!(norm_cdf(0.0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(norm_cdf(2.0), 0.977_249_868_051_820_8, max_relative = 1e-14);
        assert_relative_eq!(norm_cdf(1.0), 0.841_344_746_068_542_9, max_relative = 1e-14);
        assert_relative_eq!(norm_cdf(-1.0), 1.0 - norm_cdf(1.0), max_relative = 1e-14);
    }

    #[test]
    fn ln_cdf_matches_direct_log_in_overlap() {
        for &x in &[-36.0, -20.0, -8.5, -3.0, 0.0, 4.0] {
            let direct = norm_cdf(x).ln();
            if direct.is_finite() {
                assert_relative_eq!(ln_norm_cdf(x), direct, max_relative = 1e-9);
            }
        }
        // Deep-tail branch continuity around the switchover.
        let a = ln_norm_cdf(-36.99);
        let b = ln_norm_cdf(-37.01);
        assert!((a - b).abs() < 1.0, "branches disagree: {a} vs {b}");
    }

    #[test]
    fn probit_weight_at_zero_is_two_over_pi() {
        assert_relative_eq!(
            probit_weight(0.0),
            std::f64::consts::FRAC_2_PI,
            max_relative = 1e-13
        );
    }

    #[test]
    fn probit_weight_tails_stay_finite() {
        for &x in &[-40.0, -10.0, 10.0, 40.0] {
            let w = probit_weight(x);
            assert!(w.is_finite(), "weight at {x} is {w}");
            assert!(w >= 0.0);
            assert!(w < 1e-18, "weight at {x} should be negligible, got {w}");
        }
    }

    #[test]
    fn mills_ratio_deep_tail_behaves_like_minus_x() {
        let x = -30.0;
        let r = mills_ratio(x);
        assert!(r > 30.0 && r < 30.1, "mills ratio at -30 was {r}");
    }

    #[test]
    fn logistic_reference_points() {
        assert_relative_eq!(logistic(0.0), 0.5);
        assert_relative_eq!(logistic(2.0), 0.880_797_077_977_882_3, max_relative = 1e-14);
        assert_eq!(logistic(-800.0), 0.0);
        assert_eq!(logistic(800.0), 1.0);
        assert!(logistic_weight(40.0) > 0.0);
        assert_relative_eq!(logistic_weight(2.0), 0.104_993_585_403_506_52, max_relative = 1e-13);
    }

    #[test]
    fn skewness_of_symmetric_sample_is_zero() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        assert!(skewness(&xs).abs() < 1e-12);
    }
}
