//! Log-density primitives and the small dense linear algebra the models need.
//!
//! Every density here is evaluated on the natural-log scale. Points outside a
//! distribution's support yield `f64::NEG_INFINITY`, never NaN; invalid
//! hyperparameters are reported as [`Error::InvalidArgument`].

pub(crate) mod linalg;

pub use linalg::{
    cholesky_with_jitter, exp_correlation_matrix, log_mvn_zero_mean_pdf, CovMatrix, JITTER_LADDER,
};

use crate::{Error, Result};

/// Natural-log density or mass. `NEG_INFINITY` outside the support.
pub type LogDensity = f64;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// Lanczos approximation with g = 7 and nine terms (Godfrey's coefficients).
// Relative error of Gamma(x) is below 2e-15 for x >= 0.5; the reflection
// formula covers (0, 0.5).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma domain is x > 0, got {x}");
    if x < 0.5 {
        // Γ(x)Γ(1-x) = π / sin(πx)
        let s = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI.ln() - s.ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Rising-factorial products are summed term by term up to this many
/// factors; beyond it the log-gamma form is used.
const RISING_TERMS: u64 = 512;

/// `ln B(a + y, b + f) - ln B(a, b)` for integer counts `y`, `f`.
///
/// Evaluated as `Σ ln(a+k) + Σ ln(b+k) - Σ ln(a+b+k)`, which stays accurate
/// when `a + b` is so large that the log-gamma differences cancel.
pub fn ln_beta_ratio(a: f64, b: f64, y: u64, f: u64) -> f64 {
    if y + f > RISING_TERMS {
        return ln_beta(a + y as f64, b + f as f64) - ln_beta(a, b);
    }
    let rising = |x: f64, m: u64| (0..m).map(|k| (x + k as f64).ln()).sum::<f64>();
    rising(a, y) + rising(b, f) - rising(a + b, y + f)
}

/// `ln C(n, k)` for `k <= n`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `x * ln(y)` with the convention `0 * ln 0 = 0`.
#[inline]
pub fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn require_not_nan(name: &str, v: f64) -> Result<()> {
    if v.is_nan() {
        Err(Error::invalid(format!("{name} is NaN")))
    } else {
        Ok(())
    }
}

/// Normal log density parameterized by variance.
pub fn log_normal_pdf(x: f64, mean: f64, var: f64) -> Result<LogDensity> {
    require_positive("variance", var)?;
    require_not_nan("x", x)?;
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let d = x - mean;
    Ok(-0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var))
}

/// Gamma log density with shape/rate parameterization.
pub fn log_gamma_pdf(x: f64, shape: f64, rate: f64) -> Result<LogDensity> {
    require_positive("shape", shape)?;
    require_positive("rate", rate)?;
    require_not_nan("x", x)?;
    if x <= 0.0 || x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x)
}

/// Beta log density on the open unit interval.
pub fn log_beta_pdf(x: f64, a: f64, b: f64) -> Result<LogDensity> {
    require_positive("a", a)?;
    require_positive("b", b)?;
    require_not_nan("x", x)?;
    if x <= 0.0 || x >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b))
}

/// Binomial log mass.
pub fn log_binomial_pmf(y: u64, n: u64, p: f64) -> Result<LogDensity> {
    if y > n {
        return Err(Error::invalid(format!("successes {y} exceed trials {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability must lie in [0, 1], got {p}")));
    }
    let fails = (n - y) as f64;
    let ll = ln_choose(n, y) + xlogy(y as f64, p) + xlogy(fails, 1.0 - p);
    Ok(if ll.is_nan() { f64::NEG_INFINITY } else { ll })
}

/// Beta-binomial log mass: the binomial with its success probability
/// integrated against `Beta(a, b)`.
pub fn log_beta_binomial_pmf(y: u64, n: u64, a: f64, b: f64) -> Result<LogDensity> {
    if y > n {
        return Err(Error::invalid(format!("successes {y} exceed trials {n}")));
    }
    require_positive("a", a)?;
    require_positive("b", b)?;
    Ok(ln_choose(n, y) + ln_beta_ratio(a, b, y, n - y))
}

/// Shift-stable `ln Σ exp(xᵢ)`.
///
/// Returns `NEG_INFINITY` when every entry is `NEG_INFINITY` and
/// `INFINITY` when any entry is `INFINITY`.
pub fn logsumexp(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::invalid("logsumexp of an empty slice"));
    }
    Ok(logsumexp_iter(xs.iter().copied()))
}

/// `logsumexp` over a re-iterable sequence; the sequence is walked twice in
/// the same order, so equal inputs give bitwise-equal outputs.
pub(crate) fn logsumexp_iter<I>(xs: I) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    let sum: f64 = xs.map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `ln( (1/n) Σ exp(xᵢ) )` over a non-empty re-iterable sequence.
pub(crate) fn log_mean_exp_iter<I>(xs: I) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    let mut n = 0usize;
    let mut sum = 0.0;
    for x in xs {
        sum += (x - max).exp();
        n += 1;
    }
    max + (sum / n as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // References evaluated with mpmath at 40 significant digits.
    #[test]
    fn ln_gamma_matches_high_precision_reference() {
        let cases = [
            (0.1, 2.252_712_651_734_206),
            (0.5, 0.572_364_942_924_700_1),
            (1.5, -0.120_782_237_635_245_22),
            (3.7, 1.428_072_326_665_387_9),
            (10.0, 12.801_827_480_081_47),
            (100.5, 361.435_540_467_777_6),
            (12_345.678, 103_959.919_905_546_06),
        ];
        for (x, want) in cases {
            assert_relative_eq!(ln_gamma(x), want, max_relative = 1e-12);
        }
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
    }

    #[test]
    fn normal_density() {
        assert_relative_eq!(log_normal_pdf(0.0, 0.0, 1.0).unwrap(), -0.918_938_533_204_672_8, epsilon = 1e-15);
        assert_relative_eq!(log_normal_pdf(1.0, 0.0, 1.0).unwrap(), -1.418_938_533_204_672_8, epsilon = 1e-15);
        assert_relative_eq!(
            log_normal_pdf(0.5, 0.125, 0.125).unwrap(),
            -0.441_717_762_364_754_8,
            epsilon = 1e-14
        );
        assert!(log_normal_pdf(0.0, 0.0, 0.0).is_err());
        assert!(log_normal_pdf(0.0, 0.0, -1.0).is_err());
        assert_eq!(log_normal_pdf(f64::INFINITY, 0.0, 1.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn gamma_density() {
        assert_relative_eq!(log_gamma_pdf(1.0, 1.0, 1.0).unwrap(), -1.0, epsilon = 1e-14);
        assert_relative_eq!(log_gamma_pdf(2.0, 1.0, 1.0).unwrap(), -2.0, epsilon = 1e-14);
        assert_relative_eq!(
            log_gamma_pdf(0.7, 2.5, 2.5).unwrap(),
            -0.278_968_456_695_630_07,
            epsilon = 1e-13
        );
        assert_eq!(log_gamma_pdf(0.0, 2.0, 1.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_gamma_pdf(-3.0, 2.0, 1.0).unwrap(), f64::NEG_INFINITY);
        assert!(log_gamma_pdf(1.0, 0.0, 1.0).is_err());
        assert!(log_gamma_pdf(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn beta_density() {
        assert!(log_beta_pdf(0.3, 1.0, 1.0).unwrap().abs() < 1e-15);
        assert_relative_eq!(log_beta_pdf(0.5, 2.0, 2.0).unwrap(), 1.5f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(log_beta_pdf(0.9, 5.0, 1.0).unwrap(), 1.187_995_849_802_795_2, epsilon = 1e-13);
        for x in [0.0, 1.0, -0.2, 1.5] {
            assert_eq!(log_beta_pdf(x, 2.0, 3.0).unwrap(), f64::NEG_INFINITY);
        }
    }

    #[test]
    fn binomial_mass() {
        assert_relative_eq!(log_binomial_pmf(0, 1, 0.5).unwrap(), -(2f64.ln()), epsilon = 1e-15);
        assert_relative_eq!(log_binomial_pmf(1, 2, 0.5).unwrap(), 0.5f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(log_binomial_pmf(4, 10, 0.3).unwrap(), -1.608_833_350_218_669_6, epsilon = 1e-13);
        // 0 * ln 0 := 0 at the boundaries of [0, 1]
        assert_eq!(log_binomial_pmf(0, 5, 0.0).unwrap(), 0.0);
        assert_eq!(log_binomial_pmf(5, 5, 1.0).unwrap(), 0.0);
        assert_eq!(log_binomial_pmf(1, 5, 0.0).unwrap(), f64::NEG_INFINITY);
        assert!(log_binomial_pmf(3, 2, 0.5).is_err());
    }

    #[test]
    fn beta_binomial_mass() {
        assert_relative_eq!(log_beta_binomial_pmf(0, 1, 1.0, 1.0).unwrap(), -(2f64.ln()), epsilon = 1e-14);
        assert_relative_eq!(log_beta_binomial_pmf(1, 2, 1.0, 1.0).unwrap(), -(3f64.ln()), epsilon = 1e-14);
        assert_relative_eq!(
            log_beta_binomial_pmf(5, 20, 2.0, 14.0).unwrap(),
            -2.671_220_389_647_440_4,
            epsilon = 1e-12
        );
        // Shapes below 2 (mpmath, 30 digits).
        assert_relative_eq!(log_beta_binomial_pmf(0, 7, 1.5, 3.0).unwrap(), -1.729_583_606_203_274_8, epsilon = 1e-12);
        assert_relative_eq!(log_beta_binomial_pmf(12, 12, 3.0, 1.2).unwrap(), -1.902_128_777_478_481_6, epsilon = 1e-12);
        assert!(log_beta_binomial_pmf(4, 3, 1.0, 1.0).is_err());
    }

    #[test]
    fn beta_ratio_stays_accurate_for_huge_shapes() {
        // As a + b grows the beta-binomial tends to the binomial at a/(a+b).
        let (a, b) = (3.4e19, 3.8e12);
        let p = a / (a + b);
        let bb = log_beta_binomial_pmf(4, 20, a, b).unwrap();
        assert_relative_eq!(bb, log_binomial_pmf(4, 20, p).unwrap(), max_relative = 1e-6);
        assert_relative_eq!(ln_beta_ratio(2.5, 1.5, 3, 4), ln_beta(5.5, 5.5) - ln_beta(2.5, 1.5), epsilon = 1e-13);
        assert_relative_eq!(ln_beta_ratio(2.5, 1.5, 300, 400), ln_beta(302.5, 401.5) - ln_beta(2.5, 1.5), epsilon = 1e-9);
    }

    #[test]
    fn beta_binomial_matches_theta_quadrature() {
        // Midpoint rule over 10k points of θ for Bin(y | n, θ) Beta(θ | a, b),
        // with shapes >= 2 so the integrand is smooth at the endpoints.
        let grid = 10_000;
        for &(y, n, a, b) in &[(5u64, 20u64, 2.0, 14.0), (0, 7, 2.0, 3.0), (12, 12, 3.0, 2.5), (3, 9, 2.5, 2.5)] {
            let h = 1.0 / grid as f64;
            let terms: Vec<f64> = (0..grid)
                .map(|j| {
                    let t = (j as f64 + 0.5) * h;
                    log_binomial_pmf(y, n, t).unwrap() + log_beta_pdf(t, a, b).unwrap() + h.ln()
                })
                .collect();
            let quad = logsumexp(&terms).unwrap();
            let exact = log_beta_binomial_pmf(y, n, a, b).unwrap();
            assert!((quad - exact).abs() < 1e-6, "y={y} n={n}: {quad} vs {exact}");
        }
    }

    #[test]
    fn logsumexp_cases() {
        assert_relative_eq!(logsumexp(&[0.0, 0.0]).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(logsumexp(&[-1000.0, -1000.0]).unwrap(), -1000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_eq!(logsumexp(&[0.0]).unwrap(), 0.0);
        assert!(logsumexp(&[]).is_err());
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]).unwrap(), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[1.0, f64::INFINITY]).unwrap(), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn logsumexp_shift_invariance(
            xs in prop::collection::vec(-50.0f64..50.0, 1..40),
            c in prop::sample::select(vec![-700.0, 700.0, -3.5, 12.0]),
        ) {
            let base = logsumexp(&xs).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let got = logsumexp(&shifted).unwrap();
            prop_assert!((got - (base + c)).abs() < 1e-10 * (1.0 + c.abs()));
        }

        #[test]
        fn densities_never_nan_off_support(x in -5.0f64..5.0, a in 0.01f64..20.0, b in 0.01f64..20.0) {
            prop_assert!(!log_gamma_pdf(x, a, b).unwrap().is_nan());
            prop_assert!(!log_beta_pdf(x, a, b).unwrap().is_nan());
            prop_assert!(!log_normal_pdf(x, a, b).unwrap().is_nan());
        }
    }
}
