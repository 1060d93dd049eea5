//! Special functions used by the variational updates.

use crate::error::NumericError;

/// Shift threshold for the recurrence before switching to the asymptotic series.
const ASYMPTOTIC_FROM: f64 = 6.0;

// B_2k / (2k) for k = 1..7.
const ASYMPTOTIC_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// Digamma function ψ(x) for `x > 0`.
///
/// Uses ψ(x) = ψ(x + 1) − 1/x to shift the argument to `x >= 6`, then the
/// asymptotic expansion ψ(x) ≈ ln x − 1/(2x) − Σ B_2k / (2k x^2k).
/// Returns NaN outside the domain; see [`try_digamma`] for a checked variant.
pub fn digamma(x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return f64::NAN;
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < ASYMPTOTIC_FROM {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Horner over 1/x^2
    let mut series = 0.0;
    for c in ASYMPTOTIC_COEFFS.iter().rev() {
        series = series * inv2 + c;
    }
    series *= inv2;
    shift + x.ln() - 0.5 / x - series
}

/// Checked digamma: errors on `x <= 0` or non-finite input.
pub fn try_digamma(x: f64) -> Result<f64, NumericError> {
    if x <= 0.0 || !x.is_finite() {
        return Err(NumericError::Domain {
            function: "digamma",
            value: x,
        });
    }
    Ok(digamma(x))
}

/// Natural log of the gamma function for `x > 0`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_identity() {
        for &x in &[0.5, 1.0, 3.7] {
            let lhs = digamma(x + 1.0) - digamma(x);
            assert!((lhs - 1.0 / x).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn euler_mascheroni() {
        assert!((digamma(1.0) + 0.577_215_664_901_532_9).abs() < 1e-12);
    }

    #[test]
    fn half_integer_closed_form() {
        // ψ(1/2) = −γ − 2 ln 2
        let expected = -0.577_215_664_901_532_9 - 2.0 * std::f64::consts::LN_2;
        assert!((digamma(0.5) - expected).abs() < 1e-12);
    }

    #[test]
    fn large_argument_asymptote() {
        let d = digamma(100.0) - 100f64.ln();
        // ln x − 1/(2x) − 1/(12x²) at x = 100
        let approx = -0.005 - 1.0 / 120_000.0;
        assert!((d - approx).abs() < 1e-9);
        assert!((d + 0.005).abs() < 1e-4);
    }

    #[test]
    fn matches_statrs() {
        for i in 1..400 {
            let x = i as f64 * 0.137;
            let ours = digamma(x);
            let theirs = statrs::function::gamma::digamma(x);
            assert!((ours - theirs).abs() < 1e-10, "x = {x}: {ours} vs {theirs}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(try_digamma(0.0).is_err());
        assert!(try_digamma(-1.5).is_err());
        assert!(digamma(-2.0).is_nan());
        assert!(try_digamma(2.0).is_ok());
    }
}
