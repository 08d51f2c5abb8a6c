//! Log-domain special functions shared by every regret evaluator.
//!
//! All probability arithmetic in this crate happens in the log domain,
//! because regret sums involve products of up to 10^6 factors. The core
//! primitive is `ln Gamma(x)`, computed with a Stirling series after
//! shifting small arguments up with the recurrence `Gamma(x+1) = x Gamma(x)`.

use thiserror::Error;

/// 0.5 * ln(2*pi)
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Error, PartialEq)]
pub enum SpecialFnError {
    #[error("argument must be positive, got {0}")]
    NonPositive(f64),
    #[error("shift must lie in (0,1), got {0}")]
    ShiftOutOfRange(f64),
    #[error("binomial arguments require 0 <= k <= m, got k={k}, m={m}")]
    BinomialDomain { m: u64, k: u64 },
}

// Stirling series threshold. Above this the asymptotic series is accurate
// to well below 1e-14 relative; smaller arguments are shifted up by the
// recurrence.
const STIRLING_MIN: f64 = 10.0;

/// Stirling correction series s(x) = sum B_{2k} / (2k(2k-1) x^{2k-1}),
/// valid (to f64 accuracy) for x >= STIRLING_MIN.
fn stirling_series(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Coefficients B_{2k} / (2k(2k-1)): 1/12, -1/360, 1/1260, -1/1680,
    // 1/1188, -691/360360, 1/156.
    let mut s = 1.0 / 156.0;
    s = s * inv2 - 691.0 / 360_360.0;
    s = s * inv2 + 1.0 / 1188.0;
    s = s * inv2 - 1.0 / 1680.0;
    s = s * inv2 + 1.0 / 1260.0;
    s = s * inv2 - 1.0 / 360.0;
    s = s * inv2 + 1.0 / 12.0;
    s * inv
}

/// ln Gamma(x) for x > 0. Callers must guarantee positivity.
pub(crate) fn lgamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut shift = 0.0;
    let mut y = x;
    while y < STIRLING_MIN {
        shift -= y.ln();
        y += 1.0;
    }
    HALF_LN_2PI + (y - 0.5) * y.ln() - y + stirling_series(y) + shift
}

/// ln Gamma(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64, SpecialFnError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecialFnError::NonPositive(x));
    }
    Ok(lgamma(x))
}

/// Stirling correction s(x) = ln Gamma(x) - [0.5 ln 2pi + (x - 0.5) ln x - x].
///
/// Satisfies 0 <= s(x) <= 1/(12x) for all x > 0.
pub fn stirling_correction(x: f64) -> Result<f64, SpecialFnError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecialFnError::NonPositive(x));
    }
    if x >= STIRLING_MIN {
        // Computed directly from the series, no cancellation.
        Ok(stirling_series(x))
    } else {
        Ok(lgamma(x) - (HALF_LN_2PI + (x - 0.5) * x.ln() - x))
    }
}

/// ln [Gamma(x+s) / Gamma(x)] for x > 0 and 0 < s < 1.
///
/// Satisfies ln[x / (x+s)^{1-s}] <= result <= s ln x.
pub fn log_gamma_ratio(x: f64, s: f64) -> Result<f64, SpecialFnError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecialFnError::NonPositive(x));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(SpecialFnError::ShiftOutOfRange(s));
    }
    Ok(lgamma(x + s) - lgamma(x))
}

// Largest m for which C(m, k) is computed in exact integer arithmetic.
// C(122, 61) < 2^127 so u128 never overflows below this.
const BINOM_EXACT_MAX: u64 = 120;

/// Exact integer C(m, k) by the multiplicative rule; requires m <= BINOM_EXACT_MAX.
fn binomial_u128(m: u64, k: u64) -> u128 {
    let k = k.min(m - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        // The running product is always divisible by i.
        c = c * (m - k + i) as u128 / i as u128;
    }
    c
}

/// ln C(m, k) for 0 <= k <= m.
///
/// Exact (error 0 against integer arithmetic) for small m; via log_gamma
/// otherwise.
pub fn log_binomial(m: u64, k: u64) -> Result<f64, SpecialFnError> {
    if k > m {
        return Err(SpecialFnError::BinomialDomain { m, k });
    }
    if m <= BINOM_EXACT_MAX {
        Ok((binomial_u128(m, k) as f64).ln())
    } else {
        Ok(lgamma(m as f64 + 1.0) - lgamma(k as f64 + 1.0) - lgamma((m - k) as f64 + 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_PI_LN: f64 = 0.572_364_942_924_700_1; // ln sqrt(pi)

    #[test]
    fn log_gamma_known_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-14);
        assert!((log_gamma(0.5).unwrap() - SQRT_PI_LN).abs() < 1e-14);
        assert!((log_gamma(6.0).unwrap() - (120.0f64).ln()).abs() < 1e-13);
        assert!((log_gamma(2.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn log_gamma_rejects_nonpositive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-3.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn log_gamma_recurrence_grid() {
        // ln Gamma(x+1) = ln Gamma(x) + ln x to 1e-12 relative.
        let mut x = 0.5;
        while x < 1e5 {
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = log_gamma(x).unwrap() + x.ln();
            let scale = lhs.abs().max(1.0);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * scale,
                "recurrence violated at x={x}: {lhs} vs {rhs}"
            );
            x *= 1.37;
        }
    }

    #[test]
    fn stirling_correction_bounds_grid() {
        let mut x = 0.5;
        while x <= 1e5 {
            let s = stirling_correction(x).unwrap();
            assert!(s >= 0.0, "s({x}) = {s} < 0");
            assert!(s <= 1.0 / (12.0 * x), "s({x}) = {s} > 1/(12x)");
            x *= 1.1;
        }
        let s = stirling_correction(1e6).unwrap();
        assert!(s >= 0.0 && s <= 1.0 / 12e6);
    }

    #[test]
    fn stirling_correction_at_half() {
        // Direct substitution: ln sqrt(pi) - [0.5 ln 2pi + 0 - 0.5].
        let expect = SQRT_PI_LN - (HALF_LN_2PI + 0.0 * 0.5f64.ln() - 0.5);
        assert!((stirling_correction(0.5).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn gamma_ratio_known_and_bounds() {
        // ln Gamma(1.5) = ln(sqrt(pi)/2)
        let r = log_gamma_ratio(1.0, 0.5).unwrap();
        assert!((r - (SQRT_PI_LN - 2.0f64.ln())).abs() < 1e-13);

        let r = log_gamma_ratio(100.0, 0.3).unwrap();
        let lo = 100.0f64.ln() - 0.7 * 100.3f64.ln();
        let hi = 0.3 * 100.0f64.ln();
        assert!(lo <= r && r <= hi);

        let diff = log_gamma(7.9).unwrap() - log_gamma(7.0).unwrap();
        assert!((log_gamma_ratio(7.0, 0.9).unwrap() - diff).abs() < 1e-13);
    }

    #[test]
    fn gamma_ratio_double_inequality_grid() {
        let mut x = 1e-3;
        while x <= 1e4 {
            for i in 1..20 {
                let s = i as f64 / 20.0;
                let r = log_gamma_ratio(x, s).unwrap();
                let lo = x.ln() - (1.0 - s) * (x + s).ln();
                let hi = s * x.ln();
                assert!(
                    lo <= r + 1e-12 && r <= hi + 1e-12,
                    "ratio bound violated at x={x}, s={s}: lo={lo}, r={r}, hi={hi}"
                );
            }
            x *= 1.5;
        }
    }

    #[test]
    fn gamma_ratio_rejects_bad_shift() {
        assert!(log_gamma_ratio(1.0, 0.0).is_err());
        assert!(log_gamma_ratio(1.0, 1.0).is_err());
        assert!(log_gamma_ratio(0.0, 0.5).is_err());
    }

    #[test]
    fn log_binomial_small_exact() {
        assert_eq!(log_binomial(5, 2).unwrap(), 10.0f64.ln());
        assert_eq!(log_binomial(7, 0).unwrap(), 0.0);
        assert_eq!(log_binomial(0, 0).unwrap(), 0.0);
        // Pascal-triangle oracle for all m <= 20.
        let mut row: Vec<u64> = vec![1];
        for m in 1..=20u64 {
            let mut next = vec![1u64; (m + 1) as usize];
            for k in 1..m as usize {
                next[k] = row[k - 1] + row[k];
            }
            row = next;
            for (k, &c) in row.iter().enumerate() {
                assert_eq!(
                    log_binomial(m, k as u64).unwrap(),
                    (c as f64).ln(),
                    "C({m},{k})"
                );
            }
        }
        assert_eq!(log_binomial(20, 10).unwrap(), 184_756.0f64.ln());
    }

    #[test]
    fn log_binomial_large_matches_gamma_route() {
        let v = log_binomial(1000, 400).unwrap();
        let g = lgamma(1001.0) - lgamma(401.0) - lgamma(601.0);
        assert!((v - g).abs() <= 1e-10 * v.abs());
    }

    #[test]
    fn log_binomial_domain_error() {
        assert_eq!(
            log_binomial(3, 4),
            Err(SpecialFnError::BinomialDomain { m: 3, k: 4 })
        );
    }

    #[test]
    fn log1p_sandwich_sanity() {
        // x/(1+x) <= ln(1+x) <= x for x > -1; sanity check of the numeric log.
        for x in [-0.999f64, -0.5, -0.1, 0.0, 1e-9, 0.1, 1.0, 10.0, 1e4] {
            let l = x.ln_1p();
            assert!(x / (1.0 + x) <= l + 1e-12 && l <= x + 1e-12, "x={x}");
        }
    }
}
