//! Exact one-sided binomial upper bound for leaf error probabilities.

use crate::error::{Result, UwError};

/// Width at which the bisection stops. Well below the documented 1e-9
/// agreement tolerance so independent reimplementations land on the same
/// digits.
const BISECTION_WIDTH: f64 = 1e-12;

/// P(X <= k) for X ~ Binomial(n, p), evaluated by streaming log-space
/// summation so large n neither overflows the binomial coefficient nor
/// underflows the tail terms.
pub fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    if k >= n {
        return 1.0;
    }
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    // log of C(n,i) p^i q^(n-i), advanced via the ratio of consecutive terms.
    let mut log_term = n as f64 * ln_q;
    let mut max = log_term;
    let mut scaled = 1.0_f64;
    for i in 0..k {
        log_term += ((n - i) as f64 / (i + 1) as f64).ln() + ln_p - ln_q;
        if log_term > max {
            scaled = scaled * (max - log_term).exp() + 1.0;
            max = log_term;
        } else {
            scaled += (log_term - max).exp();
        }
    }
    (max.exp() * scaled).min(1.0)
}

/// Smallest u with P(X <= k | n, u) <= 1 - confidence: the one-sided upper
/// confidence bound on the success probability after observing k successes
/// in n trials.
///
/// k = n returns 1.0; k = 0 uses the closed form 1 - (1-confidence)^(1/n);
/// everything else bisects the exact CDF.
pub fn clopper_pearson_upper(k: u64, n: u64, confidence: f64) -> Result<f64> {
    if n == 0 {
        return Err(UwError::Domain(
            "upper bound undefined for zero trials".into(),
        ));
    }
    if k > n {
        return Err(UwError::Domain(format!(
            "success count {k} exceeds trial count {n}"
        )));
    }
    if !confidence.is_finite() || confidence <= 0.0 || confidence >= 1.0 {
        return Err(UwError::Domain(format!(
            "confidence must lie strictly between 0 and 1, got {confidence}"
        )));
    }
    if k == n {
        return Ok(1.0);
    }
    if k == 0 {
        return Ok(1.0 - (1.0 - confidence).powf(1.0 / n as f64));
    }
    let alpha = 1.0 - confidence;
    // CDF is 1 at u=0 and 0 at u=1 and strictly decreasing in between, so
    // the invariant cdf(lo) > alpha >= cdf(hi) pins the root.
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if binom_cdf(k, n, mid) <= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
