//! Exact two-tailed binomial sign test on discordant predictions.

use crate::error::{Error, Result};

/// Two-tailed p-value for `n_a_only` vs `n_b_only` discordant tokens under
/// a fair coin: twice the upper tail P(X >= max(a,b)) with
/// X ~ Binomial(a+b, 1/2), capped at 1.
pub fn binomial_test(n_a_only: u64, n_b_only: u64) -> Result<f64> {
    let n = n_a_only + n_b_only;
    if n == 0 {
        return Err(Error::Undefined("no discordant predictions".into()));
    }
    let k = n_a_only.max(n_b_only);
    Ok((2.0 * upper_tail(n, k)).min(1.0))
}

/// P(X >= k) for X ~ Binomial(n, 1/2). Exact integer arithmetic up to
/// n = 100 (the tail sum divided by 2^n), log-space beyond that.
fn upper_tail(n: u64, k: u64) -> f64 {
    if n <= 100 {
        let sum: u128 = (k..=n).map(|i| choose(n, i)).sum();
        sum as f64 / 2f64.powi(n as i32)
    } else {
        let ln_half_n = n as f64 * 0.5f64.ln();
        (k..=n).map(|i| (ln_choose(n, i) + ln_half_n).exp()).sum()
    }
}

fn choose(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}
