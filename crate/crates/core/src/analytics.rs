//! Closed-form quantities of the generative model.
//!
//! For a fixed set `U` of `m` nodes, a single slice of a member lands inside
//! `U` with probability `(m-1)_{k-1} / (n-1)_{k-1}`. Poisson thinning makes
//! the number of such slices Poisson with mean `λ` times that ratio, and
//! members draw independently, so
//!
//! ```text
//! P(U is a quorum) = (1 - exp(-λ (m-1)_{k-1} / (n-1)_{k-1}))^m
//! ```
//!
//! The bound curves mark where quorum intersection provably fails
//! (`λ ≥ 2 n^k ln n`, for `k < n/2`) or provably holds (read at finite
//! size as `k > ln n` and `λ ≤ n^c`).

use std::fmt;

use num_bigint::BigInt;
use serde::Serialize;

use crate::error::{invalid, Result};

/// Falling factorial `a (a-1) ... (a-b+1)`, exactly.
pub fn falling_factorial(a: i64, b: u32) -> BigInt {
    (0..b as i64).fold(BigInt::from(1), |acc, i| acc * (a - i))
}

/// `(m-1)_{k-1} / (n-1)_{k-1}` as a product of per-factor ratios.
pub fn slice_inside_ratio(n: usize, k: usize, m: usize) -> f64 {
    if m < k {
        return 0.0;
    }
    (0..k - 1)
        .map(|i| (m - 1 - i) as f64 / (n - 1 - i) as f64)
        .product()
}

fn check_model(n: usize, k: usize, lambda: f64) -> Result<()> {
    if k < 2 || k > n {
        return Err(invalid(format!("need 2 <= k <= n, got n={n}, k={k}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}

fn check_m(n: usize, m: usize) -> Result<()> {
    if m < 1 || m > n {
        return Err(invalid(format!("need 1 <= m <= n, got n={n}, m={m}")));
    }
    Ok(())
}

/// Probability that a fixed set of `m` nodes is a quorum of a sampled system.
pub fn quorum_probability(n: usize, k: usize, lambda: f64, m: usize) -> Result<f64> {
    check_model(n, k, lambda)?;
    check_m(n, m)?;
    let rate = lambda * slice_inside_ratio(n, k, m);
    if rate == 0.0 {
        return Ok(0.0);
    }
    // 1 - e^{-x}, accurate for small x and exactly 1 once e^{-x} underflows
    let per_member = -(-rate).exp_m1();
    Ok(per_member.powi(m as i32))
}

/// Exact binomial coefficient as a float.
pub fn binomial(n: usize, m: usize) -> f64 {
    if m > n {
        return 0.0;
    }
    let m = m.min(n - m);
    // Exact in u128 for every n <= 64.
    let mut c: u128 = 1;
    for i in 0..m {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as f64
}

/// Expected number of quorums of size `m`: `C(n, m)` times the quorum probability.
pub fn expected_quorum_count(n: usize, k: usize, lambda: f64, m: usize) -> Result<f64> {
    Ok(binomial(n, m) * quorum_probability(n, k, lambda, m)?)
}

/// The rate `2 n^k ln n` above which intersection fails with high probability.
///
/// Defined only for `2 <= k < n/2`.
pub fn upper_bound_lambda(n: usize, k: usize) -> Result<f64> {
    if k < 2 || 2 * k >= n {
        return Err(invalid(format!(
            "upper bound needs 2 <= k < n/2, got n={n}, k={k}"
        )));
    }
    let nf = n as f64;
    Ok(2.0 * nf.powi(k as i32) * nf.ln())
}

/// Which proven regime a parameter point falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Disjoint quorums exist with high probability.
    AboveUpperBound,
    /// Quorum intersection holds with high probability.
    BelowLowerBound,
    Indeterminate,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::AboveUpperBound => "above_upper_bound",
            Regime::BelowLowerBound => "below_lower_bound",
            Regime::Indeterminate => "indeterminate",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Default polynomial exponent for the lower-bound regime.
pub const DEFAULT_LOWER_EXPONENT: f64 = 1.0;

/// Places `(n, k, λ)` relative to the two bound curves.
///
/// `c` is the exponent in the lower-bound condition `λ <= n^c`. A point that
/// satisfies both conditions is reported as indeterminate.
pub fn classify_regime(n: usize, k: usize, lambda: f64, c: f64) -> Result<Regime> {
    check_model(n, k, lambda)?;
    if !(c.is_finite() && c >= 0.0) {
        return Err(invalid(format!(
            "exponent c must be finite and non-negative, got {c}"
        )));
    }
    let nf = n as f64;
    let above = 2 * k < n && lambda >= upper_bound_lambda(n, k)?;
    let below = k as f64 > nf.ln() && lambda <= nf.powf(c);
    Ok(match (above, below) {
        (true, false) => Regime::AboveUpperBound,
        (false, true) => Regime::BelowLowerBound,
        _ => Regime::Indeterminate,
    })
}
