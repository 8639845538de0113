//! Closed-form parameter schedules. Rates come with unit constants; every
//! value can be overridden through the protocol config.

use crate::error::{Error, Result};

fn ln_n(n: usize) -> f64 {
    (n as f64).ln()
}

/// Learning rates are irrelevant for a single action; use 1 so every
/// learner stays constructible.
fn single_action_guard(n: usize, eta: f64) -> f64 {
    if n <= 1 {
        1.0
    } else {
        eta
    }
}

/// Hedge: `sqrt(ln n / T)`.
pub fn hedge_eta(horizon: u64, n: usize) -> f64 {
    single_action_guard(n, (ln_n(n) / horizon as f64).sqrt())
}

/// EXP3: `sqrt(ln n / (n T))`.
pub fn exp3_eta(horizon: u64, n: usize) -> f64 {
    single_action_guard(n, (ln_n(n) / (n as f64 * horizon as f64)).sqrt())
}

/// Single leader, unclamped: `n^(2/3) (ln n)^(1/3) T^(-1/3)`.
pub fn slsf_alpha_raw(horizon: u64, n: usize) -> f64 {
    let n = n as f64;
    n.powf(2.0 / 3.0) * n.ln().cbrt() * (horizon as f64).powf(-1.0 / 3.0)
}

/// Single leader: `n^(-2/3) (ln n)^(2/3) T^(-2/3)`.
pub fn slsf_eta(horizon: u64, n: usize) -> f64 {
    let nf = n as f64;
    single_action_guard(
        n,
        nf.powf(-2.0 / 3.0) * nf.ln().powf(2.0 / 3.0) * (horizon as f64).powf(-2.0 / 3.0),
    )
}

/// Several leaders, unclamped: `n T^(-1/(m+1))`.
pub fn mlsf_alpha_raw(horizon: u64, n: usize, m: usize) -> f64 {
    n as f64 * (horizon as f64).powf(-1.0 / (m as f64 + 1.0))
}

/// Several leaders: `sqrt(T^(-(m+2)/(m+1)) n ln n)`.
pub fn mlsf_eta(horizon: u64, n: usize, m: usize) -> f64 {
    let m = m as f64;
    single_action_guard(
        n,
        ((horizon as f64).powf(-(m + 2.0) / (m + 1.0)) * n as f64 * ln_n(n)).sqrt(),
    )
}

/// Unclamped exploration rate for the leader count.
pub fn alpha_raw(horizon: u64, n: usize, m: usize) -> f64 {
    if m == 1 {
        slsf_alpha_raw(horizon, n)
    } else {
        mlsf_alpha_raw(horizon, n, m)
    }
}

/// Exploration rate clamped to `[0, 1]`.
pub fn alpha(horizon: u64, n: usize, m: usize) -> f64 {
    alpha_raw(horizon, n, m).clamp(0.0, 1.0)
}

/// Learning rate paired with [`alpha`].
pub fn alpha_eta(horizon: u64, n: usize, m: usize) -> f64 {
    if m == 1 {
        slsf_eta(horizon, n)
    } else {
        mlsf_eta(horizon, n, m)
    }
}

fn ucbe_budget_rhs(q: f64, failure_prob: f64, hardness: f64, m: usize, n: usize, n_f: usize) -> f64 {
    18.0 * hardness * ((2.0 * q * n_f as f64 / failure_prob).ln() + m as f64 * ln_n(n))
        + n_f as f64
}

/// Smallest integer `q` with `q >= 18 H (ln(2 q n_f / p) + m ln n) + n_f`,
/// found by iterating `q <- ceil(rhs(q))` from `q = n_f + 1`.
pub fn ucbe_budget(failure_prob: f64, hardness: f64, m: usize, n: usize, n_f: usize) -> Result<u64> {
    if !(failure_prob > 0.0 && failure_prob < 1.0) {
        return Err(Error::Schedule(format!(
            "failure probability p must lie in (0, 1), got {failure_prob}"
        )));
    }
    if !(hardness.is_finite() && hardness >= 0.0) {
        return Err(Error::Schedule(format!("hardness must be finite and >= 0, got {hardness}")));
    }
    let satisfies = |q: u64| q as f64 >= ucbe_budget_rhs(q as f64, failure_prob, hardness, m, n, n_f);
    let mut q = n_f as u64 + 1;
    for _ in 0..1000 {
        let rhs = ucbe_budget_rhs(q as f64, failure_prob, hardness, m, n, n_f);
        if !(rhs.is_finite() && rhs < 1e18) {
            return Err(Error::Schedule(format!("budget fixed point diverged (rhs {rhs})")));
        }
        let next = (rhs.ceil() as u64).max(1);
        if next == q {
            // Walk down in case the iteration started above the smallest solution.
            while q > 1 && satisfies(q - 1) {
                q -= 1;
            }
            debug_assert!(satisfies(q));
            return Ok(q);
        }
        q = next;
    }
    Err(Error::Schedule("budget fixed point did not converge".into()))
}

/// UCB-E exploration `e = (25/36) (q - n_f) / H`; zero when `H = 0`.
pub fn ucbe_exploration(q: u64, n_f: usize, hardness: f64) -> f64 {
    if hardness <= 0.0 {
        return 0.0;
    }
    25.0 / 36.0 * (q as f64 - n_f as f64).max(0.0) / hardness
}

/// Length of the exploration stage, `ceil(28 q n^m / 3)`.
pub fn commit_round(q: u64, n: usize, m: usize) -> Result<u64> {
    let joint = (n as u128)
        .checked_pow(m as u32)
        .ok_or_else(|| Error::Schedule("n^m overflows".into()))?;
    let numerator = 28u128
        .checked_mul(q as u128)
        .and_then(|x| x.checked_mul(joint))
        .ok_or_else(|| Error::Schedule("t0 overflows".into()))?;
    u64::try_from(numerator.div_ceil(3)).map_err(|_| Error::Schedule("t0 overflows".into()))
}

/// EXP3 rate for the post-commit stage of `T - t0` rounds.
pub fn stage_two_eta(horizon: u64, t0: u64, n: usize) -> f64 {
    exp3_eta(horizon.saturating_sub(t0).max(1), n)
}
