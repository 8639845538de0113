use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GameSpec, JointActions};
use crate::error::{Error, Result};

/// Resample attempts allowed per follower row.
pub const DEFAULT_RESAMPLE_BUDGET: usize = 10_000;

/// Parameters of the random game family used as test fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub m: usize,
    pub n: usize,
    pub n_f: usize,
    /// Minimum gap between the smallest and second-smallest entry of each
    /// follower row, in `(0, 1/2)`.
    pub epsilon_floor: f64,
    pub seed: u64,
}

/// Samples a game with uniform `[0, 1)` losses whose follower rows all have
/// a best-response gap of at least `epsilon_floor`.
///
/// Deterministic in `params.seed`.
pub fn generate_game(params: &GeneratorParams) -> Result<GameSpec> {
    generate_game_with_budget(params, DEFAULT_RESAMPLE_BUDGET)
}

pub fn generate_game_with_budget(params: &GeneratorParams, budget: usize) -> Result<GameSpec> {
    let floor = params.epsilon_floor;
    if !(floor > 0.0 && floor < 0.5) {
        return Err(Error::Domain(format!(
            "epsilon_floor must lie in (0, 1/2), got {floor}"
        )));
    }
    if params.n_f == 0 {
        return Err(Error::Validation("n_f must be >= 1".into()));
    }
    let joint = JointActions::new(params.m, params.n)?;
    let cells = joint.len() * params.n_f;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut follower = Vec::with_capacity(cells);
    let mut row = vec![0.0; params.n_f];
    for a in 0..joint.len() {
        let mut accepted = false;
        for _ in 0..budget {
            row.iter_mut().for_each(|v| *v = rng.random::<f64>());
            if leading_gap(&row) >= floor {
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::Generation(format!(
                "follower row for joint action {a} did not reach gap {floor} within {budget} resamples"
            )));
        }
        follower.extend_from_slice(&row);
    }
    let leader = (0..params.m * cells).map(|_| rng.random::<f64>()).collect();
    GameSpec::new(params.m, params.n, params.n_f, leader, follower)
}

/// Gap between the two smallest entries; infinite for single-entry rows.
fn leading_gap(row: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut second = f64::INFINITY;
    for &v in row {
        if v < lo {
            second = lo;
            lo = v;
        } else if v < second {
            second = v;
        }
    }
    second - lo
}
