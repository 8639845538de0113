//! Follower-side learners: one confidence-bound bandit per joint leader
//! action, in either the regret-minimizing UCB form or the explorative
//! UCB-E form, plus the learn-to-commit best-response predictor.
//!
//! The follower minimizes loss, so confidence bonuses are subtracted and the
//! arm with the smallest index is played. Unpulled arms index at `-inf`.
//! Every tie is broken toward the lowest arm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameSpec;

/// Which confidence index the follower plays by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseRule {
    /// `mean - sqrt(2 beta ln n_a / T_k)`.
    Ucb,
    /// `mean - sqrt(e_a / T_k)`.
    UcbE,
}

/// Per-joint-action arm statistics for the follower.
#[derive(Debug, Clone, PartialEq)]
pub struct UcbState {
    follower_actions: usize,
    counts: Vec<u64>,
    means: Vec<f64>,
    visits: Vec<u64>,
    beta: f64,
    exploration: Vec<f64>,
    committed: bool,
}

impl UcbState {
    /// Fresh state with every count and mean at zero. `beta` must be >= 3.
    pub fn new(joint_actions: usize, follower_actions: usize, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 3.0) {
            return Err(Error::Domain(format!("beta must be finite and >= 3, got {beta}")));
        }
        if joint_actions == 0 || follower_actions == 0 {
            return Err(Error::Domain("follower state needs at least one joint action and arm".into()));
        }
        let cells = joint_actions * follower_actions;
        Ok(Self {
            follower_actions,
            counts: vec![0; cells],
            means: vec![0.0; cells],
            visits: vec![0; joint_actions],
            beta,
            exploration: vec![0.0; joint_actions],
            committed: false,
        })
    }

    /// Sets the UCB-E exploration parameter for every joint action.
    pub fn set_exploration(&mut self, per_action: Vec<f64>) -> Result<()> {
        if per_action.len() != self.visits.len() {
            return Err(Error::Domain(format!(
                "exploration vector has {} entries, expected {}",
                per_action.len(),
                self.visits.len()
            )));
        }
        if let Some(e) = per_action.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::Domain(format!("exploration parameter {e} must be finite and >= 0")));
        }
        self.exploration = per_action;
        Ok(())
    }

    pub fn joint_actions(&self) -> usize {
        self.visits.len()
    }

    pub fn follower_actions(&self) -> usize {
        self.follower_actions
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn count(&self, a: usize, k: usize) -> u64 {
        self.counts[a * self.follower_actions + k]
    }

    pub fn mean(&self, a: usize, k: usize) -> f64 {
        self.means[a * self.follower_actions + k]
    }

    pub fn visits(&self, a: usize) -> u64 {
        self.visits[a]
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }

    pub fn exploration(&self, a: usize) -> f64 {
        self.exploration[a]
    }

    pub fn is_committed(&self) -> bool {
        self.committed
    }

    /// Confidence index of arm `k` at joint action `a`.
    pub fn index(&self, a: usize, k: usize, rule: ResponseRule) -> f64 {
        let cell = a * self.follower_actions + k;
        let pulls = self.counts[cell];
        if pulls == 0 {
            return f64::NEG_INFINITY;
        }
        let pulls = pulls as f64;
        let bonus = match rule {
            // pulls > 0 implies visits >= 1, so the log is finite and >= 0.
            ResponseRule::Ucb => (2.0 * self.beta * (self.visits[a] as f64).ln() / pulls).sqrt(),
            ResponseRule::UcbE => (self.exploration[a] / pulls).sqrt(),
        };
        self.means[cell] - bonus
    }

    /// Arm with the smallest index; lowest arm on ties.
    pub fn select(&self, a: usize, rule: ResponseRule) -> usize {
        let mut best = 0;
        let mut best_index = self.index(a, 0, rule);
        for k in 1..self.follower_actions {
            if best_index == f64::NEG_INFINITY {
                break;
            }
            let idx = self.index(a, k, rule);
            if idx < best_index {
                best = k;
                best_index = idx;
            }
        }
        best
    }

    /// Records the loss sample for arm `k` played at joint action `a`.
    pub fn observe(&mut self, a: usize, k: usize, loss_sample: f64) -> Result<()> {
        if self.committed {
            return Err(Error::Commit("follower state is committed; no further updates".into()));
        }
        if !(0.0..=1.0).contains(&loss_sample) {
            return Err(Error::Domain(format!("loss sample {loss_sample} is outside [0, 1]")));
        }
        let cell = a * self.follower_actions + k;
        self.counts[cell] += 1;
        self.visits[a] += 1;
        let mean = &mut self.means[cell];
        *mean = (*mean + (loss_sample - *mean) / self.counts[cell] as f64).clamp(0.0, 1.0);
        Ok(())
    }

    /// Freezes the state and returns `argmin_k mean[a][k]` for every `a`,
    /// ignoring unpulled arms.
    pub fn commit(&mut self) -> Result<ResponsePredictor> {
        if self.committed {
            return Err(Error::Commit("predictor already committed".into()));
        }
        let n_f = self.follower_actions;
        let table = (0..self.visits.len())
            .map(|a| {
                (0..n_f)
                    .filter(|&k| self.counts[a * n_f + k] > 0)
                    .fold(None, |best: Option<usize>, k| match best {
                        Some(b) if self.means[a * n_f + b] <= self.means[a * n_f + k] => Some(b),
                        _ => Some(k),
                    })
                    .ok_or_else(|| {
                        Error::Commit(format!("joint action {a} was never visited during exploration"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        self.committed = true;
        Ok(ResponsePredictor { table })
    }

    pub fn snapshot(&self) -> UcbSnapshot {
        let n_f = self.follower_actions;
        UcbSnapshot {
            counts: self.counts.chunks(n_f).map(<[u64]>::to_vec).collect(),
            means: self.means.chunks(n_f).map(<[f64]>::to_vec).collect(),
            visits: self.visits.clone(),
            beta: self.beta,
        }
    }

    pub fn from_snapshot(snapshot: &UcbSnapshot) -> Result<Self> {
        let n_f = snapshot.counts.first().map_or(0, Vec::len);
        let mut state = Self::new(snapshot.visits.len(), n_f, snapshot.beta)?;
        if snapshot.counts.len() != state.visits.len()
            || snapshot.means.len() != state.visits.len()
            || snapshot.counts.iter().any(|r| r.len() != n_f)
            || snapshot.means.iter().any(|r| r.len() != n_f)
        {
            return Err(Error::Domain("follower snapshot has inconsistent shapes".into()));
        }
        for (a, row) in snapshot.counts.iter().enumerate() {
            if row.iter().sum::<u64>() != snapshot.visits[a] {
                return Err(Error::Domain(format!(
                    "follower snapshot counts at joint action {a} do not sum to its visits"
                )));
            }
        }
        if snapshot.means.iter().flatten().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::Domain("follower snapshot means must lie in [0, 1]".into()));
        }
        state.counts = snapshot.counts.concat();
        state.means = snapshot.means.concat();
        state.visits = snapshot.visits.clone();
        Ok(state)
    }
}

/// JSON layout `{"counts": [[...]], "means": [[...]], "visits": [...], "beta": f}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcbSnapshot {
    pub counts: Vec<Vec<u64>>,
    pub means: Vec<Vec<f64>>,
    pub visits: Vec<u64>,
    pub beta: f64,
}

/// Committed best-response table, one follower action per joint action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponsePredictor {
    table: Vec<usize>,
}

impl ResponsePredictor {
    pub fn respond(&self, a: usize) -> usize {
        self.table[a]
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    /// Joint actions whose predicted response differs from the true one.
    pub fn mismatches(&self, game: &GameSpec) -> Vec<usize> {
        self.table
            .iter()
            .enumerate()
            .filter(|&(a, &b)| game.best_response(a) != b)
            .map(|(a, _)| a)
            .collect()
    }
}
