//! Expected leader losses under best responses, Stackelberg regret, the
//! round-averaged joint strategy and its correlated Stackelberg gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::leader::{MixedStrategy, SUM_TOLERANCE};

/// Joint action spaces up to this size get their regret tracked every round.
pub const EXACT_REGRET_LIMIT: usize = 4096;

fn check_profile(game: &GameSpec, profile: &[MixedStrategy]) -> Result<()> {
    if profile.len() != game.leaders() {
        return Err(Error::Validation(format!(
            "strategy profile has {} leaders, expected {}",
            profile.len(),
            game.leaders()
        )));
    }
    if let Some(i) = profile.iter().position(|p| p.len() != game.actions()) {
        return Err(Error::Validation(format!(
            "leader {i} strategy has {} actions, expected {}",
            profile[i].len(),
            game.actions()
        )));
    }
    Ok(())
}

/// `L_i(a_i)`: leader `i`'s expected loss for action `a_i` when the other
/// leaders play `profile` and the follower best-responds. Entry `i` of
/// `profile` is ignored.
pub fn expected_loss(
    game: &GameSpec,
    i: usize,
    a_i: usize,
    profile: &[MixedStrategy],
) -> Result<f64> {
    if a_i >= game.actions() {
        return Err(Error::Validation(format!("action {a_i} out of range")));
    }
    Ok(expected_loss_vector(game, i, profile)?[a_i])
}

/// `L_i(·)` for every action of leader `i`.
pub fn expected_loss_vector(
    game: &GameSpec,
    i: usize,
    profile: &[MixedStrategy],
) -> Result<Vec<f64>> {
    check_profile(game, profile)?;
    if i >= game.leaders() {
        return Err(Error::Validation(format!("leader {i} out of range")));
    }
    let mut out = vec![0.0; game.actions()];
    let mut coords = vec![0; game.leaders()];
    expected_losses_into(game, i, profile, &mut coords, &mut out);
    Ok(out)
}

/// Allocation-free core of [`expected_loss_vector`]; shapes are trusted.
pub(crate) fn expected_losses_into(
    game: &GameSpec,
    i: usize,
    profile: &[MixedStrategy],
    coords: &mut [usize],
    out: &mut [f64],
) {
    let m = game.leaders();
    let n = game.actions();
    out.iter_mut().for_each(|v| *v = 0.0);
    coords.iter_mut().for_each(|c| *c = 0);
    for &loss in game.br_losses(i) {
        let mut weight = 1.0;
        for (k, &c) in coords.iter().enumerate() {
            if k != i {
                weight *= profile[k].prob(c);
            }
        }
        out[coords[i]] += weight * loss;
        // Advance the odometer, last leader fastest.
        for k in (0..m).rev() {
            coords[k] += 1;
            if coords[k] < n {
                break;
            }
            coords[k] = 0;
        }
    }
}

/// Running Stackelberg regret of a single leader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderRegret {
    cum_expected: f64,
    cum_per_action: Vec<f64>,
    rounds: u64,
}

impl LeaderRegret {
    pub fn new(n: usize) -> Self {
        Self {
            cum_expected: 0.0,
            cum_per_action: vec![0.0; n],
            rounds: 0,
        }
    }

    /// Adds one round: `losses[j] = L_i^t(j)` under the strategy `probs`.
    pub fn update(&mut self, probs: &[f64], losses: &[f64]) -> Result<()> {
        if probs.len() != self.cum_per_action.len() || losses.len() != probs.len() {
            return Err(Error::Validation(format!(
                "regret update expects {} actions (got strategy {}, losses {})",
                self.cum_per_action.len(),
                probs.len(),
                losses.len()
            )));
        }
        self.cum_expected += probs.iter().zip(losses).map(|(p, l)| p * l).sum::<f64>();
        for (c, l) in self.cum_per_action.iter_mut().zip(losses) {
            *c += l;
        }
        self.rounds += 1;
        Ok(())
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn cum_expected(&self) -> f64 {
        self.cum_expected
    }

    pub fn cum_per_action(&self) -> &[f64] {
        &self.cum_per_action
    }

    /// Best fixed action in hindsight; lowest index on ties.
    pub fn best_action(&self) -> usize {
        let mut best = 0;
        for (j, &v) in self.cum_per_action.iter().enumerate() {
            if v < self.cum_per_action[best] {
                best = j;
            }
        }
        best
    }

    pub fn regret(&self) -> f64 {
        self.cum_expected - self.cum_per_action[self.best_action()]
    }

    pub fn average_regret(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.regret() / self.rounds as f64
        }
    }
}

/// Regret of every leader in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    leaders: Vec<LeaderRegret>,
}

impl RegretLedger {
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            leaders: vec![LeaderRegret::new(n); m],
        }
    }

    pub fn update(&mut self, i: usize, probs: &[f64], losses: &[f64]) -> Result<()> {
        self.leaders
            .get_mut(i)
            .ok_or_else(|| Error::Validation(format!("leader {i} out of range")))?
            .update(probs, losses)
    }

    pub fn leader(&self, i: usize) -> &LeaderRegret {
        &self.leaders[i]
    }

    pub fn leaders(&self) -> &[LeaderRegret] {
        &self.leaders
    }

    pub fn regrets(&self) -> Vec<f64> {
        self.leaders.iter().map(LeaderRegret::regret).collect()
    }

    pub fn average_regrets(&self) -> Vec<f64> {
        self.leaders.iter().map(LeaderRegret::average_regret).collect()
    }
}

/// Round average of the product of the leaders' per-round strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalJoint {
    leaders: usize,
    actions: usize,
    sums: Vec<f64>,
    rounds: u64,
    scratch: Vec<f64>,
}

impl EmpiricalJoint {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        let size = crate::game::JointActions::new(m, n)?.len();
        Ok(Self {
            leaders: m,
            actions: n,
            sums: vec![0.0; size],
            rounds: 0,
            scratch: Vec::with_capacity(size),
        })
    }

    /// Adds the product distribution of one round.
    pub fn update(&mut self, strategies: &[MixedStrategy]) -> Result<()> {
        if strategies.len() != self.leaders
            || strategies.iter().any(|s| s.len() != self.actions)
        {
            return Err(Error::Validation(format!(
                "expected {} strategies over {} actions",
                self.leaders, self.actions
            )));
        }
        // Kronecker product with leader 0 outermost, matching the flat encoding.
        let product = &mut self.scratch;
        product.clear();
        product.push(1.0);
        for s in strategies {
            let len = product.len();
            product.resize(len * self.actions, 0.0);
            for x in (0..len).rev() {
                let base = product[x];
                for (j, &p) in s.probs().iter().enumerate() {
                    product[x * self.actions + j] = base * p;
                }
            }
        }
        for (sum, p) in self.sums.iter_mut().zip(product.iter()) {
            *sum += p;
        }
        self.rounds += 1;
        Ok(())
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// The averaged distribution; all zeros before the first round.
    pub fn distribution(&self) -> Vec<f64> {
        if self.rounds == 0 {
            return self.sums.clone();
        }
        let t = self.rounds as f64;
        self.sums.iter().map(|s| s / t).collect()
    }
}

/// Checks that `chi` is a probability vector over `game`'s joint actions.
pub fn check_joint_distribution(game: &GameSpec, chi: &[f64]) -> Result<()> {
    if chi.len() != game.joint_len() {
        return Err(Error::Validation(format!(
            "joint distribution has {} entries, expected n^m = {}",
            chi.len(),
            game.joint_len()
        )));
    }
    if let Some(p) = chi.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::Validation(format!("joint distribution entry {p} is invalid")));
    }
    let total: f64 = chi.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Validation(format!("joint distribution sums to {total}, expected 1")));
    }
    Ok(())
}

/// Per-leader gain available from the best swap deviation against `chi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CseGap {
    pub per_leader: Vec<f64>,
    pub max: f64,
    /// For each leader, the action each source action is best swapped to.
    pub swap_maps: Vec<Vec<usize>>,
}

/// Exact correlated Stackelberg gap of `chi`, per leader and overall.
///
/// The best swap decomposes by source action, so for each leader the
/// optimization is a row-wise minimum over an `n x n` deviation table.
pub fn cse_gap(game: &GameSpec, chi: &[f64]) -> Result<CseGap> {
    check_joint_distribution(game, chi)?;
    let n = game.actions();
    let joint = game.joint();
    let mut per_leader = Vec::with_capacity(game.leaders());
    let mut swap_maps = Vec::with_capacity(game.leaders());
    let mut deviation = vec![0.0; n * n];
    for i in 0..game.leaders() {
        deviation.iter_mut().for_each(|d| *d = 0.0);
        let br = game.br_losses(i);
        for (a, &w) in chi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let source = joint.coordinate(a, i);
            let row = &mut deviation[source * n..(source + 1) * n];
            for (target, d) in row.iter_mut().enumerate() {
                *d += w * br[joint.with_coordinate(a, i, target)];
            }
        }
        let mut gap = 0.0;
        let mut map = Vec::with_capacity(n);
        for source in 0..n {
            let row = &deviation[source * n..(source + 1) * n];
            let mut best = source;
            for (target, &d) in row.iter().enumerate() {
                if d < row[best] || (d == row[best] && target < best) {
                    best = target;
                }
            }
            // Identity is a candidate, so each term is exactly >= 0.
            gap += row[source] - row[best];
            map.push(best);
        }
        per_leader.push(gap);
        swap_maps.push(map);
    }
    let max = per_leader.iter().copied().fold(0.0, f64::max);
    Ok(CseGap {
        per_leader,
        max,
        swap_maps,
    })
}

/// Least-squares slope of `log10(max(R, 0) + 1)` against `log10(t)`.
///
/// Negative regret is clamped to zero. `None` without two distinct rounds.
pub fn loglog_slope(points: &[(u64, f64)]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, r)| *t >= 1 && r.is_finite())
        .map(|&(t, r)| ((t as f64).log10(), (r.max(0.0) + 1.0).log10()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Metrics snapshot at one checkpoint round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    /// Cumulative Stackelberg regret per leader; NaN when not tracked.
    pub regret: Vec<f64>,
    pub average_regret: Vec<f64>,
    pub gap_max: f64,
    pub gaps: Vec<f64>,
    /// Rounds in which the follower did not play the true best response.
    pub mispulls: u64,
}

/// Version tag written as the first line of checkpoint CSV files.
pub const CHECKPOINT_SCHEMA: &str = "# mlsf-checkpoint-csv v1";

impl Checkpoint {
    /// Column names for `m` leaders.
    pub fn csv_header(m: usize) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend((0..m).map(|i| format!("regret_{i}")));
        cols.extend((0..m).map(|i| format!("avg_regret_{i}")));
        cols.push("gap_max".into());
        cols.extend((0..m).map(|i| format!("gap_{i}")));
        cols.push("mispulls".into());
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![self.t.to_string()];
        cols.extend(self.regret.iter().map(|&v| fmt_float(v)));
        cols.extend(self.average_regret.iter().map(|&v| fmt_float(v)));
        cols.push(fmt_float(self.gap_max));
        cols.extend(self.gaps.iter().map(|&v| fmt_float(v)));
        cols.push(self.mispulls.to_string());
        cols.join(",")
    }
}

/// Scientific notation with 12 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        "nan".into()
    }
}
