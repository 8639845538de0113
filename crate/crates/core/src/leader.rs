//! Leader-side strategy updaters: Hedge for full-information feedback and
//! EXP3 (optionally mixed with uniform exploration) for bandit feedback.
//!
//! Weights are renormalized to sum to one after every update. The emitted
//! strategy is unchanged by this and the weights never underflow over long
//! horizons.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on a strategy's total mass.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Losses may overshoot `[0, 1]` by at most this much before being rejected.
pub const LOSS_TOLERANCE: f64 = 1e-9;

/// A probability vector over one leader's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("strategy must have at least one action".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Domain(format!("strategy entry {p} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Domain(format!("strategy sums to {total}, expected 1")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, j: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[j] = 1.0;
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prob(&self, j: usize) -> f64 {
        self.0[j]
    }

    /// `(1 - alpha) * P + alpha * uniform`.
    pub fn mix_exploration(&self, alpha: f64) -> Result<MixedStrategy> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let floor = alpha / self.0.len() as f64;
        Ok(Self(
            self.0.iter().map(|p| (1.0 - alpha) * p + floor).collect(),
        ))
    }

    /// Inverse-CDF draw over the stored order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        for (j, &p) in self.0.iter().enumerate() {
            cumulative += p;
            if u < cumulative {
                return j;
            }
        }
        // Rounding left u above the final partial sum.
        self.0.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

fn check_loss(value: f64) -> Result<f64> {
    if !(-LOSS_TOLERANCE..=1.0 + LOSS_TOLERANCE).contains(&value) {
        return Err(Error::Domain(format!("loss {value} is outside [0, 1]")));
    }
    Ok(value.clamp(0.0, 1.0))
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("learning rate must be finite and > 0, got {eta}")))
    }
}

/// Multiply-and-renormalize step shared by both learners.
fn exponential_step(weights: &mut [f64], eta: f64, losses: impl Iterator<Item = f64>) {
    for (w, l) in weights.iter_mut().zip(losses) {
        *w *= (-eta * l).exp();
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w = (*w / total).max(f64::MIN_POSITIVE);
    }
}

fn normalized(weights: &[f64]) -> MixedStrategy {
    let total: f64 = weights.iter().sum();
    MixedStrategy(weights.iter().map(|w| w / total).collect())
}

/// Importance-weighted estimate of the full loss vector from one observed loss.
///
/// Non-zero only at the played action, where it is `loss / prob_played`.
pub fn importance_estimate(
    n: usize,
    played: usize,
    observed_loss: f64,
    prob_played: f64,
) -> Result<Vec<f64>> {
    let (played, value) = checked_estimate(n, played, observed_loss, prob_played)?;
    let mut estimate = vec![0.0; n];
    estimate[played] = value;
    Ok(estimate)
}

fn checked_estimate(
    n: usize,
    played: usize,
    observed_loss: f64,
    prob_played: f64,
) -> Result<(usize, f64)> {
    if played >= n {
        return Err(Error::Domain(format!("played action {played} out of range [0, {n})")));
    }
    if !(prob_played > 0.0 && prob_played <= 1.0) {
        return Err(Error::Domain(format!(
            "probability of the played action must lie in (0, 1], got {prob_played}"
        )));
    }
    let loss = check_loss(observed_loss)?;
    Ok((played, loss / prob_played))
}

/// Serializable learner state: `{"weights": [...], "eta": f, "alpha": f}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSnapshot {
    pub weights: Vec<f64>,
    pub eta: f64,
    pub alpha: f64,
}

impl LearnerSnapshot {
    fn check_weights(&self) -> Result<()> {
        if self.weights.is_empty()
            || self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0))
        {
            return Err(Error::Domain("snapshot weights must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Exponential weights over full loss vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeState {
    weights: Vec<f64>,
    eta: f64,
}

impl HedgeState {
    pub fn new(n: usize, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        if n == 0 {
            return Err(Error::Domain("Hedge needs at least one action".into()));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
            eta,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn strategy(&self) -> MixedStrategy {
        normalized(&self.weights)
    }

    /// Applies `w_j <- w_j * exp(-eta * loss_j)`.
    pub fn update(&mut self, losses: &[f64]) -> Result<()> {
        if losses.len() != self.weights.len() {
            return Err(Error::Domain(format!(
                "loss vector has {} entries, expected {}",
                losses.len(),
                self.weights.len()
            )));
        }
        let losses = losses
            .iter()
            .map(|&l| check_loss(l))
            .collect::<Result<Vec<_>>>()?;
        exponential_step(&mut self.weights, self.eta, losses.into_iter());
        Ok(())
    }

    pub fn snapshot(&self) -> LearnerSnapshot {
        LearnerSnapshot {
            weights: self.weights.clone(),
            eta: self.eta,
            alpha: 0.0,
        }
    }

    pub fn from_snapshot(snapshot: &LearnerSnapshot) -> Result<Self> {
        check_eta(snapshot.eta)?;
        snapshot.check_weights()?;
        Ok(Self {
            weights: snapshot.weights.clone(),
            eta: snapshot.eta,
        })
    }
}

/// EXP3 with an exploration floor: actions are drawn from
/// `(1 - alpha) * P + alpha * uniform`. `alpha = 0` gives plain EXP3.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3State {
    weights: Vec<f64>,
    eta: f64,
    alpha: f64,
}

impl Exp3State {
    pub fn new(n: usize, eta: f64, alpha: f64) -> Result<Self> {
        check_eta(eta)?;
        if n == 0 {
            return Err(Error::Domain("EXP3 needs at least one action".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
            eta,
            alpha,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The exponential-weights strategy `P`.
    pub fn base_strategy(&self) -> MixedStrategy {
        normalized(&self.weights)
    }

    /// The exploration-mixed strategy actions are drawn from.
    pub fn sampling_strategy(&self) -> MixedStrategy {
        self.base_strategy()
            .mix_exploration(self.alpha)
            .expect("alpha validated at construction")
    }

    /// Feeds back the loss of the played action, drawn with `prob_played`.
    pub fn update(&mut self, played: usize, observed_loss: f64, prob_played: f64) -> Result<()> {
        let (played, estimate) =
            checked_estimate(self.weights.len(), played, observed_loss, prob_played)?;
        let losses = (0..self.weights.len()).map(|j| if j == played { estimate } else { 0.0 });
        exponential_step(&mut self.weights, self.eta, losses);
        Ok(())
    }

    pub fn snapshot(&self) -> LearnerSnapshot {
        LearnerSnapshot {
            weights: self.weights.clone(),
            eta: self.eta,
            alpha: self.alpha,
        }
    }

    pub fn from_snapshot(snapshot: &LearnerSnapshot) -> Result<Self> {
        let mut state = Self::new(snapshot.weights.len().max(1), snapshot.eta, snapshot.alpha)?;
        snapshot.check_weights()?;
        state.weights = snapshot.weights.clone();
        Ok(state)
    }
}
