//! Brute-force reference computations for tests and the `verify` command.
//!
//! Everything here is written as plain nested loops over the raw loss
//! tensors. None of it reuses the metrics code or the game's cached
//! best-response tables.

use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::leader::{importance_estimate, MixedStrategy};

/// Largest swap family `enumerate_swap_gap` will walk.
pub const MAX_SWAP_FUNCTIONS: u128 = 100_000;

/// A total map from one leader's action set to itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapFunction {
    mapping: Vec<usize>,
}

impl SwapFunction {
    pub fn identity(n: usize) -> Self {
        Self {
            mapping: (0..n).collect(),
        }
    }

    pub fn apply(&self, action: usize) -> usize {
        self.mapping[action]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    /// Steps to the next map in lexicographic order; `false` after the last.
    fn advance(&mut self) -> bool {
        let n = self.mapping.len();
        for slot in self.mapping.iter_mut().rev() {
            *slot += 1;
            if *slot < n {
                return true;
            }
            *slot = 0;
        }
        false
    }
}

/// Every swap function on `n` actions, lexicographically.
pub fn all_swap_functions(n: usize) -> impl Iterator<Item = SwapFunction> {
    let mut next = Some(SwapFunction {
        mapping: vec![0; n],
    });
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut following = current.clone();
        if following.advance() {
            next = Some(following);
        }
        Some(current)
    })
}

fn naive_best_response(game: &GameSpec, a: usize) -> usize {
    let mut best = 0;
    for b in 0..game.follower_actions() {
        if game.follower_loss(a, b) < game.follower_loss(a, best) {
            best = b;
        }
    }
    best
}

fn digits(flat: usize, m: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; m];
    let mut rest = flat;
    for slot in out.iter_mut().rev() {
        *slot = rest % n;
        rest /= n;
    }
    out
}

fn undigits(coords: &[usize], n: usize) -> usize {
    coords.iter().fold(0, |acc, &c| acc * n + c)
}

/// Exhaustive best response for joint action `a`.
pub fn exhaustive_best_response(game: &GameSpec, a: usize) -> usize {
    naive_best_response(game, a)
}

/// Leader `i`'s CSE gap under `chi`, by enumerating all `n^n` swap functions.
pub fn enumerate_swap_gap(game: &GameSpec, chi: &[f64], i: usize) -> Result<f64> {
    let m = game.leaders();
    let n = game.actions();
    let family = (n as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if family > MAX_SWAP_FUNCTIONS {
        return Err(Error::Cap {
            what: "n^n swap functions",
            value: family,
            limit: MAX_SWAP_FUNCTIONS,
        });
    }
    if chi.len() != game.joint_len() {
        return Err(Error::Validation(format!(
            "joint distribution has {} entries, expected {}",
            chi.len(),
            game.joint_len()
        )));
    }
    if i >= m {
        return Err(Error::Validation(format!("leader {i} out of range")));
    }

    let mut baseline = 0.0;
    for (a, &w) in chi.iter().enumerate() {
        baseline += w * game.leader_loss(i, a, naive_best_response(game, a));
    }

    let mut best = f64::INFINITY;
    for swap in all_swap_functions(n) {
        let mut value = 0.0;
        for (a, &w) in chi.iter().enumerate() {
            let mut coords = digits(a, m, n);
            coords[i] = swap.apply(coords[i]);
            let deviated = undigits(&coords, n);
            value += w * game.leader_loss(i, deviated, naive_best_response(game, deviated));
        }
        best = best.min(value);
    }
    Ok(baseline - best)
}

/// Single-leader Stackelberg optimum `argmin_a l(a, Br(a))`, lowest index on ties.
pub fn slsf_optimum(game: &GameSpec) -> Result<(usize, f64)> {
    if game.leaders() != 1 {
        return Err(Error::Domain(format!(
            "single-leader optimum needs m = 1, game has m = {}",
            game.leaders()
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    for a in 0..game.actions() {
        let mut br = 0;
        let mut br_value = f64::INFINITY;
        for b in 0..game.follower_actions() {
            if game.follower_loss(a, b) < br_value {
                br_value = game.follower_loss(a, b);
                br = b;
            }
        }
        let value = game.leader_loss(0, a, br);
        if best.is_none_or(|(_, v)| value < v) {
            best = Some((a, value));
        }
    }
    Ok(best.expect("games have at least one action"))
}

/// Largest deviation of `Σ_j P[j] · estimate(j)` from `losses` over the
/// actions `P` can actually draw.
pub fn estimator_unbiasedness_check(strategy: &MixedStrategy, losses: &[f64]) -> Result<f64> {
    let n = strategy.len();
    if losses.len() != n {
        return Err(Error::Validation(format!(
            "loss vector has {} entries, expected {n}",
            losses.len()
        )));
    }
    let mut expectation = vec![0.0; n];
    for (j, &loss) in losses.iter().enumerate() {
        let p = strategy.prob(j);
        if p == 0.0 {
            continue;
        }
        let estimate = importance_estimate(n, j, loss, p)?;
        for (e, v) in expectation.iter_mut().zip(&estimate) {
            *e += p * v;
        }
    }
    Ok((0..n)
        .filter(|&j| strategy.prob(j) > 0.0)
        .map(|j| (expectation[j] - losses[j]).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_game, GeneratorParams};
    use crate::metrics::cse_gap;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn swap_family_size() {
        assert_eq!(all_swap_functions(3).count(), 27);
        assert_eq!(all_swap_functions(1).count(), 1);
        assert!(all_swap_functions(3).any(|s| s == SwapFunction::identity(3)));
    }

    #[test]
    fn single_action_gap_is_zero() {
        let g = generate_game(&GeneratorParams {
            m: 2,
            n: 1,
            n_f: 3,
            epsilon_floor: 0.1,
            seed: 1,
        })
        .unwrap();
        assert_eq!(enumerate_swap_gap(&g, &[1.0], 0).unwrap(), 0.0);
    }

    #[test]
    fn identity_optimal_gives_zero() {
        // Leader 0 has zero loss everywhere under the best response.
        let follower = vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let mut leader = vec![1.0; 16];
        for a in 0..4 {
            let b = if a % 2 == 0 { 0 } else { 1 };
            leader[a * 2 + b] = 0.0;
        }
        let g = GameSpec::new(2, 2, 2, leader, follower).unwrap();
        assert_eq!(enumerate_swap_gap(&g, &[0.25; 4], 0).unwrap(), 0.0);
    }

    #[test]
    fn matches_metrics_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..10 {
            let g = generate_game(&GeneratorParams {
                m: 2,
                n: 3,
                n_f: 3,
                epsilon_floor: 0.1,
                seed,
            })
            .unwrap();
            let raw: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let chi: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let fast = cse_gap(&g, &chi).unwrap();
            for i in 0..2 {
                let slow = enumerate_swap_gap(&g, &chi, i).unwrap();
                assert!((slow - fast.per_leader[i]).abs() <= 1e-12, "{slow} vs {:?}", fast.per_leader);
            }
        }
    }

    #[test]
    fn swap_cap_enforced() {
        let g = generate_game(&GeneratorParams {
            m: 1,
            n: 7,
            n_f: 2,
            epsilon_floor: 0.1,
            seed: 0,
        })
        .unwrap();
        let chi = vec![1.0 / 7.0; 7];
        assert!(matches!(enumerate_swap_gap(&g, &chi, 0), Err(Error::Cap { .. })));
    }

    #[test]
    fn slsf_optimum_examples() {
        let follower = vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        // l(a, Br(a)) = (0.9, 0.1, 0.4)
        let leader = vec![0.9, 0.5, 0.5, 0.1, 0.4, 0.5];
        let g = GameSpec::new(1, 3, 2, leader, follower.clone()).unwrap();
        assert_eq!(slsf_optimum(&g).unwrap(), (1, 0.1));

        let flat = GameSpec::new(1, 3, 2, vec![0.3; 6], follower).unwrap();
        assert_eq!(slsf_optimum(&flat).unwrap().0, 0);

        let two = generate_game(&GeneratorParams {
            m: 2,
            n: 2,
            n_f: 2,
            epsilon_floor: 0.1,
            seed: 0,
        })
        .unwrap();
        assert!(slsf_optimum(&two).is_err());
    }

    #[test]
    fn slsf_optimum_matches_cached_tables() {
        let g = generate_game(&GeneratorParams {
            m: 1,
            n: 8,
            n_f: 4,
            epsilon_floor: 0.1,
            seed: 31,
        })
        .unwrap();
        let (a, v) = slsf_optimum(&g).unwrap();
        let cached = g.br_losses(0);
        let min = cached.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(v, min);
        assert_eq!(cached[a], min);
        for a in 0..8 {
            assert_eq!(exhaustive_best_response(&g, a), g.best_response(a));
        }
    }

    #[test]
    fn unbiasedness_examples() {
        let losses = [0.3, 0.9, 0.0, 0.45];
        assert_eq!(estimator_unbiasedness_check(&MixedStrategy::uniform(4), &losses).unwrap(), 0.0);
        assert_eq!(
            estimator_unbiasedness_check(&MixedStrategy::point_mass(4, 2), &losses).unwrap(),
            0.0
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw: Vec<f64> = (0..16).map(|_| 0.01 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let p = MixedStrategy::new(raw.iter().map(|x| x / total).collect()).unwrap();
        let l: Vec<f64> = (0..16).map(|_| rng.random()).collect();
        assert!(estimator_unbiasedness_check(&p, &l).unwrap() <= 1e-12);
    }
}
