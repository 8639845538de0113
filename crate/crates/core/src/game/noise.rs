use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stochastic feedback model: draws a `[0, 1]` sample whose mean is the
/// underlying loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Always returns the loss itself.
    Deterministic,
    /// `1` with probability equal to the loss, else `0`.
    #[default]
    Bernoulli,
    /// Gaussian around the loss, rejection-sampled into `[0, 1]`.
    ///
    /// The realized mean drifts from the nominal one near the interval
    /// ends; for `sigma <= 0.05` and means in `[0.15, 0.85]` the drift is
    /// below `1e-3`.
    TruncatedGaussian { sigma: f64 },
}

impl NoiseModel {
    pub fn truncated_gaussian(sigma: f64) -> Result<Self> {
        let model = NoiseModel::TruncatedGaussian { sigma };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::TruncatedGaussian { sigma } if !(sigma.is_finite() && sigma > 0.0) => Err(
                Error::Domain(format!("noise sigma must be finite and > 0, got {sigma}")),
            ),
            _ => Ok(()),
        }
    }

    /// Draws one noisy observation of a loss with the given mean.
    pub fn sample<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> f64 {
        debug_assert!((0.0..=1.0).contains(&mean));
        match *self {
            NoiseModel::Deterministic => mean,
            NoiseModel::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseModel::TruncatedGaussian { sigma } => loop {
                let z: f64 = StandardNormal.sample(rng);
                let x = mean + sigma * z;
                if (0.0..=1.0).contains(&x) {
                    break x;
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_of(model: NoiseModel, target: f64, draws: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total: f64 = (0..draws)
            .map(|_| {
                let x = model.sample(target, &mut rng);
                assert!((0.0..=1.0).contains(&x));
                x
            })
            .sum();
        total / draws as f64
    }

    #[test]
    fn deterministic_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(NoiseModel::Deterministic.sample(0.37, &mut rng), 0.37);
    }

    #[test]
    fn bernoulli_boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(NoiseModel::Bernoulli.sample(0.0, &mut rng), 0.0);
            assert_eq!(NoiseModel::Bernoulli.sample(1.0, &mut rng), 1.0);
        }
    }

    #[test]
    fn bernoulli_mean_within_three_standard_errors() {
        let n = 100_000;
        let se = (0.3f64 * 0.7 / n as f64).sqrt();
        let mean = mean_of(NoiseModel::Bernoulli, 0.3, n, 42);
        assert!((mean - 0.3).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn every_kind_is_unbiased_within_four_standard_errors() {
        let n = 100_000;
        let models = [
            NoiseModel::Deterministic,
            NoiseModel::Bernoulli,
            NoiseModel::truncated_gaussian(0.05).unwrap(),
        ];
        for (s, model) in models.into_iter().enumerate() {
            for target in [0.15f64, 0.5, 0.85] {
                let sd = match model {
                    NoiseModel::Deterministic => 0.0,
                    NoiseModel::Bernoulli => (target * (1.0 - target)).sqrt(),
                    NoiseModel::TruncatedGaussian { sigma } => sigma,
                };
                let mean = mean_of(model, target, n, 100 + s as u64);
                // Summation error of n additions is far below 1e-9.
                let tol = 4.0 * sd / (n as f64).sqrt() + 1e-9;
                assert!((mean - target).abs() <= tol, "{model:?} target {target} mean {mean}");
            }
        }
    }

    #[test]
    fn truncated_gaussian_stays_in_unit_interval_at_edges() {
        let model = NoiseModel::truncated_gaussian(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mean in [0.0, 1.0, 0.02] {
            for _ in 0..10_000 {
                let x = model.sample(mean, &mut rng);
                assert!((0.0..=1.0).contains(&x));
            }
        }
    }

    #[test]
    fn invalid_sigma_rejected() {
        assert!(NoiseModel::truncated_gaussian(0.0).is_err());
        assert!(NoiseModel::truncated_gaussian(f64::NAN).is_err());
    }

    #[test]
    fn json_shape() {
        let text = serde_json::to_string(&NoiseModel::truncated_gaussian(0.1).unwrap()).unwrap();
        assert_eq!(text, r#"{"kind":"truncated-gaussian","sigma":0.1}"#);
        let back: NoiseModel = serde_json::from_str(r#"{"kind":"bernoulli"}"#).unwrap();
        assert_eq!(back, NoiseModel::Bernoulli);
    }
}
