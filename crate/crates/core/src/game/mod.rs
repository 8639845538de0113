//! Game model: loss tensors, joint-action indexing and the follower's exact
//! best responses.
//!
//! A game has `m` leaders with `n` actions each and one follower with `n_f`
//! actions. Joint leader actions are stored flat using a mixed-radix encoding
//! in which leader 0 is the most significant digit. Every loss lies in
//! `[0, 1]` and every follower row has a unique minimizer.

mod gaps;
mod generate;
mod noise;

pub use gaps::{gap_profile, GapProfile};
pub use generate::{generate_game, GeneratorParams, DEFAULT_RESAMPLE_BUDGET};
pub use noise::NoiseModel;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest joint leader action space a game may have.
pub const MAX_JOINT_ACTIONS: usize = 1 << 20;

/// Largest number of leaders accepted. Only reachable with `n = 1`.
pub const MAX_LEADERS: usize = 64;

/// Mixed-radix indexing of joint leader actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActions {
    leaders: usize,
    actions: usize,
    size: usize,
    strides: Vec<usize>,
}

impl JointActions {
    pub fn new(leaders: usize, actions: usize) -> Result<Self> {
        if leaders == 0 || actions == 0 {
            return Err(Error::Validation(format!(
                "leader count and per-leader action count must be >= 1 (got m={leaders}, n={actions})"
            )));
        }
        if leaders > MAX_LEADERS {
            return Err(Error::Cap {
                what: "m",
                value: leaders as u128,
                limit: MAX_LEADERS as u128,
            });
        }
        let mut size: u128 = 1;
        for _ in 0..leaders {
            size *= actions as u128;
            if size > MAX_JOINT_ACTIONS as u128 {
                return Err(Error::Cap {
                    what: "n^m",
                    value: (actions as u128).saturating_pow(leaders as u32),
                    limit: MAX_JOINT_ACTIONS as u128,
                });
            }
        }
        let size = size as usize;
        let strides = (0..leaders)
            .map(|i| actions.pow((leaders - 1 - i) as u32))
            .collect();
        Ok(Self {
            leaders,
            actions,
            size,
            strides,
        })
    }

    pub fn leaders(&self) -> usize {
        self.leaders
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    /// Number of joint actions, `n^m`.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn encode(&self, coordinates: &[usize]) -> Result<usize> {
        if coordinates.len() != self.leaders {
            return Err(Error::Validation(format!(
                "joint action has {} coordinates, expected {}",
                coordinates.len(),
                self.leaders
            )));
        }
        let mut flat = 0;
        for (i, &c) in coordinates.iter().enumerate() {
            if c >= self.actions {
                return Err(Error::Validation(format!(
                    "leader {i} action {c} out of range [0, {})",
                    self.actions
                )));
            }
            flat = flat * self.actions + c;
        }
        Ok(flat)
    }

    pub fn decode(&self, flat: usize) -> Vec<usize> {
        (0..self.leaders).map(|i| self.coordinate(flat, i)).collect()
    }

    /// Action of leader `i` inside joint action `flat`.
    #[inline]
    pub fn coordinate(&self, flat: usize, i: usize) -> usize {
        (flat / self.strides[i]) % self.actions
    }

    /// Joint action obtained from `flat` by replacing leader `i`'s action.
    #[inline]
    pub fn with_coordinate(&self, flat: usize, i: usize, action: usize) -> usize {
        let current = self.coordinate(flat, i);
        flat - current * self.strides[i] + action * self.strides[i]
    }
}

/// Index of the unique minimum of a follower loss row.
///
/// Fails when the row is empty or the minimum is attained more than once.
pub fn best_response_row(row: &[f64]) -> Result<usize> {
    let Some((best, &min)) = row
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
    else {
        return Err(Error::Validation("empty follower loss row".into()));
    };
    if row.iter().filter(|&&v| v == min).count() > 1 {
        return Err(Error::Validation(format!(
            "follower best response is not unique (minimum {min} attained more than once)"
        )));
    }
    Ok(best)
}

/// Loss tensors of an MLSF game plus the derived best-response table.
///
/// Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameDocument", into = "GameDocument")]
pub struct GameSpec {
    joint: JointActions,
    follower_actions: usize,
    /// Indexed `(i * n^m + a) * n_f + b`.
    leader_losses: Vec<f64>,
    /// Indexed `a * n_f + b`.
    follower_losses: Vec<f64>,
    best_responses: Vec<usize>,
    /// `l_i(a, Br(a))`, indexed `i * n^m + a`.
    br_losses: Vec<f64>,
}

impl GameSpec {
    /// Builds a game from flat tensors, validating shapes, ranges and
    /// best-response uniqueness.
    pub fn new(
        m: usize,
        n: usize,
        n_f: usize,
        leader_losses: Vec<f64>,
        follower_losses: Vec<f64>,
    ) -> Result<Self> {
        let joint = JointActions::new(m, n)?;
        if n_f == 0 {
            return Err(Error::Validation("n_f must be >= 1".into()));
        }
        let cells = joint.len() * n_f;
        if leader_losses.len() != m * cells {
            return Err(Error::Validation(format!(
                "leader_losses has {} entries, expected m*n^m*n_f = {}",
                leader_losses.len(),
                m * cells
            )));
        }
        if follower_losses.len() != cells {
            return Err(Error::Validation(format!(
                "follower_losses has {} entries, expected n^m*n_f = {}",
                follower_losses.len(),
                cells
            )));
        }
        check_unit_range("leader_losses", &leader_losses)?;
        check_unit_range("follower_losses", &follower_losses)?;

        let best_responses = follower_losses
            .chunks(n_f)
            .enumerate()
            .map(|(a, row)| {
                best_response_row(row).map_err(|e| match e {
                    Error::Validation(msg) => {
                        Error::Validation(format!("joint action {a}: {msg}"))
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let size = joint.len();
        let mut br_losses = Vec::with_capacity(m * size);
        for i in 0..m {
            for (a, &b) in best_responses.iter().enumerate() {
                br_losses.push(leader_losses[(i * size + a) * n_f + b]);
            }
        }

        Ok(Self {
            joint,
            follower_actions: n_f,
            leader_losses,
            follower_losses,
            best_responses,
            br_losses,
        })
    }

    pub fn leaders(&self) -> usize {
        self.joint.leaders()
    }

    pub fn actions(&self) -> usize {
        self.joint.actions()
    }

    pub fn follower_actions(&self) -> usize {
        self.follower_actions
    }

    pub fn joint(&self) -> &JointActions {
        &self.joint
    }

    pub fn joint_len(&self) -> usize {
        self.joint.len()
    }

    #[inline]
    pub fn leader_loss(&self, i: usize, a: usize, b: usize) -> f64 {
        self.leader_losses[(i * self.joint.len() + a) * self.follower_actions + b]
    }

    #[inline]
    pub fn follower_loss(&self, a: usize, b: usize) -> f64 {
        self.follower_losses[a * self.follower_actions + b]
    }

    pub fn follower_row(&self, a: usize) -> &[f64] {
        let n_f = self.follower_actions;
        &self.follower_losses[a * n_f..(a + 1) * n_f]
    }

    /// The follower's unique best response to joint action `a`.
    #[inline]
    pub fn best_response(&self, a: usize) -> usize {
        self.best_responses[a]
    }

    pub fn best_responses(&self) -> &[usize] {
        &self.best_responses
    }

    /// Leader `i`'s loss when the follower best-responds to `a`.
    #[inline]
    pub fn br_loss(&self, i: usize, a: usize) -> f64 {
        self.br_losses[i * self.joint.len() + a]
    }

    /// All of leader `i`'s best-response-composed losses, indexed by joint action.
    pub fn br_losses(&self, i: usize) -> &[f64] {
        let size = self.joint.len();
        &self.br_losses[i * size..(i + 1) * size]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("game serialization is infallible")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn check_unit_range(name: &str, values: &[f64]) -> Result<()> {
    match values
        .iter()
        .position(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
    {
        Some(idx) => Err(Error::Validation(format!(
            "{name}[{idx}] = {} is outside [0, 1]",
            values[idx]
        ))),
        None => Ok(()),
    }
}

/// Nested-array JSON layout of a game:
/// `leader_losses[i][flat_a][b]`, `follower_losses[flat_a][b]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameDocument {
    pub m: usize,
    pub n: usize,
    pub n_f: usize,
    pub leader_losses: Vec<Vec<Vec<f64>>>,
    pub follower_losses: Vec<Vec<f64>>,
}

impl TryFrom<GameDocument> for GameSpec {
    type Error = Error;

    fn try_from(doc: GameDocument) -> Result<Self> {
        let size = JointActions::new(doc.m, doc.n)?.len();
        if doc.leader_losses.len() != doc.m {
            return Err(Error::Validation(format!(
                "leader_losses has {} leaders, expected m = {}",
                doc.leader_losses.len(),
                doc.m
            )));
        }
        let mut leader = Vec::with_capacity(doc.m * size * doc.n_f);
        for (i, per_leader) in doc.leader_losses.iter().enumerate() {
            if per_leader.len() != size {
                return Err(Error::Validation(format!(
                    "leader_losses[{i}] has {} joint actions, expected n^m = {size}",
                    per_leader.len()
                )));
            }
            for (a, row) in per_leader.iter().enumerate() {
                if row.len() != doc.n_f {
                    return Err(Error::Validation(format!(
                        "leader_losses[{i}][{a}] has {} entries, expected n_f = {}",
                        row.len(),
                        doc.n_f
                    )));
                }
                leader.extend_from_slice(row);
            }
        }
        if doc.follower_losses.len() != size {
            return Err(Error::Validation(format!(
                "follower_losses has {} joint actions, expected n^m = {size}",
                doc.follower_losses.len()
            )));
        }
        let mut follower = Vec::with_capacity(size * doc.n_f);
        for (a, row) in doc.follower_losses.iter().enumerate() {
            if row.len() != doc.n_f {
                return Err(Error::Validation(format!(
                    "follower_losses[{a}] has {} entries, expected n_f = {}",
                    row.len(),
                    doc.n_f
                )));
            }
            follower.extend_from_slice(row);
        }
        GameSpec::new(doc.m, doc.n, doc.n_f, leader, follower)
    }
}

impl From<GameSpec> for GameDocument {
    fn from(game: GameSpec) -> Self {
        let size = game.joint_len();
        let n_f = game.follower_actions;
        let leader_losses = game
            .leader_losses
            .chunks(size * n_f)
            .map(|per_leader| per_leader.chunks(n_f).map(<[f64]>::to_vec).collect())
            .collect();
        let follower_losses = game
            .follower_losses
            .chunks(n_f)
            .map(<[f64]>::to_vec)
            .collect();
        GameDocument {
            m: game.leaders(),
            n: game.actions(),
            n_f,
            leader_losses,
            follower_losses,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_leader_game() -> GameSpec {
        // m=2, n=2, n_f=2
        let follower = vec![0.1, 0.9, 0.8, 0.2, 0.5, 0.4, 0.3, 0.6];
        let leader: Vec<f64> = (0..16).map(|k| k as f64 / 16.0).collect();
        GameSpec::new(2, 2, 2, leader, follower).unwrap()
    }

    #[test]
    fn best_response_row_examples() {
        assert_eq!(best_response_row(&[0.3, 0.1, 0.7]).unwrap(), 1);
        assert_eq!(best_response_row(&[0.0, 1.0]).unwrap(), 0);
        assert!(matches!(
            best_response_row(&[0.2, 0.5, 0.2]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn best_response_matches_exhaustive_scan() {
        let game = two_leader_game();
        for a in 0..game.joint_len() {
            let mut best = 0;
            for b in 1..game.follower_actions() {
                if game.follower_loss(a, b) < game.follower_loss(a, best) {
                    best = b;
                }
            }
            assert_eq!(game.best_response(a), best);
        }
        assert_eq!(game.best_responses(), &[0, 1, 1, 0]);
    }

    #[test]
    fn br_loss_composes_leader_loss_with_best_response() {
        let game = two_leader_game();
        for i in 0..2 {
            for a in 0..4 {
                assert_eq!(game.br_loss(i, a), game.leader_loss(i, a, game.best_response(a)));
            }
        }
    }

    #[test]
    fn rejects_out_of_range_and_ties() {
        let bad_range = GameSpec::new(1, 2, 2, vec![0.0, 1.1, 0.0, 0.0], vec![0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(bad_range, Err(Error::Validation(_))));
        let nan = GameSpec::new(1, 2, 2, vec![0.0, f64::NAN, 0.0, 0.0], vec![0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(nan, Err(Error::Validation(_))));
        let tied = GameSpec::new(1, 2, 2, vec![0.0; 4], vec![0.0, 1.0, 0.5, 0.5]);
        assert!(matches!(tied, Err(Error::Validation(_))));
        let shape = GameSpec::new(1, 2, 2, vec![0.0; 3], vec![0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(shape, Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_oversized_joint_space() {
        assert!(matches!(JointActions::new(21, 2), Err(Error::Cap { .. })));
        assert!(JointActions::new(20, 2).is_ok());
        assert!(matches!(JointActions::new(65, 1), Err(Error::Cap { .. })));
    }

    #[test]
    fn leader_zero_is_most_significant() {
        let joint = JointActions::new(3, 4).unwrap();
        assert_eq!(joint.encode(&[1, 2, 3]).unwrap(), 16 + 8 + 3);
        assert_eq!(joint.decode(27), vec![1, 2, 3]);
        assert_eq!(joint.with_coordinate(27, 0, 3), 3 * 16 + 8 + 3);
        assert!(joint.encode(&[1, 4, 0]).is_err());
    }

    #[test]
    fn json_round_trip_is_value_exact() {
        let game = crate::game::generate_game(&GeneratorParams {
            m: 2,
            n: 3,
            n_f: 2,
            epsilon_floor: 0.1,
            seed: 11,
        })
        .unwrap();
        let text = game.to_json();
        let back = GameSpec::from_json(&text).unwrap();
        assert_eq!(back, game);
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["leader_losses"].as_array().unwrap().len(), 2);
        assert_eq!(doc["leader_losses"][1].as_array().unwrap().len(), 9);
        assert_eq!(doc["follower_losses"][4].as_array().unwrap().len(), 2);
    }

    #[test]
    fn json_with_wrong_shape_is_rejected() {
        let text = r#"{"m":1,"n":2,"n_f":2,"leader_losses":[[[0.1,0.2]]],"follower_losses":[[0.1,0.2],[0.3,0.4]]}"#;
        assert!(GameSpec::from_json(text).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(m in 1usize..5, n in 1usize..7) {
            let joint = JointActions::new(m, n).unwrap();
            prop_assume!(joint.len() <= 10_000);
            for flat in 0..joint.len() {
                let coords = joint.decode(flat);
                prop_assert_eq!(joint.encode(&coords).unwrap(), flat);
                for (i, &c) in coords.iter().enumerate() {
                    prop_assert_eq!(joint.coordinate(flat, i), c);
                }
            }
        }
    }
}
