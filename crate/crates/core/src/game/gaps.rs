use super::GameSpec;

/// Follower suboptimality gaps and per-joint-action identification hardness.
#[derive(Debug, Clone, PartialEq)]
pub struct GapProfile {
    follower_actions: usize,
    /// `Δ[a][k] = l_f(a,k) - min_b l_f(a,b)`, flat `a * n_f + k`.
    delta: Vec<f64>,
    epsilon_min: Option<f64>,
    hardness: Vec<f64>,
}

impl GapProfile {
    pub fn delta(&self, a: usize, k: usize) -> f64 {
        self.delta[a * self.follower_actions + k]
    }

    pub fn delta_row(&self, a: usize) -> &[f64] {
        let n_f = self.follower_actions;
        &self.delta[a * n_f..(a + 1) * n_f]
    }

    /// Smallest positive gap over all joint actions; `None` when the
    /// follower has a single action.
    pub fn epsilon_min(&self) -> Option<f64> {
        self.epsilon_min
    }

    /// `H_a = Σ_{k ≠ Br(a)} Δ_ak⁻²`; zero when `n_f = 1`.
    pub fn hardness(&self, a: usize) -> f64 {
        self.hardness[a]
    }

    pub fn hardness_all(&self) -> &[f64] {
        &self.hardness
    }

    pub fn max_hardness(&self) -> f64 {
        self.hardness.iter().copied().fold(0.0, f64::max)
    }
}

/// Computes `Δ_ak`, the minimum positive gap and `H_a` from the ground truth.
///
/// The best arm is excluded from `H_a`, where its gap is zero.
pub fn gap_profile(game: &GameSpec) -> GapProfile {
    let n_f = game.follower_actions();
    let size = game.joint_len();
    let mut delta = Vec::with_capacity(size * n_f);
    let mut hardness = Vec::with_capacity(size);
    let mut epsilon_min: Option<f64> = None;
    for a in 0..size {
        let row = game.follower_row(a);
        let br = game.best_response(a);
        let min = row[br];
        let mut h = 0.0;
        for (k, &loss) in row.iter().enumerate() {
            let d = loss - min;
            delta.push(d);
            if k != br {
                h += 1.0 / (d * d);
                epsilon_min = Some(epsilon_min.map_or(d, |e| e.min(d)));
            }
        }
        hardness.push(h);
    }
    GapProfile {
        follower_actions: n_f,
        delta,
        epsilon_min,
        hardness,
    }
}
