//! Experiment runner: JSON configs in, per-seed checkpoint CSVs and a JSON
//! summary out, plus the equilibrium-gap cross-check used by `verify`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mlsf_core::game::{generate_game, GameSpec};
use mlsf_core::metrics::{check_joint_distribution, cse_gap, loglog_slope, Checkpoint, CHECKPOINT_SCHEMA};
use mlsf_core::oracle::{enumerate_swap_gap, MAX_SWAP_FUNCTIONS};
use mlsf_core::protocols::{run, ProtocolConfig, RealizedSchedule};

/// Version tag of `summary.json`.
pub const SUMMARY_SCHEMA: &str = "mlsf-summary v1";

/// Source revision baked in at build time.
pub const BUILD_ID: &str = match option_env!("MLSF_BUILD_ID") {
    Some(id) => id,
    None => "unknown",
};

/// Largest disagreement `verify` tolerates between the two gap computations.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mlsf_core::Error),
    #[error("{0}")]
    Shape(String),
    #[error("gap computations disagree for leader {leader}: metrics {fast}, enumeration {slow}")]
    Disagreement { leader: usize, fast: f64, slow: f64 },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use mlsf_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Domain(_) | E::Schedule(_)) => 2,
            CliError::Core(E::Validation(_) | E::Generation(_) | E::Commit(_)) => 3,
            CliError::Core(E::Cap { .. }) => 4,
            CliError::Shape(_) => 3,
            CliError::Disagreement { .. } => 5,
            CliError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Generated game; without a `seed` each run seed generates its own game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub m: usize,
    pub n: usize,
    pub n_f: usize,
    pub epsilon_floor: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameSource {
    Inline(GameSpec),
    Generator(GeneratorSpec),
}

impl GameSource {
    pub fn game_for(&self, run_seed: u64) -> mlsf_core::Result<GameSpec> {
        match self {
            GameSource::Inline(game) => Ok(game.clone()),
            GameSource::Generator(spec) => generate_game(&mlsf_core::game::GeneratorParams {
                m: spec.m,
                n: spec.n,
                n_f: spec.n_f,
                epsilon_floor: spec.epsilon_floor,
                seed: spec.seed.unwrap_or(run_seed),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSource,
    pub protocol: ProtocolConfig,
    pub seeds: Vec<u64>,
    /// Overrides `protocol.checkpoints` when non-empty.
    #[serde(default)]
    pub checkpoints: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Protocol config for one seed, checkpoints merged in.
    pub fn protocol_for(&self, seed: u64) -> ProtocolConfig {
        let mut protocol = self.protocol.clone();
        if !self.checkpoints.is_empty() {
            protocol.checkpoints = self.checkpoints.clone();
        }
        protocol.seed = seed;
        protocol
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds: at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("seeds: duplicate seed".into()));
        }
        if let GameSource::Generator(g) = &self.game {
            if !(g.epsilon_floor > 0.0 && g.epsilon_floor < 0.5) {
                return Err(CliError::Config(format!(
                    "game.generator.epsilon_floor must lie in (0, 0.5), got {}",
                    g.epsilon_floor
                )));
            }
        }
        self.protocol_for(self.seeds[0]).validate()?;
        Ok(())
    }
}

/// Per-seed entry of `summary.json`. Untracked regrets serialize as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_regret: Vec<f64>,
    pub stage_two_regret: Option<Vec<f64>>,
    pub final_gap: Vec<f64>,
    pub final_gap_max: f64,
    pub mispulls: u64,
    /// Whether any committed response differs from the true best response.
    pub misidentified: Option<bool>,
    pub misidentified_actions: Option<Vec<usize>>,
    pub schedule: RealizedSchedule,
    /// Least-squares slope of log10(regret + 1) on log10(t), per leader.
    pub regret_slope: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub build: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedSummary>,
}

/// Output of one seed: CSV text and the summary entry.
#[derive(Debug, Clone)]
pub struct SeedOutput {
    pub csv: String,
    pub summary: SeedSummary,
}

pub fn checkpoint_csv(m: usize, checkpoints: &[Checkpoint]) -> String {
    let mut out = String::new();
    out.push_str(CHECKPOINT_SCHEMA);
    out.push('\n');
    out.push_str(&Checkpoint::csv_header(m));
    out.push('\n');
    for c in checkpoints {
        out.push_str(&c.csv_row());
        out.push('\n');
    }
    out
}

fn regret_slopes(m: usize, checkpoints: &[Checkpoint]) -> Vec<Option<f64>> {
    (0..m)
        .map(|i| {
            let points: Vec<(u64, f64)> = checkpoints.iter().map(|c| (c.t, c.regret[i])).collect();
            if points.iter().any(|(_, r)| !r.is_finite()) {
                None
            } else {
                loglog_slope(&points)
            }
        })
        .collect()
}

pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedOutput, CliError> {
    let game = config.game.game_for(seed)?;
    let report = run(&game, &config.protocol_for(seed))?;
    let m = game.leaders();
    Ok(SeedOutput {
        csv: checkpoint_csv(m, &report.checkpoints),
        summary: SeedSummary {
            seed,
            regret_slope: regret_slopes(m, &report.checkpoints),
            final_regret: report.regret,
            stage_two_regret: report.stage_two_regret,
            final_gap: report.gap.per_leader,
            final_gap_max: report.gap.max,
            mispulls: report.mispulls,
            misidentified: report.misidentified.as_ref().map(|v| !v.is_empty()),
            misidentified_actions: report.misidentified,
            schedule: report.schedule,
        },
    })
}

/// Runs every seed on `threads` workers; results come back in seed order.
pub fn run_seeds(config: &ExperimentConfig, threads: usize) -> Result<Vec<SeedOutput>, CliError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| run_seed(config, seed))
            .collect()
    })
}

/// Runs the experiment and writes `seed<k>.csv` files and `summary.json`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<Summary, CliError> {
    let outputs = run_seeds(config, threads)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for output in &outputs {
        let path = out_dir.join(format!("seed{}.csv", output.summary.seed));
        fs::write(&path, &output.csv).map_err(io_err(&path))?;
    }
    let summary = Summary {
        schema: SUMMARY_SCHEMA.into(),
        build: BUILD_ID.into(),
        config: config.clone(),
        seeds: outputs.into_iter().map(|o| o.summary).collect(),
    };
    let path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(summary)
}

/// Joint distribution file: `{"m": .., "n": .., "chi": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiDocument {
    pub m: usize,
    pub n: usize,
    pub chi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOutcome {
    pub metrics: Vec<f64>,
    /// `None` when the swap family exceeds the enumeration cap.
    pub enumeration: Option<Vec<f64>>,
}

pub fn verify(game: &GameSpec, chi: &ChiDocument) -> Result<VerifyOutcome, CliError> {
    if chi.m != game.leaders() || chi.n != game.actions() {
        return Err(CliError::Shape(format!(
            "chi is for m = {}, n = {} but the game has m = {}, n = {}",
            chi.m,
            chi.n,
            game.leaders(),
            game.actions()
        )));
    }
    check_joint_distribution(game, &chi.chi)?;
    let fast = cse_gap(game, &chi.chi)?.per_leader;
    let family = (game.actions() as u128).checked_pow(game.actions() as u32);
    let enumeration = if family.is_some_and(|f| f <= MAX_SWAP_FUNCTIONS) {
        let slow = (0..game.leaders())
            .map(|i| enumerate_swap_gap(game, &chi.chi, i))
            .collect::<mlsf_core::Result<Vec<_>>>()?;
        for (leader, (&f, &s)) in fast.iter().zip(&slow).enumerate() {
            if (f - s).abs() > VERIFY_TOLERANCE {
                return Err(CliError::Disagreement {
                    leader,
                    fast: f,
                    slow: s,
                });
            }
        }
        Some(slow)
    } else {
        None
    };
    Ok(VerifyOutcome {
        metrics: fast,
        enumeration,
    })
}

pub fn load_game(path: &Path) -> Result<GameSpec, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    GameSpec::from_json(&text).map_err(|e| CliError::Shape(format!("{}: {e}", path.display())))
}

pub fn load_chi(path: &Path) -> Result<ChiDocument, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Shape(format!("{}: {e}", path.display())))
}
