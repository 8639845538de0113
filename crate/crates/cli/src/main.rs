use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mlsf_cli::{
    load_chi, load_game, run_experiment, verify, CliError, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "mlsf", version, about = "Run and verify multi-leader single-follower learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for running seeds.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Cross-check the equilibrium gap of a joint distribution.
    Verify { game: PathBuf, chi: PathBuf },
}

fn run_command(config: PathBuf, out: Option<PathBuf>, threads: usize) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&config).map_err(|source| CliError::Io {
        path: config.clone(),
        source,
    })?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let out = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("mlsf-out"));
    let summary = run_experiment(&cfg, &out, threads)?;
    for s in &summary.seeds {
        let regret: Vec<String> = s.final_regret.iter().map(|r| format!("{r:.4}")).collect();
        let mut line = format!(
            "seed {}: regret [{}] gap {:.6} mispulls {}",
            s.seed,
            regret.join(", "),
            s.final_gap_max,
            s.mispulls
        );
        if let Some(flag) = s.misidentified {
            line.push_str(&format!(" misidentified {flag}"));
        }
        println!("{line}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn verify_command(game: PathBuf, chi: PathBuf) -> Result<(), CliError> {
    let game = load_game(&game)?;
    let chi = load_chi(&chi)?;
    let outcome = verify(&game, &chi)?;
    for (i, gap) in outcome.metrics.iter().enumerate() {
        match &outcome.enumeration {
            Some(slow) => println!("leader {i}: gap {gap:.12e} enumeration {:.12e}", slow[i]),
            None => println!("leader {i}: gap {gap:.12e} enumeration skipped (swap family too large)"),
        }
    }
    println!("agree");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, threads } => run_command(config, out, threads),
        Command::Verify { game, chi } => verify_command(game, chi),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
