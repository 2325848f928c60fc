use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hybrid_descent::agents::AgentOrder;
use hybrid_descent::cli::{
    self, config::ChecksConfig, parse_config, preset, ConfigError, ExperimentConfig, RunError,
};

#[derive(Parser)]
#[command(name = "hybrid-descent", version, about = "Hybrid distributed gradient descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a preset, write CSV/JSON artifacts, and check the certificate.
    Run {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Override the seed of every run.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; one subdirectory per run.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `all`, `none`, or a comma-separated list of check names.
        #[arg(long)]
        checks: Option<String>,
    },
    /// Print the built-in presets.
    ListPresets,
    /// Run centralized and per-agent simulations and compare them.
    CompareModes {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Shuffle agent visiting order with this seed.
        #[arg(long)]
        shuffle: Option<u64>,
    },
}

fn load(config: Option<PathBuf>, preset_name: Option<&str>) -> Result<Vec<ExperimentConfig>, RunError> {
    if let Some(path) = config {
        let text = std::fs::read_to_string(&path).map_err(|source| RunError::Io { path, source })?;
        return Ok(vec![parse_config(&text)?]);
    }
    let name = preset_name.unwrap_or_default();
    preset(name)
        .map(|p| p.configs)
        .ok_or_else(|| ConfigError::invalid("preset", format!("unknown preset `{name}`")).into())
}

fn run(
    config: Option<PathBuf>,
    preset_name: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    checks: Option<String>,
) -> Result<bool, RunError> {
    let mut configs = load(config, preset_name.as_deref())?;
    let checks = checks.as_deref().map(ChecksConfig::from_arg).transpose()?;
    for c in &mut configs {
        if let Some(seed) = seed {
            c.seed = seed;
        }
        if let Some(checks) = &checks {
            c.checks = checks.clone();
        }
    }
    let out = out.or_else(|| Some(PathBuf::from("runs")));
    let mut all_pass = true;
    for result in cli::run_all(&configs, preset_name.as_deref(), out.as_deref()) {
        let summary = result?;
        let failed: Vec<_> = summary.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        eprintln!(
            "{}: {} jumps, t = {:.6}, |xi|_A = {:.3e}, {} checks, {} in {:.2?}",
            summary.name,
            summary.jumps,
            summary.final_state.t,
            summary.final_state.dist,
            summary.checks.len(),
            if failed.is_empty() { "all pass".to_string() } else { format!("FAILED: {}", failed.join(", ")) },
            summary.wall_clock,
        );
        all_pass &= failed.is_empty();
    }
    Ok(all_pass)
}

fn compare(config: Option<PathBuf>, preset_name: Option<String>, shuffle: Option<u64>) -> Result<bool, RunError> {
    let order = shuffle.map_or(AgentOrder::Ascending, AgentOrder::Shuffled);
    let mut all_pass = true;
    for c in load(config, preset_name.as_deref())? {
        let cmp = cli::compare_modes(&c, order)?;
        print!("{}", cmp.to_json());
        all_pass &= cmp.pass();
    }
    Ok(all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            preset,
            seed,
            out,
            checks,
        } => run(config, preset, seed, out, checks),
        Command::ListPresets => {
            for (name, description) in cli::list_presets() {
                println!("{name:<14} {description}");
            }
            Ok(true)
        }
        Command::CompareModes { config, preset, shuffle } => compare(config, preset, shuffle),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
