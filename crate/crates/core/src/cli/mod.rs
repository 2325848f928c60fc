//! Experiment runner behind the `hybrid-descent` binary.
//!
//! Exit-code contract: `0` all requested checks pass, `1` a check failed,
//! `2` configuration or I/O error, `3` numerical failure.

pub mod config;
pub mod output;
pub mod presets;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::agents::{check_write_disjointness, max_deviation, run_distributed, AgentOrder};
use crate::analysis::{self, CheckReport, ConvergenceCertificate, EnvelopeMode};
use crate::error::Error;
use crate::hybrid_core::{simulate, TerminalStatus, Trajectory};
use crate::objective::Objective;

pub use config::{parse_config, CheckName, ChecksConfig, ExperimentConfig, ResolvedExperiment};
pub use presets::{list_presets, preset, Preset};

/// Deviation allowed between centralized and distributed runs.
pub const MODE_DEVIATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Simulation(#[from] Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Simulation(Error::NumericalFailure { .. }) | RunError::Simulation(Error::Internal(_)) => 3,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prefactors {
    pub proposition: f64,
    pub theorem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub beta: f64,
    #[serde(rename = "K")]
    pub lipschitz: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    #[serde(rename = "A")]
    pub a_const: f64,
    #[serde(rename = "B")]
    pub b_const: f64,
    pub rate: f64,
    pub prefactors: Prefactors,
    pub escape_growth: f64,
}

impl From<&ConvergenceCertificate> for CertificateSummary {
    fn from(c: &ConvergenceCertificate) -> Self {
        Self {
            beta: c.beta,
            lipschitz: c.lipschitz,
            tau_min: c.tau_min,
            tau_max: c.tau_max,
            a_const: c.a_const,
            b_const: c.b_const,
            rate: c.rate,
            prefactors: Prefactors {
                proposition: c.prop_prefactor,
                theorem: c.thm_prefactor,
            },
            escape_growth: c.escape_growth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalSummary {
    pub t: f64,
    pub j: u64,
    pub dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub pass: bool,
    /// `null` when no point was checked.
    pub worst_margin: f64,
    pub at_t: Option<f64>,
    pub at_j: Option<u64>,
    pub tolerance: f64,
    pub points: usize,
}

/// What a run reports. Serialized as `summary.json`; the wall-clock time is
/// kept out of the file so that reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub preset: Option<String>,
    pub seed: u64,
    pub n: usize,
    pub agents: usize,
    pub certificate: CertificateSummary,
    #[serde(rename = "final")]
    pub final_state: FinalSummary,
    pub jumps: u64,
    pub terminal: TerminalStatus,
    pub checks: Vec<CheckSummary>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl RunSummary {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

/// Runs one named check against a trajectory.
pub fn run_check(name: CheckName, traj: &Trajectory, exp: &ResolvedExperiment) -> Result<CheckReport, Error> {
    let obj = &exp.objective;
    let cert = &exp.certificate;
    let x_star = obj.minimizer();
    match name {
        CheckName::Lemma3 => analysis::check_lemma3(traj, obj, cert),
        CheckName::Lemma4 => analysis::check_lemma4(traj, obj, cert),
        CheckName::JumpDescent => analysis::check_jump_descent(traj, obj),
        CheckName::PropositionEnvelope => {
            analysis::check_convergence_envelope(traj, x_star, cert, EnvelopeMode::Proposition)
        }
        CheckName::TheoremEnvelope => analysis::check_convergence_envelope(traj, x_star, cert, EnvelopeMode::Theorem),
        CheckName::EscapeGrowth => analysis::check_escape_growth(traj, obj, cert),
        CheckName::FirstJumpBound => analysis::check_first_jump(traj, x_star),
        CheckName::TimerDiscipline => Ok(analysis::check_timer_discipline(traj, &exp.timer)),
    }
}

pub fn summarize(
    exp: &ResolvedExperiment,
    traj: &Trajectory,
    preset: Option<&str>,
    started: Instant,
) -> Result<RunSummary, RunError> {
    let reports: Vec<CheckReport> = exp
        .checks
        .par_iter()
        .map(|&c| run_check(c, traj, exp))
        .collect::<Result<_, _>>()?;
    let checks = reports
        .iter()
        .flat_map(|r| &r.inequalities)
        .map(|i| CheckSummary {
            name: i.name.clone(),
            pass: i.pass,
            worst_margin: i.worst_margin,
            at_t: i.at.map(|h| h.t),
            at_j: i.at.map(|h| h.j),
            tolerance: i.tolerance,
            points: i.points,
        })
        .collect();
    let last = traj.last();
    Ok(RunSummary {
        name: exp.name.clone(),
        preset: preset.map(str::to_string),
        seed: exp.seed,
        n: exp.objective.dim(),
        agents: exp.partition.agents(),
        certificate: (&exp.certificate).into(),
        final_state: FinalSummary {
            t: last.time.t,
            j: last.time.j,
            dist: analysis::distance_to_a(&last.state, exp.objective.minimizer())?,
        },
        jumps: traj.jump_count(),
        terminal: traj.status,
        checks,
        wall_clock: started.elapsed(),
    })
}

/// Writes `trajectory.csv`, `jumps.csv`, `summary.json` and `config.json`
/// into `dir`.
pub fn write_artifacts(
    dir: &Path,
    config: &ExperimentConfig,
    exp: &ResolvedExperiment,
    traj: &Trajectory,
    summary: &RunSummary,
) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("trajectory.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    output::write_trajectory_csv(&mut w, traj, &exp.objective, &exp.certificate).map_err(io_err(&path))?;
    std::io::Write::flush(&mut w).map_err(io_err(&path))?;

    let path = dir.join("jumps.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    output::write_jumps_csv(&mut w, traj).map_err(io_err(&path))?;
    std::io::Write::flush(&mut w).map_err(io_err(&path))?;

    let path = dir.join("summary.json");
    fs::write(&path, summary.to_json()).map_err(io_err(&path))?;
    let path = dir.join("config.json");
    fs::write(&path, config::config_to_json(config) + "\n").map_err(io_err(&path))?;
    Ok(())
}

/// Resolves, simulates, checks, and (when `out_dir` is given) writes artifacts
/// to `out_dir/<run name>/`.
pub fn run(config: &ExperimentConfig, preset: Option<&str>, out_dir: Option<&Path>) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    let exp = config.resolve()?;
    let traj = simulate(
        &exp.objective,
        &exp.partition,
        &exp.init,
        &exp.timer,
        exp.stop,
        exp.sample_interval,
    )?;
    let summary = summarize(&exp, &traj, preset, started)?;
    let out_dir = out_dir.map(Path::to_path_buf).or_else(|| config.output_dir.clone());
    if let Some(dir) = out_dir {
        write_artifacts(&dir.join(&exp.name), config, &exp, &traj, &summary)?;
    }
    Ok(summary)
}

/// Runs several configs concurrently; results keep the input order.
pub fn run_all(
    configs: &[ExperimentConfig],
    preset: Option<&str>,
    out_dir: Option<&Path>,
) -> Vec<Result<RunSummary, RunError>> {
    configs.par_iter().map(|c| run(c, preset, out_dir)).collect()
}

/// Centralized and distributed runs of the same config.
#[derive(Debug, Clone)]
pub struct ModeComparison {
    pub centralized: RunSummary,
    pub distributed: RunSummary,
    pub max_deviation: f64,
    pub write_disjoint: bool,
}

impl ModeComparison {
    pub fn pass(&self) -> bool {
        self.max_deviation <= MODE_DEVIATION_TOLERANCE && self.write_disjoint
    }

    pub fn to_json(&self) -> String {
        let value = serde_json::json!({
            "name": self.centralized.name,
            "max_deviation": self.max_deviation,
            "tolerance": MODE_DEVIATION_TOLERANCE,
            "write_disjoint": self.write_disjoint,
            "pass": self.pass(),
            "centralized": self.centralized,
            "distributed": self.distributed,
        });
        serde_json::to_string_pretty(&value).expect("comparison serializes") + "\n"
    }
}

pub fn compare_modes(config: &ExperimentConfig, order: AgentOrder) -> Result<ModeComparison, RunError> {
    let exp = config.resolve()?;
    let started = Instant::now();
    let central = simulate(
        &exp.objective,
        &exp.partition,
        &exp.init,
        &exp.timer,
        exp.stop,
        exp.sample_interval,
    )?;
    let centralized = summarize(&exp, &central, None, started)?;
    let started = Instant::now();
    let dist = run_distributed(
        &exp.objective,
        &exp.partition,
        &exp.init,
        &exp.timer,
        exp.stop,
        exp.sample_interval,
        order,
    )?;
    let distributed = summarize(&exp, &dist.trajectory, None, started)?;
    Ok(ModeComparison {
        centralized,
        distributed,
        max_deviation: max_deviation(&central, &dist.trajectory),
        write_disjoint: check_write_disjointness(&dist.trace, exp.objective.dim()),
    })
}
