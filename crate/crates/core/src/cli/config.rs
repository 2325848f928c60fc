//! Experiment configuration: the JSON schema accepted by `run` and
//! `compare-modes`, and its resolution into concrete simulation inputs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::ConvergenceCertificate;
use crate::hybrid_core::{HybridState, ResetPolicy, StopRule, TimerConfig};
use crate::objective::{build_quadratic_with, BlockPartition, LinearTerm, Objective, QuadraticObjective, SpectrumSpec};

use super::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    pub timer: TimerSpec,
    pub init: InitConfig,
    pub stop: StopConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub n: usize,
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub b_mode: BMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumConfig {
    /// Full ascending eigenvalue list; its length must equal `n`.
    Eigenvalues(Vec<f64>),
    /// `n` eigenvalues from `beta` to `K`.
    Range {
        beta: f64,
        #[serde(rename = "K")]
        lipschitz: f64,
        #[serde(default)]
        spacing: Spacing,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BMode {
    #[default]
    #[serde(rename = "random_1_5")]
    Random1To5,
    Zero,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    /// Agent count; defaults to one agent per coordinate.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<usize>,
    /// Explicit block sizes; contiguous near-equal blocks when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimerSpec {
    /// `τ_max = β²/(3K³ + 1)`, `τ_min = τ_max / 2`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub auto_paper: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    #[serde(default)]
    pub reset_policy: ResetPolicyConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetPolicyConfig {
    #[default]
    FixedMax,
    Fixed(f64),
    /// Seeded from the experiment seed.
    Uniform,
    Sequence(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitConfig {
    Shorthand(InitShorthand),
    Explicit(InitSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitShorthand {
    /// `z1 = z2 = (2, …, 2)`.
    AllTwos,
    /// `z1 = z2 = x*`.
    AtMinimizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub z1: VectorSpec,
    pub z2: VectorSpec,
    /// Defaults to `τ_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorSpec {
    Twos,
    Minimizer,
    Constant(f64),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StopConfig {
    MaxTime(f64),
    MaxJumps(u64),
    /// `|ξ|_A` threshold.
    Tolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Lemma3,
    Lemma4,
    JumpDescent,
    PropositionEnvelope,
    TheoremEnvelope,
    EscapeGrowth,
    FirstJumpBound,
    TimerDiscipline,
}

impl CheckName {
    pub const ALL: [CheckName; 8] = [
        CheckName::Lemma3,
        CheckName::Lemma4,
        CheckName::JumpDescent,
        CheckName::PropositionEnvelope,
        CheckName::TheoremEnvelope,
        CheckName::EscapeGrowth,
        CheckName::FirstJumpBound,
        CheckName::TimerDiscipline,
    ];

    /// Checks whose hypothesis is `z1(0,0) = z2(0,0)`.
    pub fn needs_equal_init(self) -> bool {
        matches!(
            self,
            CheckName::Lemma3 | CheckName::Lemma4 | CheckName::JumpDescent | CheckName::PropositionEnvelope
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Lemma3 => "lemma3",
            CheckName::Lemma4 => "lemma4",
            CheckName::JumpDescent => "jump_descent",
            CheckName::PropositionEnvelope => "proposition_envelope",
            CheckName::TheoremEnvelope => "theorem_envelope",
            CheckName::EscapeGrowth => "escape_growth",
            CheckName::FirstJumpBound => "first_jump_bound",
            CheckName::TimerDiscipline => "timer_discipline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChecksConfig {
    Keyword(ChecksKeyword),
    List(Vec<CheckName>),
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig::Keyword(ChecksKeyword::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChecksKeyword {
    /// Every check whose hypothesis holds for the configured init.
    All,
    None,
}

impl ChecksConfig {
    /// Parses the `--checks` argument: `all`, `none`, or a comma list.
    pub fn from_arg(arg: &str) -> Result<Self, ConfigError> {
        match arg {
            "all" => Ok(ChecksConfig::Keyword(ChecksKeyword::All)),
            "none" => Ok(ChecksConfig::Keyword(ChecksKeyword::None)),
            list => list
                .split(',')
                .map(|s| {
                    CheckName::parse(s.trim()).ok_or_else(|| ConfigError::invalid("checks", format!("unknown check `{s}`")))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(ChecksConfig::List),
        }
    }
}

/// Everything a run needs, derived from an [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub name: String,
    pub objective: QuadraticObjective,
    pub partition: BlockPartition,
    pub timer: TimerConfig,
    pub certificate: ConvergenceCertificate,
    pub init: HybridState,
    pub stop: StopRule,
    pub sample_interval: f64,
    pub checks: Vec<CheckName>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("run_n{}_seed{}", self.objective.n, self.seed))
    }

    pub fn resolve(&self) -> Result<ResolvedExperiment, ConfigError> {
        let n = self.objective.n;
        if n == 0 {
            return Err(ConfigError::invalid("objective.n", "must be positive"));
        }
        let spectrum = match &self.objective.spectrum {
            SpectrumConfig::Eigenvalues(values) => {
                if values.len() != n {
                    return Err(ConfigError::invalid(
                        "objective.spectrum.eigenvalues",
                        format!("expected {n} values, got {}", values.len()),
                    ));
                }
                SpectrumSpec::new(values.clone(), self.seed)
            }
            SpectrumConfig::Range {
                beta,
                lipschitz,
                spacing: Spacing::Linear,
            } => SpectrumSpec::linear(n, *beta, *lipschitz, self.seed),
        }
        .map_err(|e| ConfigError::invalid("objective.spectrum", e.to_string()))?;
        let linear = match &self.objective.b_mode {
            BMode::Random1To5 => LinearTerm::Random1To5,
            BMode::Zero => LinearTerm::Zero,
            BMode::Explicit(b) => LinearTerm::Explicit(b.clone()),
        };
        let objective = build_quadratic_with(&spectrum, &linear)
            .map_err(|e| ConfigError::invalid("objective", e.to_string()))?;

        let partition = match (&self.partition.sizes, self.partition.agents) {
            (Some(sizes), agents) => {
                if agents.is_some_and(|a| a != sizes.len()) {
                    return Err(ConfigError::invalid("partition.N", "disagrees with the number of sizes"));
                }
                let p = BlockPartition::new(sizes.clone())
                    .map_err(|e| ConfigError::invalid("partition.sizes", e.to_string()))?;
                if p.dim() != n {
                    return Err(ConfigError::invalid(
                        "partition.sizes",
                        format!("sizes sum to {}, expected {n}", p.dim()),
                    ));
                }
                p
            }
            (None, agents) => BlockPartition::contiguous(n, agents.unwrap_or(n))
                .map_err(|e| ConfigError::invalid("partition.N", e.to_string()))?,
        };

        let beta = objective.strong_convexity();
        let k = objective.lipschitz();
        let (tau_min, tau_max) = match (self.timer.auto_paper, self.timer.tau_min, self.timer.tau_max) {
            (true, None, None) => {
                let tau_max = beta * beta / (3.0 * k.powi(3) + 1.0);
                (tau_max / 2.0, tau_max)
            }
            (true, _, _) => {
                return Err(ConfigError::invalid("timer", "auto_paper excludes explicit tau_min/tau_max"))
            }
            (false, Some(lo), Some(hi)) => (lo, hi),
            (false, _, _) => {
                return Err(ConfigError::invalid("timer", "need tau_min and tau_max, or auto_paper"))
            }
        };
        let reset = match &self.timer.reset_policy {
            ResetPolicyConfig::FixedMax => ResetPolicy::Fixed(tau_max),
            ResetPolicyConfig::Fixed(v) => ResetPolicy::Fixed(*v),
            ResetPolicyConfig::Uniform => ResetPolicy::Uniform {
                seed: uniform_reset_seed(self.seed),
            },
            ResetPolicyConfig::Sequence(values) => ResetPolicy::Sequence(values.clone()),
        };
        let timer = TimerConfig::new(tau_min, tau_max, reset).map_err(|e| ConfigError::invalid("timer", e.to_string()))?;
        let certificate = crate::hybrid_core::validate_config(&objective, &timer)
            .map_err(|e| ConfigError::invalid("timer.tau_max", e.to_string()))?;

        let vector = |spec: &VectorSpec, field: &str| -> Result<Vec<f64>, ConfigError> {
            Ok(match spec {
                VectorSpec::Twos => vec![2.0; n],
                VectorSpec::Minimizer => objective.minimizer().to_vec(),
                VectorSpec::Constant(c) => vec![*c; n],
                VectorSpec::Values(v) => {
                    if v.len() != n {
                        return Err(ConfigError::invalid(field, format!("expected {n} values, got {}", v.len())));
                    }
                    v.clone()
                }
            })
        };
        let (z1, z2, tau0) = match &self.init {
            InitConfig::Shorthand(InitShorthand::AllTwos) => (vec![2.0; n], vec![2.0; n], None),
            InitConfig::Shorthand(InitShorthand::AtMinimizer) => {
                (objective.minimizer().to_vec(), objective.minimizer().to_vec(), None)
            }
            InitConfig::Explicit(spec) => (vector(&spec.z1, "init.z1")?, vector(&spec.z2, "init.z2")?, spec.tau0),
        };
        let tau0 = tau0.unwrap_or(tau_max);
        if !(tau0 >= 0.0 && tau0 <= tau_max) {
            return Err(ConfigError::invalid("init.tau0", format!("{tau0} outside [0, tau_max = {tau_max}]")));
        }
        let init = HybridState::new(z1, z2, tau0).map_err(|e| ConfigError::invalid("init", e.to_string()))?;

        let stop = match self.stop {
            StopConfig::MaxTime(t) if t.is_finite() && t >= 0.0 => StopRule::MaxTime(t),
            StopConfig::MaxJumps(j) => StopRule::MaxJumps(j),
            StopConfig::Tolerance(tol) if tol.is_finite() && tol >= 0.0 => StopRule::tolerance(tol),
            _ => return Err(ConfigError::invalid("stop", "value must be finite and nonnegative")),
        };
        let sample_interval = self.sample_interval.unwrap_or(tau_min / 10.0);
        if !(sample_interval.is_finite() && sample_interval > 0.0) {
            return Err(ConfigError::invalid("sample_interval", "must be positive"));
        }

        let equal_init = init.z1 == init.z2;
        let checks = match &self.checks {
            ChecksConfig::Keyword(ChecksKeyword::All) => CheckName::ALL
                .into_iter()
                .filter(|c| equal_init || !c.needs_equal_init())
                .collect(),
            ChecksConfig::Keyword(ChecksKeyword::None) => Vec::new(),
            ChecksConfig::List(list) => {
                if let Some(c) = list.iter().find(|c| c.needs_equal_init() && !equal_init) {
                    return Err(ConfigError::invalid(
                        "checks",
                        format!("{} requires init z1 = z2", c.as_str()),
                    ));
                }
                let mut list = list.clone();
                list.sort();
                list.dedup();
                list
            }
        };

        Ok(ResolvedExperiment {
            name: self.display_name(),
            objective,
            partition,
            timer,
            certificate,
            init,
            stop,
            sample_interval,
            checks,
            seed: self.seed,
        })
    }
}

/// Seed of the uniform reset stream, kept distinct from the objective stream.
pub fn uniform_reset_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Parses a JSON config, naming the offending field on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn config_to_json(config: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIAL: &str = r#"{
        "objective": {"n": 5, "spectrum": {"range": {"beta": 5, "K": 5}}},
        "timer": {"auto_paper": true},
        "init": "all_twos",
        "stop": {"max_jumps": 20},
        "seed": 3
    }"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = parse_config(TRIAL).unwrap();
        assert_eq!(cfg.objective.b_mode, BMode::Random1To5);
        assert_eq!(cfg.checks, ChecksConfig::Keyword(ChecksKeyword::All));
        let r = cfg.resolve().unwrap();
        assert_eq!(r.partition.agents(), 5);
        assert!((r.timer.tau_max() - 25.0 / 376.0).abs() < 1e-15);
        assert_eq!(r.timer.tau_min(), r.timer.tau_max() / 2.0);
        assert_eq!(r.init.tau, r.timer.tau_max());
        assert_eq!(r.sample_interval, r.timer.tau_min() / 10.0);
        assert_eq!(r.checks.len(), CheckName::ALL.len());
    }

    #[test]
    fn unknown_keys_are_rejected_with_field_name() {
        let text = TRIAL.replace("\"seed\": 3", "\"seed\": 3, \"sed\": 1");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("sed"), "{err}");

        let text = TRIAL.replace("\"beta\": 5", "\"beta\": 5, \"gamma\": 1");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("objective.spectrum"), "{err}");
    }

    #[test]
    fn explicit_init_and_lists() {
        let text = r#"{
            "name": "custom",
            "objective": {"n": 3, "spectrum": {"eigenvalues": [1, 1.5, 2]}, "b_mode": {"explicit": [1, 2, 3]}},
            "partition": {"N": 2, "sizes": [2, 1]},
            "timer": {"tau_min": 0.01, "tau_max": 0.02, "reset_policy": {"sequence": [0.01, 0.02]}},
            "init": {"z1": "twos", "z2": "minimizer", "tau0": 0.0},
            "stop": {"max_time": 1.0},
            "sample_interval": 0.005,
            "checks": ["theorem_envelope", "escape_growth"]
        }"#;
        let cfg = parse_config(text).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.objective.linear_term(), &[1.0, 2.0, 3.0]);
        assert_eq!(r.partition.sizes(), &[2, 1]);
        assert_eq!(r.init.z2, r.objective.minimizer());
        assert_eq!(r.init.tau, 0.0);
        assert_eq!(r.checks, vec![CheckName::TheoremEnvelope, CheckName::EscapeGrowth]);
    }

    #[test]
    fn all_checks_drop_equal_init_hypotheses_for_unequal_init() {
        let text = TRIAL.replace("\"all_twos\"", r#"{"z1": "twos", "z2": "minimizer"}"#);
        let r = parse_config(&text).unwrap().resolve().unwrap();
        assert!(r.checks.iter().all(|c| !c.needs_equal_init()));
        let text = text.replace("\"seed\": 3", "\"seed\": 3, \"checks\": [\"lemma3\"]");
        assert!(parse_config(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn bound_violation_is_a_config_error() {
        let text = TRIAL.replace(r#""auto_paper": true"#, r#""tau_min": 0.01, "tau_max": 0.07"#);
        let err = parse_config(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("timer.tau_max"), "{err}");
    }

    #[test]
    fn invalid_values_name_their_field() {
        let cases = [
            (TRIAL.replace("\"n\": 5", "\"n\": 0"), "objective.n"),
            (
                TRIAL.replace(r#""auto_paper": true"#, r#""tau_min": 0.01"#),
                "timer",
            ),
            (TRIAL.replace("\"max_jumps\": 20", "\"max_time\": -1"), "stop"),
            (TRIAL.replace("\"seed\": 3", "\"seed\": 3, \"partition\": {\"N\": 9}"), "partition.N"),
        ];
        for (text, field) in cases {
            let err = parse_config(&text).unwrap().resolve().unwrap_err();
            assert!(err.to_string().contains(field), "{err} should mention {field}");
        }
    }

    #[test]
    fn checks_arg_parsing() {
        assert_eq!(ChecksConfig::from_arg("none").unwrap(), ChecksConfig::Keyword(ChecksKeyword::None));
        assert_eq!(
            ChecksConfig::from_arg("lemma3,timer_discipline").unwrap(),
            ChecksConfig::List(vec![CheckName::Lemma3, CheckName::TimerDiscipline])
        );
        assert!(ChecksConfig::from_arg("lemma9").is_err());
    }

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = parse_config(TRIAL).unwrap();
        let once = config_to_json(&cfg);
        let again = parse_config(&once).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(once, config_to_json(&again));
    }
}
