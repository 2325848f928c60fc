//! Built-in experiment presets.
//!
//! Instances are drawn from each preset's seed. The presets fix dimensions,
//! spectra, timers and initializations; the resulting curves depend on the
//! seed.

use super::config::{
    BMode, ChecksConfig, ExperimentConfig, InitConfig, InitShorthand, InitSpec, ObjectiveConfig, PartitionConfig,
    ResetPolicyConfig, SpectrumConfig, Spacing, StopConfig, TimerSpec, VectorSpec,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub configs: Vec<ExperimentConfig>,
}

const DEFAULT_SEED: u64 = 1;

/// Network sizes of the default scaling sweep.
pub const SCALING_SIZES: [usize; 4] = [5, 100, 500, 1000];
/// Opt-in size; takes minutes and several GB of trajectory output.
pub const SCALING_LARGE_SIZE: usize = 5000;

fn auto_timer(reset_policy: ResetPolicyConfig) -> TimerSpec {
    TimerSpec {
        auto_paper: true,
        tau_min: None,
        tau_max: None,
        reset_policy,
    }
}

fn range_objective(n: usize, beta: f64, lipschitz: f64) -> ObjectiveConfig {
    ObjectiveConfig {
        n,
        spectrum: SpectrumConfig::Range {
            beta,
            lipschitz,
            spacing: Spacing::Linear,
        },
        b_mode: BMode::Random1To5,
    }
}

fn trial(name: &str, init: InitConfig) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.to_string()),
        objective: range_objective(5, 5.0, 5.0),
        partition: PartitionConfig::default(),
        timer: auto_timer(ResetPolicyConfig::FixedMax),
        init,
        stop: StopConfig::MaxJumps(20),
        sample_interval: None,
        seed: DEFAULT_SEED,
        checks: ChecksConfig::default(),
        output_dir: None,
    }
}

fn scaling(n: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(format!("scaling_n{n}")),
        objective: range_objective(n, 2.0, 4.0),
        partition: PartitionConfig::default(),
        timer: auto_timer(ResetPolicyConfig::FixedMax),
        init: InitConfig::Shorthand(InitShorthand::AllTwos),
        stop: StopConfig::Tolerance(1e-6),
        // Interval start and both jump endpoints only; keeps large-n output small.
        sample_interval: Some(1.0),
        seed: DEFAULT_SEED,
        checks: ChecksConfig::default(),
        output_dir: None,
    }
}

fn lemma_sweep() -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for (k, n) in [1usize, 2, 5, 20].into_iter().enumerate() {
        for (p, policy) in [ResetPolicyConfig::FixedMax, ResetPolicyConfig::Uniform].into_iter().enumerate() {
            let tag = if p == 0 { "fixed" } else { "uniform" };
            out.push(ExperimentConfig {
                name: Some(format!("lemma_sweep_n{n}_{tag}")),
                objective: range_objective(n, 1.0, 3.0),
                partition: PartitionConfig::default(),
                timer: auto_timer(policy),
                init: InitConfig::Shorthand(InitShorthand::AllTwos),
                stop: StopConfig::MaxJumps(25),
                sample_interval: None,
                seed: DEFAULT_SEED + (2 * k + p) as u64,
                checks: ChecksConfig::default(),
                output_dir: None,
            });
        }
    }
    out
}

/// All presets in a stable order.
pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "trial1",
            description: "n = N = 5, beta = K = 5, z1(0,0) = z2(0,0) = (2,...,2), auto timer, 20 jumps",
            configs: vec![trial("trial1", InitConfig::Shorthand(InitShorthand::AllTwos))],
        },
        Preset {
            name: "trial2",
            description: "as trial1 but z2(0,0) = x*: the first jump raises the distance by sqrt(2)",
            configs: vec![trial(
                "trial2",
                InitConfig::Explicit(InitSpec {
                    z1: VectorSpec::Twos,
                    z2: VectorSpec::Minimizer,
                    tau0: None,
                }),
            )],
        },
        Preset {
            name: "scaling",
            description: "network sizes 5, 100, 500, 1000 with beta = 2, K = 4, run to |xi|_A <= 1e-6",
            configs: SCALING_SIZES.iter().map(|&n| scaling(n)).collect(),
        },
        Preset {
            name: "scaling_large",
            description: "opt-in: network size 5000 with beta = 2, K = 4 (long-running)",
            configs: vec![scaling(SCALING_LARGE_SIZE)],
        },
        Preset {
            name: "lemma_sweep",
            description: "n in {1, 2, 5, 20} x {fixed, uniform} resets, equal init, all checks, 25 jumps",
            configs: lemma_sweep(),
        },
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}

/// `(name, description)` for every preset.
pub fn list_presets() -> Vec<(&'static str, &'static str)> {
    presets().iter().map(|p| (p.name, p.description)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{config_to_json, parse_config};

    #[test]
    fn listing_is_stable_and_contains_required_names() {
        let a = list_presets();
        assert_eq!(a, list_presets());
        let names: Vec<_> = a.iter().map(|p| p.0).collect();
        for required in ["trial1", "trial2", "scaling", "lemma_sweep"] {
            assert!(names.contains(&required), "missing {required}");
        }
    }

    #[test]
    fn every_preset_round_trips_and_resolves() {
        for p in presets() {
            for cfg in &p.configs {
                let text = config_to_json(cfg);
                let parsed = parse_config(&text).unwrap();
                assert_eq!(&parsed, cfg);
                if cfg.objective.n <= 100 {
                    parsed.resolve().unwrap_or_else(|e| panic!("{}: {e}", p.name));
                }
            }
        }
        assert!(preset("nope").is_none());
    }
}
