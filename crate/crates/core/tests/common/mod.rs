#![allow(dead_code)]

use hybrid_descent::cli::config::{
    BMode, InitConfig, InitSpec, ObjectiveConfig, PartitionConfig, ResetPolicyConfig, SpectrumConfig, Spacing,
    StopConfig, TimerSpec, VectorSpec,
};
use hybrid_descent::cli::{ChecksConfig, ExperimentConfig, ResolvedExperiment};
use hybrid_descent::hybrid_core::{simulate, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SWEEP_DIMS: [usize; 4] = [1, 2, 5, 20];

pub fn config(
    name: String,
    n: usize,
    beta: f64,
    k: f64,
    policy: ResetPolicyConfig,
    init: InitConfig,
    stop: StopConfig,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name),
        objective: ObjectiveConfig {
            n,
            spectrum: SpectrumConfig::Range {
                beta,
                lipschitz: k,
                spacing: Spacing::Linear,
            },
            b_mode: BMode::Random1To5,
        },
        partition: PartitionConfig::default(),
        timer: TimerSpec {
            auto_paper: true,
            tau_min: None,
            tau_max: None,
            reset_policy: policy,
        },
        init,
        stop,
        sample_interval: None,
        seed,
        checks: ChecksConfig::default(),
        output_dir: None,
    }
}

/// Timer upper bound chosen by the automatic timer, recomputed here.
pub fn auto_tau_max(beta: f64, k: f64) -> f64 {
    beta * beta / (3.0 * k.powi(3) + 1.0)
}

fn random_spectrum(rng: &mut ChaCha8Rng, n: usize) -> (f64, f64) {
    let beta = rng.random_range(0.5..2.0);
    let k = if n == 1 { beta } else { beta * rng.random_range(1.0..3.0) };
    (beta, k)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-half_width..half_width)).collect()
}

/// Equal-initialization run `run` of the seeded sweep: dimensions cycle
/// through [`SWEEP_DIMS`], reset policies alternate every four runs.
pub fn sweep_config(run: u64) -> ExperimentConfig {
    let n = SWEEP_DIMS[(run % 4) as usize];
    let policy = if (run / 4) % 2 == 0 {
        ResetPolicyConfig::FixedMax
    } else {
        ResetPolicyConfig::Uniform
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10_000 + run);
    let (beta, k) = random_spectrum(&mut rng, n);
    let x0 = random_vec(&mut rng, n, 3.0);
    let init = InitConfig::Explicit(InitSpec {
        z1: VectorSpec::Values(x0.clone()),
        z2: VectorSpec::Values(x0),
        tau0: None,
    });
    config(format!("sweep_{run}"), n, beta, k, policy, init, StopConfig::MaxJumps(25), run)
}

/// Arbitrary-initialization run: independent `z1`, `z2`, random initial
/// timer; every fourth run starts with `z2 = x*`, the next with `z1 = x*`.
pub fn arbitrary_config(run: u64) -> ExperimentConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(20_000 + run);
    let n = [1usize, 2, 3, 5, 10, 20][rng.random_range(0..6)];
    let (beta, k) = random_spectrum(&mut rng, n);
    let policy = if run % 2 == 0 {
        ResetPolicyConfig::FixedMax
    } else {
        ResetPolicyConfig::Uniform
    };
    let mut z1 = VectorSpec::Values(random_vec(&mut rng, n, 4.0));
    let mut z2 = VectorSpec::Values(random_vec(&mut rng, n, 4.0));
    match run % 4 {
        0 => z2 = VectorSpec::Minimizer,
        1 => z1 = VectorSpec::Minimizer,
        _ => {}
    }
    let tau0 = rng.random_range(0.0..1.0) * auto_tau_max(beta, k);
    let init = InitConfig::Explicit(InitSpec {
        z1,
        z2,
        tau0: Some(tau0),
    });
    config(format!("arbitrary_{run}"), n, beta, k, policy, init, StopConfig::MaxJumps(30), run)
}

pub fn resolve_and_simulate(cfg: &ExperimentConfig) -> (ResolvedExperiment, Trajectory) {
    let exp = cfg.resolve().unwrap_or_else(|e| panic!("{}: {e}", cfg.display_name()));
    let traj = simulate(
        &exp.objective,
        &exp.partition,
        &exp.init,
        &exp.timer,
        exp.stop,
        exp.sample_interval,
    )
    .unwrap_or_else(|e| panic!("{}: {e}", cfg.display_name()));
    (exp, traj)
}

/// Start of flow interval `j`, from the jump log.
pub fn interval_start(traj: &Trajectory, j: u64) -> f64 {
    if j == 0 {
        traj.initial().time.t
    } else {
        traj.jumps[j as usize - 1].t
    }
}

/// Dense quadratic `L(x) = ½ xᵀQx + bᵀx` evaluated with nalgebra, as a
/// second opinion on the library's row-major arithmetic.
pub struct DenseQuadratic {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    pub x_star: DVector<f64>,
}

impl DenseQuadratic {
    pub fn from_experiment(exp: &ResolvedExperiment) -> Self {
        let q = exp.objective.q_matrix();
        let b = DVector::from_column_slice(exp.objective.linear_term());
        let x_star = q.clone().lu().solve(&(-&b)).expect("Q invertible");
        Self { q, b, x_star }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        0.5 * x.dot(&(&self.q * &x)) + self.b.dot(&x)
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        &self.q * DVector::from_column_slice(x) + &self.b
    }

    pub fn dist_sq(&self, x: &[f64]) -> f64 {
        (DVector::from_column_slice(x) - &self.x_star).norm_squared()
    }

    /// `L(x) − L*` through `½ (x − x*)ᵀ Q (x − x*)`, free of cancellation.
    pub fn suboptimality(&self, x: &[f64]) -> f64 {
        let e = DVector::from_column_slice(x) - &self.x_star;
        0.5 * e.dot(&(&self.q * &e))
    }
}

/// Fixed-step RK4 on the full state `(z1, z2, τ)` with the vector field
/// `ż1 = −∇L(z2)`, `ż2 = 0`, `τ̇ = −1`. The last step is shortened to land
/// on `duration`.
pub fn rk4_flow(dense: &DenseQuadratic, state: &[f64], duration: f64, h: f64) -> Vec<f64> {
    let n = dense.b.len();
    let field = |y: &[f64]| -> Vec<f64> {
        let g = dense.gradient(&y[n..2 * n]);
        let mut dy = vec![0.0; 2 * n + 1];
        for i in 0..n {
            dy[i] = -g[i];
        }
        dy[2 * n] = -1.0;
        dy
    };
    let axpy = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
    let mut y = state.to_vec();
    let mut elapsed = 0.0;
    while elapsed < duration {
        let step = h.min(duration - elapsed);
        let k1 = field(&y);
        let k2 = field(&axpy(&y, &k1, step / 2.0));
        let k3 = field(&axpy(&y, &k2, step / 2.0));
        let k4 = field(&axpy(&y, &k3, step));
        for i in 0..y.len() {
            y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        elapsed += step;
    }
    y
}
