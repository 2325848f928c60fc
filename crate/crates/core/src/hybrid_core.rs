//! The combined hybrid system `H = (C, f, D, G)`.
//!
//! Flow set `C = Rⁿ × Rⁿ × [0, τ_max]` with `f(ξ) = (−∇L(z2), 0, −1)`;
//! jump set `D = Rⁿ × Rⁿ × {0}` with `G(ξ) = (z1, z1, [τ_min, τ_max])`.
//!
//! Because the gradient is held at `z2` during a flow, every flow is affine
//! in time and is evaluated in closed form. Jumps are scheduled exactly when
//! the timer hits zero, so no event detection is involved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, ConvergenceCertificate};
use crate::error::{Error, Result};
use crate::objective::{check_dim, BlockPartition, Objective};
use crate::vecops;

/// `ξ = (z1, z2, τ)`: agent states, broadcast memory `η`, and the timer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub tau: f64,
}

impl HybridState {
    pub fn new(z1: Vec<f64>, z2: Vec<f64>, tau: f64) -> Result<Self> {
        check_dim(z1.len(), z2.len())?;
        let state = Self { z1, z2, tau };
        if !state.is_finite() || tau < 0.0 {
            return Err(Error::InvalidInit(format!(
                "state must be finite with tau >= 0 (tau = {tau})"
            )));
        }
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.z1.len()
    }

    pub fn is_finite(&self) -> bool {
        self.tau.is_finite() && vecops::all_finite(&self.z1) && vecops::all_finite(&self.z2)
    }

    /// Whether `ξ ∈ D`.
    pub fn in_jump_set(&self) -> bool {
        self.tau == 0.0
    }
}

/// Hybrid time `(t, j)`: ordinary time and jump count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridTime {
    pub t: f64,
    pub j: u64,
}

impl HybridTime {
    pub fn new(t: f64, j: u64) -> Self {
        Self { t, j }
    }

    /// Lexicographic `(t, j) <= (t', j')` with `t` compared first.
    pub fn precedes_or_equals(&self, other: &Self) -> bool {
        self.t < other.t || (self.t == other.t && self.j <= other.j)
    }
}

/// How the timer is reset at each jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetPolicy {
    Fixed(f64),
    /// Uniform on `[τ_min, τ_max]` from a seeded stream.
    Uniform { seed: u64 },
    /// Explicit reset values, cycled once exhausted.
    Sequence(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimerConfig {
    tau_min: f64,
    tau_max: f64,
    reset: ResetPolicy,
}

impl TimerConfig {
    pub fn new(tau_min: f64, tau_max: f64, reset: ResetPolicy) -> Result<Self> {
        if !(tau_min.is_finite() && tau_max.is_finite() && tau_min > 0.0) {
            return Err(Error::InvalidTimer(format!(
                "tau_min must be positive and finite, got {tau_min}"
            )));
        }
        if tau_min > tau_max {
            return Err(Error::InvalidTimer(format!(
                "tau_min = {tau_min} exceeds tau_max = {tau_max}"
            )));
        }
        let in_range = |v: f64| v >= tau_min && v <= tau_max;
        match &reset {
            ResetPolicy::Fixed(v) if !in_range(*v) => {
                return Err(Error::InvalidTimer(format!(
                    "fixed reset {v} outside [{tau_min}, {tau_max}]"
                )))
            }
            ResetPolicy::Sequence(values) => {
                if values.is_empty() {
                    return Err(Error::InvalidTimer("empty reset sequence".into()));
                }
                if let Some(v) = values.iter().find(|v| !in_range(**v)) {
                    return Err(Error::InvalidTimer(format!(
                        "sequence reset {v} outside [{tau_min}, {tau_max}]"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self {
            tau_min,
            tau_max,
            reset,
        })
    }

    /// Fixed resets at `τ_max`, the worst case for the analysis.
    pub fn fixed_max(tau_min: f64, tau_max: f64) -> Result<Self> {
        Self::new(tau_min, tau_max, ResetPolicy::Fixed(tau_max))
    }

    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn reset_policy(&self) -> &ResetPolicy {
        &self.reset
    }

    pub fn reset_source(&self) -> ResetSource {
        let rng = match self.reset {
            ResetPolicy::Uniform { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        ResetSource {
            timer: self.clone(),
            rng,
            next_index: 0,
        }
    }
}

/// Stateful stream of timer reset values for one run.
#[derive(Debug, Clone)]
pub struct ResetSource {
    timer: TimerConfig,
    rng: Option<ChaCha8Rng>,
    next_index: usize,
}

impl ResetSource {
    pub fn next_reset(&mut self) -> f64 {
        let (lo, hi) = (self.timer.tau_min, self.timer.tau_max);
        match &self.timer.reset {
            ResetPolicy::Fixed(v) => *v,
            ResetPolicy::Uniform { .. } => {
                let rng = self.rng.as_mut().expect("uniform policy owns an rng");
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..=hi)
                }
            }
            ResetPolicy::Sequence(values) => {
                let v = values[self.next_index % values.len()];
                self.next_index += 1;
                v
            }
        }
    }
}

/// Checks the timer against the objective and derives the certified constants.
pub fn validate_config(obj: &dyn Objective, timer: &TimerConfig) -> Result<ConvergenceCertificate> {
    // Re-run the timer invariants in case the value was deserialized.
    let timer = TimerConfig::new(timer.tau_min, timer.tau_max, timer.reset.clone())?;
    ConvergenceCertificate::new(
        obj.strong_convexity(),
        obj.lipschitz(),
        timer.tau_min,
        timer.tau_max,
    )
}

pub(crate) fn flow_with_held(state: &HybridState, duration: f64, held: &[f64]) -> HybridState {
    let z1 = state
        .z1
        .iter()
        .zip(held)
        .map(|(x, g)| x - duration * g)
        .collect();
    HybridState {
        z1,
        z2: state.z2.clone(),
        tau: state.tau - duration,
    }
}

/// Flows `state` for `duration` under the held gradient `∇L(z2)`.
pub fn flow(state: &HybridState, duration: f64, obj: &dyn Objective) -> Result<HybridState> {
    check_dim(obj.dim(), state.dim())?;
    if !(duration >= 0.0) || duration > state.tau {
        return Err(Error::FlowPastJump {
            duration,
            tau: state.tau,
        });
    }
    if duration == 0.0 {
        return Ok(state.clone());
    }
    let held = obj.gradient(&state.z2)?;
    Ok(flow_with_held(state, duration, &held))
}

/// Applies the jump map: `z2 ← z1`, `τ ← next reset`.
pub fn jump(state: &HybridState, resets: &mut ResetSource) -> Result<HybridState> {
    if !state.in_jump_set() {
        return Err(Error::NotInJumpSet { tau: state.tau });
    }
    Ok(HybridState {
        z1: state.z1.clone(),
        z2: state.z1.clone(),
        tau: resets.next_reset(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    MaxTime(f64),
    MaxJumps(u64),
    /// Stop once `|ξ|_A <= tolerance`; gives up after `max_jumps`.
    Tolerance { tolerance: f64, max_jumps: u64 },
}

impl StopRule {
    pub const DEFAULT_TOLERANCE: f64 = 1e-8;
    pub const DEFAULT_JUMP_GUARD: u64 = 1_000_000;

    pub fn tolerance(tolerance: f64) -> Self {
        StopRule::Tolerance {
            tolerance,
            max_jumps: Self::DEFAULT_JUMP_GUARD,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StopRule::MaxTime(t) => t.is_finite() && t >= 0.0,
            StopRule::MaxJumps(_) => true,
            StopRule::Tolerance { tolerance, .. } => tolerance.is_finite() && tolerance >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInit(format!("invalid stop rule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    ReachedMaxTime,
    ReachedMaxJumps,
    ReachedTolerance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: HybridTime,
    pub state: HybridState,
}

/// One jump `(t, j) → (t, j + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    /// Ordinary time of the jump.
    pub t: f64,
    /// Jump counter before the jump.
    pub j: u64,
    /// Timer value assigned by the reset map.
    pub reset: f64,
    /// Length of the flow interval that ended in this jump.
    pub flow_duration: f64,
    /// Index into [`Trajectory::samples`] of the pre-jump state.
    pub pre: usize,
    /// Index into [`Trajectory::samples`] of the post-jump state.
    pub post: usize,
}

/// A sampled hybrid arc.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub jumps: Vec<JumpRecord>,
    pub status: TerminalStatus,
}

impl Trajectory {
    pub fn initial(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }

    pub fn jump_pre(&self, k: usize) -> &HybridState {
        &self.samples[self.jumps[k].pre].state
    }

    pub fn jump_post(&self, k: usize) -> &HybridState {
        &self.samples[self.jumps[k].post].state
    }

    /// Start time `t_j` of the flow interval with jump count `j`.
    pub fn interval_start(&self, j: u64) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.jumps[(j - 1) as usize].t
        }
    }

    pub fn jump_count(&self) -> u64 {
        self.jumps.len() as u64
    }

    /// Structural checks of the hybrid arc: hybrid time domain ordering,
    /// timer range, sample-and-hold memory and unit-slope timer within each
    /// flow interval. Returns every violation found.
    pub fn structural_violations(&self, timer: &TimerConfig) -> Vec<String> {
        let mut out = Vec::new();
        for (k, s) in self.samples.iter().enumerate() {
            if !(s.state.tau >= 0.0 && s.state.tau <= timer.tau_max) {
                out.push(format!("sample {k}: tau = {} outside [0, tau_max]", s.state.tau));
            }
            if !s.state.is_finite() {
                out.push(format!("sample {k}: non-finite state"));
            }
        }
        for (k, w) in self.samples.windows(2).enumerate() {
            let (a, b) = (&w[0], &w[1]);
            if !a.time.precedes_or_equals(&b.time) {
                out.push(format!("samples {k}, {}: hybrid time decreases", k + 1));
            }
            if b.time.j == a.time.j {
                if a.state.z2 != b.state.z2 {
                    out.push(format!("samples {k}, {}: z2 changed during flow", k + 1));
                }
                let dt = b.time.t - a.time.t;
                let dtau = b.state.tau - a.state.tau;
                if (dtau + dt).abs() > 1e-12 {
                    out.push(format!("samples {k}, {}: timer slope is not -1", k + 1));
                }
            } else if b.time.j != a.time.j + 1 || b.time.t != a.time.t {
                out.push(format!("samples {k}, {}: malformed jump", k + 1));
            }
        }
        for (k, s) in self.samples.iter().enumerate() {
            let j = s.time.j;
            let start = self.interval_start(j);
            let end = self
                .jumps
                .get(j as usize)
                .map_or(f64::INFINITY, |jr| jr.t);
            if s.time.t < start || s.time.t > end {
                out.push(format!(
                    "sample {k}: t = {} outside interval [{start}, {end}] of j = {j}",
                    s.time.t
                ));
            }
        }
        for w in self.jumps.windows(2) {
            if !(w[1].t > w[0].t) {
                out.push(format!("jumps {} and {}: times not increasing", w[0].j, w[1].j));
            }
        }
        out
    }
}

/// A hybrid plant driven by [`run_engine`]. The flow state is kept at the
/// start of the current flow interval; `peek` evaluates the closed-form flow
/// without committing it.
pub(crate) trait Plant {
    fn current(&self) -> HybridState;
    fn peek(&self, elapsed: f64) -> HybridState;
    fn advance(&mut self, elapsed: f64) -> Result<HybridState>;
    fn jump(&mut self, reset: f64) -> Result<HybridState>;
}

struct CentralPlant<'a> {
    obj: &'a dyn Objective,
    state: HybridState,
    held: Vec<f64>,
}

impl Plant for CentralPlant<'_> {
    fn current(&self) -> HybridState {
        self.state.clone()
    }

    fn peek(&self, elapsed: f64) -> HybridState {
        flow_with_held(&self.state, elapsed, &self.held)
    }

    fn advance(&mut self, elapsed: f64) -> Result<HybridState> {
        if elapsed > self.state.tau {
            return Err(Error::FlowPastJump {
                duration: elapsed,
                tau: self.state.tau,
            });
        }
        self.state = flow_with_held(&self.state, elapsed, &self.held);
        Ok(self.state.clone())
    }

    fn jump(&mut self, reset: f64) -> Result<HybridState> {
        if !self.state.in_jump_set() {
            return Err(Error::NotInJumpSet {
                tau: self.state.tau,
            });
        }
        self.state.z2.clone_from(&self.state.z1);
        self.state.tau = reset;
        self.held = self.obj.gradient(&self.state.z2)?;
        Ok(self.state.clone())
    }
}

pub(crate) fn check_init(obj: &dyn Objective, init: &HybridState, timer: &TimerConfig) -> Result<()> {
    check_dim(obj.dim(), init.z1.len())?;
    check_dim(obj.dim(), init.z2.len())?;
    if !init.is_finite() {
        return Err(Error::InvalidInit("initial state is not finite".into()));
    }
    if !(init.tau >= 0.0 && init.tau <= timer.tau_max) {
        return Err(Error::InvalidInit(format!(
            "initial tau = {} outside [0, tau_max = {}]",
            init.tau, timer.tau_max
        )));
    }
    Ok(())
}

/// Runs the hybrid system from `init` until `stop` fires.
///
/// Flow intervals are sampled at `t_j + k·sample_interval`; both sides of
/// every jump are recorded. Agent `partition` does not change the
/// centralized dynamics but must match the objective's dimension.
pub fn simulate(
    obj: &dyn Objective,
    partition: &BlockPartition,
    init: &HybridState,
    timer: &TimerConfig,
    stop: StopRule,
    sample_interval: f64,
) -> Result<Trajectory> {
    validate_config(obj, timer)?;
    check_dim(obj.dim(), partition.dim())?;
    check_init(obj, init, timer)?;
    let mut plant = CentralPlant {
        obj,
        state: init.clone(),
        held: obj.gradient(&init.z2)?,
    };
    run_engine(&mut plant, obj.minimizer(), timer, stop, sample_interval)
}

pub(crate) fn run_engine<P: Plant>(
    plant: &mut P,
    x_star: &[f64],
    timer: &TimerConfig,
    stop: StopRule,
    sample_interval: f64,
) -> Result<Trajectory> {
    if !(sample_interval.is_finite() && sample_interval > 0.0) {
        return Err(Error::InvalidInit(format!(
            "sample interval must be positive, got {sample_interval}"
        )));
    }
    stop.validate()?;
    let mut resets = timer.reset_source();
    let mut samples = Vec::new();
    let mut jumps = Vec::new();
    let mut t = 0.0;
    let mut j = 0u64;

    let within_tol = |s: &HybridState| match stop {
        StopRule::Tolerance { tolerance, .. } => analysis::distance_sq_to_a(s, x_star).sqrt() <= tolerance,
        _ => false,
    };
    let finite = |s: &HybridState, t: f64, j: u64| {
        if s.is_finite() {
            Ok(())
        } else {
            Err(Error::NumericalFailure { t, j })
        }
    };

    let init = plant.current();
    finite(&init, t, j)?;
    let done_at_start = match stop {
        StopRule::MaxTime(tmax) => tmax <= 0.0,
        StopRule::MaxJumps(n) => n == 0,
        StopRule::Tolerance { .. } => within_tol(&init),
    };
    samples.push(Sample {
        time: HybridTime::new(t, j),
        state: init,
    });
    if done_at_start {
        let status = match stop {
            StopRule::MaxTime(_) => TerminalStatus::ReachedMaxTime,
            StopRule::MaxJumps(_) => TerminalStatus::ReachedMaxJumps,
            StopRule::Tolerance { .. } => TerminalStatus::ReachedTolerance,
        };
        return Ok(Trajectory { samples, jumps, status });
    }

    loop {
        let tau = plant.current().tau;
        let flow_len = match stop {
            StopRule::MaxTime(tmax) => (tmax - t).min(tau),
            _ => tau,
        };

        // Interior samples; skip any that would land on the interval end.
        let mut k = 1u64;
        loop {
            let elapsed = k as f64 * sample_interval;
            if elapsed >= flow_len - 1e-9 * sample_interval {
                break;
            }
            let s = plant.peek(elapsed);
            finite(&s, t + elapsed, j)?;
            let reached = within_tol(&s);
            samples.push(Sample {
                time: HybridTime::new(t + elapsed, j),
                state: s,
            });
            if reached {
                plant.advance(elapsed)?;
                return Ok(Trajectory {
                    samples,
                    jumps,
                    status: TerminalStatus::ReachedTolerance,
                });
            }
            k += 1;
        }

        if flow_len < tau {
            // Horizon ends inside this flow interval.
            let s = plant.advance(flow_len)?;
            finite(&s, t + flow_len, j)?;
            if flow_len > 0.0 {
                let StopRule::MaxTime(tmax) = stop else {
                    unreachable!("only a time horizon truncates a flow")
                };
                samples.push(Sample {
                    time: HybridTime::new(tmax, j),
                    state: s,
                });
            }
            return Ok(Trajectory {
                samples,
                jumps,
                status: TerminalStatus::ReachedMaxTime,
            });
        }

        let pre = plant.advance(tau)?;
        let t_next = t + tau;
        finite(&pre, t_next, j)?;
        if tau > 0.0 {
            let reached = within_tol(&pre);
            samples.push(Sample {
                time: HybridTime::new(t_next, j),
                state: pre,
            });
            if reached {
                return Ok(Trajectory {
                    samples,
                    jumps,
                    status: TerminalStatus::ReachedTolerance,
                });
            }
        }
        let pre_index = samples.len() - 1;

        let reset = resets.next_reset();
        let post = plant.jump(reset)?;
        finite(&post, t_next, j + 1)?;
        let reached = within_tol(&post);
        jumps.push(JumpRecord {
            t: t_next,
            j,
            reset,
            flow_duration: tau,
            pre: pre_index,
            post: samples.len(),
        });
        j += 1;
        t = t_next;
        samples.push(Sample {
            time: HybridTime::new(t, j),
            state: post,
        });

        let status = match stop {
            StopRule::MaxTime(tmax) if t >= tmax => Some(TerminalStatus::ReachedMaxTime),
            StopRule::MaxJumps(n) if j >= n => Some(TerminalStatus::ReachedMaxJumps),
            StopRule::Tolerance { .. } if reached => Some(TerminalStatus::ReachedTolerance),
            StopRule::Tolerance { max_jumps, .. } if j >= max_jumps => {
                Some(TerminalStatus::ReachedMaxJumps)
            }
            _ => None,
        };
        if let Some(status) = status {
            return Ok(Trajectory { samples, jumps, status });
        }
    }
}
