//! Convergence certificate and trajectory checks.
//!
//! Every check walks a recorded [`Trajectory`] and evaluates one inequality
//! per applicable sample, keeping the worst normalized margin
//! `(rhs − lhs) / max(1, |rhs|)`. An inequality passes when its worst margin
//! is at least `−tolerance`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid_core::{HybridState, HybridTime, TimerConfig, Trajectory};
use crate::objective::{check_dim, Objective};
use crate::vecops;

/// Default absolute slack for inequality checks.
pub const CHECK_TOLERANCE: f64 = 1e-9;
/// Slack allowed for `V` increases across jumps.
pub const JUMP_DESCENT_TOLERANCE: f64 = 1e-10;

/// Constants certified by a valid `(beta, K, tau_max)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCertificate {
    pub beta: f64,
    #[serde(rename = "K")]
    pub lipschitz: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// `1 − 2 τ_max K`.
    #[serde(rename = "B")]
    pub b_const: f64,
    /// `β² B − τ_max K³`.
    #[serde(rename = "A")]
    pub a_const: f64,
    /// `β A B / (8 K²)`.
    pub rate: f64,
    /// `√(K/β) · 8^{1/4}`.
    pub prop_prefactor: f64,
    /// `(8/3) · 2^{1/4} · √(K/β)`.
    pub thm_prefactor: f64,
    /// `8192 K² / (81 β²)`.
    pub escape_growth: f64,
}

impl ConvergenceCertificate {
    pub fn new(beta: f64, lipschitz: f64, tau_min: f64, tau_max: f64) -> Result<Self> {
        if !(beta > 0.0 && lipschitz >= beta && lipschitz.is_finite()) {
            return Err(Error::InvalidSpectrum(format!(
                "need 0 < beta <= K, got beta = {beta}, K = {lipschitz}"
            )));
        }
        if !(tau_min > 0.0 && tau_min <= tau_max) {
            return Err(Error::InvalidTimer(format!(
                "need 0 < tau_min <= tau_max, got [{tau_min}, {tau_max}]"
            )));
        }
        let bound = Self::tau_max_bound(beta, lipschitz);
        if !(tau_max < bound) {
            return Err(Error::BoundViolation {
                tau_max,
                bound,
                beta,
                lipschitz,
            });
        }
        let k = lipschitz;
        let b_const = 1.0 - 2.0 * tau_max * k;
        let a_const = beta * beta * b_const - tau_max * k.powi(3);
        if !(b_const > 0.0 && b_const < 1.0) {
            return Err(Error::Internal(format!("B = {b_const} not in (0, 1)")));
        }
        if !(a_const > 0.0) {
            return Err(Error::Internal(format!("A = {a_const} not positive")));
        }
        let ratio = (k / beta).sqrt();
        Ok(Self {
            beta,
            lipschitz: k,
            tau_min,
            tau_max,
            b_const,
            a_const,
            rate: beta * a_const * b_const / (8.0 * k * k),
            prop_prefactor: ratio * 8f64.powf(0.25),
            thm_prefactor: 8.0 / 3.0 * 2f64.powf(0.25) * ratio,
            escape_growth: 8192.0 * k * k / (81.0 * beta * beta),
        })
    }

    /// Strict upper limit `β² / (3 K³)` on `τ_max`.
    pub fn tau_max_bound(beta: f64, lipschitz: f64) -> f64 {
        beta * beta / (3.0 * lipschitz.powi(3))
    }

    /// `q(t, t_j) = 1 − 2 s β + s² K²` for elapsed flow time `s`.
    pub fn contraction_factor(&self, elapsed: f64) -> f64 {
        1.0 - 2.0 * elapsed * self.beta + elapsed * elapsed * self.lipschitz * self.lipschitz
    }
}

pub(crate) fn distance_sq_to_a(state: &HybridState, x_star: &[f64]) -> f64 {
    vecops::dist_sq(&state.z1, x_star) + vecops::dist_sq(&state.z2, x_star)
}

/// `|ξ|_A = √(‖z1 − x*‖² + ‖z2 − x*‖²)`.
pub fn distance_to_a(state: &HybridState, x_star: &[f64]) -> Result<f64> {
    check_dim(x_star.len(), state.z1.len())?;
    check_dim(x_star.len(), state.z2.len())?;
    Ok(distance_sq_to_a(state, x_star).sqrt())
}

/// `V(ξ) = (L(z1) − L(x*))² + (L(z2) − L(x*))²`.
pub fn lyapunov(obj: &dyn Objective, state: &HybridState) -> Result<f64> {
    let l_star = obj.value(obj.minimizer())?;
    let a = obj.value(&state.z1)? - l_star;
    let b = obj.value(&state.z2)? - l_star;
    Ok(a * a + b * b)
}

/// Lower comparison function `β² s⁴ / 16`.
pub fn alpha_lower(cert: &ConvergenceCertificate, s: f64) -> f64 {
    cert.beta * cert.beta * s.powi(4) / 16.0
}

/// Upper comparison function `K² s⁴ / 2`.
pub fn alpha_upper(cert: &ConvergenceCertificate, s: f64) -> f64 {
    cert.lipschitz * cert.lipschitz * s.powi(4) / 2.0
}

/// Envelope valid for `j >= 1` from any initial condition.
pub fn theorem_bound(cert: &ConvergenceCertificate, t: f64, initial_distance: f64) -> Result<f64> {
    envelope(cert.thm_prefactor, cert.rate, t, initial_distance)
}

/// Envelope valid for all samples when `z1(0,0) = z2(0,0)`.
pub fn proposition_bound(cert: &ConvergenceCertificate, t: f64, initial_distance: f64) -> Result<f64> {
    envelope(cert.prop_prefactor, cert.rate, t, initial_distance)
}

fn envelope(prefactor: f64, rate: f64, t: f64, d0: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    Ok(prefactor * (-rate * t).exp() * d0)
}

/// Worst-case outcome of one inequality over a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityResult {
    pub name: String,
    /// Smallest normalized `rhs − lhs` seen; `+∞` when nothing was checked.
    pub worst_margin: f64,
    pub at: Option<HybridTime>,
    pub points: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl InequalityResult {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            worst_margin: f64::INFINITY,
            at: None,
            points: 0,
            tolerance,
            pass: true,
        }
    }

    /// Records `lhs <= rhs` at `time`, normalized by `max(1, |rhs|)`.
    fn record(&mut self, lhs: f64, rhs: f64, time: HybridTime) {
        self.record_margin((rhs - lhs) / rhs.abs().max(1.0), time);
    }

    fn record_margin(&mut self, margin: f64, time: HybridTime) {
        self.points += 1;
        // NaN margins count as failures.
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
            self.at = Some(time);
        }
        self.pass = self.worst_margin >= -self.tolerance;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub inequalities: Vec<InequalityResult>,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.inequalities.iter().all(|i| i.pass)
    }

    pub fn worst(&self) -> Option<&InequalityResult> {
        self.inequalities
            .iter()
            .min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin))
    }
}

fn require_equal_init(traj: &Trajectory, what: &str) -> Result<()> {
    let init = &traj.initial().state;
    if init.z1 != init.z2 {
        return Err(Error::InapplicableHypothesis(format!(
            "{what} requires z1(0,0) = z2(0,0)"
        )));
    }
    Ok(())
}

/// Per-interval cache of `z2(t_j)` quantities.
struct HeldCache {
    j: Option<u64>,
    dist_sq: f64,
    grad: Vec<f64>,
}

impl HeldCache {
    fn new() -> Self {
        Self {
            j: None,
            dist_sq: 0.0,
            grad: Vec::new(),
        }
    }

    fn refresh(&mut self, obj: &dyn Objective, state: &HybridState, j: u64) -> Result<()> {
        if self.j != Some(j) {
            self.dist_sq = vecops::dist_sq(&state.z2, obj.minimizer());
            self.grad = obj.gradient(&state.z2)?;
            self.j = Some(j);
        }
        Ok(())
    }
}

/// Contraction properties of each flow interval under equal initialization:
/// `‖z1 − x*‖² ≤ q ‖z2(t_j) − x*‖²`, `‖z1 − z2‖ ≤ τ_max ‖∇L(z2(t_j))‖`,
/// `‖z1 − x*‖² ≥ B ‖z2(t_j) − x*‖²`, and `q ∈ (0, 1)` for `t > t_j`.
pub fn check_lemma3(traj: &Trajectory, obj: &dyn Objective, cert: &ConvergenceCertificate) -> Result<CheckReport> {
    require_equal_init(traj, "lemma3")?;
    let x_star = obj.minimizer();
    let mut upper = InequalityResult::new("lemma3.contraction_upper", CHECK_TOLERANCE);
    let mut drift = InequalityResult::new("lemma3.memory_drift", CHECK_TOLERANCE);
    let mut lower = InequalityResult::new("lemma3.contraction_lower", CHECK_TOLERANCE);
    let mut q_range = InequalityResult::new("lemma3.q_in_unit_interval", CHECK_TOLERANCE);
    let mut held = HeldCache::new();

    for s in &traj.samples {
        let j = s.time.j;
        held.refresh(obj, &s.state, j)?;
        let elapsed = s.time.t - traj.interval_start(j);
        let q = cert.contraction_factor(elapsed);
        let z1_dist_sq = vecops::dist_sq(&s.state.z1, x_star);

        upper.record(z1_dist_sq, q * held.dist_sq, s.time);
        drift.record(
            vecops::dist(&s.state.z1, &s.state.z2),
            cert.tau_max * vecops::norm(&held.grad),
            s.time,
        );
        lower.record(cert.b_const * held.dist_sq, z1_dist_sq, s.time);
        if elapsed > 0.0 {
            q_range.record_margin(q.min(1.0 - q), s.time);
        }
    }
    Ok(CheckReport {
        name: "lemma3".into(),
        inequalities: vec![upper, drift, lower, q_range],
    })
}

/// Gradient alignment `∇L(z1)ᵀ∇L(z2) ≥ A ‖z2(t_j) − x*‖²` on flow samples
/// with `t > t_j`, under equal initialization.
pub fn check_lemma4(traj: &Trajectory, obj: &dyn Objective, cert: &ConvergenceCertificate) -> Result<CheckReport> {
    require_equal_init(traj, "lemma4")?;
    let mut align = InequalityResult::new("lemma4.gradient_alignment", CHECK_TOLERANCE);
    let mut held = HeldCache::new();
    for s in &traj.samples {
        let j = s.time.j;
        if s.time.t <= traj.interval_start(j) {
            continue;
        }
        held.refresh(obj, &s.state, j)?;
        let g1 = obj.gradient(&s.state.z1)?;
        align.record(cert.a_const * held.dist_sq, vecops::dot(&g1, &held.grad), s.time);
    }
    Ok(CheckReport {
        name: "lemma4".into(),
        inequalities: vec![align],
    })
}

/// `V` does not increase across any jump, under equal initialization.
pub fn check_jump_descent(traj: &Trajectory, obj: &dyn Objective) -> Result<CheckReport> {
    require_equal_init(traj, "jump_descent")?;
    let mut descent = InequalityResult::new("jump_descent", JUMP_DESCENT_TOLERANCE);
    for (k, jr) in traj.jumps.iter().enumerate() {
        let before = lyapunov(obj, traj.jump_pre(k))?;
        let after = lyapunov(obj, traj.jump_post(k))?;
        descent.record_margin(before - after, HybridTime::new(jr.t, jr.j + 1));
    }
    Ok(CheckReport {
        name: "jump_descent".into(),
        inequalities: vec![descent],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMode {
    /// All samples; requires `z1(0,0) = z2(0,0)`.
    Proposition,
    /// Samples with `j >= 1`; any initialization.
    Theorem,
}

/// Exponential envelope `|ξ(t,j)|_A ≤ prefactor · e^{−ct} · |ξ(0,0)|_A`.
pub fn check_convergence_envelope(
    traj: &Trajectory,
    x_star: &[f64],
    cert: &ConvergenceCertificate,
    mode: EnvelopeMode,
) -> Result<CheckReport> {
    let d0 = distance_to_a(&traj.initial().state, x_star)?;
    let name = match mode {
        EnvelopeMode::Proposition => {
            require_equal_init(traj, "proposition envelope")?;
            "proposition_envelope"
        }
        EnvelopeMode::Theorem => "theorem_envelope",
    };
    let mut env = InequalityResult::new(name, CHECK_TOLERANCE);
    for s in &traj.samples {
        let bound = match mode {
            EnvelopeMode::Proposition => proposition_bound(cert, s.time.t, d0)?,
            EnvelopeMode::Theorem if s.time.j >= 1 => theorem_bound(cert, s.time.t, d0)?,
            EnvelopeMode::Theorem => continue,
        };
        env.record(distance_sq_to_a(&s.state, x_star).sqrt(), bound, s.time);
    }
    Ok(CheckReport {
        name: name.into(),
        inequalities: vec![env],
    })
}

/// `V(ξ(t,j)) ≤ 8192K²/(81β²) · V(ξ(0,0))` at every sample.
pub fn check_escape_growth(traj: &Trajectory, obj: &dyn Objective, cert: &ConvergenceCertificate) -> Result<CheckReport> {
    let v0 = lyapunov(obj, &traj.initial().state)?;
    let mut growth = InequalityResult::new("escape_growth", CHECK_TOLERANCE);
    for s in &traj.samples {
        growth.record(lyapunov(obj, &s.state)?, cert.escape_growth * v0, s.time);
    }
    Ok(CheckReport {
        name: "escape_growth".into(),
        inequalities: vec![growth],
    })
}

/// `|ξ(t₁,1)|_A ≤ √2 · (4/3) · |ξ(0,0)|_A` across the first jump.
pub fn check_first_jump(traj: &Trajectory, x_star: &[f64]) -> Result<CheckReport> {
    let d0 = distance_to_a(&traj.initial().state, x_star)?;
    let mut first = InequalityResult::new("first_jump_bound", CHECK_TOLERANCE);
    if !traj.jumps.is_empty() {
        let post = traj.jump_post(0);
        let bound = 2f64.sqrt() * 4.0 / 3.0 * d0;
        first.record(distance_to_a(post, x_star)?, bound, HybridTime::new(traj.jumps[0].t, 1));
    }
    Ok(CheckReport {
        name: "first_jump_bound".into(),
        inequalities: vec![first],
    })
}

/// Timer discipline of a trajectory: resets and inter-jump gaps for `j >= 1`
/// within `[τ_min, τ_max]`, timer range at every sample, and the non-Zeno
/// count `#jumps in [0, T] ≤ ⌈T/τ_min⌉ + 1`.
///
/// Reset values and flow durations are compared exactly. Gaps recomputed
/// from accumulated jump times carry rounding from the running sum, so they
/// are compared against the flow duration with a few ulps of `t` of slack.
pub fn check_timer_discipline(traj: &Trajectory, timer: &TimerConfig) -> CheckReport {
    let (lo, hi) = (timer.tau_min(), timer.tau_max());
    let mut resets = InequalityResult::new("timer.reset_in_bounds", 0.0);
    let mut durations = InequalityResult::new("timer.interval_in_bounds", 0.0);
    let mut gaps = InequalityResult::new("timer.gap_matches_interval", 0.0);
    let mut range = InequalityResult::new("timer.tau_in_range", 0.0);
    let mut zeno = InequalityResult::new("timer.non_zeno", 0.0);

    for jr in &traj.jumps {
        let at = HybridTime::new(jr.t, jr.j + 1);
        resets.record_margin((jr.reset - lo).min(hi - jr.reset), at);
    }
    for w in traj.jumps.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let at = HybridTime::new(cur.t, cur.j);
        durations.record_margin((cur.flow_duration - lo).min(hi - cur.flow_duration), at);
        let gap = cur.t - prev.t;
        let slack = 4.0 * f64::EPSILON * cur.t.abs().max(1.0);
        gaps.record_margin(slack - (gap - cur.flow_duration).abs(), at);
    }
    for s in &traj.samples {
        range.record_margin(s.state.tau.min(hi - s.state.tau), s.time);
    }
    let horizon = traj.last().time.t;
    let allowed = (horizon / lo).ceil() + 1.0;
    zeno.record_margin(allowed - traj.jumps.len() as f64, traj.last().time);

    CheckReport {
        name: "timer_discipline".into(),
        inequalities: vec![resets, durations, gaps, range, zeno],
    }
}

/// Least-squares slope of `ln |ξ|_A` against `t` over samples with `j >= 1`
/// and distance above `1e-12`.
pub fn fit_decay_rate(traj: &Trajectory, x_star: &[f64]) -> Result<f64> {
    let mut points = Vec::new();
    for s in traj.samples.iter().filter(|s| s.time.j >= 1) {
        let d = distance_to_a(&s.state, x_star)?;
        if d > 1e-12 {
            points.push((s.time.t, d.ln()));
        }
    }
    fit_log_slope(&points)
}

/// Slope of the least-squares line through `(t, ln d)` points.
pub fn fit_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    const NEEDED: usize = 10;
    if points.len() < NEEDED {
        return Err(Error::InsufficientSamples {
            needed: NEEDED,
            found: points.len(),
        });
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(t, y) in points {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (y - mean_y);
    }
    if sxx <= 0.0 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            found: 1,
        });
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::NoDecay { slope });
    }
    Ok(slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid_core::{simulate, ResetPolicy, StopRule};
    use crate::objective::{BlockPartition, QuadraticObjective};
    use nalgebra::DMatrix;

    fn unit() -> QuadraticObjective {
        QuadraticObjective::new(DMatrix::from_element(1, 1, 1.0), vec![0.0], 1.0, 1.0).unwrap()
    }

    fn st(z1: f64, z2: f64, tau: f64) -> HybridState {
        HybridState::new(vec![z1], vec![z2], tau).unwrap()
    }

    fn unit_traj(init: HybridState, jumps: u64) -> (QuadraticObjective, ConvergenceCertificate, Trajectory) {
        let obj = unit();
        let timer = TimerConfig::fixed_max(0.25, 0.25).unwrap();
        let cert = crate::hybrid_core::validate_config(&obj, &timer).unwrap();
        let p = BlockPartition::scalar(1).unwrap();
        let traj = simulate(&obj, &p, &init, &timer, StopRule::MaxJumps(jumps), 0.125).unwrap();
        (obj, cert, traj)
    }

    #[test]
    fn certificate_unit_example() {
        let c = ConvergenceCertificate::new(1.0, 1.0, 0.1, 0.25).unwrap();
        assert_eq!(c.b_const, 0.5);
        assert_eq!(c.a_const, 0.25);
        assert_eq!(c.rate, 0.015625);
        let expected = 8.0 / 3.0 * 2f64.powf(0.25);
        assert!((c.thm_prefactor - expected).abs() < 1e-15);
        assert!((c.thm_prefactor - 3.1712).abs() < 1e-4);
        assert!((c.prop_prefactor - 1.681_792_830_507_429).abs() < 1e-12);
        assert!((c.escape_growth - 8192.0 / 81.0).abs() < 1e-12);
        assert!(c.prop_prefactor < c.thm_prefactor);
    }

    #[test]
    fn certificate_bound_cases() {
        assert!(ConvergenceCertificate::new(5.0, 5.0, 25.0 / 752.0, 25.0 / 376.0).is_ok());
        let err = ConvergenceCertificate::new(2.0, 4.0, 0.01, 0.03).unwrap_err();
        match err {
            Error::BoundViolation { bound, .. } => assert!((bound - 4.0 / 192.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        // Exactly at the bound is rejected.
        assert!(ConvergenceCertificate::new(1.0, 1.0, 0.1, 1.0 / 3.0).is_err());
        assert!(ConvergenceCertificate::new(1.0, 1.0, 0.3, 0.2).is_err());
        assert!(ConvergenceCertificate::new(1.0, 1.0, 0.0, 0.2).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance_to_a(&st(0.0, 0.0, 0.1), &[0.0]).unwrap(), 0.0);
        assert_eq!(distance_to_a(&st(0.75, 1.0, 0.0), &[0.0]).unwrap(), 1.25);
        let s = HybridState::new(vec![1.0, 2.0], vec![2.0, 2.0], 0.0).unwrap();
        assert_eq!(distance_to_a(&s, &[1.0, 2.0]).unwrap(), 1.0);
        assert!(distance_to_a(&s, &[1.0]).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let obj = unit();
        assert_eq!(lyapunov(&obj, &st(0.0, 0.0, 0.2)).unwrap(), 0.0);
        assert_eq!(lyapunov(&obj, &st(0.75, 1.0, 0.0)).unwrap(), 0.3291015625);
    }

    #[test]
    fn bound_examples() {
        let c = ConvergenceCertificate::new(1.0, 1.0, 0.1, 0.25).unwrap();
        assert_eq!(theorem_bound(&c, 0.0, 2.0).unwrap(), 2.0 * c.thm_prefactor);
        let ratio = theorem_bound(&c, 64.0, 1.0).unwrap() / theorem_bound(&c, 0.0, 1.0).unwrap();
        assert!((ratio - (-1f64).exp()).abs() < 1e-15);
        assert!(theorem_bound(&c, 1e6, 1.0).unwrap() < 1e-300);
        assert_eq!(proposition_bound(&c, 0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(theorem_bound(&c, -1.0, 1.0), Err(Error::NegativeTime(_))));
        assert!(proposition_bound(&c, -0.5, 1.0).is_err());
        let mut prev = f64::INFINITY;
        for k in 0..100 {
            let v = theorem_bound(&c, k as f64, 1.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn lemma3_scalar_case_is_tight() {
        let (obj, cert, traj) = unit_traj(st(1.0, 1.0, 0.25), 1);
        let report = check_lemma3(&traj, &obj, &cert).unwrap();
        assert!(report.pass(), "{report:?}");
        // At t = 0.25 (pre-jump) both sides equal 0.5625.
        let upper = &report.inequalities[0];
        assert_eq!(upper.worst_margin, 0.0);
    }

    #[test]
    fn lemma4_mid_interval_example() {
        let (obj, cert, traj) = unit_traj(st(1.0, 1.0, 0.25), 1);
        let mid = traj.samples.iter().find(|s| s.time.t == 0.125).unwrap();
        assert_eq!(mid.state.z1, vec![0.875]);
        let report = check_lemma4(&traj, &obj, &cert).unwrap();
        assert!(report.pass());
        // Worst point is the interval end: 0.75 - 0.25 = 0.5.
        assert_eq!(report.inequalities[0].worst_margin, 0.5);
    }

    #[test]
    fn jump_descent_example() {
        let (obj, _, traj) = unit_traj(st(1.0, 1.0, 0.25), 1);
        assert_eq!(lyapunov(&obj, traj.jump_pre(0)).unwrap(), 0.3291015625);
        assert_eq!(lyapunov(&obj, traj.jump_post(0)).unwrap(), 0.158203125);
        let report = check_jump_descent(&traj, &obj).unwrap();
        assert!(report.pass());
        assert_eq!(report.inequalities[0].worst_margin, 0.3291015625 - 0.158203125);
    }

    #[test]
    fn unequal_init_is_inapplicable_for_lemmas() {
        let (obj, cert, traj) = unit_traj(st(1.0, 0.0, 0.25), 3);
        assert!(matches!(check_lemma3(&traj, &obj, &cert), Err(Error::InapplicableHypothesis(_))));
        assert!(check_lemma4(&traj, &obj, &cert).is_err());
        assert!(check_jump_descent(&traj, &obj).is_err());
        assert!(check_convergence_envelope(&traj, &[0.0], &cert, EnvelopeMode::Proposition).is_err());
        let thm = check_convergence_envelope(&traj, &[0.0], &cert, EnvelopeMode::Theorem).unwrap();
        assert!(thm.pass());
        assert!(check_escape_growth(&traj, &obj, &cert).unwrap().pass());
    }

    #[test]
    fn trial2_first_jump_ratio() {
        let (_, _, traj) = unit_traj(st(2.0, 0.0, 0.25), 1);
        let d0 = distance_to_a(&traj.initial().state, &[0.0]).unwrap();
        let d1 = distance_to_a(traj.jump_post(0), &[0.0]).unwrap();
        assert!((d1 / d0 - 2f64.sqrt()).abs() < 1e-12);
        assert!(check_first_jump(&traj, &[0.0]).unwrap().pass());
    }

    #[test]
    fn equilibrium_checks_hold_with_equality() {
        let (obj, cert, traj) = unit_traj(st(0.0, 0.0, 0.25), 4);
        for r in [
            check_lemma3(&traj, &obj, &cert).unwrap(),
            check_lemma4(&traj, &obj, &cert).unwrap(),
            check_jump_descent(&traj, &obj).unwrap(),
            check_escape_growth(&traj, &obj, &cert).unwrap(),
            check_convergence_envelope(&traj, &[0.0], &cert, EnvelopeMode::Proposition).unwrap(),
            check_convergence_envelope(&traj, &[0.0], &cert, EnvelopeMode::Theorem).unwrap(),
        ] {
            assert!(r.pass(), "{r:?}");
        }
        let descent = check_jump_descent(&traj, &obj).unwrap();
        assert_eq!(descent.inequalities[0].worst_margin, 0.0);
    }

    #[test]
    fn timer_discipline_on_uniform_resets() {
        let obj = unit();
        let timer = TimerConfig::new(0.1, 0.25, ResetPolicy::Uniform { seed: 4 }).unwrap();
        let p = BlockPartition::scalar(1).unwrap();
        let traj = simulate(&obj, &p, &st(1.0, 1.0, 0.05), &timer, StopRule::MaxTime(20.0), 0.05).unwrap();
        let r = check_timer_discipline(&traj, &timer);
        assert!(r.pass(), "{r:?}");
    }

    #[test]
    fn decay_fit_on_synthetic_exponential() {
        let pts: Vec<(f64, f64)> = (0..50).map(|k| {
            let t = k as f64 * 0.1;
            (t, (-2.0 * t).exp().ln())
        }).collect();
        assert!((fit_log_slope(&pts).unwrap() + 2.0).abs() < 1e-6);
        let flat: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 0.3)).collect();
        assert!(matches!(fit_log_slope(&flat), Err(Error::NoDecay { .. })));
        assert!(matches!(fit_log_slope(&pts[..5]), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn decay_fit_beats_certified_rate() {
        let (_, cert, traj) = unit_traj(st(1.0, 1.0, 0.25), 20);
        let slope = fit_decay_rate(&traj, &[0.0]).unwrap();
        assert!(slope <= -cert.rate, "slope {slope}");
    }

    #[test]
    fn nan_margin_fails() {
        let mut r = InequalityResult::new("x", 1e-9);
        r.record_margin(1.0, HybridTime::new(0.0, 0));
        r.record_margin(f64::NAN, HybridTime::new(1.0, 0));
        assert!(!r.pass);
    }
}
