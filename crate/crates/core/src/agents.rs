//! Per-agent execution of the hybrid algorithm.
//!
//! Each agent owns one block `x_i` of the decision variable, a private copy
//! of the broadcast memory `η`, and the block gradient `∇_i L(η)` sampled at
//! the last communication event. A single shared timer triggers the
//! broadcast: every agent posts its block to the [`BroadcastBus`], the bus
//! assembles the full vector, and every agent replaces its `η` copy with it.

use std::collections::BTreeSet;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hybrid_core::{
    check_init, run_engine, validate_config, HybridState, Plant, StopRule, TimerConfig, Trajectory,
};
use crate::objective::{check_dim, BlockPartition, Objective};

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    id: usize,
    block: Range<usize>,
    x: Vec<f64>,
    eta: Vec<f64>,
    held_gradient: Vec<f64>,
}

impl Agent {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn block(&self) -> Range<usize> {
        self.block.clone()
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn memory(&self) -> &[f64] {
        &self.eta
    }

    pub fn held_gradient(&self) -> &[f64] {
        &self.held_gradient
    }

    fn flowed(&self, elapsed: f64) -> impl Iterator<Item = f64> + '_ {
        self.x
            .iter()
            .zip(&self.held_gradient)
            .map(move |(x, g)| x - elapsed * g)
    }

    fn sample_gradient(&mut self, obj: &dyn Objective) -> Result<()> {
        self.held_gradient = obj.gradient_block(&self.eta, self.block.clone())?;
        Ok(())
    }
}

/// Synchronous, lossless broadcast channel. Messages posted during a jump
/// are delivered to every agent at the same instant.
#[derive(Debug, Clone, Default)]
pub struct BroadcastBus {
    pending: Vec<Option<Vec<f64>>>,
}

impl BroadcastBus {
    pub fn new(agents: usize) -> Self {
        Self {
            pending: vec![None; agents],
        }
    }

    pub fn post(&mut self, agent: usize, block: Vec<f64>) -> Result<()> {
        let agents = self.pending.len();
        let slot = self
            .pending
            .get_mut(agent)
            .ok_or(Error::AgentIndexOutOfRange { index: agent, agents })?;
        if slot.is_some() {
            return Err(Error::Internal(format!("agent {agent} posted twice in one round")));
        }
        *slot = Some(block);
        Ok(())
    }

    /// Concatenates every agent's block in id order and clears the round.
    pub fn deliver(&mut self, partition: &BlockPartition) -> Result<Vec<f64>> {
        let mut full = Vec::with_capacity(partition.dim());
        for (i, slot) in self.pending.iter_mut().enumerate() {
            let block = slot
                .take()
                .ok_or_else(|| Error::Internal(format!("agent {i} did not broadcast")))?;
            check_dim(partition.sizes()[i], block.len())?;
            full.extend(block);
        }
        Ok(full)
    }
}

/// Which agents wrote which entries of `x` during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WriteTrace {
    writes: BTreeSet<(usize, usize, usize)>,
}

impl WriteTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, agent: usize, indices: Range<usize>) {
        self.writes.insert((agent, indices.start, indices.end));
    }

    pub fn is_empty(&self) -> bool {
        self.writes.is_empty()
    }
}

/// True iff every index in `0..n` was written by exactly one agent.
pub fn check_write_disjointness(trace: &WriteTrace, n: usize) -> bool {
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for &(agent, start, end) in &trace.writes {
        for idx in start..end {
            match owner.get(idx) {
                None => return false,
                Some(Some(prev)) if *prev != agent => return false,
                _ => owner[idx] = Some(agent),
            }
        }
    }
    owner.iter().all(Option::is_some)
}

/// Order in which agents are visited inside a flow step or broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AgentOrder {
    #[default]
    Ascending,
    /// A fresh seeded permutation for every step.
    Shuffled(u64),
    /// Data-parallel updates on the rayon pool.
    Parallel,
}

struct DistributedPlant<'a> {
    obj: &'a dyn Objective,
    partition: &'a BlockPartition,
    agents: Vec<Agent>,
    bus: BroadcastBus,
    tau: f64,
    order: AgentOrder,
    shuffler: Option<ChaCha8Rng>,
    trace: WriteTrace,
}

impl DistributedPlant<'_> {
    fn visit_order(&mut self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.agents.len()).collect();
        if let Some(rng) = self.shuffler.as_mut() {
            ids.shuffle(rng);
        }
        ids
    }

    fn assemble(&self, elapsed: Option<f64>) -> Vec<f64> {
        let mut z1 = Vec::with_capacity(self.partition.dim());
        for agent in &self.agents {
            match elapsed {
                Some(e) => z1.extend(agent.flowed(e)),
                None => z1.extend_from_slice(&agent.x),
            }
        }
        z1
    }
}

impl Plant for DistributedPlant<'_> {
    fn current(&self) -> HybridState {
        HybridState {
            z1: self.assemble(None),
            z2: self.agents[0].eta.clone(),
            tau: self.tau,
        }
    }

    fn peek(&self, elapsed: f64) -> HybridState {
        HybridState {
            z1: self.assemble(Some(elapsed)),
            z2: self.agents[0].eta.clone(),
            tau: self.tau - elapsed,
        }
    }

    fn advance(&mut self, elapsed: f64) -> Result<HybridState> {
        if elapsed > self.tau {
            return Err(Error::FlowPastJump {
                duration: elapsed,
                tau: self.tau,
            });
        }
        let step = |agent: &mut Agent| {
            let next: Vec<f64> = agent.flowed(elapsed).collect();
            agent.x = next;
        };
        match self.order {
            AgentOrder::Parallel => self.agents.par_iter_mut().for_each(step),
            _ => {
                for id in self.visit_order() {
                    step(&mut self.agents[id]);
                }
            }
        }
        for agent in &self.agents {
            self.trace.record(agent.id, agent.block.clone());
        }
        self.tau -= elapsed;
        Ok(self.current())
    }

    fn jump(&mut self, reset: f64) -> Result<HybridState> {
        if self.tau != 0.0 {
            return Err(Error::NotInJumpSet { tau: self.tau });
        }
        for id in self.visit_order() {
            let agent = &self.agents[id];
            self.bus.post(agent.id, agent.x.clone())?;
        }
        let gathered = self.bus.deliver(self.partition)?;

        let obj = self.obj;
        let receive = |agent: &mut Agent| -> Result<()> {
            agent.eta.clone_from(&gathered);
            agent.sample_gradient(obj)
        };
        match self.order {
            AgentOrder::Parallel => self.agents.par_iter_mut().try_for_each(receive)?,
            _ => {
                for id in self.visit_order() {
                    receive(&mut self.agents[id])?;
                }
            }
        }
        if let Some(bad) = self.agents.iter().find(|a| a.eta != self.agents[0].eta) {
            return Err(Error::Internal(format!(
                "memory copy of agent {} diverged after broadcast",
                bad.id
            )));
        }
        self.tau = reset;
        Ok(self.current())
    }
}

/// Output of [`run_distributed`]: the trajectory plus the write
/// instrumentation and final agent states.
#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub trajectory: Trajectory,
    pub trace: WriteTrace,
    pub agents: Vec<Agent>,
}

/// Runs the algorithm with one [`Agent`] per block of `partition`.
///
/// The recorded [`Trajectory`] has the same layout as
/// [`crate::hybrid_core::simulate`] and, given identical inputs, the same
/// values.
pub fn run_distributed(
    obj: &dyn Objective,
    partition: &BlockPartition,
    init: &HybridState,
    timer: &TimerConfig,
    stop: StopRule,
    sample_interval: f64,
    order: AgentOrder,
) -> Result<DistributedRun> {
    validate_config(obj, timer)?;
    check_dim(obj.dim(), partition.dim())?;
    check_init(obj, init, timer)?;

    let mut agents = Vec::with_capacity(partition.agents());
    for (id, block) in partition.blocks().enumerate() {
        let mut agent = Agent {
            id,
            x: init.z1[block.clone()].to_vec(),
            eta: init.z2.clone(),
            held_gradient: Vec::new(),
            block,
        };
        agent.sample_gradient(obj)?;
        agents.push(agent);
    }
    let shuffler = match order {
        AgentOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut plant = DistributedPlant {
        obj,
        partition,
        agents,
        bus: BroadcastBus::new(partition.agents()),
        tau: init.tau,
        order,
        shuffler,
        trace: WriteTrace::new(),
    };
    let trajectory = run_engine(&mut plant, obj.minimizer(), timer, stop, sample_interval)?;
    Ok(DistributedRun {
        trajectory,
        trace: plant.trace,
        agents: plant.agents,
    })
}

/// Largest absolute componentwise difference between two trajectories, over
/// times, timers and both state vectors. `+∞` when their shapes differ.
pub fn max_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    if a.samples.len() != b.samples.len() || a.jumps.len() != b.jumps.len() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.samples.iter().zip(&b.samples) {
        if x.time.j != y.time.j || x.state.dim() != y.state.dim() {
            return f64::INFINITY;
        }
        worst = worst.max((x.time.t - y.time.t).abs());
        worst = worst.max((x.state.tau - y.state.tau).abs());
        for (p, q) in x.state.z1.iter().zip(&y.state.z1) {
            worst = worst.max((p - q).abs());
        }
        for (p, q) in x.state.z2.iter().zip(&y.state.z2) {
            worst = worst.max((p - q).abs());
        }
    }
    worst
}
