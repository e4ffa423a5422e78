//! Discrete-step world: one stationary target, stationary agents, and
//! broadcast message passing.
//!
//! Each step runs in a fixed order:
//! 1. every agent with the target in range draws one noisy bearing and fuses it;
//! 2. on broadcast steps every agent's estimate is snapshotted and delivered
//!    to its neighbours, in ascending (receiver, sender) order;
//! 3. one [`StepRecord`] per agent is emitted.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentEstimator;
use crate::bearing::{in_range, sample_measurement};
use crate::config::{ConfigError, NetworkConfig, RunMethod, ScenarioConfig};
use crate::ellipsoid::Ellipsoid;
use crate::fusion::FusionMethod;
use crate::linalg::Vec2;
use crate::streams::{substream, Checksum, Stream};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure at step {step}, agent {agent}: {source}")]
    Numerical {
        step: u64,
        agent: usize,
        source: crate::error::Error,
    },
}

/// One row of the per-step log. Event counts are cumulative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub run_id: u64,
    pub step: u64,
    pub agent_id: usize,
    pub method: RunMethod,
    pub err_m: f64,
    #[serde(rename = "det_P")]
    pub det_p: f64,
    pub est_x: f64,
    pub est_y: f64,
    #[serde(rename = "P_xx")]
    pub p_xx: f64,
    #[serde(rename = "P_xy")]
    pub p_xy: f64,
    #[serde(rename = "P_yy")]
    pub p_yy: f64,
    pub n_meas: u64,
    pub n_comm_accepted: u64,
    pub n_comm_discarded: u64,
}

/// World-level event totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorldStats {
    pub measurements: u64,
    pub broadcast_rounds: u64,
    pub delivered: u64,
    pub dropped: u64,
}

pub struct WorldState {
    pub clock: u64,
    pub target: Vec2,
    pub agents: Vec<AgentEstimator>,
    /// Broadcasts of the current round as `(sender, estimate)`; empty between steps.
    pub pending: Vec<(usize, Ellipsoid)>,
    network: NetworkConfig,
    method: RunMethod,
    run_id: u64,
    noise: Vec<ChaCha8Rng>,
    drops: Vec<ChaCha8Rng>,
    noise_checksum: Checksum,
    stats: WorldStats,
}

impl WorldState {
    /// Builds the world for one method. All methods built from the same
    /// `(scenario, seed)` see identical measurement-noise streams.
    pub fn new(
        scenario: &ScenarioConfig,
        method: RunMethod,
        seed: u64,
        run_id: u64,
    ) -> Result<Self, ConfigError> {
        scenario.validate()?;
        let agents = scenario
            .agents
            .iter()
            .enumerate()
            .map(|(id, a)| {
                let rule = method.fusion().unwrap_or(FusionMethod::Cce);
                let agent = AgentEstimator::new(
                    id,
                    a.initial_estimate,
                    a.sensor,
                    rule,
                    scenario.alpha_criterion,
                );
                if method == RunMethod::NonCollaborative {
                    agent.non_collaborative()
                } else {
                    agent
                }
            })
            .collect::<Vec<_>>();
        let n = agents.len();
        Ok(Self {
            clock: 0,
            target: scenario.target,
            agents,
            pending: Vec::new(),
            network: scenario.network.clone(),
            method,
            run_id,
            noise: (0..n)
                .map(|i| substream(seed, Stream::MeasurementNoise, i as u64))
                .collect(),
            drops: (0..n)
                .map(|i| substream(seed, Stream::Drops, i as u64))
                .collect(),
            noise_checksum: Checksum::default(),
            stats: WorldStats::default(),
        })
    }

    pub fn stats(&self) -> WorldStats {
        self.stats
    }

    /// Checksum of every noise draw consumed so far.
    pub fn noise_checksum(&self) -> u64 {
        self.noise_checksum.value()
    }

    pub fn record(&self, agent: &AgentEstimator) -> StepRecord {
        let est = agent.estimate();
        let counts = agent.counts();
        StepRecord {
            run_id: self.run_id,
            step: self.clock,
            agent_id: agent.id,
            method: self.method,
            err_m: (est.center - self.target).norm(),
            det_p: est.shape.det(),
            est_x: est.center.x,
            est_y: est.center.y,
            p_xx: est.shape.xx(),
            p_xy: est.shape.xy(),
            p_yy: est.shape.yy(),
            n_meas: counts.measurements,
            n_comm_accepted: counts.comm_accepted,
            n_comm_discarded: counts.comm_discarded,
        }
    }

    pub fn records(&self) -> Vec<StepRecord> {
        self.agents.iter().map(|a| self.record(a)).collect()
    }

    /// Advances the world by one step and returns the per-agent records.
    pub fn step(&mut self) -> Result<Vec<StepRecord>, SimError> {
        self.step_observed(|_| {})
    }

    /// Like [`step`](Self::step), calling `observe` after every measurement
    /// or message an agent processes.
    pub fn step_observed<F: FnMut(&Event)>(
        &mut self,
        mut observe: F,
    ) -> Result<Vec<StepRecord>, SimError> {
        self.clock += 1;
        let step = self.clock;

        for (agent, rng) in self.agents.iter_mut().zip(self.noise.iter_mut()) {
            if !in_range(self.target, &agent.sensor) {
                continue;
            }
            let z: f64 = rng.sample(StandardNormal);
            self.noise_checksum.push(z);
            let id = agent.id;
            let numerical = |source| SimError::Numerical {
                step,
                agent: id,
                source,
            };
            let meas = sample_measurement(self.target, &agent.sensor, z).map_err(numerical)?;
            let before = *agent.estimate();
            agent.handle_measurement(&meas).map_err(numerical)?;
            self.stats.measurements += 1;
            observe(&Event {
                step,
                agent: id,
                sender: None,
                before,
                after: *agent.estimate(),
            });
        }

        if step.is_multiple_of(self.network.comm_period) {
            self.stats.broadcast_rounds += 1;
            self.pending = self.agents.iter().map(|a| (a.id, a.broadcast())).collect();
            for (receiver, rng) in self.agents.iter_mut().zip(self.drops.iter_mut()) {
                if !receiver.collaborative {
                    continue;
                }
                for (sender, estimate) in &self.pending {
                    if !self.network.delivers(*sender, receiver.id) {
                        continue;
                    }
                    let u: f64 = rng.random();
                    if u < self.network.drop_prob {
                        self.stats.dropped += 1;
                        continue;
                    }
                    let before = *receiver.estimate();
                    receiver.handle_communication(estimate);
                    self.stats.delivered += 1;
                    observe(&Event {
                        step,
                        agent: receiver.id,
                        sender: Some(*sender),
                        before,
                        after: *receiver.estimate(),
                    });
                }
            }
            self.pending.clear();
        }

        Ok(self.records())
    }
}

/// One processed measurement (`sender` is `None`) or delivered message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub step: u64,
    pub agent: usize,
    pub sender: Option<usize>,
    pub before: Ellipsoid,
    pub after: Ellipsoid,
}

/// Full log of one run plus the paired-comparison checksum.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub records: Vec<StepRecord>,
    pub noise_checksum: u64,
    pub stats: WorldStats,
}

impl RunLog {
    /// Records of the last logged step, one per agent.
    pub fn final_records(&self) -> impl Iterator<Item = &StepRecord> {
        let last = self.records.last().map(|r| r.step);
        self.records.iter().filter(move |r| Some(r.step) == last)
    }
}

/// Runs `scenario.steps` steps with one method. The log starts with a
/// step-0 record per agent holding the initial estimate.
pub fn run_scenario(
    scenario: &ScenarioConfig,
    method: RunMethod,
    seed: u64,
    run_id: u64,
) -> Result<RunLog, SimError> {
    let mut world = WorldState::new(scenario, method, seed, run_id)?;
    let mut records = world.records();
    records.reserve(scenario.steps as usize * world.agents.len());
    for _ in 0..scenario.steps {
        records.extend(world.step()?);
    }
    Ok(RunLog {
        records,
        noise_checksum: world.noise_checksum(),
        stats: world.stats(),
    })
}
