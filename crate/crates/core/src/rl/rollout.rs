use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reward::{compute_reward, RewardConfig, StepOutcome};
use super::{gae, normalize, RlError};
use crate::bc::ExpertPolicy;
use crate::geom::Vec2;
use crate::nn::{GaussianPolicy, SetBatch, SetNet};
use crate::sim::{
    generate_scenario, AgentParams, AgentStatus, EpisodeConfig, Observation, ScenarioConfig, ScenarioKind, World,
};

/// Randomized training episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub kinds: Vec<ScenarioKind>,
    pub scenario: ScenarioConfig,
    pub agent: AgentParams,
    pub episode: EpisodeConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            kinds: ScenarioKind::ALL.to_vec(),
            scenario: ScenarioConfig::default(),
            agent: AgentParams::default(),
            episode: EpisodeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    /// Goal-aligned observation.
    pub obs: Observation,
    /// Sampled action in the observation's frame.
    pub action: Vec2,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
    pub agent: usize,
    pub episode: u64,
}

/// Consecutive transitions of one agent. `bootstrap` is the value estimate
/// of the state after the last transition, zero when that transition ended
/// the agent's episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Stream {
    pub transitions: Vec<Transition>,
    pub bootstrap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStat {
    pub worker: usize,
    pub episode: u64,
    pub kind: ScenarioKind,
    pub n_agents: usize,
    pub arrived: usize,
    pub collided: usize,
    pub steps: u64,
    /// Undiscounted reward per agent, averaged over agents.
    pub mean_return: f64,
}

impl EpisodeStat {
    pub fn success_rate(&self) -> f64 {
        self.arrived as f64 / self.n_agents as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBuffer {
    pub streams: Vec<Stream>,
    pub episodes: Vec<EpisodeStat>,
    /// Filled by [`compute_advantages`](Self::compute_advantages), in stream order.
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.streams.iter().map(|s| s.transitions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> + '_ {
        self.streams.iter().flat_map(|s| s.transitions.iter())
    }

    /// GAE per stream, then normalization of the pooled advantages.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<(), RlError> {
        self.advantages.clear();
        self.returns.clear();
        for s in &self.streams {
            let rewards: Vec<f64> = s.transitions.iter().map(|t| t.reward).collect();
            let mut values: Vec<f64> = s.transitions.iter().map(|t| t.value).collect();
            values.push(s.bootstrap);
            let dones: Vec<bool> = s.transitions.iter().map(|t| t.done).collect();
            let (a, r) = gae(&rewards, &values, &dones, gamma, lambda)?;
            self.advantages.extend(a);
            self.returns.extend(r);
        }
        normalize(&mut self.advantages);
        Ok(())
    }
}

/// Read-only parameters shared by all workers during one collection.
pub struct Snapshot<'a> {
    pub policy: &'a GaussianPolicy,
    pub value: &'a SetNet,
    pub experts: &'a [ExpertPolicy],
    pub reward: &'a RewardConfig,
    pub env: &'a EnvConfig,
}

struct Episode {
    world: World,
    id: u64,
    kind: ScenarioKind,
    open: Vec<Vec<Transition>>,
    returns: Vec<f64>,
}

/// Owns one private world; episodes continue across collections.
pub struct Worker {
    pub id: usize,
    rng: ChaCha8Rng,
    episode: Option<Episode>,
    next_episode: u64,
}

struct WorkerOutput {
    streams: Vec<Stream>,
    episodes: Vec<EpisodeStat>,
}

impl Worker {
    pub fn new(id: usize, seed: u64) -> Self {
        Self {
            id,
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(id as u64)),
            episode: None,
            next_episode: 0,
        }
    }

    fn start_episode(&mut self, env: &EnvConfig) -> Result<Episode, RlError> {
        let kind = env.kinds[self.rng.random_range(0..env.kinds.len())];
        let (lo, hi) = env.scenario.agent_count;
        let n = self.rng.random_range(lo..=hi);
        let spec = generate_scenario(kind, n, self.rng.random(), &env.scenario)?;
        let world = World::from_scenario(&spec, env.agent, env.episode.clone())?;
        let id = self.next_episode;
        self.next_episode += 1;
        Ok(Episode {
            world,
            id,
            kind,
            open: vec![Vec::new(); n],
            returns: vec![0.0; n],
        })
    }

    fn values_of(snap: &Snapshot, obs: &[Observation]) -> Result<Vec<f64>, RlError> {
        let batch = SetBatch::from_observations(obs)?;
        Ok(snap.value.forward_batch(&batch)?.column(0).to_vec())
    }

    /// Closes every open stream with a bootstrap value of its current state.
    fn truncate(ep: &mut Episode, snap: &Snapshot, out: &mut Vec<Stream>) -> Result<(), RlError> {
        let ids: Vec<usize> = (0..ep.open.len()).filter(|&i| !ep.open[i].is_empty()).collect();
        if ids.is_empty() {
            return Ok(());
        }
        let obs: Vec<Observation> = ids.iter().map(|&i| ep.world.observe(i, true)).collect();
        let values = Self::values_of(snap, &obs)?;
        for (&i, v) in ids.iter().zip(values) {
            out.push(Stream {
                transitions: std::mem::take(&mut ep.open[i]),
                bootstrap: v,
            });
        }
        Ok(())
    }

    fn run(&mut self, snap: &Snapshot, budget: usize) -> Result<WorkerOutput, RlError> {
        let mut out = WorkerOutput {
            streams: Vec::new(),
            episodes: Vec::new(),
        };
        let mut collected = 0;
        while collected < budget {
            let mut ep = match self.episode.take() {
                Some(ep) => ep,
                None => self.start_episode(snap.env)?,
            };
            let ids = ep.world.active_ids();
            let obs: Vec<Observation> = ids.iter().map(|&i| ep.world.observe(i, true)).collect();
            let batch = SetBatch::from_observations(&obs)?;
            let means = snap.policy.mean.forward_batch(&batch)?;
            let values = snap.value.forward_batch(&batch)?;

            let mut sampled = Vec::with_capacity(ids.len());
            let mut commands = vec![Vec2::ZERO; ep.world.agents.len()];
            for (k, &i) in ids.iter().enumerate() {
                let mean = Vec2::new(means[[k, 0]], means[[k, 1]]);
                let (a, logp) = snap.policy.sample_around(mean, &mut self.rng);
                commands[i] = obs[k].frame.from_frame(a, true);
                sampled.push((a, logp));
            }
            let expert_actions: Vec<Vec<Vec2>> = if snap.reward.uses_experts() {
                let unaligned: Vec<Observation> = ids.iter().map(|&i| ep.world.observe(i, false)).collect();
                let ub = SetBatch::from_observations(&unaligned)?;
                let per_expert = snap
                    .experts
                    .iter()
                    .map(|e| e.actions(&ub))
                    .collect::<Result<Vec<_>, _>>()?;
                (0..ids.len()).map(|k| per_expert.iter().map(|v| v[k]).collect()).collect()
            } else {
                vec![Vec::new(); ids.len()]
            };

            let before: Vec<Vec2> = ids.iter().map(|&i| ep.world.agents[i].position).collect();
            ep.world.step(&commands);

            for (k, (&i, obs)) in ids.iter().zip(obs).enumerate() {
                let agent = &ep.world.agents[i];
                let outcome = StepOutcome {
                    status: agent.status,
                    position_before: before[k],
                    position_after: agent.position,
                    velocity_after: agent.velocity,
                    goal: agent.goal,
                };
                // unaligned frames only translate, so world vectors already match
                let reward = compute_reward(&outcome, commands[i], &expert_actions[k], snap.reward);
                let done = agent.status != AgentStatus::Active;
                ep.returns[i] += reward;
                ep.open[i].push(Transition {
                    obs,
                    action: sampled[k].0,
                    log_prob: sampled[k].1,
                    reward,
                    value: values[[k, 0]],
                    done,
                    agent: i,
                    episode: ep.id,
                });
                if done {
                    out.streams.push(Stream {
                        transitions: std::mem::take(&mut ep.open[i]),
                        bootstrap: 0.0,
                    });
                }
            }
            collected += ids.len();

            if ep.world.is_done() {
                Self::truncate(&mut ep, snap, &mut out.streams)?;
                let census = ep.world.census();
                let n = ep.world.agents.len();
                out.episodes.push(EpisodeStat {
                    worker: self.id,
                    episode: ep.id,
                    kind: ep.kind,
                    n_agents: n,
                    arrived: census.arrived,
                    collided: census.collided,
                    steps: ep.world.steps(),
                    mean_return: ep.returns.iter().sum::<f64>() / n as f64,
                });
            } else {
                if collected >= budget {
                    Self::truncate(&mut ep, snap, &mut out.streams)?;
                }
                self.episode = Some(ep);
            }
        }
        Ok(out)
    }
}

/// Runs every worker for at least `steps_per_worker` transitions against the
/// same parameter snapshot and merges the results in worker order.
pub fn collect_rollouts(workers: &mut [Worker], snap: &Snapshot, steps_per_worker: usize) -> Result<RolloutBuffer, RlError> {
    if snap.reward.uses_experts() && snap.experts.is_empty() {
        return Err(RlError::MissingExperts);
    }
    let outputs: Vec<Result<WorkerOutput, RlError>> = workers
        .par_iter_mut()
        .map(|w| {
            w.run(snap, steps_per_worker).or_else(|e| {
                log::warn!("worker {} failed ({e}); retrying with a fresh episode", w.id);
                w.episode = None;
                w.run(snap, steps_per_worker)
            })
        })
        .collect();
    let mut buffer = RolloutBuffer::default();
    for o in outputs {
        let o = o?;
        buffer.streams.extend(o.streams);
        buffer.episodes.extend(o.episodes);
    }
    Ok(buffer)
}
