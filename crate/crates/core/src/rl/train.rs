use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ppo::{ppo_update, PpoConfig, PpoStats};
use super::reward::RewardConfig;
use super::rollout::{collect_rollouts, EnvConfig, Snapshot, Worker};
use super::RlError;
use crate::bc::ExpertPolicy;
use crate::geom::Vec2;
use crate::nn::{Adam, Checkpoint, GaussianPolicy, NetSpec, SetBatch, SetNet};
use crate::sim::{generate_scenario, run_episode, Controller, Observation, ScenarioKind, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub reward: RewardConfig,
    pub ppo: PpoConfig,
    pub gamma: f64,
    pub lambda: f64,
    pub n_workers: usize,
    pub steps_per_worker: usize,
    /// Budget in agent transitions.
    pub total_steps: u64,
    pub policy_net: NetSpec,
    pub value_net: NetSpec,
    pub init_std: f64,
    pub seed: u64,
    /// Updates between deterministic evaluations; 0 disables them.
    pub eval_every: usize,
    pub eval_cells: Vec<(ScenarioKind, usize)>,
    pub eval_trials: usize,
    pub eval_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            reward: RewardConfig::default(),
            ppo: PpoConfig::default(),
            gamma: 0.9,
            lambda: 0.95,
            n_workers: 8,
            steps_per_worker: 1024,
            total_steps: 5_000_000,
            policy_net: NetSpec::policy(true),
            value_net: NetSpec::value(true),
            init_std: 0.5,
            seed: 0,
            eval_every: 20,
            eval_cells: vec![
                (ScenarioKind::Circle, 20),
                (ScenarioKind::Corridor, 20),
                (ScenarioKind::Square, 20),
            ],
            eval_trials: 4,
            eval_seed: 900_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::InvalidConfig(m.into()));
        if self.n_workers == 0 || self.steps_per_worker == 0 {
            return bad("n_workers and steps_per_worker must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return bad("gamma and lambda must lie in [0, 1]");
        }
        if self.reward.w_e < 0.0 || self.reward.w_v < 0.0 {
            return bad("reward weights must be non-negative");
        }
        if self.env.kinds.is_empty() {
            return bad("at least one scenario kind is required");
        }
        if self.policy_net.ego_dim != 3 || self.value_net.ego_dim != 3 {
            return bad("policy and value networks take goal-aligned observations");
        }
        if self.init_std <= 0.0 {
            return bad("init_std must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub update: usize,
    pub steps: u64,
    pub episodes: usize,
    pub mean_episode_reward: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub eval_success: Option<f64>,
    pub wall_s: f64,
}

const METRICS_HEADER: &str = "update,steps,episodes,mean_episode_reward,success_rate,policy_loss,value_loss,entropy,clip_fraction,approx_kl,eval_success,wall_s";

impl MetricsRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.update,
            self.steps,
            self.episodes,
            self.mean_episode_reward,
            self.success_rate,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.clip_fraction,
            self.approx_kl,
            self.eval_success.map(|x| x.to_string()).unwrap_or_default(),
            self.wall_s
        )
    }

    pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>, String> {
        let mut lines = text.lines();
        if lines.next() != Some(METRICS_HEADER) {
            return Err("unexpected metrics header".into());
        }
        lines
            .enumerate()
            .map(|(i, l)| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 12 {
                    return Err(format!("line {}: expected 12 fields", i + 2));
                }
                let num = |k: usize| f[k].parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2));
                Ok(MetricsRow {
                    update: num(0)? as usize,
                    steps: num(1)? as u64,
                    episodes: num(2)? as usize,
                    mean_episode_reward: num(3)?,
                    success_rate: num(4)?,
                    policy_loss: num(5)?,
                    value_loss: num(6)?,
                    entropy: num(7)?,
                    clip_fraction: num(8)?,
                    approx_kl: num(9)?,
                    eval_success: if f[10].is_empty() { None } else { Some(num(10)?) },
                    wall_s: num(11)?,
                })
            })
            .collect()
    }
}

pub struct TrainOutput {
    pub policy: GaussianPolicy,
    pub value: SetNet,
    pub best_eval: Option<f64>,
    pub metrics: Vec<MetricsRow>,
    pub policy_path: PathBuf,
    pub best_path: PathBuf,
}

/// Drives agents with the policy mean. Actions are computed in each agent's
/// goal-aligned frame and rotated back to the world.
pub struct PolicyController {
    pub policy: GaussianPolicy,
}

impl PolicyController {
    pub fn new(policy: GaussianPolicy) -> Self {
        Self { policy }
    }
}

impl Controller for PolicyController {
    fn actions(&mut self, world: &World, agents: &[usize]) -> Vec<Vec2> {
        if agents.is_empty() {
            return Vec::new();
        }
        let obs: Vec<Observation> = agents.iter().map(|&i| world.observe(i, true)).collect();
        let batch = SetBatch::from_observations(&obs).expect("aligned observations share a layout");
        let means = self
            .policy
            .mean
            .forward_batch(&batch)
            .expect("policy takes aligned observations");
        obs.iter()
            .enumerate()
            .map(|(k, o)| o.frame.from_frame(Vec2::new(means[[k, 0]], means[[k, 1]]), true))
            .collect()
    }
}

/// Mean success rate of the deterministic policy over `trials` seeded
/// episodes of every cell. Trial `i` of a cell uses seed `base_seed + i`.
pub fn evaluate_policy(
    policy: &GaussianPolicy,
    env: &EnvConfig,
    cells: &[(ScenarioKind, usize)],
    trials: usize,
    base_seed: u64,
) -> Result<f64, RlError> {
    let jobs: Vec<(ScenarioKind, usize, u64)> = cells
        .iter()
        .flat_map(|&(k, n)| (0..trials as u64).map(move |i| (k, n, base_seed + i)))
        .collect();
    if jobs.is_empty() {
        return Ok(0.0);
    }
    let rates = jobs
        .par_iter()
        .map(|&(kind, n, seed)| {
            let spec = generate_scenario(kind, n, seed, &env.scenario)?;
            let world = World::from_scenario(&spec, env.agent, env.episode.clone())?;
            let mut ctl = PolicyController::new(policy.clone());
            let trace = run_episode(world, &mut ctl);
            let arrived = trace.agents.iter().filter(|a| a.status == crate::sim::AgentStatus::Arrived).count();
            Ok(arrived as f64 / n as f64)
        })
        .collect::<Result<Vec<f64>, RlError>>()?;
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

fn save_policy(policy: &GaussianPolicy, cfg: &TrainConfig, path: &Path, extra: &[(&str, serde_json::Value)]) -> Result<(), RlError> {
    let mut ckpt = Checkpoint::new("policy", cfg.seed, policy.clone())
        .with_meta("train_config", serde_json::to_value(cfg).expect("config serializes"));
    for (k, v) in extra {
        ckpt = ckpt.with_meta(k, v.clone());
    }
    ckpt.save(path)?;
    Ok(())
}

/// Alternates rollout collection and PPO updates until the transition budget
/// is spent. Writes `policy_final.json`, `policy_best.json`,
/// `value_final.json` and `metrics.csv` into `out_dir`.
pub fn train(cfg: &TrainConfig, experts: &[ExpertPolicy], out_dir: &Path) -> Result<TrainOutput, RlError> {
    cfg.validate()?;
    if cfg.reward.uses_experts() && experts.is_empty() {
        return Err(RlError::MissingExperts);
    }
    fs::create_dir_all(out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut policy = GaussianPolicy::init(&cfg.policy_net, cfg.init_std, &mut rng);
    let mut value = SetNet::init(&cfg.value_net, &mut rng);
    let mut popt = Adam::new(&policy, cfg.ppo.lr);
    let mut vopt = Adam::new(&value, cfg.ppo.lr);
    let mut workers: Vec<Worker> = (0..cfg.n_workers).map(|i| Worker::new(i, cfg.seed)).collect();

    let metrics_path = out_dir.join("metrics.csv");
    let mut metrics_file = fs::File::create(&metrics_path)?;
    writeln!(metrics_file, "{METRICS_HEADER}")?;
    let policy_path = out_dir.join("policy_final.json");
    let best_path = out_dir.join("policy_best.json");

    let start = Instant::now();
    let mut steps = 0u64;
    let mut update = 0usize;
    let mut metrics = Vec::new();
    let mut best: Option<f64> = None;
    while steps < cfg.total_steps {
        let snap = Snapshot {
            policy: &policy,
            value: &value,
            experts,
            reward: &cfg.reward,
            env: &cfg.env,
        };
        let mut buffer = collect_rollouts(&mut workers, &snap, cfg.steps_per_worker)?;
        buffer.compute_advantages(cfg.gamma, cfg.lambda)?;
        steps += buffer.len() as u64;
        let stats: PpoStats = match ppo_update(&buffer, &mut policy, &mut value, &mut popt, &mut vopt, &cfg.ppo, &mut rng) {
            Ok(s) => s,
            Err(RlError::NonFinite(what)) => {
                let dump = out_dir.join("policy_diverged.json");
                save_policy(&policy, cfg, &dump, &[])?;
                return Err(RlError::Diverged {
                    what,
                    update,
                    dump: dump.display().to_string(),
                });
            }
            Err(e) => return Err(e),
        };
        update += 1;

        let eps = &buffer.episodes;
        let mut row = MetricsRow {
            update,
            steps,
            episodes: eps.len(),
            mean_episode_reward: mean(eps.iter().map(|e| e.mean_return)),
            success_rate: mean(eps.iter().map(|e| e.success_rate())),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            approx_kl: stats.approx_kl,
            eval_success: None,
            wall_s: start.elapsed().as_secs_f64(),
        };
        let last = steps >= cfg.total_steps;
        if cfg.eval_every > 0 && (update % cfg.eval_every == 0 || last) {
            let s = evaluate_policy(&policy, &cfg.env, &cfg.eval_cells, cfg.eval_trials, cfg.eval_seed)?;
            row.eval_success = Some(s);
            if best.is_none_or(|b| s >= b) {
                best = Some(s);
                save_policy(
                    &policy,
                    cfg,
                    &best_path,
                    &[("update", update.into()), ("steps", steps.into()), ("eval_success", s.into())],
                )?;
            }
        }
        log::info!(
            "update {update} steps {steps} reward {:.4} success {:.3} entropy {:.3} kl {:.5} eval {:?}",
            row.mean_episode_reward,
            row.success_rate,
            row.entropy,
            row.approx_kl,
            row.eval_success
        );
        writeln!(metrics_file, "{}", row.csv())?;
        metrics_file.flush()?;
        metrics.push(row);
    }

    save_policy(&policy, cfg, &policy_path, &[("update", update.into()), ("steps", steps.into())])?;
    Checkpoint::new("value", cfg.seed, value.clone()).save(&out_dir.join("value_final.json"))?;
    if best.is_none() {
        fs::copy(&policy_path, &best_path)?;
    }
    Ok(TrainOutput {
        policy,
        value,
        best_eval: best,
        metrics,
        policy_path,
        best_path,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Loads a policy checkpoint written by [`train`].
pub fn load_policy(path: &Path) -> Result<GaussianPolicy, RlError> {
    Ok(Checkpoint::<GaussianPolicy>::load_role(path, "policy")?.model)
}
