//! The `kdnav` command line: data preparation, both training stages,
//! benchmarking and single-episode simulation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bc::{train_expert, BcConfig, ExpertPolicy};
use crate::data::synth::{generate, SynthConfig};
use crate::data::{cleanse, load_dataset, read_cache, resample_and_differentiate, write_cache, write_frame_table, CleanseConfig, TrackSet};
use crate::eval::{export_report, export_trace, run_benchmark, run_trial, BenchmarkConfig, MethodSpec};
use crate::rl::{train, RewardConfig, TrainConfig};
use crate::sim::{run_episode, ScenarioKind, ScenarioSpec, World};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "kdnav", version, about = "Decentralized crowd navigation with distillation-shaped reinforcement learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic pedestrian frame table.
    SynthData(SynthArgs),
    /// Load, resample and cleanse a frame table into a track cache.
    PrepareData(PrepareArgs),
    /// Behavior-clone one or more experts from a track cache.
    TrainExpert(ExpertArgs),
    /// Train a navigation policy with PPO.
    TrainRl(RlArgs),
    /// Run the seeded benchmark over methods and scenario cells.
    Benchmark(BenchArgs),
    /// Run one episode and export its trajectory.
    Simulate(SimulateArgs),
    /// Print the default configuration of a command as TOML.
    ConfigReference {
        /// synth-data, prepare-data, train-expert, train-rl, benchmark or simulate.
        command: String,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    /// Control period of the resampling grid, seconds.
    pub dt: f64,
    pub cleanse: CleanseConfig,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            dt: 0.12,
            cleanse: CleanseConfig::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExpertArgs {
    #[arg(long)]
    pub cache: PathBuf,
    /// Output directory; experts are written as `expert{i}.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of experts, seeded `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub experts: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Debug, Args)]
pub struct RlArgs {
    /// Expert checkpoints used by the distillation term.
    #[arg(long = "expert")]
    pub experts: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Drop the expert-matching term.
    #[arg(long)]
    pub no_distill: bool,
    /// Drop the goal-velocity term.
    #[arg(long)]
    pub no_velocity: bool,
    /// Goal-progress reward and 1.3 m/s speed cap of the plain RL baseline.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// `kind`, `kind=checkpoint` or `label:kind=checkpoint`; kind is one of
    /// orca, sl, rl_no_kd, kd.
    #[arg(long = "method", required = true)]
    pub methods: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated scenario kinds.
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<String>>,
    /// Comma-separated agent counts.
    #[arg(long, value_delimiter = ',')]
    pub agents: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub method: String,
    /// Scenario spec file; otherwise one is generated from kind, agents and seed.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value = "circle")]
    pub kind: String,
    #[arg(long, default_value_t = 20)]
    pub agents: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 26)]
    pub bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun an artifact-producing command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub version: String,
}

impl RunManifest {
    fn new(command: &str, config: &impl Serialize) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().collect(),
            config: serde_json::to_value(config).expect("configs serialize"),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix: now(),
            finished_unix: 0.0,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<String, CliError> {
        let h = sha256_file(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        self.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256: h.clone(),
        });
        Ok(h)
    }

    fn write(mut self, path: &Path) -> Result<(), CliError> {
        self.finished_unix = now();
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
    }
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Defaults, overridden by the TOML file when one is given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn to_toml(v: &impl Serialize) -> String {
    toml::to_string_pretty(v).expect("configs serialize to TOML")
}

fn parse_kind(s: &str) -> Result<ScenarioKind, CliError> {
    ScenarioKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| CliError::Config(format!("unknown scenario kind `{s}`")))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SynthData(a) => synth_data(a),
        Command::PrepareData(a) => prepare_data(a),
        Command::TrainExpert(a) => cmd_train_expert(a),
        Command::TrainRl(a) => cmd_train_rl(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::ConfigReference { command } => {
            let text = match command.as_str() {
                "synth-data" => to_toml(&SynthConfig::default()),
                "prepare-data" => to_toml(&PrepareConfig::default()),
                "train-expert" => to_toml(&BcConfig::default()),
                "train-rl" => to_toml(&TrainConfig::default()),
                "benchmark" | "simulate" => to_toml(&BenchmarkConfig::default()),
                other => return Err(CliError::Config(format!("no config for `{other}`"))),
            };
            print!("{text}");
            Ok(())
        }
    }
}

fn synth_data(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg: SynthConfig = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let mut m = RunManifest::new("synth-data", &cfg);
    m.seeds.push(cfg.seed);
    let tracks = generate(&cfg);
    let file = fs::File::create(&a.out).map_err(|e| runtime(format!("{}: {e}", a.out.display())))?;
    write_frame_table(&tracks, cfg.fps, std::io::BufWriter::new(file)).map_err(runtime)?;
    println!("wrote {} pedestrians to {}", tracks.len(), a.out.display());
    m.outputs.push(a.out.display().to_string());
    m.write(&manifest_path(&a.out))
}

/// Loads, resamples and cleanses a frame table.
pub fn prepare(dataset: &Path, cfg: &PrepareConfig) -> Result<TrackSet, CliError> {
    let raw = load_dataset(dataset).map_err(data_err)?;
    let processed = raw.iter().filter_map(|r| resample_and_differentiate(r, cfg.dt)).collect();
    let (mut active, passive) = cleanse(processed, &cfg.cleanse);
    if active.is_empty() {
        return Err(CliError::Data("no pedestrian passes the cleansing thresholds".into()));
    }
    active.extend(passive);
    Ok(TrackSet::new(active, cfg.dt))
}

fn prepare_data(a: PrepareArgs) -> Result<(), CliError> {
    let cfg: PrepareConfig = load_config(a.config.as_deref())?;
    let mut m = RunManifest::new("prepare-data", &cfg);
    m.input(&a.dataset)?;
    let set = prepare(&a.dataset, &cfg)?;
    write_cache(&set, &a.out).map_err(runtime)?;
    let active = set.active_count();
    println!(
        "active {active} passive {} total {}",
        set.tracks.len() - active,
        set.tracks.len()
    );
    m.outputs.push(a.out.display().to_string());
    m.write(&manifest_path(&a.out))
}

fn cmd_train_expert(a: ExpertArgs) -> Result<(), CliError> {
    let mut cfg: BcConfig = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if a.no_augment {
        cfg.augment = false;
    }
    if a.experts == 0 {
        return Err(CliError::Config("--experts must be at least 1".into()));
    }
    let mut m = RunManifest::new("train-expert", &cfg);
    let hash = m.input(&a.cache)?;
    let set = read_cache(&a.cache).map_err(data_err)?;
    create_dir(&a.out_dir)?;
    for i in 0..a.experts {
        let c = BcConfig {
            seed: cfg.seed + i as u64,
            ..cfg.clone()
        };
        let (expert, log) = train_expert(&set, &c, &hash).map_err(runtime)?;
        let path = a.out_dir.join(format!("expert{i}.json"));
        expert.save(&path).map_err(runtime)?;
        let log_path = a.out_dir.join(format!("expert{i}_loss.csv"));
        let mut f = fs::File::create(&log_path).map_err(runtime)?;
        writeln!(f, "epoch,train_loss,val_loss").map_err(runtime)?;
        for l in &log {
            writeln!(
                f,
                "{},{},{}",
                l.epoch,
                l.train_loss,
                l.val_loss.map(|v| v.to_string()).unwrap_or_default()
            )
            .map_err(runtime)?;
        }
        println!(
            "expert {i}: train {:.5} val {:?} -> {}",
            expert.meta.train_loss,
            expert.meta.val_loss,
            path.display()
        );
        m.seeds.push(c.seed);
        m.outputs.push(path.display().to_string());
        m.outputs.push(log_path.display().to_string());
    }
    m.write(&a.out_dir.join("manifest.json"))
}

/// Applies the ablation and baseline switches of `train-rl`.
pub fn apply_rl_flags(cfg: &mut TrainConfig, baseline: bool, no_distill: bool, no_velocity: bool) {
    if baseline {
        cfg.reward = RewardConfig::progress_baseline();
        cfg.env.agent.v_max = 1.3;
    }
    if no_distill {
        cfg.reward.w_e = 0.0;
    }
    if no_velocity {
        cfg.reward.w_v = 0.0;
    }
}

fn cmd_train_rl(a: RlArgs) -> Result<(), CliError> {
    let mut cfg: TrainConfig = load_config(a.config.as_deref())?;
    apply_rl_flags(&mut cfg, a.baseline, a.no_distill, a.no_velocity);
    if let Some(s) = a.steps {
        cfg.total_steps = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.workers {
        cfg.n_workers = w;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.reward.uses_experts() && a.experts.is_empty() {
        return Err(CliError::Config(
            "the distillation term needs at least one --expert checkpoint (or pass --no-distill)".into(),
        ));
    }
    let mut m = RunManifest::new("train-rl", &cfg);
    m.seeds.push(cfg.seed);
    let mut experts = Vec::new();
    if cfg.reward.uses_experts() {
        for p in &a.experts {
            m.input(p)?;
            experts.push(ExpertPolicy::load(p).map_err(data_err)?);
        }
    }
    create_dir(&a.out_dir)?;
    let out = train(&cfg, &experts, &a.out_dir).map_err(runtime)?;
    println!(
        "trained {} updates; best eval success {:?}; final policy {}",
        out.metrics.len(),
        out.best_eval,
        out.policy_path.display()
    );
    for f in ["policy_final.json", "policy_best.json", "value_final.json", "metrics.csv"] {
        m.outputs.push(a.out_dir.join(f).display().to_string());
    }
    m.write(&a.out_dir.join("manifest.json"))
}

fn cmd_benchmark(a: BenchArgs) -> Result<(), CliError> {
    let mut cfg: BenchmarkConfig = load_config(a.config.as_deref())?;
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if let Some(k) = &a.kinds {
        cfg.kinds = k.iter().map(|s| parse_kind(s)).collect::<Result<_, _>>()?;
    }
    if let Some(n) = &a.agents {
        cfg.agent_counts = n.clone();
    }
    let methods: Vec<MethodSpec> = a
        .methods
        .iter()
        .map(|s| MethodSpec::parse(s).map_err(|e| CliError::Config(e.to_string())))
        .collect::<Result<_, _>>()?;
    let mut m = RunManifest::new("benchmark", &cfg);
    m.seeds = cfg.seeds();
    for spec in &methods {
        if let Some(p) = &spec.checkpoint {
            if p.exists() {
                m.input(p)?;
            }
        }
    }
    let report = run_benchmark(&methods, &cfg);
    export_report(&report, &a.out).map_err(runtime)?;
    print!("{}", report.table());
    m.outputs.push(a.out.display().to_string());
    m.outputs.push(a.out.with_extension("txt").display().to_string());
    m.write(&manifest_path(&a.out))
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let cfg: BenchmarkConfig = load_config(a.config.as_deref())?;
    let method = MethodSpec::parse(&a.method).map_err(|e| CliError::Config(e.to_string()))?;
    let mut m = RunManifest::new("simulate", &cfg);
    let trace = match &a.scenario {
        Some(p) => {
            m.input(p)?;
            let text = fs::read_to_string(p).map_err(data_err)?;
            let spec = ScenarioSpec::from_toml(&text).map_err(data_err)?;
            let mut agent = cfg.agent;
            if let Some(v) = method.v_max {
                agent.v_max = v;
                agent.v_pref = agent.v_pref.min(v);
            }
            let world = World::from_scenario(&spec, agent, cfg.episode.clone()).map_err(|e| CliError::Config(e.to_string()))?;
            let mut ctl = method.controller().map_err(runtime)?;
            run_episode(world, &mut *ctl)
        }
        None => {
            m.seeds.push(a.seed);
            run_trial(&method, parse_kind(&a.kind)?, a.agents, a.seed, &cfg).map_err(runtime)?
        }
    };
    export_trace(&trace, &a.out, a.bins).map_err(runtime)?;
    let arrived = trace.agents.iter().filter(|x| x.status == crate::sim::AgentStatus::Arrived).count();
    println!(
        "{} agents, {} arrived, {} steps ({:.2} s) -> {}",
        trace.agents.len(),
        arrived,
        trace.steps,
        trace.duration(),
        a.out.display()
    );
    m.outputs.push(a.out.display().to_string());
    m.write(&manifest_path(&a.out))
}
