use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{energy_efficiency, extra_distance, success_rate, EnergyModel};
use super::EvalError;
use crate::bc::{ExpertController, ExpertPolicy};
use crate::orca::{OrcaController, OrcaParams};
use crate::rl::{load_policy, PolicyController};
use crate::sim::{
    generate_scenario, run_episode, AgentParams, Controller, EpisodeConfig, EpisodeTrace, ScenarioConfig, ScenarioKind,
    World,
};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Orca,
    Sl,
    RlNoKd,
    Kd,
}

impl MethodKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "orca" => Some(Self::Orca),
            "sl" | "expert" => Some(Self::Sl),
            "rl_no_kd" | "rl" => Some(Self::RlNoKd),
            "kd" | "ours" => Some(Self::Kd),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Orca => "orca",
            Self::Sl => "sl",
            Self::RlNoKd => "rl_no_kd",
            Self::Kd => "kd",
        }
    }

    /// Speed cap used at test time, if it differs from the agent default.
    pub fn default_v_max(self) -> Option<f64> {
        match self {
            Self::RlNoKd => Some(1.3),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub label: String,
    pub kind: MethodKind,
    /// Expert checkpoint for `sl`, policy checkpoint for `rl_no_kd` and `kd`.
    pub checkpoint: Option<PathBuf>,
    pub v_max: Option<f64>,
}

impl MethodSpec {
    pub fn new(kind: MethodKind, checkpoint: Option<PathBuf>) -> Self {
        Self {
            label: kind.name().to_string(),
            kind,
            checkpoint,
            v_max: kind.default_v_max(),
        }
    }

    /// `kind` or `kind=path` or `label:kind=path`.
    pub fn parse(s: &str) -> Result<Self, EvalError> {
        let (label, rest) = match s.split_once(':') {
            Some((l, r)) => (Some(l.to_string()), r),
            None => (None, s),
        };
        let (kind, path) = match rest.split_once('=') {
            Some((k, p)) => (k, Some(PathBuf::from(p))),
            None => (rest, None),
        };
        let kind = MethodKind::parse(kind).ok_or_else(|| EvalError::UnknownMethod(kind.to_string()))?;
        let mut spec = Self::new(kind, path);
        if let Some(l) = label {
            spec.label = l;
        }
        Ok(spec)
    }

    /// Builds a fresh controller; fails when a checkpoint is missing or unreadable.
    pub fn controller(&self) -> Result<Box<dyn Controller + Send>, EvalError> {
        let need = || {
            self.checkpoint
                .clone()
                .ok_or_else(|| EvalError::MissingCheckpoint(self.label.clone()))
        };
        Ok(match self.kind {
            MethodKind::Orca => Box::new(OrcaController::new(OrcaParams::default())),
            MethodKind::Sl => {
                let expert = ExpertPolicy::load(&need()?).map_err(|e| EvalError::Checkpoint(self.label.clone(), e.to_string()))?;
                Box::new(ExpertController { expert })
            }
            MethodKind::RlNoKd | MethodKind::Kd => {
                let policy = load_policy(&need()?).map_err(|e| EvalError::Checkpoint(self.label.clone(), e.to_string()))?;
                Box::new(PolicyController::new(policy))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub kinds: Vec<ScenarioKind>,
    pub agent_counts: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub scenario: ScenarioConfig,
    pub agent: AgentParams,
    pub episode: EpisodeConfig,
    pub energy: EnergyModel,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            kinds: ScenarioKind::ALL.to_vec(),
            agent_counts: vec![20, 24],
            trials: 50,
            base_seed: 1000,
            scenario: ScenarioConfig::default(),
            agent: AgentParams::default(),
            episode: EpisodeConfig::default(),
            energy: EnergyModel::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.trials as u64).map(|i| self.base_seed + i).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    /// Population statistics; `None` for an empty sample.
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            n: xs.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub success: f64,
    /// Mean over arrived agents; absent when nobody arrived.
    pub extra_distance: Option<f64>,
    /// Mean over all agents.
    pub energy_efficiency: f64,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub kind: ScenarioKind,
    pub n_agents: usize,
    /// Why the cell could not be run; every statistic is absent then.
    pub unavailable: Option<String>,
    pub success: Option<MeanStd>,
    pub extra_distance: Option<MeanStd>,
    pub energy_efficiency: Option<MeanStd>,
    pub trials: Vec<TrialResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub config: BenchmarkConfig,
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellResult>,
}

impl BenchmarkReport {
    pub fn cell(&self, method: &str, kind: ScenarioKind, n_agents: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.kind == kind && c.n_agents == n_agents)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let report: Self = serde_json::from_str(text).map_err(|e| EvalError::Report(e.to_string()))?;
        if report.schema_version != REPORT_SCHEMA {
            return Err(EvalError::Report(format!(
                "schema version {} is not {REPORT_SCHEMA}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// One block per metric, methods as rows and scenario cells as columns.
    pub fn table(&self) -> String {
        let cols: Vec<(ScenarioKind, usize)> = self
            .config
            .agent_counts
            .iter()
            .flat_map(|&n| self.config.kinds.iter().map(move |&k| (k, n)))
            .collect();
        let width = 13;
        let label_w = self.methods.iter().map(|m| m.label.len()).max().unwrap_or(6).max(6) + 2;
        let mut out = String::new();
        let metrics: [(&str, fn(&CellResult) -> Option<MeanStd>); 3] = [
            ("success rate", |c| c.success),
            ("extra distance (m)", |c| c.extra_distance),
            ("energy efficiency", |c| c.energy_efficiency),
        ];
        for (name, get) in metrics {
            let _ = writeln!(out, "{name}");
            let _ = write!(out, "{:label_w$}", "method");
            for (k, n) in &cols {
                let _ = write!(out, "{:>width$}", format!("{n}-{}", k.name()));
            }
            out.push('\n');
            for m in &self.methods {
                let _ = write!(out, "{:label_w$}", m.label);
                for &(k, n) in &cols {
                    let cell = match self.cell(&m.label, k, n) {
                        Some(c) if c.unavailable.is_some() => "n/a".to_string(),
                        Some(c) => get(c)
                            .map(|s| format!("{:.2}±{:.2}", s.mean, s.std))
                            .unwrap_or_else(|| "-".into()),
                        None => "-".into(),
                    };
                    let _ = write!(out, "{cell:>width$}");
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Runs one seeded episode of a cell under a method.
pub fn run_trial(
    method: &MethodSpec,
    kind: ScenarioKind,
    n_agents: usize,
    seed: u64,
    cfg: &BenchmarkConfig,
) -> Result<EpisodeTrace, EvalError> {
    let spec = generate_scenario(kind, n_agents, seed, &cfg.scenario)?;
    let mut agent = cfg.agent;
    if let Some(v) = method.v_max {
        agent.v_max = v;
        agent.v_pref = agent.v_pref.min(v);
    }
    let world = World::from_scenario(&spec, agent, cfg.episode.clone())?;
    let mut ctl = method.controller()?;
    Ok(run_episode(world, &mut *ctl))
}

pub fn summarize_trial(trace: &EpisodeTrace, seed: u64, energy: &EnergyModel) -> TrialResult {
    let extras: Vec<f64> = (0..trace.agents.len()).filter_map(|i| extra_distance(trace, i)).collect();
    let eff: f64 = (0..trace.agents.len())
        .map(|i| energy_efficiency(trace, i, energy))
        .sum::<f64>()
        / trace.agents.len().max(1) as f64;
    TrialResult {
        seed,
        success: success_rate(trace),
        extra_distance: MeanStd::of(&extras).map(|s| s.mean),
        energy_efficiency: eff,
        steps: trace.steps,
    }
}

pub fn run_cell(method: &MethodSpec, kind: ScenarioKind, n_agents: usize, cfg: &BenchmarkConfig) -> CellResult {
    let mut cell = CellResult {
        method: method.label.clone(),
        kind,
        n_agents,
        unavailable: None,
        success: None,
        extra_distance: None,
        energy_efficiency: None,
        trials: Vec::new(),
    };
    if let Err(e) = method.controller() {
        log::warn!("{}: {e}", method.label);
        cell.unavailable = Some(e.to_string());
        return cell;
    }
    let trials: Result<Vec<TrialResult>, EvalError> = cfg
        .seeds()
        .par_iter()
        .map(|&seed| run_trial(method, kind, n_agents, seed, cfg).map(|t| summarize_trial(&t, seed, &cfg.energy)))
        .collect();
    match trials {
        Ok(trials) => {
            let col = |f: &dyn Fn(&TrialResult) -> Option<f64>| trials.iter().filter_map(f).collect::<Vec<f64>>();
            cell.success = MeanStd::of(&col(&|t| Some(t.success)));
            cell.extra_distance = MeanStd::of(&col(&|t| t.extra_distance));
            cell.energy_efficiency = MeanStd::of(&col(&|t| Some(t.energy_efficiency)));
            cell.trials = trials;
        }
        Err(e) => cell.unavailable = Some(e.to_string()),
    }
    cell
}

/// Every method on every (kind, agent count) cell with one shared seed list.
pub fn run_benchmark(methods: &[MethodSpec], cfg: &BenchmarkConfig) -> BenchmarkReport {
    let mut cells = Vec::new();
    for m in methods {
        for &n in &cfg.agent_counts {
            for &k in &cfg.kinds {
                log::info!("benchmark {} {}-{}", m.label, n, k.name());
                cells.push(run_cell(m, k, n, cfg));
            }
        }
    }
    BenchmarkReport {
        schema_version: REPORT_SCHEMA,
        config: cfg.clone(),
        methods: methods.to_vec(),
        seeds: cfg.seeds(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchmarkConfig {
        BenchmarkConfig {
            kinds: vec![ScenarioKind::Corridor],
            agent_counts: vec![6],
            trials: 3,
            ..BenchmarkConfig::default()
        }
    }

    #[test]
    fn method_spec_parsing() {
        let m = MethodSpec::parse("best:kd=/tmp/p.json").unwrap();
        assert_eq!(m.label, "best");
        assert_eq!(m.kind, MethodKind::Kd);
        assert_eq!(m.checkpoint, Some(PathBuf::from("/tmp/p.json")));
        assert_eq!(MethodSpec::parse("rl_no_kd=x").unwrap().v_max, Some(1.3));
        assert!(matches!(MethodSpec::parse("magic"), Err(EvalError::UnknownMethod(_))));
    }

    #[test]
    fn orca_report_is_reproducible_and_round_trips() {
        let methods = [MethodSpec::new(MethodKind::Orca, None)];
        let a = run_benchmark(&methods, &small());
        let b = run_benchmark(&methods, &small());
        assert_eq!(a, b);
        assert_eq!(BenchmarkReport::from_json(&a.to_json()).unwrap(), a);
        let c = a.cell("orca", ScenarioKind::Corridor, 6).unwrap();
        assert_eq!(c.trials.len(), 3);
        assert!(c.success.unwrap().mean > 0.5);
    }

    #[test]
    fn missing_checkpoint_marks_cell_unavailable() {
        let methods = [
            MethodSpec::new(MethodKind::Orca, None),
            MethodSpec::new(MethodKind::Kd, Some(PathBuf::from("/nonexistent/policy.json"))),
        ];
        let r = run_benchmark(&methods, &small());
        assert!(r.cell("kd", ScenarioKind::Corridor, 6).unwrap().unavailable.is_some());
        assert!(r.cell("orca", ScenarioKind::Corridor, 6).unwrap().unavailable.is_none());
        assert!(r.table().contains("n/a"));
    }

    #[test]
    fn mean_std_is_population() {
        let s = MeanStd::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (2.0, 1.0, 2));
        assert_eq!(MeanStd::of(&[]), None);
    }
}
