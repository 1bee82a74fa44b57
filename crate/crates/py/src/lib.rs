use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use kdnav::eval::{self, BenchmarkConfig, MethodSpec};
use kdnav::geom::Vec2;
use kdnav::orca::{compute_orca_velocity, OrcaParams};
use kdnav::rl::{self, RewardConfig, StepOutcome};
use kdnav::sim::{self, AgentState, AgentStatus, ScenarioConfig, ScenarioKind};

type P = (f64, f64);

fn v(p: P) -> Vec2 {
    Vec2::new(p.0, p.1)
}

fn kind(s: &str) -> PyResult<ScenarioKind> {
    ScenarioKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| PyValueError::new_err(format!("unknown scenario kind `{s}`")))
}

fn agent(id: usize, p: P, vel: P, radius: f64, v_max: f64) -> AgentState {
    AgentState {
        id,
        position: v(p),
        velocity: v(vel),
        goal: v(p),
        radius,
        v_max,
        v_pref: 1.3f64.min(v_max),
        status: AgentStatus::Active,
    }
}

/// ORCA velocity of one agent; `neighbors` holds `(position, velocity)` pairs.
#[pyfunction]
#[pyo3(signature = (position, velocity, goal, neighbors, radius=0.1, v_max=2.5))]
fn orca_velocity(position: P, velocity: P, goal: P, neighbors: Vec<(P, P)>, radius: f64, v_max: f64) -> P {
    let mut me = agent(0, position, velocity, radius, v_max);
    me.goal = v(goal);
    let others: Vec<AgentState> = neighbors
        .iter()
        .enumerate()
        .map(|(i, &(p, vel))| agent(i + 1, p, vel, radius, v_max))
        .collect();
    let refs: Vec<&AgentState> = others.iter().collect();
    let out = compute_orca_velocity(&me, &refs, &OrcaParams::default());
    (out.x, out.y)
}

/// Reward of one non-terminal transition under the default weights.
#[pyfunction]
fn step_reward(position_before: P, position_after: P, velocity_after: P, goal: P, action: P, expert_actions: Vec<P>) -> f64 {
    let outcome = StepOutcome {
        status: AgentStatus::Active,
        position_before: v(position_before),
        position_after: v(position_after),
        velocity_after: v(velocity_after),
        goal: v(goal),
    };
    let experts: Vec<Vec2> = expert_actions.into_iter().map(v).collect();
    rl::compute_reward(&outcome, v(action), &experts, &RewardConfig::default())
}

#[pyfunction]
fn gae(rewards: Vec<f64>, values: Vec<f64>, dones: Vec<bool>, gamma: f64, lam: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    rl::gae(&rewards, &values, &dones, gamma, lam).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// `[(start, goal), ...]` of a generated scenario.
#[pyfunction]
fn generate_scenario(kind_name: &str, n_agents: usize, seed: u64) -> PyResult<Vec<(P, P)>> {
    let spec = sim::generate_scenario(kind(kind_name)?, n_agents, seed, &ScenarioConfig::default())
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(spec
        .starts()
        .into_iter()
        .zip(spec.goals())
        .map(|(s, g)| ((s.x, s.y), (g.x, g.y)))
        .collect())
}

/// Runs one benchmark trial; returns a JSON object with success, extra
/// distance, energy efficiency and step count.
#[pyfunction]
#[pyo3(signature = (method, kind_name, n_agents, seed))]
fn simulate(method: &str, kind_name: &str, n_agents: usize, seed: u64) -> PyResult<String> {
    let m = MethodSpec::parse(method).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let cfg = BenchmarkConfig::default();
    let trace = eval::run_trial(&m, kind(kind_name)?, n_agents, seed, &cfg).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let r = eval::summarize_trial(&trace, seed, &cfg.energy);
    Ok(serde_json::to_string(&r).expect("trial result serializes"))
}

/// Benchmark report as JSON.
#[pyfunction]
#[pyo3(signature = (methods, kinds, agent_counts, trials, base_seed=1000))]
fn benchmark(methods: Vec<String>, kinds: Vec<String>, agent_counts: Vec<usize>, trials: usize, base_seed: u64) -> PyResult<String> {
    let specs = methods
        .iter()
        .map(|s| MethodSpec::parse(s).map_err(|e| PyValueError::new_err(e.to_string())))
        .collect::<PyResult<Vec<_>>>()?;
    let cfg = BenchmarkConfig {
        kinds: kinds.iter().map(|k| kind(k)).collect::<PyResult<_>>()?,
        agent_counts,
        trials,
        base_seed,
        ..BenchmarkConfig::default()
    };
    Ok(eval::run_benchmark(&specs, &cfg).to_json())
}

#[pymodule]
#[pyo3(name = "kdnav")]
fn kdnav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(orca_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(step_reward, m)?)?;
    m.add_function(wrap_pyfunction!(gae, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    Ok(())
}
