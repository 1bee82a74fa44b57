use serde::{Deserialize, Serialize};

use super::observation::Observation;
use super::scenario::ScenarioSpec;
use super::trace::{AgentSummary, EpisodeTrace, TraceRow};
use super::SimError;
use crate::geom::{clamp_speed, Vec2, DEGENERATE_DIST};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentStatus {
    Active,
    Arrived,
    Collided,
}

impl AgentStatus {
    pub fn code(self) -> &'static str {
        match self {
            AgentStatus::Active => "active",
            AgentStatus::Arrived => "arrived",
            AgentStatus::Collided => "collided",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "active" => Some(AgentStatus::Active),
            "arrived" => Some(AgentStatus::Arrived),
            "collided" => Some(AgentStatus::Collided),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    pub goal: Vec2,
    pub radius: f64,
    pub v_max: f64,
    pub v_pref: f64,
    pub status: AgentStatus,
}

impl AgentState {
    pub fn is_active(&self) -> bool {
        self.status == AgentStatus::Active
    }
}

/// Per-agent physical parameters shared by every agent of a world.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentParams {
    pub radius: f64,
    pub v_pref: f64,
    pub v_max: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            radius: 0.1,
            v_pref: 1.3,
            v_max: 2.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub dt_sim: f64,
    /// Physics substeps per control step.
    pub control_substeps: u32,
    pub time_limit: f64,
    pub sense_radius: f64,
    /// `None` uses the agent radius.
    pub arrival_threshold: Option<f64>,
    /// `None` uses the sum of the two radii.
    pub collision_distance: Option<f64>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            dt_sim: 0.04,
            control_substeps: 3,
            time_limit: 120.0,
            sense_radius: 4.0,
            arrival_threshold: None,
            collision_distance: None,
        }
    }
}

impl EpisodeConfig {
    pub fn dt_control(&self) -> f64 {
        self.dt_sim * self.control_substeps as f64
    }

    /// Number of control steps that fit in the time limit.
    pub fn max_steps(&self) -> u64 {
        (self.time_limit / self.dt_control() - 1e-9).ceil().max(1.0) as u64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.dt_sim > 0.0) {
            return bad("dt_sim must be positive");
        }
        if self.control_substeps == 0 {
            return bad("control_substeps must be at least 1");
        }
        if !(self.time_limit > 0.0) {
            return bad("time_limit must be positive");
        }
        if !(self.sense_radius >= 0.0) {
            return bad("sense_radius must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StatusChange {
    pub agent: usize,
    pub status: AgentStatus,
    /// Physics substep (0-based, within the control step) that triggered it.
    pub substep: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub changes: Vec<StatusChange>,
    /// Simulated time after the step, seconds.
    pub time: f64,
    pub done: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Census {
    pub active: usize,
    pub arrived: usize,
    pub collided: usize,
}

impl Census {
    pub fn total(&self) -> usize {
        self.active + self.arrived + self.collided
    }
}

/// The mutable simulation state of one episode.
#[derive(Clone, Debug)]
pub struct World {
    pub agents: Vec<AgentState>,
    pub config: EpisodeConfig,
    steps: u64,
}

impl World {
    pub fn new(agents: Vec<AgentState>, config: EpisodeConfig) -> Result<Self, SimError> {
        config.validate()?;
        Ok(Self {
            agents,
            config,
            steps: 0,
        })
    }

    pub fn from_scenario(
        spec: &ScenarioSpec,
        params: AgentParams,
        config: EpisodeConfig,
    ) -> Result<Self, SimError> {
        if params.radius <= 0.0 || params.v_pref > params.v_max {
            return Err(SimError::InvalidConfig(
                "agents need a positive radius and v_pref <= v_max".into(),
            ));
        }
        let agents = spec
            .starts()
            .into_iter()
            .zip(spec.goals())
            .enumerate()
            .map(|(id, (start, goal))| AgentState {
                id,
                position: start,
                velocity: Vec2::ZERO,
                goal,
                radius: params.radius,
                v_max: params.v_max,
                v_pref: params.v_pref,
                status: AgentStatus::Active,
            })
            .collect();
        Self::new(agents, config)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.config.dt_control()
    }

    pub fn active_ids(&self) -> Vec<usize> {
        self.agents
            .iter()
            .filter(|a| a.is_active())
            .map(|a| a.id)
            .collect()
    }

    pub fn census(&self) -> Census {
        let mut c = Census::default();
        for a in &self.agents {
            match a.status {
                AgentStatus::Active => c.active += 1,
                AgentStatus::Arrived => c.arrived += 1,
                AgentStatus::Collided => c.collided += 1,
            }
        }
        c
    }

    pub fn is_done(&self) -> bool {
        self.steps >= self.config.max_steps() || self.agents.iter().all(|a| !a.is_active())
    }

    fn arrival_threshold(&self, agent: &AgentState) -> f64 {
        self.config.arrival_threshold.unwrap_or(agent.radius)
    }

    fn contact_distance(&self, a: &AgentState, b: &AgentState) -> f64 {
        self.config
            .collision_distance
            .unwrap_or(a.radius + b.radius)
    }

    /// Agents other than `agent` that still occupy space (active or collided).
    pub fn present_neighbors(&self, agent: usize) -> impl Iterator<Item = &AgentState> + '_ {
        self.agents
            .iter()
            .filter(move |a| a.id != agent && a.status != AgentStatus::Arrived)
    }

    pub fn observe(&self, agent: usize, aligned: bool) -> Observation {
        let me = &self.agents[agent];
        Observation::build(
            me.position,
            me.velocity,
            me.goal,
            self.present_neighbors(agent)
                .map(|a| (a.position, a.velocity)),
            self.config.sense_radius,
            aligned,
        )
    }

    /// Advances one control step. `actions[i]` is the commanded velocity of
    /// agent `i`; entries of inactive agents are ignored.
    pub fn step(&mut self, actions: &[Vec2]) -> StepResult {
        assert_eq!(
            actions.len(),
            self.agents.len(),
            "one action slot per agent"
        );
        for (agent, action) in self.agents.iter_mut().zip(actions) {
            if agent.is_active() {
                agent.velocity = clamp_speed(*action, agent.v_max);
            }
        }
        let dt = self.config.dt_sim;
        let mut changes = Vec::new();
        let mut hit = Vec::new();
        for substep in 0..self.config.control_substeps {
            for agent in self.agents.iter_mut().filter(|a| a.is_active()) {
                agent.position += agent.velocity * dt;
            }
            // arrivals first: reaching the goal in the same substep as a contact wins
            for i in 0..self.agents.len() {
                let a = &self.agents[i];
                if a.is_active() && (a.goal - a.position).norm() <= self.arrival_threshold(a) {
                    let a = &mut self.agents[i];
                    a.status = AgentStatus::Arrived;
                    a.velocity = Vec2::ZERO;
                    changes.push(StatusChange {
                        agent: i,
                        status: AgentStatus::Arrived,
                        substep,
                    });
                }
            }
            hit.clear();
            for (i, a) in self.agents.iter().enumerate() {
                if !a.is_active() {
                    continue;
                }
                let collides = self.agents.iter().enumerate().any(|(j, b)| {
                    j != i
                        && b.status != AgentStatus::Arrived
                        && (b.position - a.position).norm() <= self.contact_distance(a, b)
                });
                if collides {
                    hit.push(i);
                }
            }
            for &i in &hit {
                let a = &mut self.agents[i];
                a.status = AgentStatus::Collided;
                a.velocity = Vec2::ZERO;
                changes.push(StatusChange {
                    agent: i,
                    status: AgentStatus::Collided,
                    substep,
                });
            }
        }
        self.steps += 1;
        StepResult {
            changes,
            time: self.time(),
            done: self.is_done(),
        }
    }
}

/// Decides velocity commands for a set of active agents.
pub trait Controller {
    /// Returns one command per entry of `agents`, in the same order.
    fn actions(&mut self, world: &World, agents: &[usize]) -> Vec<Vec2>;
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn actions(&mut self, world: &World, agents: &[usize]) -> Vec<Vec2> {
        (**self).actions(world, agents)
    }
}

impl<C: Controller + ?Sized> Controller for &mut C {
    fn actions(&mut self, world: &World, agents: &[usize]) -> Vec<Vec2> {
        (**self).actions(world, agents)
    }
}

/// Adapts a per-agent closure into a [`Controller`].
pub struct FnController<F>(pub F);

impl<F: FnMut(&World, usize) -> Vec2> Controller for FnController<F> {
    fn actions(&mut self, world: &World, agents: &[usize]) -> Vec<Vec2> {
        agents.iter().map(|&i| (self.0)(world, i)).collect()
    }
}

/// Routes each agent to its own controller.
pub struct PerAgent(pub Vec<Box<dyn Controller>>);

impl Controller for PerAgent {
    fn actions(&mut self, world: &World, agents: &[usize]) -> Vec<Vec2> {
        agents
            .iter()
            .map(|&i| self.0[i].actions(world, &[i])[0])
            .collect()
    }
}

pub struct ZeroVelocity;

impl Controller for ZeroVelocity {
    fn actions(&mut self, _world: &World, agents: &[usize]) -> Vec<Vec2> {
        vec![Vec2::ZERO; agents.len()]
    }
}

/// Heads straight for the goal at the preferred speed, ignoring everyone.
pub struct StraightLine;

impl Controller for StraightLine {
    fn actions(&mut self, world: &World, agents: &[usize]) -> Vec<Vec2> {
        agents
            .iter()
            .map(|&i| {
                let a = &world.agents[i];
                let d = a.goal - a.position;
                if d.norm() < DEGENERATE_DIST {
                    Vec2::ZERO
                } else {
                    d.normalized() * a.v_pref
                }
            })
            .collect()
    }
}

/// Runs `world` to termination under `controller` and records the trace.
pub fn run_episode(mut world: World, controller: &mut dyn Controller) -> EpisodeTrace {
    let dt_control = world.config.dt_control();
    let mut agents: Vec<AgentSummary> = world
        .agents
        .iter()
        .map(|a| AgentSummary {
            id: a.id,
            start: a.position,
            goal: a.goal,
            radius: a.radius,
            v_max: a.v_max,
            final_position: a.position,
            status: a.status,
            end_step: None,
        })
        .collect();
    let mut rows = Vec::new();
    let mut full = vec![Vec2::ZERO; world.agents.len()];
    while !world.is_done() {
        let active = world.active_ids();
        let acts = controller.actions(&world, &active);
        debug_assert_eq!(acts.len(), active.len());
        for (&i, &a) in active.iter().zip(&acts) {
            full[i] = a;
        }
        let step = world.steps();
        let t = world.time();
        let before: Vec<(Vec2, Vec2)> = active
            .iter()
            .map(|&i| (world.agents[i].position, world.agents[i].velocity))
            .collect();
        let result = world.step(&full);
        for (k, &i) in active.iter().enumerate() {
            rows.push(TraceRow {
                step,
                agent: i,
                t,
                position: before[k].0,
                velocity: before[k].1,
                action: full[i],
                status: world.agents[i].status,
            });
        }
        for change in result.changes {
            agents[change.agent].end_step = Some(step);
        }
    }
    for (summary, a) in agents.iter_mut().zip(&world.agents) {
        summary.final_position = a.position;
        summary.status = a.status;
    }
    EpisodeTrace {
        dt_control,
        steps: world.steps(),
        agents,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_scenario, ScenarioConfig, ScenarioKind};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn agent(id: usize, p: Vec2, g: Vec2) -> AgentState {
        AgentState {
            id,
            position: p,
            velocity: Vec2::ZERO,
            goal: g,
            radius: 0.1,
            v_max: 2.5,
            v_pref: 1.3,
            status: AgentStatus::Active,
        }
    }

    #[test]
    fn one_control_step_moves_by_v_dt() {
        let mut w = World::new(
            vec![agent(0, Vec2::ZERO, Vec2::new(10.0, 0.0))],
            EpisodeConfig::default(),
        )
        .unwrap();
        w.step(&[Vec2::new(1.3, 0.0)]);
        assert_abs_diff_eq!(w.agents[0].position.x, 0.156, epsilon = 1e-12);
        assert_abs_diff_eq!(w.time(), 0.12, epsilon = 1e-12);
    }

    #[test]
    fn close_pair_collides_immediately() {
        let mut w = World::new(
            vec![
                agent(0, Vec2::ZERO, Vec2::new(10.0, 0.0)),
                agent(1, Vec2::new(0.19, 0.0), Vec2::new(-10.0, 0.0)),
            ],
            EpisodeConfig::default(),
        )
        .unwrap();
        let r = w.step(&[Vec2::ZERO, Vec2::ZERO]);
        assert_eq!(w.census().collided, 2);
        assert!(r.changes.iter().all(|c| c.substep == 0));
    }

    #[test]
    fn arrival_removes_agent_from_neighborhoods() {
        let mut w = World::new(
            vec![
                agent(0, Vec2::new(0.09, 0.0), Vec2::ZERO),
                agent(1, Vec2::new(1.0, 0.0), Vec2::new(5.0, 0.0)),
            ],
            EpisodeConfig::default(),
        )
        .unwrap();
        assert_eq!(w.observe(1, false).neighbors.len(), 2);
        w.step(&[Vec2::ZERO, Vec2::ZERO]);
        assert_eq!(w.agents[0].status, AgentStatus::Arrived);
        assert_eq!(w.observe(1, false).neighbors.len(), 1);
    }

    #[test]
    fn active_hitting_frozen_agent_is_marked_alone() {
        let mut a = agent(0, Vec2::ZERO, Vec2::new(10.0, 0.0));
        a.status = AgentStatus::Collided;
        let b = agent(1, Vec2::new(0.3, 0.0), Vec2::new(-10.0, 0.0));
        let mut w = World::new(vec![a, b], EpisodeConfig::default()).unwrap();
        w.step(&[Vec2::ZERO, Vec2::new(-1.0, 0.0)]);
        assert_eq!(w.agents[1].status, AgentStatus::Collided);
        assert_eq!(w.agents[0].position, Vec2::ZERO);
        // it stopped at the substep of contact (third substep, 0.18 m)
        assert_abs_diff_eq!(w.agents[1].position.x, 0.18, epsilon = 1e-12);
    }

    #[test]
    fn arrival_beats_simultaneous_contact() {
        // agent 0 reaches its goal in the same substep it touches agent 1
        let a = agent(0, Vec2::ZERO, Vec2::new(0.12, 0.0));
        let b = agent(1, Vec2::new(0.22, 0.0), Vec2::new(5.0, 0.0));
        let mut w = World::new(vec![a, b], EpisodeConfig::default()).unwrap();
        w.step(&[Vec2::new(1.0, 0.0), Vec2::ZERO]);
        assert_eq!(w.agents[0].status, AgentStatus::Arrived);
        assert_eq!(w.agents[1].status, AgentStatus::Active);
    }

    #[test]
    fn straight_line_single_agent_arrives() {
        let spec = ScenarioSpec::from_positions(
            ScenarioKind::Circle,
            0,
            crate::sim::Geometry::Circle { radius: 5.0 },
            &[Vec2::ZERO],
            &[Vec2::new(10.0, 0.0)],
        );
        let w =
            World::from_scenario(&spec, AgentParams::default(), EpisodeConfig::default()).unwrap();
        let trace = run_episode(w, &mut StraightLine);
        assert_eq!(trace.agents[0].status, AgentStatus::Arrived);
        let t = trace.duration();
        // 9.9 m at 1.3 m/s is 7.615 s; the episode ends on a control-step boundary
        assert!(t >= 9.9 / 1.3 && t <= 9.9 / 1.3 + 0.12 + 1e-9, "t = {t}");
        assert_abs_diff_eq!(t, 7.68, epsilon = 1e-9);
    }

    #[test]
    fn zero_policy_runs_to_time_limit() {
        let spec =
            generate_scenario(ScenarioKind::Circle, 8, 1, &ScenarioConfig::default()).unwrap();
        let w =
            World::from_scenario(&spec, AgentParams::default(), EpisodeConfig::default()).unwrap();
        let trace = run_episode(w, &mut ZeroVelocity);
        assert_eq!(trace.steps, 1000);
        assert_abs_diff_eq!(trace.duration(), 120.0, epsilon = 1e-9);
        assert!(trace.agents.iter().all(|a| a.status == AgentStatus::Active));
    }

    #[test]
    fn per_agent_routing() {
        let spec = ScenarioSpec::head_on(4.0);
        let w =
            World::from_scenario(&spec, AgentParams::default(), EpisodeConfig::default()).unwrap();
        let mut c = PerAgent(vec![Box::new(StraightLine), Box::new(ZeroVelocity)]);
        let trace = run_episode(w, &mut c);
        // the mover walks into the stationary one
        assert_eq!(trace.agents[0].status, AgentStatus::Collided);
        assert_eq!(trace.agents[1].status, AgentStatus::Collided);
    }

    #[test]
    fn random_walk_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec =
            generate_scenario(ScenarioKind::Circle, 20, 3, &ScenarioConfig::default()).unwrap();
        let mut w =
            World::from_scenario(&spec, AgentParams::default(), EpisodeConfig::default()).unwrap();
        let n = w.agents.len();
        while !w.is_done() {
            let before = w.agents.clone();
            let acts: Vec<Vec2> = (0..n)
                .map(|_| Vec2::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)))
                .collect();
            w.step(&acts);
            assert_eq!(w.census().total(), n);
            for (b, a) in before.iter().zip(&w.agents) {
                if b.status == AgentStatus::Collided {
                    assert_eq!(b.position, a.position);
                }
                assert!(
                    (a.position - b.position).norm() <= a.v_max * w.config.dt_control() + 1e-12
                );
                if b.status != AgentStatus::Active {
                    assert_eq!(a.status, b.status);
                }
            }
        }
    }
}
