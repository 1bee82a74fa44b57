//! Disk-agent crowd world: scenario generation, local observations, and the
//! fixed-substep episode loop.

mod observation;
mod scenario;
mod trace;
mod world;

pub use observation::{GoalRep, NeighborRecord, Observation};
pub use scenario::{
    generate_scenario, Geometry, Orientation, ScenarioConfig, ScenarioKind, ScenarioSpec,
};
pub use trace::{AgentSummary, EpisodeTrace, TraceRow};
pub use world::{
    run_episode, AgentParams, AgentState, AgentStatus, Census, Controller, EpisodeConfig,
    FnController, PerAgent, StatusChange, StepResult, StraightLine, World, ZeroVelocity,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("could not place {n_agents} agents with {min_separation} m separation after {attempts} attempts")]
    Overcrowded {
        n_agents: usize,
        min_separation: f64,
        attempts: usize,
    },
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("trace parse error at line {line}: {msg}")]
    TraceParse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
