use serde::{Deserialize, Serialize};

use crate::geom::{clamp_speed, Vec2};
use crate::sim::{AgentStatus, EpisodeTrace};

/// Locomotion energy rate `e_s + e_w |v|^2`; the energy per meter is
/// smallest at speed `sqrt(e_s / e_w)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyModel {
    pub e_s: f64,
    pub e_w: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self { e_s: 2.23, e_w: 1.26 }
    }
}

impl EnergyModel {
    pub fn optimal_speed(&self) -> f64 {
        (self.e_s / self.e_w).sqrt()
    }
}

pub fn success_rate(trace: &EpisodeTrace) -> f64 {
    if trace.agents.is_empty() {
        return 0.0;
    }
    let arrived = trace.agents.iter().filter(|a| a.status == AgentStatus::Arrived).count();
    arrived as f64 / trace.agents.len() as f64
}

/// Path length at control resolution minus the straight start-to-goal
/// distance. `None` unless the agent arrived.
pub fn extra_distance(trace: &EpisodeTrace, agent: usize) -> Option<f64> {
    let a = trace.agents.get(agent)?;
    if a.status != AgentStatus::Arrived {
        return None;
    }
    let path = trace.path(agent);
    let length: f64 = path.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    Some(length - (a.goal - a.start).norm())
}

/// Mean over the agent's control steps of goal progress per unit energy.
/// The velocity of a step is the commanded action after the speed limit.
pub fn energy_efficiency(trace: &EpisodeTrace, agent: usize, model: &EnergyModel) -> f64 {
    let Some(a) = trace.agents.get(agent) else {
        return 0.0;
    };
    let path = trace.path(agent);
    let rows: Vec<_> = trace.agent_rows(agent).collect();
    if rows.is_empty() {
        return 0.0;
    }
    let dt = trace.dt_control;
    let total: f64 = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let v = clamp_speed(r.action, a.v_max);
            let progress = (a.goal - path[k]).norm() - (a.goal - path[k + 1]).norm();
            progress / ((model.e_s + model.e_w * v.norm_sq()) * dt)
        })
        .sum();
    total / rows.len() as f64
}

/// Per-step speeds `|p_{k+1} - p_k| / dt` of every agent.
pub fn step_speeds(trace: &EpisodeTrace) -> Vec<f64> {
    let mut out = Vec::new();
    for a in &trace.agents {
        let path = trace.path(a.id);
        out.extend(path.windows(2).map(|w| (w[1] - w[0]).norm() / trace.dt_control));
    }
    out
}

/// Absolute heading changes in radians between consecutive moving steps.
pub fn turning_angles(trace: &EpisodeTrace) -> Vec<f64> {
    let mut out = Vec::new();
    for a in &trace.agents {
        let path = trace.path(a.id);
        let moves: Vec<Vec2> = path
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| d.norm() > 1e-9)
            .collect();
        out.extend(moves.windows(2).map(|m| m[0].det(m[1]).atan2(m[0].dot(m[1])).abs()));
    }
    out
}
