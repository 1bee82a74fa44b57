use serde::{Deserialize, Serialize};

use crate::geom::{Vec2, DEGENERATE_DIST};
use crate::sim::AgentStatus;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub r_arrival: f64,
    pub r_collision: f64,
    /// Weight of the expert-matching term.
    pub w_e: f64,
    /// Weight of the goal-velocity term.
    pub w_v: f64,
    /// Exponent scale of the expert term, 1/(m/s). Negative values make the
    /// reward decay with the error.
    pub sigma_e: f64,
    pub sigma_v: f64,
    pub v_pref: f64,
    /// Weight of a reward on the per-step reduction of goal distance. Zero
    /// for the distillation reward.
    pub w_progress: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            r_arrival: 1.0,
            r_collision: -0.25,
            w_e: 0.02,
            w_v: 0.08,
            sigma_e: -0.85,
            sigma_v: -0.85,
            v_pref: 1.3,
            w_progress: 0.0,
        }
    }
}

impl RewardConfig {
    /// Goal-progress reward of the plain reinforcement-learning baseline.
    pub fn progress_baseline() -> Self {
        Self {
            r_arrival: 15.0,
            r_collision: -15.0,
            w_e: 0.0,
            w_v: 0.0,
            w_progress: 2.5,
            ..Self::default()
        }
    }

    pub fn uses_experts(&self) -> bool {
        self.w_e != 0.0
    }
}

/// What happened to one agent over one control step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub status: AgentStatus,
    pub position_before: Vec2,
    pub position_after: Vec2,
    pub velocity_after: Vec2,
    pub goal: Vec2,
}

/// Velocity of magnitude `v_pref` pointing from `p` to `g`.
pub fn goal_velocity(p: Vec2, g: Vec2, v_pref: f64) -> Vec2 {
    let d = g - p;
    let n = d.norm();
    if n < DEGENERATE_DIST {
        Vec2::ZERO
    } else {
        d * (v_pref / n)
    }
}

/// Mean distance between the policy action and each expert's action, all
/// in the same frame.
pub fn behavior_error(action: Vec2, expert_actions: &[Vec2]) -> f64 {
    if expert_actions.is_empty() {
        return 0.0;
    }
    expert_actions.iter().map(|e| (action - *e).norm()).sum::<f64>() / expert_actions.len() as f64
}

/// Reward for one transition. `action` is the policy output expressed in
/// the experts' frame; `expert_actions` may be empty when `w_e` is zero.
pub fn compute_reward(outcome: &StepOutcome, action: Vec2, expert_actions: &[Vec2], cfg: &RewardConfig) -> f64 {
    match outcome.status {
        AgentStatus::Arrived => cfg.r_arrival,
        AgentStatus::Collided => cfg.r_collision,
        AgentStatus::Active => {
            let mut r = 0.0;
            if cfg.w_e != 0.0 {
                r += cfg.w_e * (cfg.sigma_e * behavior_error(action, expert_actions)).exp();
            }
            if cfg.w_v != 0.0 {
                let v_star = goal_velocity(outcome.position_before, outcome.goal, cfg.v_pref);
                r += cfg.w_v * (cfg.sigma_v * (outcome.velocity_after - v_star).norm()).exp();
            }
            if cfg.w_progress != 0.0 {
                let progress =
                    (outcome.goal - outcome.position_before).norm() - (outcome.goal - outcome.position_after).norm();
                r += cfg.w_progress * progress;
            }
            r
        }
    }
}
