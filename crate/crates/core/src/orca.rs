//! Optimal Reciprocal Collision Avoidance baseline.
//!
//! The half-plane construction and the incremental linear programs follow
//! the RVO2 library (van den Berg et al.), restricted to agent-agent
//! constraints: there are no static polygon obstacles in this world.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::sim::{AgentState, AgentStatus, Controller, World};

const LP_EPSILON: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrcaParams {
    /// Velocity-obstacle truncation horizon, seconds.
    pub time_horizon: f64,
    /// Fractional inflation of the combined radius.
    pub radius_buffer: f64,
    pub neighbor_dist: f64,
    /// `None` uses each agent's own speed limit.
    pub max_speed: Option<f64>,
    /// Step used for the cut-off when agents already overlap.
    pub time_step: f64,
    /// Magnitude of uniform noise added to the preferred velocity. Zero
    /// keeps perfectly symmetric encounters symmetric.
    pub jitter: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        Self {
            time_horizon: 2.0,
            radius_buffer: 0.2,
            neighbor_dist: 4.0,
            max_speed: None,
            time_step: 0.12,
            jitter: 0.0,
        }
    }
}

/// Half-plane `{v : det(direction, v - point) >= 0}`: the permitted side is
/// to the left of `direction`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrcaLine {
    pub point: Vec2,
    pub direction: Vec2,
}

impl OrcaLine {
    fn violation(&self, v: Vec2) -> f64 {
        self.direction.det(self.point - v)
    }
}

/// The velocity an agent should take, given the agents around it.
pub fn compute_orca_velocity(
    me: &AgentState,
    neighbors: &[&AgentState],
    params: &OrcaParams,
) -> Vec2 {
    compute_orca_velocity_with_preferred(me, neighbors, params, preferred_velocity(me))
}

pub fn preferred_velocity(me: &AgentState) -> Vec2 {
    (me.goal - me.position).normalized() * me.v_pref
}

pub fn compute_orca_velocity_with_preferred(
    me: &AgentState,
    neighbors: &[&AgentState],
    params: &OrcaParams,
    preferred: Vec2,
) -> Vec2 {
    let max_speed = params.max_speed.unwrap_or(me.v_max);
    let lines = orca_lines(me, neighbors, params);
    let (v, feasible) = solve_lp2(&lines, preferred, max_speed);
    if feasible < lines.len() {
        solve_lp3(&lines, feasible, max_speed, v)
    } else {
        v
    }
}

/// Builds one constraint per neighbor within range, nearest first. Ties on
/// distance are broken by position so the result does not depend on the
/// order neighbors were supplied in.
pub fn orca_lines(
    me: &AgentState,
    neighbors: &[&AgentState],
    params: &OrcaParams,
) -> Vec<OrcaLine> {
    let mut near: Vec<(f64, &AgentState)> = neighbors
        .iter()
        .filter(|o| o.status != AgentStatus::Arrived)
        .map(|o| ((o.position - me.position).norm_sq(), *o))
        .filter(|(d2, _)| *d2 <= params.neighbor_dist * params.neighbor_dist)
        .collect();
    near.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.position.x.total_cmp(&b.1.position.x))
            .then(a.1.position.y.total_cmp(&b.1.position.y))
    });
    near.iter()
        .map(|(_, other)| {
            // frozen agents will not reciprocate
            let share = if other.status == AgentStatus::Collided {
                1.0
            } else {
                0.5
            };
            pair_line(me, other, params, share)
        })
        .collect()
}

fn pair_line(me: &AgentState, other: &AgentState, params: &OrcaParams, share: f64) -> OrcaLine {
    let inv_horizon = 1.0 / params.time_horizon;
    let rel_pos = other.position - me.position;
    let rel_vel = me.velocity - other.velocity;
    let dist_sq = rel_pos.norm_sq();
    let combined = (me.radius + other.radius) * (1.0 + params.radius_buffer);
    let combined_sq = combined * combined;

    let (direction, u) = if dist_sq > combined_sq {
        let w = rel_vel - rel_pos * inv_horizon;
        let w_len_sq = w.norm_sq();
        let dot1 = w.dot(rel_pos);
        if dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq {
            // project on the cut-off circle
            let w_len = w_len_sq.sqrt();
            let unit_w = w / w_len;
            (
                Vec2::new(unit_w.y, -unit_w.x),
                unit_w * (combined * inv_horizon - w_len),
            )
        } else {
            // project on the nearer leg
            let leg = (dist_sq - combined_sq).sqrt();
            let side = rel_pos.det(w);
            if side == 0.0 {
                // Both legs are equally near. Averaging them keeps only the
                // axial part of the correction, so a perfectly symmetric pair
                // brakes instead of picking a side.
                let right = -Vec2::new(
                    rel_pos.x * leg + rel_pos.y * combined,
                    -rel_pos.x * combined + rel_pos.y * leg,
                ) / dist_sq;
                let u_right = right * rel_vel.dot(right) - rel_vel;
                let n = -rel_pos.normalized();
                (Vec2::new(n.y, -n.x), n * u_right.dot(n))
            } else {
                let direction = if side > 0.0 {
                    Vec2::new(
                        rel_pos.x * leg - rel_pos.y * combined,
                        rel_pos.x * combined + rel_pos.y * leg,
                    ) / dist_sq
                } else {
                    -Vec2::new(
                        rel_pos.x * leg + rel_pos.y * combined,
                        -rel_pos.x * combined + rel_pos.y * leg,
                    ) / dist_sq
                };
                let dot2 = rel_vel.dot(direction);
                (direction, direction * dot2 - rel_vel)
            }
        }
    } else {
        // already overlapping: resolve within one step
        let inv_step = 1.0 / params.time_step;
        let w = rel_vel - rel_pos * inv_step;
        let w_len = w.norm();
        let unit_w = if w_len > 0.0 {
            w / w_len
        } else {
            -rel_pos.normalized()
        };
        (
            Vec2::new(unit_w.y, -unit_w.x),
            unit_w * (combined * inv_step - w_len),
        )
    };
    OrcaLine {
        point: me.velocity + u * share,
        direction,
    }
}

/// Optimizes along line `line_no` subject to the earlier lines and the disk.
fn lp1(
    lines: &[OrcaLine],
    line_no: usize,
    radius: f64,
    opt: Vec2,
    direction_opt: bool,
) -> Option<Vec2> {
    let line = lines[line_no];
    let dot = line.point.dot(line.direction);
    let disc = dot * dot + radius * radius - line.point.norm_sq();
    if disc < 0.0 {
        return None;
    }
    let sqrt_disc = disc.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;
    for prev in &lines[..line_no] {
        let denom = line.direction.det(prev.direction);
        let numer = prev.direction.det(line.point - prev.point);
        if denom.abs() <= LP_EPSILON {
            if numer < 0.0 {
                return None;
            }
            continue;
        }
        let t = numer / denom;
        if denom >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return None;
        }
    }
    let t = if direction_opt {
        if opt.dot(line.direction) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        line.direction.dot(opt - line.point).clamp(t_left, t_right)
    };
    Some(line.point + line.direction * t)
}

fn lp2_impl(lines: &[OrcaLine], radius: f64, opt: Vec2, direction_opt: bool) -> (Vec2, usize) {
    let mut result = if direction_opt {
        opt * radius
    } else if opt.norm_sq() > radius * radius {
        opt.normalized() * radius
    } else {
        opt
    };
    for i in 0..lines.len() {
        if lines[i].violation(result) > 0.0 {
            match lp1(lines, i, radius, opt, direction_opt) {
                Some(r) => result = r,
                None => return (result, i),
            }
        }
    }
    (result, lines.len())
}

/// Nearest point to `preferred` inside the speed disk and every half-plane.
/// The count is the number of leading constraints satisfied; anything below
/// `lines.len()` means the program was infeasible at that line.
pub fn solve_lp2(lines: &[OrcaLine], preferred: Vec2, max_speed: f64) -> (Vec2, usize) {
    lp2_impl(lines, max_speed, preferred, false)
}

/// Fallback for infeasible programs: minimizes the largest violation by
/// moving every half-plane back at the same rate.
pub fn solve_lp3(lines: &[OrcaLine], begin: usize, max_speed: f64, start: Vec2) -> Vec2 {
    let mut result = start;
    let mut distance = 0.0;
    for i in begin..lines.len() {
        if lines[i].violation(result) <= distance {
            continue;
        }
        let mut projected = Vec::with_capacity(i);
        for j in 0..i {
            let det = lines[i].direction.det(lines[j].direction);
            let point = if det.abs() <= LP_EPSILON {
                if lines[i].direction.dot(lines[j].direction) > 0.0 {
                    continue;
                }
                (lines[i].point + lines[j].point) * 0.5
            } else {
                lines[i].point
                    + lines[i].direction
                        * (lines[j].direction.det(lines[i].point - lines[j].point) / det)
            };
            projected.push(OrcaLine {
                point,
                direction: (lines[j].direction - lines[i].direction).normalized(),
            });
        }
        let backup = result;
        let dir = Vec2::new(-lines[i].direction.y, lines[i].direction.x);
        let (r, ok) = lp2_impl(&projected, max_speed, dir, true);
        result = if ok < projected.len() { backup } else { r };
        distance = lines[i].violation(result);
    }
    result
}

/// Drives every active agent with ORCA.
pub struct OrcaController {
    pub params: OrcaParams,
    rng: ChaCha8Rng,
}

impl OrcaController {
    pub fn new(params: OrcaParams) -> Self {
        Self::with_seed(params, 0)
    }

    pub fn with_seed(params: OrcaParams, seed: u64) -> Self {
        Self {
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Controller for OrcaController {
    fn actions(&mut self, world: &World, agents: &[usize]) -> Vec<Vec2> {
        agents
            .iter()
            .map(|&i| {
                let me = &world.agents[i];
                let neighbors: Vec<&AgentState> = world.present_neighbors(i).collect();
                let mut pref = preferred_velocity(me);
                if self.params.jitter > 0.0 {
                    let j = self.params.jitter;
                    pref += Vec2::new(self.rng.random_range(-j..=j), self.rng.random_range(-j..=j));
                }
                compute_orca_velocity_with_preferred(me, &neighbors, &self.params, pref)
            })
            .collect()
    }
}
