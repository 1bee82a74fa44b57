use serde::{Deserialize, Serialize};

use crate::geom::{LocalFrame, Vec2};

/// Local state of one neighbor: relative position and relative velocity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NeighborRecord {
    pub offset: Vec2,
    pub rel_velocity: Vec2,
}

impl NeighborRecord {
    pub const DUMMY: NeighborRecord = NeighborRecord {
        offset: Vec2::ZERO,
        rel_velocity: Vec2::ZERO,
    };

    pub fn features(&self) -> [f64; 4] {
        [
            self.offset.x,
            self.offset.y,
            self.rel_velocity.x,
            self.rel_velocity.y,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GoalRep {
    /// Goal relative to the agent, in the local frame.
    Relative(Vec2),
    /// Scalar goal distance; the frame's x axis points at the goal.
    Distance(f64),
}

/// What one agent perceives at one control step.
///
/// `neighbors[0]` is always the all-zero dummy record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub neighbors: Vec<NeighborRecord>,
    pub goal: GoalRep,
    pub velocity: Vec2,
    /// Frame the vectors above are expressed in.
    pub frame: LocalFrame,
}

impl Observation {
    /// Builds an observation for an agent at `position` moving at `velocity`.
    /// `others` yields `(position, velocity)` of every candidate neighbor;
    /// those farther than `sense_radius` are dropped.
    pub fn build<I>(
        position: Vec2,
        velocity: Vec2,
        goal: Vec2,
        others: I,
        sense_radius: f64,
        aligned: bool,
    ) -> Observation
    where
        I: IntoIterator<Item = (Vec2, Vec2)>,
    {
        let frame = if aligned {
            LocalFrame::goal_aligned(position, goal)
        } else {
            LocalFrame::translated(position)
        };
        let mut neighbors = vec![NeighborRecord::DUMMY];
        for (p, v) in others {
            if (p - position).norm() <= sense_radius {
                neighbors.push(NeighborRecord {
                    offset: frame.to_frame(p, false),
                    rel_velocity: frame.to_frame(v - velocity, true),
                });
            }
        }
        let goal = if aligned {
            GoalRep::Distance((goal - position).norm())
        } else {
            GoalRep::Relative(frame.to_frame(goal, false))
        };
        Observation {
            neighbors,
            goal,
            velocity: frame.to_frame(velocity, true),
            frame,
        }
    }

    pub fn aligned(&self) -> bool {
        matches!(self.goal, GoalRep::Distance(_))
    }

    pub fn goal_distance(&self) -> f64 {
        match self.goal {
            GoalRep::Relative(g) => g.norm(),
            GoalRep::Distance(d) => d,
        }
    }

    /// Ego input of the network: `[d, vx, vy]` aligned, `[gx, gy, vx, vy]` otherwise.
    pub fn ego_features(&self) -> Vec<f64> {
        match self.goal {
            GoalRep::Relative(g) => vec![g.x, g.y, self.velocity.x, self.velocity.y],
            GoalRep::Distance(d) => vec![d, self.velocity.x, self.velocity.y],
        }
    }

    pub fn ego_dim(&self) -> usize {
        if self.aligned() {
            3
        } else {
            4
        }
    }

    /// Applies a linear map to every vector in the observation. Used by the
    /// dataset augmentations; the frame is left untouched.
    pub fn map_vectors(&mut self, f: impl Fn(Vec2) -> Vec2) {
        for n in &mut self.neighbors {
            n.offset = f(n.offset);
            n.rel_velocity = f(n.rel_velocity);
        }
        if let GoalRep::Relative(g) = self.goal {
            self.goal = GoalRep::Relative(f(g));
        }
        self.velocity = f(self.velocity);
    }
}
