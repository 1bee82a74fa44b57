//! Planar geometry shared by the simulator, the planners and the learners.
//!
//! Everything here is `f64`. Positions are meters, velocities m/s; the same
//! [`Vec2`] carries both.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Below this distance the direction to a goal is treated as undefined.
pub const DEGENERATE_DIST: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product (the 2x2 determinant `[self other]`).
    #[inline]
    pub fn det(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Unit vector in the same direction, or zero for a (near) zero vector.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n < DEGENERATE_DIST {
            Vec2::ZERO
        } else {
            self / n
        }
    }

    /// Counter-clockwise rotation by `angle` radians.
    #[inline]
    pub fn rotate(self, angle: f64) -> Vec2 {
        if angle == 0.0 {
            return self;
        }
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Angle of the vector in `(-π, π]`.
    #[inline]
    pub fn angle(self) -> f64 {
        normalize_angle(self.y.atan2(self.x))
    }

    #[inline]
    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    #[inline]
    pub fn lerp(self, other: Vec2, frac: f64) -> Vec2 {
        self + (other - self) * frac
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// An agent-centred coordinate system.
///
/// The plain local frame only translates; the goal-aligned frame additionally
/// rotates so the goal lies on the positive x axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    pub origin: Vec2,
    /// Radians in `(-π, π]`.
    pub rotation: f64,
}

impl LocalFrame {
    pub fn new(origin: Vec2, rotation: f64) -> Self {
        Self {
            origin,
            rotation: normalize_angle(rotation),
        }
    }

    pub fn translated(origin: Vec2) -> Self {
        Self {
            origin,
            rotation: 0.0,
        }
    }

    /// Frame at `position` whose x axis points at `goal`. Falls back to no
    /// rotation when the agent sits on its goal.
    pub fn goal_aligned(position: Vec2, goal: Vec2) -> Self {
        let d = goal - position;
        let rotation = if d.norm() < DEGENERATE_DIST {
            0.0
        } else {
            d.angle()
        };
        Self {
            origin: position,
            rotation,
        }
    }

    pub fn to_frame(&self, world: Vec2, is_vector: bool) -> Vec2 {
        let v = if is_vector {
            world
        } else {
            world - self.origin
        };
        v.rotate(-self.rotation)
    }

    pub fn from_frame(&self, local: Vec2, is_vector: bool) -> Vec2 {
        let v = local.rotate(self.rotation);
        if is_vector {
            v
        } else {
            v + self.origin
        }
    }
}

/// Scales `v_hat` down onto the speed limit when it exceeds it.
pub fn clamp_speed(v_hat: Vec2, v_max: f64) -> Vec2 {
    let n = v_hat.norm();
    // slack of a few ulps keeps the operation idempotent after rescaling
    if n <= v_max * (1.0 + 4.0 * f64::EPSILON) || n == 0.0 {
        v_hat
    } else {
        v_hat * (v_max / n)
    }
}
