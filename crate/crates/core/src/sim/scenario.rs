use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geom::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Circle,
    Corridor,
    Square,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::Circle,
        ScenarioKind::Corridor,
        ScenarioKind::Square,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Circle => "circle",
            ScenarioKind::Corridor => "corridor",
            ScenarioKind::Square => "square",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "circle" => Ok(ScenarioKind::Circle),
            "corridor" => Ok(ScenarioKind::Corridor),
            "square" => Ok(ScenarioKind::Square),
            other => Err(SimError::InvalidScenario(format!(
                "unknown scenario kind '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Geometry {
    Circle {
        radius: f64,
    },
    Corridor {
        width: f64,
        height: f64,
        orientation: Orientation,
    },
    Square {
        width: f64,
        height: f64,
    },
}

/// Knobs for randomized scenario generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub circle_radius: (f64, f64),
    pub box_size: (f64, f64),
    /// Range used when the agent count itself is drawn at random.
    pub agent_count: (usize, usize),
    /// Uniform angular noise on circle placement, degrees (±).
    pub angular_jitter_deg: f64,
    /// Uniform radial noise on circle placement, meters (±).
    pub radial_jitter: f64,
    /// Thickness of the start/goal bands along corridor and square sides.
    pub band_depth: f64,
    /// Keeps square-crossing starts away from the corners.
    pub side_margin: f64,
    pub min_separation: f64,
    pub max_attempts: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            circle_radius: (4.0, 6.0),
            box_size: (8.0, 12.0),
            agent_count: (6, 20),
            angular_jitter_deg: 5.0,
            radial_jitter: 0.2,
            band_depth: 1.0,
            side_margin: 1.0,
            min_separation: 0.3,
            max_attempts: 200,
        }
    }
}

impl ScenarioConfig {
    /// Largest distance between a jittered circle position and its nominal
    /// spot, for a circle of the given radius.
    pub fn circle_jitter_bound(&self, radius: f64) -> f64 {
        let dtheta = self.angular_jitter_deg.to_radians();
        self.radial_jitter + 2.0 * (radius + self.radial_jitter) * (dtheta / 2.0).sin()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentPlacement {
    pub start: [f64; 2],
    pub goal: [f64; 2],
}

/// A fully instantiated scenario: geometry plus every start and goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub n_agents: usize,
    pub geometry: Geometry,
    pub agents: Vec<AgentPlacement>,
}

impl ScenarioSpec {
    pub fn from_positions(
        kind: ScenarioKind,
        seed: u64,
        geometry: Geometry,
        starts: &[Vec2],
        goals: &[Vec2],
    ) -> Self {
        let agents = starts
            .iter()
            .zip(goals)
            .map(|(s, g)| AgentPlacement {
                start: [s.x, s.y],
                goal: [g.x, g.y],
            })
            .collect::<Vec<_>>();
        Self {
            kind,
            seed,
            n_agents: agents.len(),
            geometry,
            agents,
        }
    }

    pub fn starts(&self) -> Vec<Vec2> {
        self.agents
            .iter()
            .map(|a| Vec2::new(a.start[0], a.start[1]))
            .collect()
    }

    pub fn goals(&self) -> Vec<Vec2> {
        self.agents
            .iter()
            .map(|a| Vec2::new(a.goal[0], a.goal[1]))
            .collect()
    }

    /// Two agents on a circle swapping places with no jitter at all.
    pub fn head_on(distance: f64) -> Self {
        let r = distance / 2.0;
        Self::from_positions(
            ScenarioKind::Circle,
            0,
            Geometry::Circle { radius: r },
            &[Vec2::new(-r, 0.0), Vec2::new(r, 0.0)],
            &[Vec2::new(r, 0.0), Vec2::new(-r, 0.0)],
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario spec is always representable as TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let spec: ScenarioSpec =
            toml::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        if spec.agents.len() != spec.n_agents {
            return Err(SimError::InvalidScenario(format!(
                "n_agents = {} but {} agents listed",
                spec.n_agents,
                spec.agents.len()
            )));
        }
        Ok(spec)
    }
}

fn uniform(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..=range.1)
    } else {
        range.0
    }
}

fn well_separated(points: &[Vec2], candidate: Vec2, min_sep: f64) -> bool {
    points.iter().all(|p| p.distance(candidate) >= min_sep)
}

/// Draws a random scenario of `kind` with `n_agents` agents. The same
/// `(kind, n_agents, seed, config)` always yields the same scenario.
pub fn generate_scenario(
    kind: ScenarioKind,
    n_agents: usize,
    seed: u64,
    config: &ScenarioConfig,
) -> Result<ScenarioSpec, SimError> {
    if n_agents == 0 {
        return Err(SimError::InvalidScenario(
            "scenario needs at least one agent".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.max_attempts {
        let placed = match kind {
            ScenarioKind::Circle => place_circle(&mut rng, n_agents, config),
            ScenarioKind::Corridor => place_corridor(&mut rng, n_agents, config),
            ScenarioKind::Square => place_square(&mut rng, n_agents, config),
        };
        if let Some((geometry, starts, goals)) = placed {
            return Ok(ScenarioSpec::from_positions(
                kind, seed, geometry, &starts, &goals,
            ));
        }
    }
    Err(SimError::Overcrowded {
        n_agents,
        min_separation: config.min_separation,
        attempts: config.max_attempts,
    })
}

type Placement = (Geometry, Vec<Vec2>, Vec<Vec2>);

fn place_circle(rng: &mut ChaCha8Rng, n: usize, cfg: &ScenarioConfig) -> Option<Placement> {
    let radius = uniform(rng, cfg.circle_radius);
    let offset = rng.random_range(-PI..PI);
    let dtheta = cfg.angular_jitter_deg.to_radians();
    let jittered = |angle: f64, rng: &mut ChaCha8Rng| {
        let a = angle + uniform(rng, (-dtheta, dtheta));
        let r = radius + uniform(rng, (-cfg.radial_jitter, cfg.radial_jitter));
        Vec2::new(r * a.cos(), r * a.sin())
    };
    let mut starts = Vec::with_capacity(n);
    let mut goals = Vec::with_capacity(n);
    for i in 0..n {
        let angle = offset + 2.0 * PI * i as f64 / n as f64;
        let start = jittered(angle, rng);
        if !well_separated(&starts, start, cfg.min_separation) {
            return None;
        }
        starts.push(start);
        goals.push(jittered(angle + PI, rng));
    }
    Some((Geometry::Circle { radius }, starts, goals))
}

/// Samples a point in the band along one side, `axis_sign` picking the side.
/// Coordinates are `(along_axis, across_axis)`.
fn band_point(
    rng: &mut ChaCha8Rng,
    half_len: f64,
    half_width: f64,
    depth: f64,
    margin: f64,
    axis_sign: f64,
) -> (f64, f64) {
    let along = axis_sign * (half_len - uniform(rng, (0.0, depth)));
    let m = margin.min(half_width * 0.5);
    let across = uniform(rng, (-half_width + m, half_width - m));
    (along, across)
}

fn rejection_place(
    rng: &mut ChaCha8Rng,
    starts: &[Vec2],
    min_sep: f64,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Vec2,
) -> Option<Vec2> {
    for _ in 0..100 {
        let p = draw(rng);
        if well_separated(starts, p, min_sep) {
            return Some(p);
        }
    }
    None
}

fn place_corridor(rng: &mut ChaCha8Rng, n: usize, cfg: &ScenarioConfig) -> Option<Placement> {
    let width = uniform(rng, cfg.box_size);
    let height = uniform(rng, cfg.box_size);
    let orientation = if rng.random_bool(0.5) {
        Orientation::Horizontal
    } else {
        Orientation::Vertical
    };
    // corridor axis length and cross-section
    let (half_len, half_width) = match orientation {
        Orientation::Horizontal => (width / 2.0, height / 2.0),
        Orientation::Vertical => (height / 2.0, width / 2.0),
    };
    let to_world = |along: f64, across: f64| match orientation {
        Orientation::Horizontal => Vec2::new(along, across),
        Orientation::Vertical => Vec2::new(across, along),
    };
    let margin = 0.5;
    let mut starts = Vec::with_capacity(n);
    let mut goals = Vec::with_capacity(n);
    for i in 0..n {
        let side = if i % 2 == 0 { -1.0 } else { 1.0 };
        let start = rejection_place(rng, &starts, cfg.min_separation, |rng| {
            let (a, c) = band_point(rng, half_len, half_width, cfg.band_depth, margin, side);
            to_world(a, c)
        })?;
        let (a, c) = band_point(rng, half_len, half_width, cfg.band_depth, margin, -side);
        starts.push(start);
        goals.push(to_world(a, c));
    }
    Some((
        Geometry::Corridor {
            width,
            height,
            orientation,
        },
        starts,
        goals,
    ))
}

fn place_square(rng: &mut ChaCha8Rng, n: usize, cfg: &ScenarioConfig) -> Option<Placement> {
    let width = uniform(rng, cfg.box_size);
    let height = uniform(rng, cfg.box_size);
    let mut starts = Vec::with_capacity(n);
    let mut goals = Vec::with_capacity(n);
    for i in 0..n {
        // sides: 0 left, 1 right, 2 bottom, 3 top
        let side = i % 4;
        let sign = if side % 2 == 0 { -1.0 } else { 1.0 };
        let horizontal_flow = side < 2;
        let place = |rng: &mut ChaCha8Rng, s: f64| {
            if horizontal_flow {
                let (a, c) = band_point(
                    rng,
                    width / 2.0,
                    height / 2.0,
                    cfg.band_depth,
                    cfg.side_margin,
                    s,
                );
                Vec2::new(a, c)
            } else {
                let (a, c) = band_point(
                    rng,
                    height / 2.0,
                    width / 2.0,
                    cfg.band_depth,
                    cfg.side_margin,
                    s,
                );
                Vec2::new(c, a)
            }
        };
        let start = rejection_place(rng, &starts, cfg.min_separation, |rng| place(rng, sign))?;
        starts.push(start);
        goals.push(place(rng, -sign));
    }
    Some((Geometry::Square { width, height }, starts, goals))
}
