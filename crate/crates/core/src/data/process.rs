use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

/// Raw timestamps closer than this to a grid instant are taken as lying on it.
const TIME_SNAP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct RawTrack {
    pub ped_id: u64,
    /// Seconds, strictly increasing.
    pub times: Vec<f64>,
    pub positions: Vec<Vec2>,
}

impl RawTrack {
    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// A track on the global grid `t = k * dt`.
///
/// `velocities[j] = (positions[j + 1] - positions[j]) / dt`, and the
/// supervised action at grid point `j` is `velocities[j + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessedTrack {
    pub ped_id: u64,
    pub dt: f64,
    /// Grid index of `positions[0]`.
    pub k0: i64,
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    /// Last recorded position.
    pub goal: Vec2,
    pub active: bool,
}

impl ProcessedTrack {
    pub fn from_grid(ped_id: u64, dt: f64, k0: i64, positions: Vec<Vec2>, goal: Vec2, active: bool) -> Self {
        let velocities = positions.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
        Self {
            ped_id,
            dt,
            k0,
            positions,
            velocities,
            goal,
            active,
        }
    }

    pub fn time_at(&self, j: usize) -> f64 {
        (self.k0 + j as i64) as f64 * self.dt
    }

    /// Grid points that carry a velocity (usable as a neighbor state).
    pub fn state_len(&self) -> usize {
        self.velocities.len()
    }

    /// Grid points that carry a supervised action.
    pub fn sample_len(&self) -> usize {
        self.velocities.len().saturating_sub(1)
    }

    pub fn action(&self, j: usize) -> Vec2 {
        self.velocities[j + 1]
    }

    /// Time interval over which samples can be drawn.
    pub fn sample_span(&self) -> Option<(f64, f64)> {
        let n = self.sample_len();
        (n > 0).then(|| (self.time_at(0), self.time_at(n - 1)))
    }

    pub fn displacement(&self) -> f64 {
        match (self.positions.first(), self.positions.last()) {
            (Some(a), Some(b)) => (*b - *a).norm(),
            _ => 0.0,
        }
    }

    pub fn mean_speed(&self) -> f64 {
        if self.velocities.is_empty() {
            return 0.0;
        }
        self.velocities.iter().map(|v| v.norm()).sum::<f64>() / self.velocities.len() as f64
    }

    /// Centered moving average over `window` grid points (odd windows are
    /// symmetric; 0 or 1 leaves the track untouched). Velocities are
    /// recomputed afterwards.
    pub fn smooth(&mut self, window: usize) {
        if window <= 1 || self.positions.len() < 2 {
            return;
        }
        let half = window / 2;
        let n = self.positions.len();
        let smoothed: Vec<Vec2> = (0..n)
            .map(|j| {
                let lo = j.saturating_sub(half);
                let hi = (j + half).min(n - 1);
                let sum = self.positions[lo..=hi].iter().fold(Vec2::ZERO, |a, &p| a + p);
                sum / (hi - lo + 1) as f64
            })
            .collect();
        *self = Self::from_grid(self.ped_id, self.dt, self.k0, smoothed, self.goal, self.active);
    }
}

/// Linear interpolation of a raw track onto the grid points it covers.
/// Returns `None` when fewer than three grid points fall inside the track,
/// which is the minimum for one velocity and its successor.
pub fn resample_and_differentiate(track: &RawTrack, dt: f64) -> Option<ProcessedTrack> {
    let (t0, t1) = (*track.times.first()?, *track.times.last()?);
    let k0 = (t0 / dt - TIME_SNAP).ceil() as i64;
    let k1 = (t1 / dt + TIME_SNAP).floor() as i64;
    if k1 - k0 < 2 {
        log::debug!("pedestrian {} too short to resample ({:.2} s)", track.ped_id, t1 - t0);
        return None;
    }
    let mut positions = Vec::with_capacity((k1 - k0 + 1) as usize);
    let mut i = 0;
    for k in k0..=k1 {
        let t = k as f64 * dt;
        while i + 1 < track.times.len() && track.times[i + 1] <= t + TIME_SNAP {
            i += 1;
        }
        let p = if (track.times[i] - t).abs() <= TIME_SNAP || i + 1 == track.times.len() {
            track.positions[i]
        } else {
            let frac = (t - track.times[i]) / (track.times[i + 1] - track.times[i]);
            track.positions[i].lerp(track.positions[i + 1], frac.clamp(0.0, 1.0))
        };
        positions.push(p);
    }
    let goal = *track.positions.last()?;
    Some(ProcessedTrack::from_grid(track.ped_id, dt, k0, positions, goal, true))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanseConfig {
    /// Net start-to-end displacement, meters.
    pub min_displacement: f64,
    /// Mean grid speed, m/s.
    pub min_mean_speed: f64,
}

impl Default for CleanseConfig {
    fn default() -> Self {
        Self {
            min_displacement: 2.0,
            min_mean_speed: 0.3,
        }
    }
}

/// Splits tracks into goal-directed walkers (active) and the rest (passive),
/// setting each track's `active` flag accordingly.
pub fn cleanse(tracks: Vec<ProcessedTrack>, cfg: &CleanseConfig) -> (Vec<ProcessedTrack>, Vec<ProcessedTrack>) {
    let mut active = Vec::new();
    let mut passive = Vec::new();
    for mut t in tracks {
        t.active = t.displacement() >= cfg.min_displacement && t.mean_speed() >= cfg.min_mean_speed;
        if t.active {
            active.push(t);
        } else {
            passive.push(t);
        }
    }
    (active, passive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn raw(f: impl Fn(f64) -> Vec2, t0: f64, t1: f64, step: f64) -> RawTrack {
        let n = ((t1 - t0) / step).round() as usize;
        let times: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * step).collect();
        RawTrack {
            ped_id: 1,
            positions: times.iter().map(|&t| f(t)).collect(),
            times,
        }
    }

    #[test]
    fn straight_line_has_constant_velocity() {
        let t = raw(|t| Vec2::new(t, 0.5), 0.13, 5.0, 0.04);
        let p = resample_and_differentiate(&t, 0.12).unwrap();
        for j in 0..p.sample_len() {
            assert_abs_diff_eq!(p.velocities[j].x, 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(p.action(j).y, 0.0, epsilon = 1e-12);
        }
        assert_eq!(p.k0, 2);
    }

    #[test]
    fn stationary_track_is_zero() {
        let t = raw(|_| Vec2::new(3.0, -1.0), 0.0, 2.0, 0.04);
        let p = resample_and_differentiate(&t, 0.12).unwrap();
        assert!(p.velocities.iter().all(|v| *v == Vec2::ZERO));
    }

    #[test]
    fn parabola_first_velocity() {
        let t = raw(|t| Vec2::new(t * t, 0.0), 0.0, 0.24, 0.04);
        let p = resample_and_differentiate(&t, 0.12).unwrap();
        assert_abs_diff_eq!(p.velocities[0].x, 0.12, epsilon = 1e-12);
        assert_eq!(p.sample_len(), 1);
    }

    #[test]
    fn uniform_track_resamples_to_itself() {
        let t = raw(|t| Vec2::new(t.sin(), t.cos()), 0.36, 3.6, 0.12);
        let p = resample_and_differentiate(&t, 0.12).unwrap();
        assert_eq!(p.positions, t.positions);
    }

    #[test]
    fn too_short_track_is_excluded() {
        let t = raw(|t| Vec2::new(t, 0.0), 0.0, 0.2, 0.04);
        assert!(resample_and_differentiate(&t, 0.12).is_none());
    }

    #[test]
    fn cleansing_thresholds() {
        let idle = resample_and_differentiate(&raw(|t| Vec2::new(0.03 * t, 0.0), 0.0, 10.0, 0.04), 0.12).unwrap();
        let brisk = resample_and_differentiate(&raw(|t| Vec2::new(1.3 * t, 0.0), 0.0, 12.0 / 1.3, 0.04), 0.12).unwrap();
        let (active, passive) = cleanse(vec![idle, brisk], &CleanseConfig::default());
        assert_eq!(active.len(), 1);
        assert_eq!(passive.len(), 1);
        assert!(active[0].active && !passive[0].active);
        assert!(passive[0].displacement() < 0.31);
    }

    #[test]
    fn smoothing_preserves_straight_lines() {
        let mut p = resample_and_differentiate(&raw(|t| Vec2::new(2.0 * t, 1.0), 0.0, 3.0, 0.04), 0.12).unwrap();
        let before = p.positions.clone();
        p.smooth(5);
        for j in 2..before.len() - 2 {
            assert_abs_diff_eq!(p.positions[j].x, before[j].x, epsilon = 1e-12);
        }
    }
}
