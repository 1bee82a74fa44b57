use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;

use super::{DataError, ProcessedTrack};
use crate::geom::Vec2;
use crate::sim::Observation;

const GRID_SNAP: f64 = 1e-9;

/// One supervised pair: an unaligned observation and the velocity the
/// pedestrian took next.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub observation: Observation,
    pub action: Vec2,
}

/// All processed tracks of a dataset, indexed by grid step.
#[derive(Clone, Debug)]
pub struct TrackSet {
    pub dt: f64,
    pub tracks: Vec<ProcessedTrack>,
    k_min: i64,
    /// `(track, local index)` of every track with a state at grid step `k_min + i`.
    by_step: Vec<Vec<(usize, usize)>>,
    by_id: HashMap<u64, usize>,
}

impl TrackSet {
    pub fn new(tracks: Vec<ProcessedTrack>, dt: f64) -> Self {
        let k_min = tracks.iter().map(|t| t.k0).min().unwrap_or(0);
        let k_max = tracks
            .iter()
            .map(|t| t.k0 + t.state_len() as i64)
            .max()
            .unwrap_or(k_min);
        let mut by_step = vec![Vec::new(); (k_max - k_min + 1) as usize];
        for (ti, t) in tracks.iter().enumerate() {
            for j in 0..t.state_len() {
                by_step[(t.k0 + j as i64 - k_min) as usize].push((ti, j));
            }
        }
        let by_id = tracks.iter().enumerate().map(|(i, t)| (t.ped_id, i)).collect();
        Self {
            dt,
            tracks,
            k_min,
            by_step,
            by_id,
        }
    }

    pub fn active_count(&self) -> usize {
        self.tracks.iter().filter(|t| t.active).count()
    }

    pub fn track(&self, ped_id: u64) -> Option<&ProcessedTrack> {
        self.by_id.get(&ped_id).map(|&i| &self.tracks[i])
    }

    pub fn index_of(&self, ped_id: u64) -> Option<usize> {
        self.by_id.get(&ped_id).copied()
    }

    fn states_at(&self, k: i64) -> &[(usize, usize)] {
        usize::try_from(k - self.k_min)
            .ok()
            .and_then(|i| self.by_step.get(i))
            .map_or(&[], |v| v.as_slice())
    }

    /// Sample for pedestrian `ped_id` at continuous time `t`. Every state is
    /// linearly interpolated between the bracketing grid points; neighbors
    /// missing from either of them are left out.
    pub fn extract_sample(&self, ped_id: u64, t: f64, sense_radius: f64) -> Result<Sample, DataError> {
        let ti = self.index_of(ped_id).ok_or(DataError::UnknownPedestrian(ped_id))?;
        self.sample_track(ti, t, sense_radius)
    }

    pub fn sample_track(&self, ti: usize, t: f64, sense_radius: f64) -> Result<Sample, DataError> {
        let track = &self.tracks[ti];
        let span = track.sample_span();
        let (start, end) = span.unwrap_or((f64::NAN, f64::NAN));
        let x = t / self.dt;
        let (k, frac) = if (x - x.round()).abs() <= GRID_SNAP * x.abs().max(1.0) {
            (x.round() as i64, 0.0)
        } else {
            (x.floor() as i64, x - x.floor())
        };
        let j = k - track.k0;
        let last = track.sample_len() as i64 - 1;
        let in_span = j >= 0 && (j < last || (j == last && frac == 0.0));
        if span.is_none() || !in_span {
            return Err(DataError::OutOfSpan {
                ped: track.ped_id,
                t,
                start,
                end,
            });
        }
        let j = j as usize;
        let lerp = |a: Vec2, b: Vec2| if frac == 0.0 { a } else { a.lerp(b, frac) };
        let position = lerp(track.positions[j], track.positions[j + 1]);
        let velocity = lerp(track.velocities[j], track.velocities[j + 1]);
        let action = if frac == 0.0 {
            track.action(j)
        } else {
            track.action(j).lerp(track.action(j + 1), frac)
        };
        let others = self.states_at(k).iter().filter_map(|&(oi, oj)| {
            if oi == ti {
                return None;
            }
            let o = &self.tracks[oi];
            if frac == 0.0 {
                Some((o.positions[oj], o.velocities[oj]))
            } else if oj + 1 < o.state_len() {
                Some((
                    o.positions[oj].lerp(o.positions[oj + 1], frac),
                    o.velocities[oj].lerp(o.velocities[oj + 1], frac),
                ))
            } else {
                None
            }
        });
        let observation = Observation::build(position, velocity, track.goal, others, sense_radius, false);
        Ok(Sample { observation, action })
    }

    /// Every grid-aligned sample of the given tracks, in order.
    pub fn grid_samples(&self, track_indices: &[usize], sense_radius: f64) -> Vec<Sample> {
        let mut out = Vec::new();
        for &ti in track_indices {
            let t = &self.tracks[ti];
            for j in 0..t.sample_len() {
                let s = self
                    .sample_track(ti, t.time_at(j), sense_radius)
                    .expect("grid points lie inside the span");
                out.push(s);
            }
        }
        out
    }
}

/// Draws samples uniformly over the pooled active time of a set of tracks.
pub struct SampleSource<'a> {
    set: &'a TrackSet,
    tracks: Vec<usize>,
    cumulative: Vec<f64>,
    pub sense_radius: f64,
}

impl<'a> SampleSource<'a> {
    pub fn new(set: &'a TrackSet, tracks: Vec<usize>, sense_radius: f64) -> Result<Self, DataError> {
        let mut cumulative = Vec::with_capacity(tracks.len());
        let mut acc = 0.0;
        for &ti in &tracks {
            if let Some((a, b)) = set.tracks[ti].sample_span() {
                acc += b - a;
            }
            cumulative.push(acc);
        }
        if acc <= 0.0 {
            return Err(DataError::NoActiveTracks);
        }
        Ok(Self {
            set,
            tracks,
            cumulative,
            sense_radius,
        })
    }

    pub fn tracks(&self) -> &[usize] {
        &self.tracks
    }

    pub fn total_time(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        let u = rng.random_range(0.0..self.total_time());
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.tracks.len() - 1);
        let before = if idx == 0 { 0.0 } else { self.cumulative[idx - 1] };
        let ti = self.tracks[idx];
        let (start, end) = self.set.tracks[ti].sample_span().expect("weighted tracks have spans");
        let t = (start + (u - before)).min(end);
        self.set
            .sample_track(ti, t, self.sense_radius)
            .expect("draw stays inside the span")
    }
}

/// Random reflection about either axis (probability one half each) followed
/// by a uniformly random rotation, applied to every vector of the sample.
pub fn augment<R: Rng + ?Sized>(sample: &Sample, rng: &mut R) -> Sample {
    let fx = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
    let fy = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
    // maps [-pi, pi) onto (-pi, pi]
    let theta = -rng.random_range(-PI..PI);
    apply_isometry(sample, fx, fy, theta)
}

pub(crate) fn apply_isometry(sample: &Sample, fx: f64, fy: f64, theta: f64) -> Sample {
    let f = |v: Vec2| Vec2::new(fx * v.x, fy * v.y).rotate(theta);
    let mut observation = sample.observation.clone();
    observation.map_vectors(f);
    Sample {
        observation,
        action: f(sample.action),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{resample_and_differentiate, RawTrack};
    use crate::sim::GoalRep;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn raw(id: u64, f: impl Fn(f64) -> Vec2, t0: f64, t1: f64) -> RawTrack {
        let n = ((t1 - t0) / 0.04).round() as usize;
        let times: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * 0.04).collect();
        RawTrack {
            ped_id: id,
            positions: times.iter().map(|&t| f(t)).collect(),
            times,
        }
    }

    fn set(raws: &[RawTrack]) -> TrackSet {
        TrackSet::new(
            raws.iter().map(|r| resample_and_differentiate(r, 0.12).unwrap()).collect(),
            0.12,
        )
    }

    #[test]
    fn lone_pedestrian_sees_only_the_dummy() {
        let s = set(&[raw(1, |t| Vec2::new(t, 0.0), 0.0, 4.0)]);
        let sample = s.extract_sample(1, 1.0, 4.0).unwrap();
        assert_eq!(sample.observation.neighbors.len(), 1);
        assert_abs_diff_eq!(sample.action.x, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn grid_point_matches_grid_sample() {
        let s = set(&[
            raw(1, |t| Vec2::new(t, 0.0), 0.0, 4.0),
            raw(2, |t| Vec2::new(4.0 - t, 1.0), 0.0, 4.0),
        ]);
        let a = s.extract_sample(1, 0.12 * 7.0, 4.0).unwrap();
        let t = &s.tracks[0];
        assert_eq!(a.action, t.action(7));
        assert_eq!(a.observation.velocity, t.velocities[7]);
        assert_eq!(a.observation.neighbors.len(), 2);
        assert_eq!(a.observation.goal, GoalRep::Relative(t.goal - t.positions[7]));
    }

    #[test]
    fn midpoint_action_is_average_of_grid_actions() {
        let s = set(&[raw(1, |t| Vec2::new(t * t, 0.0), 0.0, 0.48)]);
        let t = &s.tracks[0];
        let mid = s.extract_sample(1, 0.06, 4.0).unwrap();
        let avg = (t.action(0) + t.action(1)) * 0.5;
        assert_abs_diff_eq!(mid.action.x, avg.x, epsilon = 1e-12);
    }

    #[test]
    fn outside_span_is_an_error() {
        let s = set(&[raw(1, |t| Vec2::new(t, 0.0), 1.0, 2.0)]);
        assert!(matches!(s.extract_sample(1, 0.5, 4.0), Err(DataError::OutOfSpan { .. })));
        assert!(matches!(s.extract_sample(1, 1.99, 4.0), Err(DataError::OutOfSpan { .. })));
        assert!(matches!(s.extract_sample(9, 1.5, 4.0), Err(DataError::UnknownPedestrian(9))));
    }

    #[test]
    fn neighbors_leaving_between_grid_points_are_dropped() {
        let s = set(&[
            raw(1, |t| Vec2::new(t, 0.0), 0.0, 4.0),
            raw(2, |t| Vec2::new(t, 1.0), 0.0, 1.2),
        ]);
        // track 2 has states on steps 0..=9
        assert_eq!(s.extract_sample(1, 0.12 * 9.0, 4.0).unwrap().observation.neighbors.len(), 2);
        assert_eq!(s.extract_sample(1, 0.12 * 9.5, 4.0).unwrap().observation.neighbors.len(), 1);
    }

    #[test]
    fn identity_augmentation_leaves_sample_unchanged() {
        let s = set(&[
            raw(1, |t| Vec2::new(t, 0.0), 0.0, 4.0),
            raw(2, |t| Vec2::new(4.0 - t, 1.0), 0.0, 4.0),
        ]);
        let a = s.extract_sample(1, 1.0, 4.0).unwrap();
        assert_eq!(apply_isometry(&a, 1.0, 1.0, 0.0), a);
        let flipped = apply_isometry(&a, -1.0, 1.0, 0.0);
        assert_eq!(flipped.action, Vec2::new(-a.action.x, a.action.y));
        assert_eq!(flipped.observation.neighbors[1].offset.x, -a.observation.neighbors[1].offset.x);
    }

    #[test]
    fn sampling_is_deterministic_and_in_span() {
        let s = set(&[
            raw(1, |t| Vec2::new(t, 0.0), 0.0, 4.0),
            raw(2, |t| Vec2::new(4.0 - t, 1.0), 2.0, 9.0),
        ]);
        let src = SampleSource::new(&s, vec![0, 1], 4.0).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| src.draw(&mut rng).action).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
    }
}
