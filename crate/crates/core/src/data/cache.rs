//! Processed-track cache.
//!
//! ```text
//! # kdnav-tracks v1
//! # dt=0.12
//! #T ped_id,k0,n,goal_x,goal_y,active     one line per track
//! ped_id,k,x,y                            one line per grid point
//! ```
//!
//! Only grid positions are stored; velocities are recomputed on load with
//! the same arithmetic, so a round trip is exact.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DataError, ProcessedTrack, TrackSet};
use crate::geom::Vec2;

const MAGIC: &str = "# kdnav-tracks v1";

pub fn write_cache(set: &TrackSet, path: &Path) -> Result<(), DataError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "# dt={}", set.dt)?;
    for t in &set.tracks {
        writeln!(
            out,
            "#T {},{},{},{},{},{}",
            t.ped_id,
            t.k0,
            t.positions.len(),
            t.goal.x,
            t.goal.y,
            u8::from(t.active)
        )?;
    }
    writeln!(out, "ped_id,k,x,y")?;
    for t in &set.tracks {
        for (j, p) in t.positions.iter().enumerate() {
            writeln!(out, "{},{},{},{}", t.ped_id, t.k0 + j as i64, p.x, p.y)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<TrackSet, DataError> {
    struct Header {
        k0: i64,
        n: usize,
        goal: Vec2,
        active: bool,
        positions: Vec<Vec2>,
    }
    let mut dt = None;
    let mut order = Vec::new();
    let mut headers: HashMap<u64, Header> = HashMap::new();
    for (idx, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let err = |msg: String| DataError::Malformed { line: line_no, msg };
        if line_no == 1 && line != MAGIC {
            return Err(err("not a track cache".into()));
        }
        let fields: Vec<&str>;
        if let Some(rest) = line.strip_prefix("# dt=") {
            dt = Some(rest.parse::<f64>().map_err(|_| err(format!("bad dt '{rest}'")))?);
            continue;
        } else if let Some(rest) = line.strip_prefix("#T ") {
            fields = rest.split(',').collect();
            if fields.len() != 6 {
                return Err(err("track header needs 6 fields".into()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number '{s}'")));
            let ped: u64 = fields[0].parse().map_err(|_| err("bad pedestrian id".into()))?;
            let n: usize = fields[2].parse().map_err(|_| err("bad point count".into()))?;
            headers.insert(
                ped,
                Header {
                    k0: fields[1].parse().map_err(|_| err("bad k0".into()))?,
                    n,
                    goal: Vec2::new(num(fields[3])?, num(fields[4])?),
                    active: fields[5] == "1",
                    positions: Vec::with_capacity(n),
                },
            );
            order.push(ped);
            continue;
        } else if line.starts_with('#') || line.starts_with("ped_id") || line.is_empty() {
            continue;
        }
        fields = line.split(',').collect();
        if fields.len() != 4 {
            return Err(err("row needs 4 fields".into()));
        }
        let ped: u64 = fields[0].parse().map_err(|_| err("bad pedestrian id".into()))?;
        let k: i64 = fields[1].parse().map_err(|_| err("bad grid index".into()))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number '{s}'")));
        let p = Vec2::new(num(fields[2])?, num(fields[3])?);
        let h = headers
            .get_mut(&ped)
            .ok_or_else(|| err(format!("row for undeclared pedestrian {ped}")))?;
        if k != h.k0 + h.positions.len() as i64 {
            return Err(err(format!("grid index {k} out of sequence")));
        }
        h.positions.push(p);
    }
    let dt = dt.ok_or_else(|| DataError::Malformed {
        line: 0,
        msg: "missing dt".into(),
    })?;
    let mut tracks = Vec::with_capacity(order.len());
    for ped in order {
        let h = headers.remove(&ped).expect("declared above");
        if h.positions.len() != h.n {
            return Err(DataError::Malformed {
                line: 0,
                msg: format!("pedestrian {ped}: expected {} points, found {}", h.n, h.positions.len()),
            });
        }
        tracks.push(ProcessedTrack::from_grid(ped, dt, h.k0, h.positions, h.goal, h.active));
    }
    Ok(TrackSet::new(tracks, dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{cleanse, resample_and_differentiate, CleanseConfig, RawTrack};

    #[test]
    fn cache_round_trip_is_exact() {
        let raws = [
            RawTrack {
                ped_id: 4,
                times: (0..60).map(|i| i as f64 * 0.04).collect(),
                positions: (0..60).map(|i| Vec2::new(0.0513 * i as f64, (i as f64 * 0.1).sin())).collect(),
            },
            RawTrack {
                ped_id: 9,
                times: (10..40).map(|i| i as f64 * 0.04).collect(),
                positions: (10..40).map(|i| Vec2::new(1.0, 0.001 * i as f64)).collect(),
            },
        ];
        let processed = raws.iter().filter_map(|r| resample_and_differentiate(r, 0.12)).collect();
        let (mut active, passive) = cleanse(processed, &CleanseConfig::default());
        active.extend(passive);
        let set = TrackSet::new(active, 0.12);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tracks.csv");
        write_cache(&set, &path).unwrap();
        let back = read_cache(&path).unwrap();
        assert_eq!(back.tracks, set.tracks);
        assert_eq!(back.active_count(), 1);
    }
}
