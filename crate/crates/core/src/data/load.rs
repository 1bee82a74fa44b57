use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{DataError, RawTrack};
use crate::geom::Vec2;

pub const DEFAULT_FPS: f64 = 25.0;

/// Reads a frame-table file: whitespace- or comma-separated rows of
/// `frame_id ped_id x y`, with an optional `# fps=<rate>` header line.
pub fn load_dataset(path: &Path) -> Result<Vec<RawTrack>, DataError> {
    let tracks = parse_frame_table(File::open(path)?)?;
    if tracks.is_empty() {
        return Err(DataError::Empty(path.to_path_buf()));
    }
    Ok(tracks)
}

/// Tracks come back ordered by pedestrian id, each sorted by time.
pub fn parse_frame_table<R: Read>(input: R) -> Result<Vec<RawTrack>, DataError> {
    let mut fps = DEFAULT_FPS;
    let mut seen = HashSet::new();
    let mut per_ped: BTreeMap<u64, Vec<(u64, Vec2)>> = BTreeMap::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        let malformed = |msg: String| DataError::Malformed { line: line_no, msg };
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(rate) = comment.trim().strip_prefix("fps=") {
                fps = rate
                    .trim()
                    .parse()
                    .ok()
                    .filter(|r: &f64| r.is_finite() && *r > 0.0)
                    .ok_or_else(|| malformed(format!("bad frame rate '{rate}'")))?;
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 4 {
            return Err(malformed(format!("expected 4 fields, found {}", fields.len())));
        }
        let mut nums = [0.0; 4];
        for (n, f) in nums.iter_mut().zip(&fields) {
            *n = f
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| malformed(format!("bad number '{f}'")))?;
        }
        let id = |v: f64, what: &str| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as u64)
            } else {
                Err(malformed(format!("{what} must be a non-negative integer, got {v}")))
            }
        };
        let frame = id(nums[0], "frame id")?;
        let ped = id(nums[1], "pedestrian id")?;
        if !seen.insert((frame, ped)) {
            return Err(DataError::Duplicate { line: line_no, frame, ped });
        }
        per_ped.entry(ped).or_default().push((frame, Vec2::new(nums[2], nums[3])));
    }
    Ok(per_ped
        .into_iter()
        .map(|(ped_id, mut rows)| {
            rows.sort_by_key(|r| r.0);
            RawTrack {
                ped_id,
                times: rows.iter().map(|r| r.0 as f64 / fps).collect(),
                positions: rows.iter().map(|r| r.1).collect(),
            }
        })
        .collect())
}

/// Writes tracks whose timestamps are multiples of `1 / fps` as a frame table.
pub fn write_frame_table<W: Write>(tracks: &[RawTrack], fps: f64, mut out: W) -> std::io::Result<()> {
    let mut rows = Vec::new();
    for t in tracks {
        for (time, p) in t.times.iter().zip(&t.positions) {
            rows.push(((time * fps).round() as u64, t.ped_id, *p));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    writeln!(out, "# fps={fps}")?;
    writeln!(out, "# frame_id ped_id x y")?;
    for (frame, ped, p) in rows {
        writeln!(out, "{frame} {ped} {:.4} {:.4}", p.x, p.y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_rows_one_pedestrian() {
        let text = "# fps=25\n0 7 0.0 0.0\n1 7 0.1 0.0\n2 7 0.2 0.0\n";
        let tracks = parse_frame_table(text.as_bytes()).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].ped_id, 7);
        assert_eq!(tracks[0].times.len(), 3);
        assert_abs_diff_eq!(tracks[0].times[1] - tracks[0].times[0], 0.04, epsilon = 1e-12);
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let text = "2,1,2,0\n0,1,0,0\n1,1,1,0\n";
        let t = &parse_frame_table(text.as_bytes()).unwrap()[0];
        assert!(t.times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t.positions[2], Vec2::new(2.0, 0.0));
    }

    #[test]
    fn duplicate_row_is_rejected() {
        let text = "# fps=25\n0 1 0 0\n0 1 1 1\n";
        match parse_frame_table(text.as_bytes()) {
            Err(DataError::Duplicate { line, frame, ped }) => assert_eq!((line, frame, ped), (3, 0, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "0 1 0 0\n1 1 zero 0\n";
        match parse_frame_table(text.as_bytes()) {
            Err(DataError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        std::fs::write(&path, "# fps=25\n").unwrap();
        assert!(matches!(load_dataset(&path), Err(DataError::Empty(_))));
    }

    #[test]
    fn frame_table_round_trip() {
        let tracks = vec![RawTrack {
            ped_id: 3,
            times: vec![0.4, 0.44, 0.48],
            positions: vec![Vec2::new(1.0, 2.0), Vec2::new(1.5, 2.0), Vec2::new(2.0, 2.25)],
        }];
        let mut buf = Vec::new();
        write_frame_table(&tracks, 25.0, &mut buf).unwrap();
        let back = parse_frame_table(buf.as_slice()).unwrap();
        assert_eq!(back[0].positions, tracks[0].positions);
        for (a, b) in back[0].times.iter().zip(&tracks[0].times) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}
