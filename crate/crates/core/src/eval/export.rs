use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::benchmark::BenchmarkReport;
use super::EvalError;
use crate::sim::EpisodeTrace;

/// Fixed-width bins over `[lo, hi)`; values outside are clamped into the
/// first or last bin so counts always sum to the sample size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn build(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        assert!(bins > 0 && hi > lo, "histogram needs a positive range and bin count");
        let mut counts = vec![0u64; bins];
        let w = (hi - lo) / bins as f64;
        for &v in values {
            let k = ((v - lo) / w).floor();
            let k = if k.is_nan() { 0 } else { (k.max(0.0) as usize).min(bins - 1) };
            counts[k] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn edges(&self, k: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + w * k as f64, self.lo + w * (k + 1) as f64)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_lo bin_hi count")?;
        for (k, c) in self.counts.iter().enumerate() {
            let (a, b) = self.edges(k);
            writeln!(out, "{a} {b} {c}")?;
        }
        Ok(())
    }
}

pub fn speed_histogram(trace: &EpisodeTrace, bins: usize) -> Histogram {
    Histogram::build(&super::metrics::step_speeds(trace), 0.0, 2.6, bins)
}

pub fn turning_histogram(trace: &EpisodeTrace, bins: usize) -> Histogram {
    Histogram::build(&super::metrics::turning_angles(trace), 0.0, std::f64::consts::PI, bins)
}

fn create(path: &Path) -> Result<fs::File, EvalError> {
    fs::File::create(path).map_err(|e| EvalError::Write(path.display().to_string(), e))
}

/// Trajectory file plus speed and turning-angle histograms next to it.
pub fn export_trace(trace: &EpisodeTrace, path: &Path, bins: usize) -> Result<(), EvalError> {
    let io = |e| EvalError::Write(path.display().to_string(), e);
    trace.write_csv(create(path)?).map_err(io)?;
    let speeds = path.with_extension("speeds.txt");
    speed_histogram(trace, bins).write_text(create(&speeds)?).map_err(io)?;
    let turns = path.with_extension("turning.txt");
    turning_histogram(trace, bins).write_text(create(&turns)?).map_err(io)?;
    Ok(())
}

/// Machine-readable JSON at `path` and the aligned table at `path` with a
/// `.txt` extension.
pub fn export_report(report: &BenchmarkReport, path: &Path) -> Result<(), EvalError> {
    let io = |e| EvalError::Write(path.display().to_string(), e);
    create(path)?.write_all(report.to_json().as_bytes()).map_err(io)?;
    create(&path.with_extension("txt"))?
        .write_all(report.table().as_bytes())
        .map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orca::{OrcaController, OrcaParams};
    use crate::sim::{generate_scenario, run_episode, AgentParams, EpisodeConfig, ScenarioConfig, ScenarioKind, World};

    fn trace() -> EpisodeTrace {
        let spec = generate_scenario(ScenarioKind::Square, 8, 5, &ScenarioConfig::default()).unwrap();
        let world = World::from_scenario(&spec, AgentParams::default(), EpisodeConfig::default()).unwrap();
        run_episode(world, &mut OrcaController::new(OrcaParams::default()))
    }

    #[test]
    fn histogram_counts_every_sample() {
        let h = Histogram::build(&[-1.0, 0.0, 0.5, 0.99, 1.0, 7.0, f64::NAN], 0.0, 1.0, 4);
        assert_eq!(h.total(), 7);
        assert_eq!(h.counts, vec![3, 0, 1, 3]);
    }

    #[test]
    fn exported_trace_rows_and_histograms() {
        let t = trace();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ep.csv");
        export_trace(&t, &p, 20).unwrap();
        let back = EpisodeTrace::read_csv(fs::File::open(&p).unwrap()).unwrap();
        let active_steps: usize = (0..t.agents.len()).map(|i| t.agent_rows(i).count()).sum();
        assert_eq!(back.rows.len(), active_steps);
        let text = fs::read_to_string(p.with_extension("speeds.txt")).unwrap();
        let total: u64 = text.lines().skip(1).map(|l| l.split(' ').nth(2).unwrap().parse::<u64>().unwrap()).sum();
        assert_eq!(total as usize, active_steps);
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let t = trace();
        assert!(matches!(
            export_trace(&t, Path::new("/nonexistent/dir/ep.csv"), 10),
            Err(EvalError::Write(..))
        ));
    }
}
