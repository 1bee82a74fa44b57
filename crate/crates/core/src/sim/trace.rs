use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::world::AgentStatus;
use super::SimError;
use crate::geom::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub id: usize,
    pub start: Vec2,
    pub goal: Vec2,
    pub radius: f64,
    pub v_max: f64,
    pub final_position: Vec2,
    pub status: AgentStatus,
    /// Control step during which the agent arrived or collided.
    pub end_step: Option<u64>,
}

/// State of one agent at the start of one control step, together with the
/// command it issued and its status once the step completed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    pub agent: usize,
    pub t: f64,
    pub position: Vec2,
    pub velocity: Vec2,
    pub action: Vec2,
    pub status: AgentStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub dt_control: f64,
    pub steps: u64,
    pub agents: Vec<AgentSummary>,
    pub rows: Vec<TraceRow>,
}

const ROW_HEADER: &str = "step,agent,t,x,y,vx,vy,ax,ay,status";

impl EpisodeTrace {
    pub fn duration(&self) -> f64 {
        self.steps as f64 * self.dt_control
    }

    /// Rows of one agent in step order.
    pub fn agent_rows(&self, agent: usize) -> impl Iterator<Item = &TraceRow> + '_ {
        self.rows.iter().filter(move |r| r.agent == agent)
    }

    /// Positions at control resolution, ending with the final position.
    pub fn path(&self, agent: usize) -> Vec<Vec2> {
        let mut pts: Vec<Vec2> = self.agent_rows(agent).map(|r| r.position).collect();
        pts.push(self.agents[agent].final_position);
        pts
    }

    /// Writes the columnar text form: `#`-prefixed agent summaries followed
    /// by one CSV row per (control step, active agent).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# kdnav-trace v1")?;
        writeln!(out, "# dt_control={} steps={}", self.dt_control, self.steps)?;
        writeln!(
            out,
            "# agent,start_x,start_y,goal_x,goal_y,radius,v_max,final_x,final_y,status,end_step"
        )?;
        for a in &self.agents {
            let end = a
                .end_step
                .map(|s| s.to_string())
                .unwrap_or_else(|| "-".into());
            writeln!(
                out,
                "#A {},{},{},{},{},{},{},{},{},{},{}",
                a.id,
                a.start.x,
                a.start.y,
                a.goal.x,
                a.goal.y,
                a.radius,
                a.v_max,
                a.final_position.x,
                a.final_position.y,
                a.status.code(),
                end
            )?;
        }
        writeln!(out, "{ROW_HEADER}")?;
        let mut line = String::new();
        for r in &self.rows {
            line.clear();
            let _ = write!(
                line,
                "{},{},{},{},{},{},{},{},{},{}",
                r.step,
                r.agent,
                r.t,
                r.position.x,
                r.position.y,
                r.velocity.x,
                r.velocity.y,
                r.action.x,
                r.action.y,
                r.status.code()
            );
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("trace text is utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, SimError> {
        let reader = BufReader::new(input);
        let mut dt_control = None;
        let mut steps = None;
        let mut agents = Vec::new();
        let mut rows = Vec::new();
        let mut seen_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let err = |msg: &str| SimError::TraceParse {
                line: line_no,
                msg: msg.to_string(),
            };
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| err(&format!("bad number '{s}'")))
            };
            if let Some(rest) = line.strip_prefix("#A ") {
                let f: Vec<&str> = rest.split(',').collect();
                if f.len() != 11 {
                    return Err(err("agent summary needs 11 fields"));
                }
                agents.push(AgentSummary {
                    id: f[0].parse().map_err(|_| err("bad agent id"))?,
                    start: Vec2::new(num(f[1])?, num(f[2])?),
                    goal: Vec2::new(num(f[3])?, num(f[4])?),
                    radius: num(f[5])?,
                    v_max: num(f[6])?,
                    final_position: Vec2::new(num(f[7])?, num(f[8])?),
                    status: AgentStatus::parse(f[9]).ok_or_else(|| err("bad status"))?,
                    end_step: match f[10] {
                        "-" => None,
                        s => Some(s.parse().map_err(|_| err("bad end step"))?),
                    },
                });
            } else if let Some(rest) = line.strip_prefix("# dt_control=") {
                let mut it = rest.split_whitespace();
                dt_control = Some(num(it.next().unwrap_or(""))?);
                if let Some(s) = it.next().and_then(|s| s.strip_prefix("steps=")) {
                    steps = Some(s.parse().map_err(|_| err("bad step count"))?);
                }
            } else if line.starts_with('#') || line.trim().is_empty() {
                continue;
            } else if line == ROW_HEADER {
                seen_header = true;
            } else {
                if !seen_header {
                    return Err(err("row before column header"));
                }
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 10 {
                    return Err(err("row needs 10 fields"));
                }
                rows.push(TraceRow {
                    step: f[0].parse().map_err(|_| err("bad step"))?,
                    agent: f[1].parse().map_err(|_| err("bad agent"))?,
                    t: num(f[2])?,
                    position: Vec2::new(num(f[3])?, num(f[4])?),
                    velocity: Vec2::new(num(f[5])?, num(f[6])?),
                    action: Vec2::new(num(f[7])?, num(f[8])?),
                    status: AgentStatus::parse(f[9]).ok_or_else(|| err("bad status"))?,
                });
            }
        }
        let missing = |what: &str| SimError::TraceParse {
            line: 0,
            msg: format!("missing {what}"),
        };
        Ok(EpisodeTrace {
            dt_control: dt_control.ok_or_else(|| missing("dt_control"))?,
            steps: steps.ok_or_else(|| missing("step count"))?,
            agents,
            rows,
        })
    }
}
