//! Trajectory and event records of one mission execution.

use crate::automaton::Symbol;
use serde::Serialize;

/// One control period of the execution log.
#[derive(Clone, Debug, Serialize)]
pub struct TickRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub mode: String,
    pub gripper: u8,
    pub carried: String,
    pub min_clearance: f64,
    pub nba_state: String,
}

/// A discrete event: symbolic transitions, mode switches, fix bookkeeping.
#[derive(Clone, Debug, Serialize)]
pub struct Event {
    pub t: f64,
    pub seq: usize,
    pub line: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Verdict {
    Satisfied { accepts: usize },
    Failed { reason: String },
}

impl Verdict {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, Verdict::Satisfied { .. })
    }
}

/// Full record of one run: per-tick rows, ordered events, the moves the
/// symbolic layer committed, and the final verdict.
#[derive(Clone, Debug)]
pub struct TrajectoryLog {
    pub ticks: Vec<TickRecord>,
    pub events: Vec<Event>,
    /// achieved symbols with their witness runs, in commit order
    pub advances: Vec<(Symbol, Vec<usize>)>,
    pub verdict: Verdict,
}

impl TrajectoryLog {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("t,x,y,theta,v,omega,mode,gripper,carried,min_clearance,nba_state\n");
        for r in &self.ticks {
            out.push_str(&format!(
                "{:.4},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{:.6},{}\n",
                r.t,
                r.x,
                r.y,
                r.theta,
                r.v,
                r.omega,
                r.mode,
                r.gripper,
                r.carried,
                r.min_clearance,
                r.nba_state
            ));
        }
        out
    }

    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).unwrap());
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Vec<TickRecord>, String> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(format!("line {}: expected 11 columns, got {}", i + 1, f.len()));
            }
            let num = |s: &str| -> Result<f64, String> {
                s.parse().map_err(|e| format!("line {}: {e}", i + 1))
            };
            out.push(TickRecord {
                t: num(f[0])?,
                x: num(f[1])?,
                y: num(f[2])?,
                theta: num(f[3])?,
                v: num(f[4])?,
                omega: num(f[5])?,
                mode: f[6].to_string(),
                gripper: f[7].parse().map_err(|e| format!("line {}: {e}", i + 1))?,
                carried: f[8].to_string(),
                min_clearance: num(f[9])?,
                nba_state: f[10].to_string(),
            });
        }
        Ok(out)
    }

    pub fn min_clearance(&self) -> f64 {
        self.ticks
            .iter()
            .map(|r| r.min_clearance)
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of Fix-mode episodes: transitions ltl -> fix in the event log.
    pub fn fix_episodes(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.line == "MODE fix")
            .count()
    }
}
