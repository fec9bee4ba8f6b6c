use std::io::Write;

use super::{Action, Outcome};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    /// Observation the action was chosen from.
    pub observation: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub done: bool,
    pub outcome: Outcome,
}

/// CSV with columns `step, obs0..obs7, action, reward, done, outcome`.
pub fn write_trajectory_csv<W: Write>(mut w: W, rows: &[TrajectoryRow]) -> Result<()> {
    write!(w, "step")?;
    for k in 0..8 {
        write!(w, ",obs{k}")?;
    }
    writeln!(w, ",action,reward,done,outcome")?;
    for r in rows {
        write!(w, "{}", r.step)?;
        for v in &r.observation {
            write!(w, ",{v}")?;
        }
        writeln!(
            w,
            ",{},{},{},{}",
            r.action.index(),
            r.reward,
            u8::from(r.done),
            r.outcome.as_str()
        )?;
    }
    Ok(())
}
