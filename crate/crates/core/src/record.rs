//! Per-run outcome records shared by both tasks, stored as JSON lines.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: String,
    pub condition: String,
    pub seed: u64,
    pub success: bool,
    /// 1-based episode of first success, or the censoring value (`max_episodes`)
    /// when the run never succeeded.
    pub episodes_to_success: usize,
    pub episodes_run: usize,
    pub max_episodes: usize,
    pub final_accuracy: Option<f64>,
    pub best_eval_reward: Option<f64>,
    pub wall_time_secs: f64,
    pub config_digest: String,
    pub diagnostic: Option<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
    pub config: Value,
}

impl RunRecord {
    /// Key used for resumable sweeps.
    pub fn key(&self) -> (String, u64) {
        (self.condition.clone(), self.seed)
    }

    /// The record with timing removed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[RunRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: k + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunRecord {
        RunRecord {
            task: "morpho".into(),
            condition: "v3".into(),
            seed: 42,
            success: true,
            episodes_to_success: 17,
            episodes_run: 17,
            max_episodes: 5000,
            final_accuracy: Some(0.984375),
            best_eval_reward: None,
            wall_time_secs: 1.5,
            config_digest: "ab".into(),
            diagnostic: None,
            metadata: BTreeMap::new(),
            config: serde_json::json!({"steps": 35}),
        }
    }

    #[test]
    fn json_lines_round_trip() {
        let recs = vec![sample(), RunRecord { seed: 43, ..sample() }];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 2);
        assert_eq!(read_records(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn bad_line_is_reported() {
        let err = read_records(&b"{}\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
