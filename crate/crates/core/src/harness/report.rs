//! Per-condition summaries, pairwise tests and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::record::RunRecord;
use crate::rng::Rng;

use super::stats::{fisher_exact_one_sided, log_rank_one_sided, mean_std, permutation_test_rmst, rmst, SurvivalData};

pub const DEFAULT_PERMUTATIONS: usize = 49_999;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub condition: String,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean episodes with failures counted at `tau`.
    pub rmst: f64,
    pub mean_success_episodes: Option<f64>,
    pub std_success_episodes: Option<f64>,
    pub best_eval_reward_mean: Option<f64>,
}

/// One-sided comparisons of `row` against `col`, each asking whether `row`
/// is better.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTest {
    pub row: String,
    pub col: String,
    pub rmst_difference: f64,
    pub permutation_p: f64,
    pub log_rank_p: Option<f64>,
    pub fisher_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub tau: f64,
    pub permutations: usize,
    pub summaries: Vec<ConditionSummary>,
    pub pairwise: Vec<PairwiseTest>,
    pub groups: BTreeMap<String, Vec<RunRecord>>,
}

impl Report {
    pub fn pair(&self, row: &str, col: &str) -> Option<&PairwiseTest> {
        self.pairwise.iter().find(|p| p.row == row && p.col == col)
    }

    pub fn summary(&self, condition: &str) -> Option<&ConditionSummary> {
        self.summaries.iter().find(|s| s.condition == condition)
    }
}

fn condition_order(records: &[RunRecord], order: &[&str]) -> Vec<String> {
    let mut seen: Vec<String> = order
        .iter()
        .filter(|c| records.iter().any(|r| r.condition == **c))
        .map(|c| c.to_string())
        .collect();
    let mut rest: Vec<String> = records
        .iter()
        .map(|r| r.condition.clone())
        .filter(|c| !seen.contains(c))
        .collect();
    rest.sort();
    rest.dedup();
    seen.extend(rest);
    seen
}

pub fn summarize(records: &[RunRecord], tau: f64, permutations: usize, order: &[&str], seed: u64) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::Stats("no records to analyze".into()));
    }
    let conditions = condition_order(records, order);
    let mut groups = BTreeMap::new();
    for c in &conditions {
        let mut g: Vec<RunRecord> = records.iter().filter(|r| &r.condition == c).cloned().collect();
        g.sort_by_key(|r| r.seed);
        groups.insert(c.clone(), g);
    }
    let data: BTreeMap<&String, SurvivalData> = groups
        .iter()
        .map(|(c, g)| (c, SurvivalData::from_records(&g.iter().collect::<Vec<_>>(), tau)))
        .collect();

    let mut summaries = Vec::new();
    for c in &conditions {
        let g = &groups[c];
        let d = &data[c];
        let successes = d.events();
        let success_times: Vec<f64> = d.times.iter().zip(&d.censored).filter(|(_, c)| !**c).map(|(t, _)| *t).collect();
        let ms = mean_std(&success_times);
        let evals: Vec<f64> = g.iter().filter_map(|r| r.best_eval_reward).collect();
        summaries.push(ConditionSummary {
            condition: c.clone(),
            runs: g.len(),
            successes,
            success_rate: successes as f64 / g.len() as f64,
            rmst: rmst(d, tau)?,
            mean_success_episodes: ms.map(|m| m.0),
            std_success_episodes: ms.map(|m| m.1),
            best_eval_reward_mean: mean_std(&evals).map(|m| m.0),
        });
    }

    let mut pairwise = Vec::new();
    let mut rng = Rng::new(seed);
    for a in &conditions {
        for b in &conditions {
            if a == b {
                continue;
            }
            let (da, db) = (&data[a], &data[b]);
            pairwise.push(PairwiseTest {
                row: a.clone(),
                col: b.clone(),
                rmst_difference: rmst(da, tau)? - rmst(db, tau)?,
                permutation_p: permutation_test_rmst(da, db, permutations, tau, &mut rng)?,
                log_rank_p: log_rank_one_sided(da, db).ok(),
                fisher_p: fisher_exact_one_sided(da.events() as u64, da.len() as u64, db.events() as u64, db.len() as u64)?,
            });
        }
    }
    Ok(Report {
        tau,
        permutations,
        summaries,
        pairwise,
        groups,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn summary_csv(report: &Report) -> String {
    let mut s = String::from("condition,runs,successes,success_rate,rmst,mean_success_episodes,std_success_episodes,best_eval_reward_mean\n");
    for c in &report.summaries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            c.condition,
            c.runs,
            c.successes,
            c.success_rate,
            c.rmst,
            opt(c.mean_success_episodes),
            opt(c.std_success_episodes),
            opt(c.best_eval_reward_mean)
        );
    }
    s
}

pub fn summary_text(report: &Report) -> String {
    let mut s = format!("tau = {}, permutations = {}\n\n", report.tau, report.permutations);
    let _ = writeln!(s, "{:<12} {:>5} {:>9} {:>10} {:>12} {:>10}", "condition", "runs", "success", "rmst", "mean(succ)", "std(succ)");
    for c in &report.summaries {
        let _ = writeln!(
            s,
            "{:<12} {:>5} {:>4}/{:<4} {:>10.2} {:>12} {:>10}",
            c.condition,
            c.runs,
            c.successes,
            c.runs,
            c.rmst,
            c.mean_success_episodes.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
            c.std_success_episodes.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
        );
    }
    s.push_str("\none-sided permutation p (row faster than column)\n");
    let names: Vec<&str> = report.summaries.iter().map(|c| c.condition.as_str()).collect();
    let _ = write!(s, "{:<12}", "");
    for n in &names {
        let _ = write!(s, " {n:>10}");
    }
    s.push('\n');
    for r in &names {
        let _ = write!(s, "{r:<12}");
        for c in &names {
            match report.pair(r, c) {
                Some(p) => {
                    let _ = write!(s, " {:>10.5}", p.permutation_p);
                }
                None => {
                    let _ = write!(s, " {:>10}", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

pub fn pairwise_csv(report: &Report) -> String {
    let mut s = String::from("row,col,rmst_difference,permutation_p,log_rank_p,fisher_p\n");
    for p in &report.pairwise {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.row,
            p.col,
            p.rmst_difference,
            p.permutation_p,
            opt(p.log_rank_p),
            p.fisher_p
        );
    }
    s
}

pub fn distributions_csv(report: &Report) -> String {
    let mut s = String::from("condition,seed,success,episodes_to_success,censored,final_accuracy,best_eval_reward\n");
    for c in &report.summaries {
        for r in &report.groups[&c.condition] {
            let censored = !(r.success && r.episodes_to_success as f64 <= report.tau);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.condition,
                r.seed,
                r.success,
                r.episodes_to_success,
                censored,
                opt(r.final_accuracy),
                opt(r.best_eval_reward)
            );
        }
    }
    s
}

/// Writes `summary.csv`, `summary.txt`, `pairwise.csv` and `distributions.csv`.
pub fn emit_report(report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.csv"), summary_csv(report))?;
    fs::write(dir.join("summary.txt"), summary_text(report))?;
    fs::write(dir.join("pairwise.csv"), pairwise_csv(report))?;
    fs::write(dir.join("distributions.csv"), distributions_csv(report))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn rec(condition: &str, seed: u64, success: bool, episodes: usize) -> RunRecord {
        RunRecord {
            task: "morpho".into(),
            condition: condition.into(),
            seed,
            success,
            episodes_to_success: episodes,
            episodes_run: episodes,
            max_episodes: 100,
            final_accuracy: Some(1.0),
            best_eval_reward: None,
            wall_time_secs: 0.0,
            config_digest: String::new(),
            diagnostic: None,
            metadata: Default::default(),
            config: Value::Null,
        }
    }

    fn records() -> Vec<RunRecord> {
        let mut v = Vec::new();
        for s in 0..5 {
            v.push(rec("lr3", s, true, 10 + s as usize));
            v.push(rec("v3", s, s < 3, if s < 3 { 60 + s as usize } else { 100 }));
        }
        v
    }

    #[test]
    fn summary_values() {
        let r = summarize(&records(), 100.0, 199, &["v3", "lr3"], 7).unwrap();
        assert_eq!(r.summaries[0].condition, "v3");
        let lr = r.summary("lr3").unwrap();
        assert_eq!(lr.successes, 5);
        assert_eq!(lr.rmst, 12.0);
        let v = r.summary("v3").unwrap();
        assert_eq!(v.successes, 3);
        assert!((v.rmst - (60.0 + 61.0 + 62.0 + 200.0) / 5.0).abs() < 1e-12);
        assert_eq!(r.pairwise.len(), 2);
        let p = r.pair("lr3", "v3").unwrap();
        assert!(p.permutation_p < 0.05);
        assert!(p.rmst_difference < 0.0);
        assert!(p.log_rank_p.unwrap() < 0.05);
    }

    #[test]
    fn tau_censors_late_successes() {
        let r = summarize(&records(), 50.0, 9, &[], 1).unwrap();
        assert_eq!(r.summary("v3").unwrap().successes, 0);
        assert_eq!(r.summary("v3").unwrap().rmst, 50.0);
    }

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = summarize(&records(), 100.0, 99, &["v3", "lr3"], 3).unwrap();
        emit_report(&r, dir.path()).unwrap();
        for f in ["summary.csv", "summary.txt", "pairwise.csv", "distributions.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let dist = std::fs::read_to_string(dir.path().join("distributions.csv")).unwrap();
        assert_eq!(dist.lines().count(), 11);
        assert!(dist.contains("v3,4,false,100,true,1,"));
    }

    #[test]
    fn empty_is_error() {
        assert!(summarize(&[], 10.0, 9, &[], 0).is_err());
    }
}
