//! Resumable multi-run sweeps writing one JSON line per finished run.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::Path;
use std::sync::mpsc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::record::{read_records, write_records, RunRecord};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SweepJob {
    pub condition: String,
    pub seed: u64,
}

pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_records(BufReader::new(File::open(path)?))
}

/// Runs every job whose `(condition, seed)` is not already in `path`.
///
/// Workers send finished records to a single writer that appends and flushes
/// each line, so an interrupted sweep keeps everything completed so far. The
/// file is rewritten sorted by condition and seed at the end.
pub fn run_sweep<F>(jobs: &[SweepJob], path: &Path, threads: usize, run: F) -> Result<Vec<RunRecord>>
where
    F: Fn(&SweepJob) -> Result<RunRecord> + Sync,
{
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let existing = load_records(path)?;
    let done: BTreeSet<(String, u64)> = existing.iter().map(RunRecord::key).collect();
    let pending: Vec<&SweepJob> = jobs
        .iter()
        .filter(|j| !done.contains(&(j.condition.clone(), j.seed)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let (tx, rx) = mpsc::channel::<RunRecord>();
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let writer = std::thread::spawn(move || -> Result<()> {
        for r in rx {
            serde_json::to_writer(&mut file, &r)?;
            file.write_all(b"\n")?;
            file.flush()?;
        }
        Ok(())
    });

    let results: Vec<Result<()>> = pool.install(|| {
        pending
            .par_iter()
            .map_with(tx, |tx, job| {
                let record = run(job)?;
                tx.send(record).map_err(|e| Error::InvalidArgument(format!("record writer stopped: {e}")))
            })
            .collect()
    });
    writer
        .join()
        .map_err(|_| Error::InvalidArgument("record writer panicked".into()))??;
    results.into_iter().collect::<Result<Vec<()>>>()?;

    let mut all = load_records(path)?;
    all.sort_by(|a, b| a.key().cmp(&b.key()));
    all.dedup_by(|a, b| a.key() == b.key());
    let tmp = path.with_extension("jsonl.tmp");
    write_records(File::create(&tmp)?, &all)?;
    fs::rename(&tmp, path)?;
    Ok(all)
}
