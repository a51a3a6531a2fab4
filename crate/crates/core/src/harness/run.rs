//! Replication loop with an append-only record log.
//!
//! Layout of an output directory:
//! - `config.json`: the resolved config, written before the first record
//! - `records.jsonl`: one line per replication, in replication order
//! - `summary.json`: aggregates, recomputed from the log and checked on write
//! - `metadata.json`: config echo, version and timings

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Study};
use super::study::{CvRecord, LepskiRecord};
use super::summary::{summarize_cv, summarize_lepski, Summary};
use crate::error::{Error, Result};
use crate::processes::StreamSeed;

pub const CONFIG_FILE: &str = "config.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const METADATA_FILE: &str = "metadata.json";

/// Share of failed replications tolerated before the run is rejected.
pub const FAILURE_BUDGET: f64 = 0.05;

const CHUNK_PER_WORKER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReplicationRecord {
    Cv(CvRecord),
    Lepski(LepskiRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok { record: ReplicationRecord },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub replication: usize,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl Record {
    pub fn cv(&self) -> Option<&CvRecord> {
        match &self.outcome {
            Outcome::Ok {
                record: ReplicationRecord::Cv(r),
            } => Some(r),
            _ => None,
        }
    }

    pub fn lepski(&self) -> Option<&LepskiRecord> {
        match &self.outcome {
            Outcome::Ok {
                record: ReplicationRecord::Lepski(r),
            } => Some(r),
            _ => None,
        }
    }

    pub fn failed(&self) -> bool {
        matches!(self.outcome, Outcome::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_seconds: f64,
    pub replication_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub package: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub records: usize,
    pub failed: usize,
    /// Records found on disk when the run started.
    pub resumed_from: usize,
    pub timings: Timings,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<Record>,
    pub summary: Summary,
    pub out_dir: PathBuf,
}

impl ExperimentResult {
    pub fn cv_records(&self) -> Vec<&CvRecord> {
        self.records.iter().filter_map(Record::cv).collect()
    }

    pub fn lepski_records(&self) -> Vec<&LepskiRecord> {
        self.records.iter().filter_map(Record::lepski).collect()
    }

    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| r.failed()).count()
    }
}

pub fn replicate(study: &Study, seed: StreamSeed) -> Result<ReplicationRecord> {
    match study {
        Study::Cv(s) => s.replicate(seed).map(ReplicationRecord::Cv),
        Study::Lepski(s) => s.replicate(seed).map(ReplicationRecord::Lepski),
    }
}

fn run_one(study: &Study, base_seed: u64, replication: usize) -> Record {
    let outcome = match replicate(study, StreamSeed::new(base_seed, replication as u64)) {
        Ok(record) => Outcome::Ok { record },
        Err(e) => Outcome::Failed { error: e.to_string() },
    };
    Record { replication, outcome }
}

/// Records on disk, keeping the longest prefix of well-formed lines whose
/// replication indices run `0, 1, 2, ...`. Returns the records and the byte
/// length of that prefix.
fn read_valid_prefix(path: &Path) -> Result<(Vec<Record>, u64)> {
    let Ok(file) = File::open(path) else {
        return Ok((Vec::new(), 0));
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut valid_len = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 || !line.ends_with('\n') {
            break;
        }
        match serde_json::from_str::<Record>(&line) {
            Ok(r) if r.replication == records.len() => records.push(r),
            _ => break,
        }
        valid_len += read as u64;
    }
    Ok((records, valid_len))
}

pub fn load_records(dir: &Path) -> Result<Vec<Record>> {
    Ok(read_valid_prefix(&dir.join(RECORDS_FILE))?.0)
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    builder.build().map_err(|e| Error::Config(e.to_string()))
}

/// Checks that `dir` belongs to this config (or is fresh) and records the
/// resolved config there.
fn claim_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(CONFIG_FILE);
    let mut echo = cfg.clone();
    // run-time placement does not change the records
    echo.workers = None;
    echo.out_dir = None;
    if let Ok(text) = fs::read_to_string(&path) {
        let existing: ExperimentConfig = serde_json::from_str(&text)?;
        if existing != echo {
            return Err(Error::Config(format!(
                "{} holds records of a different experiment",
                dir.display()
            )));
        }
        return Ok(());
    }
    fs::write(&path, echo.to_json())?;
    Ok(())
}

/// Runs replications until `target` records exist in `dir` (capped at the
/// configured count), resuming from whatever valid records are on disk.
/// Returns the number of records present.
pub fn run_until(cfg: &ExperimentConfig, dir: &Path, target: usize) -> Result<usize> {
    let study = cfg.study()?;
    extend_records(cfg, &study, dir, target).map(|(n, _)| n)
}

fn extend_records(cfg: &ExperimentConfig, study: &Study, dir: &Path, target: usize) -> Result<(usize, usize)> {
    claim_dir(cfg, dir)?;
    let path = dir.join(RECORDS_FILE);
    let (existing, valid_len) = read_valid_prefix(&path)?;
    let resumed_from = existing.len();
    let file = OpenOptions::new().create(true).write(true).truncate(false).open(&path)?;
    file.set_len(valid_len)?;
    drop(file);
    let mut out = OpenOptions::new().append(true).open(&path)?;

    let target = target.min(cfg.replications);
    let pool = pool(cfg.workers)?;
    let chunk = pool.current_num_threads().max(1) * CHUNK_PER_WORKER;
    let mut next = resumed_from;
    while next < target {
        let end = (next + chunk).min(target);
        let batch: Vec<Record> =
            pool.install(|| (next..end).into_par_iter().map(|r| run_one(study, cfg.base_seed, r)).collect());
        let mut buf = String::new();
        for record in &batch {
            buf.push_str(&serde_json::to_string(record).map_err(|e| Error::Io(e.to_string()))?);
            buf.push('\n');
        }
        out.write_all(buf.as_bytes())?;
        out.flush()?;
        next = end;
    }
    Ok((next.max(resumed_from), resumed_from))
}

fn summarize(study: &Study, records: &[Record]) -> Summary {
    let failed = records.iter().filter(|r| r.failed()).count();
    match study {
        Study::Cv(s) => {
            let ok: Vec<&CvRecord> = records.iter().filter_map(Record::cv).collect();
            Summary::Cv(summarize_cv(&ok, failed, s.cv.grid.values(), s.h_opt_formula()))
        }
        Study::Lepski(s) => {
            let ok: Vec<&LepskiRecord> = records.iter().filter_map(Record::lepski).collect();
            let truth = (0..s.u_grid.len())
                .map(|i| s.truth.valid[i].then(|| s.truth.g[i][0]))
                .collect();
            Summary::Lepski(summarize_lepski(&ok, failed, truth))
        }
    }
}

/// Runs (or resumes) the full experiment in `dir`.
///
/// Replications that fail are logged with their error and left out of the
/// aggregates; if more than [`FAILURE_BUDGET`] of them fail the sidecars are
/// still written and [`Error::FailureBudget`] is returned.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentResult> {
    let start = Instant::now();
    let study = cfg.study()?;
    let setup_seconds = start.elapsed().as_secs_f64();
    let (_, resumed_from) = extend_records(cfg, &study, dir, cfg.replications)?;
    let replication_seconds = start.elapsed().as_secs_f64() - setup_seconds;

    let records = load_records(dir)?;
    if records.len() != cfg.replications {
        return Err(Error::Io(format!(
            "expected {} records, found {}",
            cfg.replications,
            records.len()
        )));
    }
    let failed = records.iter().filter(|r| r.failed()).count();

    let summary = summarize(&study, &records);
    let summary_path = dir.join(SUMMARY_FILE);
    fs::write(&summary_path, serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    let reread: Summary = serde_json::from_str(&fs::read_to_string(&summary_path)?)?;
    if reread != summarize(&study, &load_records(dir)?) {
        return Err(Error::Io("summary does not match the recomputed aggregates".into()));
    }

    let metadata = Metadata {
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        records: records.len(),
        failed,
        resumed_from,
        timings: Timings {
            setup_seconds,
            replication_seconds,
        },
    };
    fs::write(
        dir.join(METADATA_FILE),
        serde_json::to_string_pretty(&metadata).expect("metadata serializes"),
    )?;

    if failed as f64 > FAILURE_BUDGET * cfg.replications as f64 {
        return Err(Error::FailureBudget {
            failed,
            total: cfg.replications,
        });
    }
    Ok(ExperimentResult {
        config: cfg.clone(),
        records,
        summary,
        out_dir: dir.to_path_buf(),
    })
}

/// Reads a finished run back from its directory.
pub fn load_result(dir: &Path) -> Result<ExperimentResult> {
    let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    let records = load_records(dir)?;
    if records.is_empty() {
        return Err(Error::EmptyResult);
    }
    let text = fs::read_to_string(dir.join(SUMMARY_FILE)).map_err(|_| Error::EmptyResult)?;
    let summary: Summary = serde_json::from_str(&text)?;
    Ok(ExperimentResult {
        config,
        records,
        summary,
        out_dir: dir.to_path_buf(),
    })
}
