//! Output files: metrics.csv, episodes.jsonl, trajectories/<episode>.csv and
//! run_config.json.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::episode::{EpisodeRecord, StepTrace};
use crate::error::{HarnessError, Result};
use crate::sweep::{CellOutcome, CellResult};

pub const METRICS_HEADER: [&str; 9] = [
    "policy",
    "n_particles",
    "zeta",
    "episodes",
    "sr",
    "sr_ci",
    "mtd",
    "st",
    "mean_steps",
];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(HarnessError::io(path))?))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(HarnessError::io(path))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        w.write_all(b"\n").map_err(HarnessError::io(path))?;
    }
    w.flush().map_err(HarnessError::io(path))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per cell; failed cells keep their axes and leave metrics empty.
pub fn write_metrics(path: &Path, outcomes: &[CellOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let e = csv_err(path);
    w.write_record(METRICS_HEADER).map_err(&e)?;
    for o in outcomes {
        let c = &o.config;
        let mut row = vec![c.policy.to_string(), c.n_particles.to_string(), c.cessation_threshold.to_string()];
        match &o.result {
            Ok(r) => {
                let s = &r.summary;
                row.extend([
                    s.episodes.to_string(),
                    s.sr.to_string(),
                    s.sr_ci.to_string(),
                    opt(s.mtd),
                    opt(s.st),
                    s.mean_steps.to_string(),
                ]);
            }
            Err(_) => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        w.write_record(&row).map_err(&e)?;
    }
    w.flush().map_err(HarnessError::io(path))
}

pub fn write_trajectory(path: &Path, trace: &[StepTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let e = csv_err(path);
    if trace.is_empty() {
        w.write_record([
            "step",
            "x",
            "y",
            "concentration",
            "est_x",
            "est_y",
            "std_x",
            "std_y",
            "ess",
            "dist_to_goal",
            "dist_to_estimate",
        ])
        .map_err(&e)?;
    }
    for row in trace {
        w.serialize(row).map_err(&e)?;
    }
    w.flush().map_err(HarnessError::io(path))
}

/// episodes.jsonl plus one trajectory file per traced episode.
pub fn write_episodes(dir: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut sorted: Vec<&EpisodeRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.episode);
    write_jsonl(&dir.join("episodes.jsonl"), sorted.iter().copied())?;
    for r in sorted.iter().filter(|r| !r.trace.is_empty()) {
        write_trajectory(&dir.join("trajectories").join(format!("{}.csv", r.episode)), &r.trace)?;
    }
    Ok(())
}

/// Everything `ste run` writes for one cell.
pub fn export_run(dir: &Path, cell: CellResult) -> Result<()> {
    write_json(&dir.join("run_config.json"), &cell.config)?;
    write_episodes(dir, &cell.records)?;
    let outcome = CellOutcome {
        config: cell.config.clone(),
        result: Ok(cell),
    };
    write_metrics(&dir.join("metrics.csv"), std::slice::from_ref(&outcome))
}

/// Directory name of a sweep cell.
pub fn cell_dir_name(index: usize, outcome: &CellOutcome) -> String {
    let c = &outcome.config;
    format!("{index:03}_{}_n{}_z{}", c.policy.label(), c.n_particles, c.cessation_threshold)
}

#[derive(Serialize)]
struct Failure<'a> {
    cell: usize,
    policy: String,
    n_particles: usize,
    zeta: f64,
    error: &'a str,
}

/// Top-level metrics.csv, per-cell episode files and a failures.jsonl when
/// any cell failed. `resolved` is the sweep configuration as run.
pub fn export_sweep<C: Serialize>(dir: &Path, resolved: &C, outcomes: &[CellOutcome]) -> Result<()> {
    write_json(&dir.join("run_config.json"), resolved)?;
    write_metrics(&dir.join("metrics.csv"), outcomes)?;
    let mut failures = Vec::new();
    let messages: Vec<String> = outcomes
        .iter()
        .map(|o| o.result.as_ref().err().map(|e| e.to_string()).unwrap_or_default())
        .collect();
    for (i, o) in outcomes.iter().enumerate() {
        match &o.result {
            Ok(cell) => {
                let sub = dir.join("cells").join(cell_dir_name(i, o));
                write_json(&sub.join("run_config.json"), &cell.config)?;
                write_episodes(&sub, &cell.records)?;
            }
            Err(_) => failures.push(Failure {
                cell: i,
                policy: o.config.policy.to_string(),
                n_particles: o.config.n_particles,
                zeta: o.config.cessation_threshold,
                error: &messages[i],
            }),
        }
    }
    let path = dir.join("failures.jsonl");
    if failures.is_empty() {
        if path.exists() {
            fs::remove_file(&path).map_err(HarnessError::io(&path))?;
        }
        Ok(())
    } else {
        write_jsonl(&path, failures.iter())
    }
}
