//! `ste train`: learner training, checkpoint and optional greedy evaluation.

use std::path::{Path, PathBuf};

use serde::Serialize;
use ste_core::dqn::{train as train_learner, TrainingLog};
use ste_core::QNetwork;

use crate::config::TrainConfig;
use crate::error::Result;
use crate::export::{export_run, write_json, write_jsonl};
use crate::metrics::MetricsSummary;
use crate::scenario::sample_scenario;
use crate::seeds::{derive_seed, rng_from, TRAIN};
use crate::sweep::run_cell;

#[derive(Debug)]
pub struct TrainOutcome {
    pub network: QNetwork,
    pub log: TrainingLog,
    pub checkpoint: PathBuf,
    pub evaluation: Option<MetricsSummary>,
}

#[derive(Serialize)]
struct TrainSummary {
    episodes: usize,
    updates: u64,
    target_syncs: u64,
    ceased_fraction: f64,
}

/// Trains on scenarios from the training seed namespace. Evaluation, when
/// enabled, uses the held-out namespace.
pub fn train_network(cfg: &TrainConfig) -> Result<(QNetwork, TrainingLog)> {
    cfg.validate()?;
    let mut rng = rng_from(derive_seed(cfg.base_seed, TRAIN, 0));
    let belief_cfg = cfg.belief_config();
    let (net, log) = train_learner(
        &cfg.env,
        &belief_cfg,
        &cfg.learner,
        |r| {
            let s = sample_scenario(&cfg.scenarios, &cfg.env, r);
            (s.source, s.start)
        },
        &mut rng,
    )?;
    Ok((net, log))
}

/// Trains, writes checkpoint.json, training_log.jsonl and
/// training_summary.json under `out`, then evaluates into `out/eval`.
pub fn run_training(cfg: &TrainConfig, out: &Path) -> Result<TrainOutcome> {
    let (network, log) = train_network(cfg)?;
    write_json(&out.join("run_config.json"), cfg)?;
    let checkpoint = out.join("checkpoint.json");
    write_json(&checkpoint, &network.to_checkpoint())?;
    write_jsonl(&out.join("training_log.jsonl"), log.episodes.iter())?;
    let n = log.episodes.len().max(1) as f64;
    write_json(
        &out.join("training_summary.json"),
        &TrainSummary {
            episodes: log.episodes.len(),
            updates: log.updates,
            target_syncs: log.target_syncs,
            ceased_fraction: log.episodes.iter().filter(|e| e.ceased).count() as f64 / n,
        },
    )?;
    let evaluation = if cfg.eval_episodes > 0 {
        let cell = run_cell(&cfg.eval_config(&checkpoint))?;
        let summary = cell.summary.clone();
        export_run(&out.join("eval"), cell)?;
        Some(summary)
    } else {
        None
    };
    Ok(TrainOutcome {
        network,
        log,
        checkpoint,
        evaluation,
    })
}
