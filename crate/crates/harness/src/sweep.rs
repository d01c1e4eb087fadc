//! Cells of seeded episodes and grids of cells.

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::episode::{run_episode, EpisodeRecord, Policy};
use crate::error::Result;
use crate::metrics::{aggregate_metrics, MetricsSummary};
use crate::scenario::{sample_scenario, Scenario};
use crate::seeds::{derive_seed, label_id, rng_from, TEST_SCENARIOS};

/// Scenario for evaluation episode `i`. Depends only on the base seed, so
/// every cell of a sweep sees the same ground truths.
pub fn test_scenario(cfg: &RunConfig, i: usize) -> Scenario {
    let mut rng = rng_from(derive_seed(cfg.base_seed, TEST_SCENARIOS, i as u64));
    sample_scenario(&cfg.scenarios, &cfg.env, &mut rng)
}

/// Seed of the agent stream (planner, sensor noise, belief) for episode `i`.
pub fn agent_seed(cfg: &RunConfig, i: usize) -> u64 {
    derive_seed(cfg.base_seed, label_id(&cfg.seed_label()), i as u64)
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub config: RunConfig,
    pub records: Vec<EpisodeRecord>,
    pub summary: MetricsSummary,
}

fn one(policy: &Policy, cfg: &RunConfig, i: usize) -> Result<EpisodeRecord> {
    let scenario = test_scenario(cfg, i);
    let seed = agent_seed(cfg, i);
    run_episode(policy, &scenario, cfg, i, seed, &mut rng_from(seed))
}

/// Runs every episode of one cell; records come back in episode order.
pub fn run_cell(cfg: &RunConfig) -> Result<CellResult> {
    cfg.validate()?;
    let policy = Policy::load(&cfg.policy, &cfg.env)?;
    let records: Vec<EpisodeRecord> = if cfg.parallel {
        (0..cfg.n_episodes)
            .into_par_iter()
            .map(|i| one(&policy, cfg, i))
            .collect::<Result<_>>()?
    } else {
        (0..cfg.n_episodes).map(|i| one(&policy, cfg, i)).collect::<Result<_>>()?
    };
    let summary = aggregate_metrics(&records);
    Ok(CellResult {
        config: cfg.clone(),
        records,
        summary,
    })
}

#[derive(Debug)]
pub struct CellOutcome {
    pub config: RunConfig,
    pub result: Result<CellResult>,
}

/// Runs each cell in turn. A failing cell is recorded and the sweep goes on.
pub fn run_sweep(cells: &[RunConfig]) -> Vec<CellOutcome> {
    cells
        .iter()
        .map(|c| CellOutcome {
            config: c.clone(),
            result: run_cell(c),
        })
        .collect()
}
