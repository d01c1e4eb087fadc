//! Evaluation episodes for planners and trained policies.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use ste_core::dqn::{featurize, greedy_action, Checkpoint};
use ste_core::{planners, EnvConfig, PlannerKind, QNetwork, Search};

use crate::config::{PolicySpec, RunConfig};
use crate::error::{HarnessError, Result};
use crate::scenario::Scenario;

/// A loaded policy, ready to act.
#[derive(Clone, Debug)]
pub enum Policy {
    Planner(PlannerKind),
    Dqn(QNetwork),
}

impl Policy {
    /// Resolves a spec, reading the checkpoint if there is one.
    pub fn load(spec: &PolicySpec, env: &EnvConfig) -> Result<Self> {
        match spec {
            PolicySpec::Planner(k) => Ok(Policy::Planner(*k)),
            PolicySpec::Dqn(path) => {
                let net = load_checkpoint(path)?;
                if net.input_len() != ste_core::dqn::FEATURE_LEN || net.action_count() != env.action_set.len() {
                    return Err(HarnessError::Checkpoint {
                        path: path.clone(),
                        message: format!(
                            "network maps {} inputs to {} actions, environment needs {} to {}",
                            net.input_len(),
                            net.action_count(),
                            ste_core::dqn::FEATURE_LEN,
                            env.action_set.len()
                        ),
                    });
                }
                Ok(Policy::Dqn(net))
            }
        }
    }
}

pub fn load_checkpoint(path: &Path) -> Result<QNetwork> {
    let ck_err = |message: String| HarnessError::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| ck_err(e.to_string()))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| ck_err(e.to_string()))?;
    QNetwork::from_checkpoint(&ck).map_err(|e| ck_err(e.to_string()))
}

/// Agent state after one step (step 0 is the initial reading).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub concentration: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub std_x: f64,
    pub std_y: f64,
    pub ess: f64,
    pub dist_to_goal: f64,
    pub dist_to_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub seed: u64,
    pub scenario: Scenario,
    pub ceased: bool,
    pub success: bool,
    pub steps: usize,
    pub traveled_distance: f64,
    pub wall_time: f64,
    pub final_estimate_error: f64,
    pub degeneracy_events: u64,
    #[serde(skip)]
    pub trace: Vec<StepTrace>,
}

impl EpisodeRecord {
    /// Same record with the wall clock zeroed, for determinism checks.
    pub fn without_wall_time(&self) -> Self {
        Self {
            wall_time: 0.0,
            ..self.clone()
        }
    }
}

fn trace_row(search: &Search) -> StepTrace {
    let b = search.belief();
    let pos = search.position();
    let est = b.estimated_position();
    StepTrace {
        step: search.steps(),
        x: pos.x,
        y: pos.y,
        concentration: search.last_observation().concentration,
        est_x: est.x,
        est_y: est.y,
        std_x: b.std_of(ste_core::Param::X),
        std_y: b.std_of(ste_core::Param::Y),
        ess: b.effective_sample_size(),
        dist_to_goal: pos.distance(&search.source().position()),
        dist_to_estimate: pos.distance(&est),
    }
}

/// Runs one evaluation episode: initial reading, then act, observe, update
/// and test for cessation until the belief ceases or steps run out.
pub fn run_episode<R: Rng + ?Sized>(
    policy: &Policy,
    scenario: &Scenario,
    cfg: &RunConfig,
    episode: usize,
    seed: u64,
    rng: &mut R,
) -> Result<EpisodeRecord> {
    let clock = Instant::now();
    let env = &cfg.env;
    let belief_cfg = cfg.belief_config();
    let mut search = Search::start(scenario.source, scenario.start, env, &belief_cfg, rng)?;
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(trace_row(&search));
    }
    while !search.is_finished(env) {
        let mv = match policy {
            Policy::Planner(kind) => {
                planners::select_action(*kind, search.belief(), search.position(), &cfg.lookahead, env, rng)
            }
            Policy::Dqn(net) => {
                let f = featurize(&search.position(), search.last_observation(), search.belief(), env);
                env.moves()[greedy_action(&net.q_values(f.as_slice()))]
            }
        };
        search.advance(mv, env, &belief_cfg, rng)?;
        if cfg.record_trace {
            trace.push(trace_row(&search));
        }
    }
    let final_estimate_error = search.estimate_error();
    let ceased = search.ceased();
    Ok(EpisodeRecord {
        episode,
        seed,
        scenario: *scenario,
        ceased,
        success: ceased && final_estimate_error <= cfg.success_radius,
        steps: search.steps(),
        traveled_distance: search.traveled(),
        wall_time: clock.elapsed().as_secs_f64(),
        final_estimate_error,
        degeneracy_events: search.belief().degeneracy_events(),
        trace,
    })
}
