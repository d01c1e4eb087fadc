//! DQN driven by the cessation self-reward: the only non-zero reward is the
//! one the agent pays itself when its own belief has converged.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{bellman_loss_and_gradient, QNetwork, Transition};
use super::replay::ReplayBuffer;
use crate::belief::{Belief, BeliefConfig};
use crate::env::{EnvConfig, Observation, Param, Position, SourceTerm};
use crate::error::{config_err, Result, SteError};
use crate::scalar::Scalar;
use crate::search::Search;

pub const FEATURE_LEN: usize = 7;

/// `[x/Lx, y/Ly, x̂/Lx, ŷ/Ly, std_x/Lx, std_y/Ly, ln(1 + c)]`, positions
/// measured from the domain's lower corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Features<T>(pub [T; FEATURE_LEN]);

impl<T: Scalar> Features<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

pub fn featurize<T: Scalar>(pos: &Position<T>, obs: &Observation<T>, belief: &Belief<T>, env: &EnvConfig<T>) -> Features<T> {
    let lx = env.domain.width();
    let ly = env.domain.height();
    let origin = env.domain.min;
    let est = belief.estimated_position();
    Features([
        (pos.x - origin.x) / lx,
        (pos.y - origin.y) / ly,
        (est.x - origin.x) / lx,
        (est.y - origin.y) / ly,
        belief.std_of(Param::X) / lx,
        belief.std_of(Param::Y) / ly,
        obs.concentration.max(T::zero()).ln_1p(),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig<T> {
    pub lr: T,
    pub gamma: T,
    pub minibatch: usize,
    pub replay_capacity: usize,
    /// Environment steps between target-network syncs.
    pub target_update_interval: usize,
    pub epsilon_start: T,
    pub epsilon_end: T,
    /// Fraction of training episodes over which ε decays linearly.
    pub epsilon_decay_fraction: T,
    pub terminal_reward: T,
    pub episodes: usize,
    pub hidden: Vec<usize>,
}

impl<T: Scalar> Default for LearnerConfig<T> {
    fn default() -> Self {
        Self {
            lr: T::lit(1e-4),
            gamma: T::lit(0.99),
            minibatch: 64,
            replay_capacity: 1000,
            target_update_interval: 100,
            epsilon_start: T::one(),
            epsilon_end: T::lit(0.05),
            epsilon_decay_fraction: T::lit(0.8),
            terminal_reward: T::lit(100.0),
            episodes: 2000,
            hidden: vec![128, 128, 128],
        }
    }
}

impl<T: Scalar> LearnerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > T::zero()) {
            return config_err("lr must be positive");
        }
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return config_err("gamma must lie in (0, 1)");
        }
        if self.minibatch == 0 || self.replay_capacity < self.minibatch {
            return config_err("need 0 < minibatch <= replay_capacity");
        }
        if self.target_update_interval == 0 {
            return config_err("target_update_interval must be positive");
        }
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(self.epsilon_start) || !unit(self.epsilon_end) || self.epsilon_end > self.epsilon_start {
            return config_err("epsilon schedule must satisfy 0 <= end <= start <= 1");
        }
        if !unit(self.epsilon_decay_fraction) {
            return config_err("epsilon_decay_fraction must lie in [0, 1]");
        }
        if !(self.terminal_reward > T::zero()) {
            return config_err("terminal_reward must be positive");
        }
        if self.episodes == 0 {
            return config_err("episodes must be positive");
        }
        if self.hidden.contains(&0) {
            return config_err("hidden layer widths must be positive");
        }
        Ok(())
    }

    pub fn architecture(&self, actions: usize) -> Vec<usize> {
        let mut arch = vec![FEATURE_LEN];
        arch.extend(&self.hidden);
        arch.push(actions);
        arch
    }

    /// Exploration rate for 0-based `episode`: linear from start to end over
    /// the first `epsilon_decay_fraction` of training, flat afterwards.
    pub fn epsilon_at(&self, episode: usize) -> T {
        let decay = (self.epsilon_decay_fraction * T::from_usize_lossy(self.episodes))
            .floor()
            .to_usize()
            .unwrap_or(0);
        if episode >= decay {
            return self.epsilon_end;
        }
        let frac = T::from_usize_lossy(episode) / T::from_usize_lossy(decay);
        self.epsilon_start - (self.epsilon_start - self.epsilon_end) * frac
    }
}

/// Index of the largest value; the first one wins ties.
pub fn greedy_action<T: Scalar>(qvals: &[T]) -> usize {
    let mut best = 0;
    for (i, q) in qvals.iter().enumerate().skip(1) {
        if *q > qvals[best] {
            best = i;
        }
    }
    best
}

/// Uniform action with probability `epsilon`, greedy otherwise. Always
/// consumes one uniform draw, plus one index draw when exploring.
pub fn epsilon_greedy<T: Scalar, R: Rng + ?Sized>(qvals: &[T], epsilon: T, rng: &mut R) -> usize {
    assert!(!qvals.is_empty(), "epsilon_greedy needs at least one action");
    if T::unit_uniform(rng) < epsilon {
        rng.random_range(0..qvals.len())
    } else {
        greedy_action(qvals)
    }
}

/// One SGD step on the mean squared Bellman error. Returns the loss before
/// the step.
pub fn td_update<T: Scalar>(
    net: &mut QNetwork<T>,
    target: &QNetwork<T>,
    batch: &[&Transition<T>],
    cfg: &LearnerConfig<T>,
) -> Result<T> {
    let (loss, grad) = bellman_loss_and_gradient(net, target, batch, cfg.gamma);
    if !loss.is_finite() {
        return Err(SteError::Divergence {
            update: 0,
            loss: loss.to_f64_lossy(),
        });
    }
    net.apply_gradient(&grad, cfg.lr);
    Ok(loss)
}

/// Makes `target` an exact copy of `net`.
pub fn sync_target<T: Scalar>(net: &QNetwork<T>, target: &mut QNetwork<T>) -> Result<()> {
    target.copy_from(net)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    pub ceased: bool,
    pub total_reward: f64,
    pub final_estimate_error: f64,
    pub epsilon: f64,
    /// Mean pre-step loss over the updates made during the episode.
    pub mean_loss: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeLog>,
    pub updates: u64,
    pub target_syncs: u64,
}

/// Learner state carried across episodes.
pub struct Trainer<T> {
    cfg: LearnerConfig<T>,
    net: QNetwork<T>,
    target: QNetwork<T>,
    replay: ReplayBuffer<T>,
    env_steps: u64,
    log: TrainingLog,
}

impl<T: Scalar> Trainer<T> {
    pub fn new<R: Rng + ?Sized>(env: &EnvConfig<T>, cfg: LearnerConfig<T>, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        env.validate()?;
        let net = QNetwork::new(&cfg.architecture(env.action_set.len()), rng)?;
        let target = net.clone();
        Ok(Self {
            replay: ReplayBuffer::new(cfg.replay_capacity),
            cfg,
            net,
            target,
            env_steps: 0,
            log: TrainingLog::default(),
        })
    }

    pub fn network(&self) -> &QNetwork<T> {
        &self.net
    }

    pub fn replay(&self) -> &ReplayBuffer<T> {
        &self.replay
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    /// Runs one training episode on `source` from `start`.
    pub fn run_episode<R: Rng + ?Sized>(
        &mut self,
        episode: usize,
        source: SourceTerm<T>,
        start: Position<T>,
        env: &EnvConfig<T>,
        belief_cfg: &BeliefConfig<T>,
        rng: &mut R,
    ) -> Result<&EpisodeLog> {
        let epsilon = self.cfg.epsilon_at(episode);
        let moves = env.moves();
        let mut search = Search::start(source, start, env, belief_cfg, rng)?;
        let mut features = featurize(&search.position(), search.last_observation(), search.belief(), env);
        let mut total_reward = T::zero();
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;

        while !search.is_finished(env) {
            let q = self.net.q_values(features.as_slice());
            let action = epsilon_greedy(&q, epsilon, rng);
            let report = search.advance(moves[action], env, belief_cfg, rng)?;
            let reward = if report.ceased { self.cfg.terminal_reward } else { T::zero() };
            total_reward = total_reward + reward;
            let next = featurize(&search.position(), &report.observation, search.belief(), env);
            self.replay.push(Transition {
                features: features.0.to_vec(),
                action,
                reward,
                next_features: next.0.to_vec(),
                done: report.ceased,
            });
            features = next;
            self.env_steps += 1;

            if let Some(batch) = self.replay.sample(self.cfg.minibatch, rng) {
                let (loss, grad) = bellman_loss_and_gradient(&self.net, &self.target, &batch, self.cfg.gamma);
                if !loss.is_finite() {
                    return Err(SteError::Divergence {
                        update: self.log.updates,
                        loss: loss.to_f64_lossy(),
                    });
                }
                self.net.apply_gradient(&grad, self.cfg.lr);
                self.log.updates += 1;
                loss_sum += loss.to_f64_lossy();
                loss_count += 1;
            }
            if self.env_steps.is_multiple_of(self.cfg.target_update_interval as u64) {
                sync_target(&self.net, &mut self.target)?;
                self.log.target_syncs += 1;
            }
        }

        self.log.episodes.push(EpisodeLog {
            episode,
            steps: search.steps(),
            ceased: search.ceased(),
            total_reward: total_reward.to_f64_lossy(),
            final_estimate_error: search.estimate_error().to_f64_lossy(),
            epsilon: epsilon.to_f64_lossy(),
            mean_loss: (loss_count > 0).then(|| loss_sum / loss_count as f64),
        });
        Ok(self.log.episodes.last().expect("just pushed"))
    }

    pub fn into_parts(self) -> (QNetwork<T>, TrainingLog) {
        (self.net, self.log)
    }
}

/// Full training run: `cfg.episodes` episodes, each on a fresh scenario from
/// `sample_scenario` with a fresh belief.
pub fn train<T, R, S>(
    env: &EnvConfig<T>,
    belief_cfg: &BeliefConfig<T>,
    cfg: &LearnerConfig<T>,
    mut sample_scenario: S,
    rng: &mut R,
) -> Result<(QNetwork<T>, TrainingLog)>
where
    T: Scalar,
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> (SourceTerm<T>, Position<T>),
{
    belief_cfg.validate()?;
    let mut trainer = Trainer::new(env, cfg.clone(), rng)?;
    for episode in 0..cfg.episodes {
        let (source, start) = sample_scenario(rng);
        trainer.run_episode(episode, source, start, env, belief_cfg, rng)?;
    }
    Ok(trainer.into_parts())
}
