//! The observe → update belief → check cessation loop shared by evaluation
//! episodes and learner training.

use rand::Rng;

use crate::belief::{Belief, BeliefConfig};
use crate::env::{sample_measurement, step, EnvConfig, Move, Observation, Position, SourceTerm};
use crate::error::Result;
use crate::scalar::Scalar;

/// One search episode in progress.
#[derive(Clone, Debug)]
pub struct Search<T> {
    source: SourceTerm<T>,
    position: Position<T>,
    belief: Belief<T>,
    last: Observation<T>,
    steps: usize,
    traveled: T,
    ceased: bool,
}

/// What happened during one [`Search::advance`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport<T> {
    pub observation: Observation<T>,
    /// Actual displacement after clamping, meters.
    pub displacement: T,
    pub ceased: bool,
}

impl<T: Scalar> Search<T> {
    /// Draws the prior and folds in the reading taken at `start`. No
    /// cessation check happens before the first move.
    pub fn start<R: Rng + ?Sized>(
        source: SourceTerm<T>,
        start: Position<T>,
        env: &EnvConfig<T>,
        belief_cfg: &BeliefConfig<T>,
        rng: &mut R,
    ) -> Result<Self> {
        env.validate()?;
        source.validate()?;
        let mut belief = Belief::init_prior(belief_cfg, &source, rng)?;
        let concentration = sample_measurement(&start, &source, env, rng)?;
        let last = Observation {
            position: start,
            concentration,
        };
        belief.update(last, belief_cfg, env, rng)?;
        Ok(Self {
            source,
            position: start,
            belief,
            last,
            steps: 0,
            traveled: T::zero(),
            ceased: false,
        })
    }

    /// Moves, observes, updates the belief and runs the cessation test.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        mv: Move,
        env: &EnvConfig<T>,
        belief_cfg: &BeliefConfig<T>,
        rng: &mut R,
    ) -> Result<StepReport<T>> {
        let (next, obs) = step(self.position, mv, env, &self.source, rng)?;
        let displacement = next.distance(&self.position);
        self.belief.update(obs, belief_cfg, env, rng)?;
        self.position = next;
        self.last = obs;
        self.steps += 1;
        self.traveled = self.traveled + displacement;
        self.ceased = self.belief.cessation_check(belief_cfg);
        Ok(StepReport {
            observation: obs,
            displacement,
            ceased: self.ceased,
        })
    }

    /// Ceased, or out of step budget.
    pub fn is_finished(&self, env: &EnvConfig<T>) -> bool {
        self.ceased || self.steps >= env.max_steps
    }

    pub fn source(&self) -> &SourceTerm<T> {
        &self.source
    }

    pub fn position(&self) -> Position<T> {
        self.position
    }

    pub fn belief(&self) -> &Belief<T> {
        &self.belief
    }

    pub fn last_observation(&self) -> &Observation<T> {
        &self.last
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn traveled(&self) -> T {
        self.traveled
    }

    pub fn ceased(&self) -> bool {
        self.ceased
    }

    /// Distance from the belief's point estimate to the true source.
    pub fn estimate_error(&self) -> T {
        self.belief.estimated_position().distance(&self.source.position())
    }
}
