//! Autonomous gas-source search: plume and sensor model, particle-filter
//! belief with standard-deviation cessation, one-step lookahead planners and
//! a self-rewarding DQN learner.
//!
//! Every model is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`; [`single`] holds the `f32` ones.

pub mod belief;
pub mod dqn;
pub mod env;
pub mod error;
pub mod planners;
pub mod scalar;
pub mod search;

pub use error::{Result, SteError};
pub use scalar::Scalar;

pub use env::{ActionSet, Move, Param};
pub use planners::{EntropyRange, PlannerKind};

pub type Position = env::Position<f64>;
pub type Bounds = env::Bounds<f64>;
pub type SourceTerm = env::SourceTerm<f64>;
pub type EnvConfig = env::EnvConfig<f64>;
pub type Observation = env::Observation<f64>;
pub type Plume = env::Plume<f64>;
pub type Belief = belief::Belief<f64>;
pub type BeliefConfig = belief::BeliefConfig<f64>;
pub type BeliefSnapshot = belief::BeliefSnapshot<f64>;
pub type Particle = belief::Particle<f64>;
pub type ParamRange = belief::ParamRange<f64>;
pub type LookaheadConfig = planners::LookaheadConfig<f64>;
pub type QNetwork = dqn::QNetwork<f64>;
pub type LearnerConfig = dqn::LearnerConfig<f64>;
pub type Transition = dqn::Transition<f64>;
pub type Features = dqn::Features<f64>;
pub type Search = search::Search<f64>;

/// Single-precision aliases.
pub mod single {
    use super::{belief, dqn, env, planners, search};

    pub type Position = env::Position<f32>;
    pub type Bounds = env::Bounds<f32>;
    pub type SourceTerm = env::SourceTerm<f32>;
    pub type EnvConfig = env::EnvConfig<f32>;
    pub type Observation = env::Observation<f32>;
    pub type Belief = belief::Belief<f32>;
    pub type BeliefConfig = belief::BeliefConfig<f32>;
    pub type LookaheadConfig = planners::LookaheadConfig<f32>;
    pub type QNetwork = dqn::QNetwork<f32>;
    pub type LearnerConfig = dqn::LearnerConfig<f32>;
    pub type Search = search::Search<f32>;
}
