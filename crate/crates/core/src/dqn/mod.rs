//! Deep Q-learning with the cessation self-reward.

mod learner;
mod network;
mod replay;

pub use learner::{
    epsilon_greedy, featurize, greedy_action, sync_target, td_update, train, EpisodeLog, Features, LearnerConfig,
    Trainer, TrainingLog, FEATURE_LEN,
};
pub use network::{bellman_loss_and_gradient, Checkpoint, Dense, Gradient, LayerParams, QNetwork, Transition};
pub use replay::ReplayBuffer;
