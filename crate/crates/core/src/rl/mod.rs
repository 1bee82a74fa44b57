//! Second training stage: PPO over parallel rollouts with a reward shaped by
//! frozen expert policies.

mod gae;
mod ppo;
mod reward;
mod rollout;
mod train;

pub use gae::{gae, normalize};
pub use ppo::{ppo_update, PpoConfig, PpoStats};
pub use reward::{behavior_error, compute_reward, goal_velocity, RewardConfig, StepOutcome};
pub use rollout::{collect_rollouts, EnvConfig, EpisodeStat, RolloutBuffer, Snapshot, Stream, Transition, Worker};
pub use train::{evaluate_policy, load_policy, train, MetricsRow, PolicyController, TrainConfig, TrainOutput};

use thiserror::Error;

use crate::bc::BcError;
use crate::nn::NnError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("stream lengths disagree: {rewards} rewards, {values} values, {dones} done flags")]
    LengthMismatch { rewards: usize, values: usize, dones: usize },
    #[error("the distillation term is enabled but no expert was supplied")]
    MissingExperts,
    #[error("non-finite {what} at update {update}; parameters dumped to {dump}")]
    Diverged { what: String, update: usize, dump: String },
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Bc(#[from] BcError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
