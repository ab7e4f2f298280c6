//! Actor-critic learning: episodes under the current Gibbs policy with filtering,
//! followed by a policy-evaluation update (martingale loss or CTD).

mod ctd;
mod episode;
mod ml;
mod train;

pub use ctd::{ctd_direction, ctd_update};
pub use episode::{generate_episode, Episode, EpisodeStep, Termination};
pub use ml::{ml_gradient, ml_residuals, ml_update, MlResiduals};
pub use train::{
    estimate_from_history, regularizer, train, train_from, Checkpoint, FilterSource, PeMode, RegReference,
    Regularizer, TrainLog, TrainRecord, TrainerConfig,
};
