//! Reverse-mode training of DeepONets under data-driven, energy and
//! Schur-reduced equilibrium losses.

mod adam;
mod context;
mod gradcheck;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamState, DEFAULT_LEARNING_RATE};
pub use context::{free_selector, picked_free_dofs, PhysicsContext, DEFAULT_SES_NODES};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::{
    compose_loss, energy_residual, loss_dd, loss_ec, loss_ses, LossKind, LossParts, LossSpec,
};
pub use trainer::{
    loss_gradient, train, train_with, EpochStats, TrainConfig, TrainData, TrainReport,
    DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, SMOKE_EPOCHS,
};
