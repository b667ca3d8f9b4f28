//! Losses, the consolidation penalty, Fisher estimation, and the
//! adaptive-moment update rule.

pub mod adam;
pub mod ewc;
pub mod loss;

pub use adam::{NonFiniteGradient, OptimState, DEFAULT_LR_DECODER, DEFAULT_LR_ENCODING};
pub use ewc::{estimate_fisher, ewc_loss, ewc_penalty, ewc_penalty_grad, FisherDiag};
pub use loss::{charbonnier, meil_lambda, meil_loss, nerf_loss};
