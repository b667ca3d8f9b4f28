//! Continual-learning laboratory for differentiable radiance fields.
//!
//! The crate bundles a CPU radiance-field engine (hash-grid or sinusoidal
//! encoder, MLP decoders, per-timestep appearance/geometry embeddings,
//! analytic gradients), a differentiable volume renderer, training losses
//! and an adaptive-moment optimizer, six continual-learning strategies over
//! a replay buffer, a synthetic multi-timestep scene generator with an
//! analytic reference renderer, and an evaluation harness producing
//! PSNR/SSIM reports.
//!
//! Start with the runnable examples (`cargo run --example <name>`) or the
//! `ctrd` binary (`gen`, `train`, `eval`, `compare`, `render` subcommands).

pub mod error;
pub mod math;

pub mod field;
pub mod img;
pub mod optim;
pub mod render;
pub mod scenes;

pub use error::{Error, Result};
pub use math::{Aabb, Rgb, Vec3};
