//! Latent-space Bayesian optimization of high-dimensional schedules.
//!
//! Trajectories (one value per training epoch) are embedded in a
//! two-dimensional latent space by a small variational autoencoder. A
//! Gaussian-process surrogate is then driven over a grid of decoded latent
//! cells to find the schedule that maximizes an expensive objective.

pub mod acquisition;
pub mod adam;
pub mod error;
pub mod exec;
pub mod gp;
pub mod latent;
pub mod objective;
pub mod rundir;
pub mod seed;
pub mod trajectory;
pub mod tvae;
pub mod zbo;

pub use acquisition::{AcquisitionConfig, AcquisitionKind};
pub use error::{Error, Result};
pub use exec::Execution;
pub use gp::{GpFitConfig, GpHyperparams, GpModel, GpPosterior};
pub use latent::{LatentDecoder, LatentEncoder, LatentPoint};
pub use objective::{Objective, ObjectiveKind, ObjectiveSpec};
pub use trajectory::{Family, FamilyBatch, FamilySpec, Trajectory, TrajectorySet};
pub use tvae::{TrainReport, TvaeConfig, TvaeModel};
pub use zbo::{BoConfig, BoResult, BoState, FeasibleGrid, GridBounds};
