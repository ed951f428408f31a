//! Near-optimal trajectory tracking for canonical-form nonlinear plants.
//!
//! The crate decomposes the tracking control into a steady-state part that
//! pins the error dynamics to the origin and a corrective part derived from
//! a quadratic value approximation trained by integral value iteration over
//! randomly drawn reference states. Around that core it provides a Delta
//! parallel-robot model, computed-torque and sliding-mode baselines, a
//! fixed-step closed-loop simulator with metrics, and declarative TOML
//! configuration for the batch CLI.

pub mod basis;
pub mod config;
pub mod controllers;
pub mod delta;
mod integrate;
pub mod plant;
pub mod sim;
pub mod train;

pub use basis::{QuadraticBasis, ValueFunction};
pub use plant::{CanonicalPlant, CostWeights, ReferenceSignal, TrackingError};
pub use train::{train, train_runs, TrainingConfig, TrainingReport};
