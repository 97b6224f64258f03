//! Simulation and analysis of stochastic min-max optimization schemes.
//!
//! Every scheme here is a generalized Robbins-Monro iteration
//! `z_{n+1} = z_n + γ_n (V(z_n) + e_n)` driven by the min-max field
//! `V = (-∇_x f, ∇_y f)`. The crate integrates the shared mean dynamics
//! `ż = V(z)`, interpolates discrete runs in effective time, and detects the
//! limiting structures (critical points, limit cycles) that the runs end up
//! tracking.

pub mod algorithms;
pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod noise;
pub mod point;
pub mod problems;
pub mod schedule;
pub mod trajectory;

pub use error::{DivergenceReport, Error, Result};
pub use noise::{NoiseModel, NoiseStream};
pub use point::Point;
pub use problems::{Problem, ProblemSpec};
pub use schedule::{StepSchedule, StepValue};
pub use trajectory::{SampledPath, Trajectory};
