//! Simulation and identification of a hybrid piecewise-affine model of
//! driver cognition (trust, perceived risk, workload) and automation reliance.

pub mod continuous;
pub mod discrete;
pub mod error;
pub mod io;
pub mod kde;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod simplex;

pub use error::{Error, Result};
pub use model::{
    reliance_of, simulate, step_state, AffineParams, Channel, CognitiveState, HybridModel,
    SimulatedTrajectory, Thresholds, Trajectory,
};
