//! Simulation engine for a socially aware navigation aid: an occupancy grid,
//! an incremental D* Lite planner, simulated RGB-D perception, group-activity
//! constraints and the step-by-step guidance executor.

pub mod error;
pub mod executor;
pub mod gridworld;
pub mod perception;
pub mod planner;
pub mod scenario;
pub mod social;

pub use error::{Error, Result};
