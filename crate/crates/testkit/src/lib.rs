//! Reference oracles used by the test suites.
//!
//! Nothing in here depends on the crates under test. Each oracle takes
//! plain data so it stays an independent route to the expected values.

pub mod calendar;
pub mod contract;
pub mod graph;
pub mod mutate;
