//! Simulation engine for repeated games with several leaders and one
//! follower: leader and follower learners, the round protocols that wire
//! them together, regret and equilibrium-gap metrics, and brute-force
//! reference checks.

pub mod error;
pub mod follower;
pub mod game;
pub mod leader;
pub mod metrics;
pub mod oracle;
pub mod protocols;

pub use error::{Error, Result};
