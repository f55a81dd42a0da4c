//! Continuous-time random walks, their time-changed representations and
//! couplings of heavy-tailed waiting times.

pub mod coupling;
pub mod ctrw;
pub mod dist;
pub mod error;
pub mod paths;
pub mod quad;
pub mod rng;
pub mod samplers;
pub mod special;
pub mod stats;
pub mod symbol;

pub use error::{Error, Result};
pub use rng::RngStream;
