//! Design, certification and simulation of accelerated consensus updates with
//! delayed self-reinforcement on directed, source-rooted networks.

pub mod benchmark;
pub mod design;
pub mod error;
pub mod graph;
pub mod sim;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
