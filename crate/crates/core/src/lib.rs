//! Classifies software-design attack scenarios into regularly expressed
//! attack patterns using partitioned three-layer back-propagation networks.

pub mod classifier;
pub mod cli;
pub mod corpus;
pub mod domain;
pub mod encoder;
pub mod error;
pub mod mlp;
pub mod synthgen;

pub use error::{Error, Result};
