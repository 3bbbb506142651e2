//! Value-sensitive decision making on hierarchical parsings of option sets.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod node;
pub mod numerics;
pub mod reduced;
pub mod tree;

pub use error::{Error, Result};
