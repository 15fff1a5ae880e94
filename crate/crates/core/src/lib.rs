//! Neural decomposition and dynamic synthesis of bidirectional texture functions.
//!
//! A BTF exemplar is factored into a positional feature plane, two
//! directional planes (half and difference angles) and a small decoder MLP.
//! Synthesizing only the positional plane at query time yields an unbounded,
//! non-repeating BTF.

pub mod btf_data;
pub mod checkpoint;
pub mod error;
pub mod evaluator;
pub mod halfdiff;
pub mod neural;
pub mod real;
pub mod render;
pub mod synthesis;
pub mod trainer;

pub use error::{Error, Result};
