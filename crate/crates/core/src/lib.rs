//! Global optimization with decision-tree constraint surrogates.

pub mod backend;
pub mod problem;
pub mod sampler;
pub mod tree;
pub mod encoder;
pub mod repair;
pub mod pipeline;
