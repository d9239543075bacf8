pub mod cli;
pub mod community;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod fuzzy;
pub mod graph;
pub mod pipelines;
pub mod report;
pub mod resolver;
pub mod synth;

pub use error::{Error, Result};
