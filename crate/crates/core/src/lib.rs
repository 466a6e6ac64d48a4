//! Supervised hierarchical random-walk embeddings on typed graphs, applied to
//! cross-corpus citation recommendation.

pub mod config;
pub mod embed;
pub mod error;
pub mod eval;
pub mod hetgraph;
pub mod pipeline;
pub mod recommend;
pub mod rtud;
pub mod seed;
pub mod walk;

pub use error::{Error, Result};
