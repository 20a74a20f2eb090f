//! Move-method refactoring recommendations for Java projects.

pub mod embedding;
pub mod eval;
pub mod executor;
pub mod filter;
pub mod llm;
pub mod model;
pub mod pipeline;
pub mod retrieval;
