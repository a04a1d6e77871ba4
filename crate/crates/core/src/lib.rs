//! Sentence-level news reframing toolkit built on span-annotated frame
//! corpora: instance construction, training-set emission for the strategy
//! variants, a generation gateway and automatic and manual evaluation.

pub mod config;
pub mod corpus;
pub mod entity;
pub mod error;
pub mod exec;
pub mod frame;
pub mod gateway;
pub mod instance;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod reporting;
mod seed;
pub mod strategy;
pub mod synthetic;
pub mod text;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use exec::Exec;
pub use frame::{Frame, Split, Topic};
pub use pipeline::Pipeline;
pub use strategy::Variant;
