pub mod classifier;
pub mod container;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod exec;
pub mod features;
pub mod lexical;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod seed;
pub mod synth;
pub mod text;
pub mod topics;
