pub mod corpus;
pub mod ensemble;
pub mod harness;
pub mod metrics;
pub mod postprocess;
pub mod prompts;
pub mod providers;
pub mod stats;
pub mod synthetic;
