//! Benchmarking toolkit for sustainable local LLM inference: weight quantization,
//! energy metering, carbon accounting, sentiment evaluation and before/after reports.

pub mod carbon;
pub mod corpus;
pub mod energy;
pub mod metrics;
pub mod quant;
pub mod tensorfile;
pub mod report;
pub mod runner;
