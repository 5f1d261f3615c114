//! Emerging-trend detection from monthly news corpora by tracking how
//! contextual similarity between keyword pairs changes over time.

pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod keywords;
pub mod month;
pub mod pipeline;
pub mod ranking;
pub mod synth;
