//! Library surface of the experiment runner, exposed so integration tests
//! can drive whole experiments in-process.

pub mod cache;
pub mod config;
pub mod data;
pub mod estimate;
pub mod gen;
pub mod predict;
pub mod results;
