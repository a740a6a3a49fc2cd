//! Adaptive graph filters for online prediction of time-varying graph
//! signals under impulsive symmetric alpha-stable noise and missing data.

pub mod app;
pub mod config;
pub mod dataset;
pub mod error;
pub mod filters;
pub mod graph;
pub mod harness;
pub mod noise;
pub mod par;
pub mod sampling;

pub use error::{Error, Result};
