//! Deterministic needs-driven human mobility simulation.

pub mod engine;
pub mod geomap;
pub mod kv;
pub mod logio;
pub mod mobility;
pub mod needs;
pub mod rng;
pub mod social;
