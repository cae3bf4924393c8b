//! Desk-scale testbed for layered characterization of cyber events in
//! synthetic reactor telemetry: dataset synthesis, attack injection, a
//! windowing pipeline, five from-scratch classifiers, truth-table fusion,
//! and an evaluation/sweep harness.

pub mod arch;
pub mod attacks;
pub mod catalog;
pub mod config;
pub mod error;
pub mod eval;
pub mod frame;
pub mod io;
pub mod ml;
pub mod model;
pub mod pipeline;
pub mod sim;

pub use error::{CetError, Result};
