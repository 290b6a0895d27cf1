//! Spiking associative memory built from cyclic N-of-M spatiotemporal codes,
//! conductance-based leaky-integrate-and-fire neurons and a cyclic STDP
//! synapse whose weight freezes behind a lock bit once it has been recruited.
//!
//! The crate is organised bottom-up:
//!
//! - [`codec`]: cyclic N-of-M patterns, spike rendering, jitter and Poisson noise.
//! - [`neuron`]: the membrane and double-exponential conductance kernel.
//! - [`plasticity`]: the per-synapse pair detectors, accumulators and lock logic.
//! - [`engine`]: the clock-driven kernel wiring inputs, teacher and plasticity together.
//! - [`calibration`]: the weight-to-conductance scalar search.
//! - [`experiments`]: convergence, recruitment and capacity harnesses.
//!
//! Independent trials fan out over [`exec::Execution`], which uses rayon when the
//! `parallel` feature is enabled and falls back to a plain loop otherwise.

pub mod calibration;
pub mod codec;
pub mod engine;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod model;
pub mod neuron;
pub mod plasticity;
pub mod rng;

pub use error::{Error, Result};
pub use model::ModelConfig;
