//! Kinetic chemotaxis laboratory: a two-species run-and-tumble kinetic model,
//! its Keller–Segel drift–diffusion limit, and the machinery to compare them.

pub mod chemo;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod kinetic;
pub mod macroscopic;
pub mod quadrature;
pub mod spectral;
pub mod tumbling;

pub use error::{Error, Result};
