//! Library and CLI for a boundary-controlled space-fractional
//! advection–diffusion PDE modeling gas pressure in fractured media.
//!
//! The crate provides:
//! - exact and discrete fractional-calculus operators ([`fractional`]),
//! - the analytic Green-function solution operator and an `L_inf`
//!   stability-bound evaluator ([`green`]),
//! - an implicit finite-difference engine for the full PDE ([`fdm`]),
//! - the finite-dimensional disturbance/reference generator ([`exosystem`]),
//! - backstepping reference-tracking controllers ([`backstepping`]),
//! - an adaptive backstepping observer ([`observer`]),
//! - closed-loop orchestration, metrics, and file I/O ([`scenario`]).

pub mod backstepping;
pub mod config;
pub mod error;
pub mod exosystem;
pub mod fdm;
pub mod fractional;
pub mod green;
pub mod observer;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
