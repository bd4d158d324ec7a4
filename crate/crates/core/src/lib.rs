//! Workbench for user game-spending prediction: synthetic data calibrated to
//! heavy-tailed, zero-inflated spend distributions, label standardization,
//! a small from-scratch model zoo trained with MSE + Adam, and dual evaluation
//! (leave-one-out ranking plus regression metrics) with a multi-run stability
//! harness.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod standardize;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
