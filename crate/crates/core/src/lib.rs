//! Structural response surrogates: a 2D frame FEM kernel for ground truth and
//! a DeepONet engine trained with data-driven, energy-conservation and
//! Schur-reduced equilibrium losses.

pub mod blob;
pub mod dataset;
pub mod deeponet;
pub mod error;
pub mod evaluate;
pub mod fem;
pub mod linalg;
pub mod training;

pub use error::{Error, Result};
