//! Dense `f64` linear algebra: factorizations, multi-RHS solves and Schur
//! complement reduction.

mod factor;
mod matrix;
mod schur;

pub use factor::{factor, solve_multi, FactorKind, Factorization, SINGULAR_RTOL};
pub use matrix::{axpy, dot, max_abs, norm2, Matrix};
pub use schur::{
    recover_interior, reduce_force, schur_reduce, schur_reduce_with, Partition, SchurSystem,
};
