//! Finite element solver for steady generalized Newtonian flow whose
//! power-law index depends on a transported concentration.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod constitutive;
pub mod error;
pub mod fespace;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod tensor;
pub mod varexp;
pub mod verify;

pub use error::{Error, Result};
