#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod cli;
pub mod deflator;
pub mod density;
pub mod error;
pub mod extreal;
pub mod growth;
pub mod interval;
pub mod jump_measure;
pub mod quadrature;
pub mod simulate;
pub mod tilt;
pub mod verify;
pub mod viability;
pub mod weighting;

pub use error::{Error, Result};
