#![no_std]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod curvature;
pub mod error;
pub mod linalg;
pub mod nn;
pub mod optim;
pub mod polar;
pub mod random;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::Matrix;
