//! Exact box-spline calculus, weight-sequence functionals, invisible
//! mollifiers and regime classification for `L^p` quasinorms with
//! `0 < p < 1`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod classify;
pub mod disconnexion;
pub mod error;
pub mod mollifier;
pub mod numerics;
pub mod poly;
pub mod pwpoly;
pub mod weights;

pub use error::{Error, Result};
