//! Cartoon + residual + texture decomposition of grayscale images on the
//! torus, and Littlewood-Paley filter banks that pull oscillating textures out
//! of the texture part scale by scale and direction by direction.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomp;
pub mod error;
pub mod experiments;
pub mod field;
pub mod io;
pub mod lpbank;
pub mod mts;
pub mod projector;
pub mod synth;

pub use error::{Error, Result};
