//! Heterogeneous graph masked autoencoding on dense matrices.
//!
//! The crate is `no_std` and only needs an allocator. It holds the numerical
//! parts of the pipeline: a small reverse-mode differentiation tape, the
//! heterogeneous graph model with metapath adjacency construction, masking,
//! the attention encoder and decoders, the three reconstruction objectives,
//! metapath-guided skip-gram positional features, the training loop and the
//! downstream evaluation metrics. File formats and the command-line tool live
//! in the `hgmae` crate.

#![no_std]
// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod encdec;
mod error;
pub mod eval;
pub mod hetgraph;
pub mod masking;
pub mod matrix;
pub mod mp2vec;
pub mod objectives;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
