//! Neural surrogates with local converging inputs for supersonic channel
//! flow on unstructured triangular grids.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`geometry`] and [`mesh`] build the bumped channel at three resolutions;
//! * [`solver`] computes steady Euler solutions on each mesh;
//! * [`interpolation`] and [`dataset`] sample two converging low-fidelity
//!   solutions on a 5×5 stencil around each point;
//! * [`nn`] trains a dense network that maps those samples to the
//!   high-fidelity state;
//! * [`evaluation`] predicts full fields and scores them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod geometry;
mod io;
pub mod interpolation;
pub mod mesh;
pub mod nn;
pub mod pipeline;
pub mod solver;
pub mod spatial;
pub mod state;

pub use error::{Error, Result};
