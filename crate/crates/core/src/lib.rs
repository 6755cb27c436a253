//! Graph filters built from k-hop neighborhood adjacency matrices, classical
//! polynomial graph filters, and small graph convolutional networks using
//! either, together with the experiment drivers that compare them.

pub mod datasets;
pub mod error;
pub mod experiments;
pub mod filters;
pub mod graph;
pub mod io;
pub mod neural;
pub mod rng;

pub use error::{Error, Result};
