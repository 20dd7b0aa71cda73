//! Second-order polynomial filtering for average consensus on undirected
//! weighted graphs.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`graph`] | unweighted topologies: named families, G(n, M), enumeration, diameter, square graph |
//! | [`spectral`] | weight matrices `P = I - L`, SLEM / SEM, centering, deadbeat detection |
//! | [`filter`] | optimal two-step filter, alternating-step factorization, stability and robustness caps |
//! | [`precondition`] | edge-weight optimization for single-step (FSSC) and two-step convergence |
//! | [`sim`] | consensus dynamics, link failures, empirical rates |
//! | [`io`] | JSON wire formats for graphs and weighted graphs |
//! | [`catalog`] | fixed weighted instances |
//!
//! ```
//! use polyconsensus::{graph::Graph, spectral, filter::QuadFilter};
//!
//! let star = Graph::star(4);
//! let p = spectral::WeightMatrix::uniform(star, 1.0 / 3.0);
//! let spec = spectral::spectrum(&p).unwrap();
//! assert!((spec.mu - 2.0 / 3.0).abs() < 1e-12);
//! let f = QuadFilter::for_spectrum(&spec).unwrap();
//! assert!(f.mu2.abs() < 1e-12);
//! ```

// `!(x < y)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod error;
pub mod filter;
pub mod graph;
pub mod io;
pub mod precondition;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
