//! Brownian motion on spaces of discrete regular closed curves in `R^d`
//! equipped with discrete Sobolev-type metrics `g^m`.
//!
//! * [`curve`]: curves, edges, the discrete arc-length derivative and `g^m`.
//! * [`calculus`]: metric derivatives, drift, diffusion factor, geodesics and
//!   growth probes.
//! * [`brownian`]: Euler–Maruyama simulation, ensembles and statistics.
//! * [`triangle`]: the normalized triangle space and its conformal factors.
//! * [`io`], [`check`]: file formats, manifests and property suites used by
//!   the command-line tool.

pub mod brownian;
pub mod calculus;
pub mod check;
pub mod curve;
pub mod error;
pub mod io;
pub mod rng;
pub mod scalar;
pub mod triangle;

pub use curve::{DiscreteCurve, MetricOrder, MetricTensor, TangentVector};
pub use error::{Error, Result};
