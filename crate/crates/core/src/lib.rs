//! Numerical toolkit for singular-integral geometry on planar point clouds.
//!
//! The crate evaluates the odd kernels `x^(2n-1)/|z|^(2n)` (and the Huovinen
//! contrast kernel `x*y^2/|z|^4`), their three-point permutation sums, Menger
//! curvature, beta-number flatness statistics, stopping-time regions and
//! corona decompositions over discrete weighted measures, and aggregates them
//! into a rectifiability report.
//!
//! Organization:
//! - [`geometry`]: points, triples, lines, balls, angles.
//! - [`kernels`]: kernel evaluation, permutation sums, curvature identities.
//! - [`measures`] / [`generators`] / [`io`]: weighted point clouds, synthetic
//!   inputs, CSV/JSON formats.
//! - [`statistics`] / [`beta`]: global triple sums (exact and Monte Carlo),
//!   truncated transforms, beta numbers and line fitting.
//! - [`multiscale`]: dyadic cube lattice, stopping-time regions, graph
//!   extraction, corona decomposition, rectifiability report.
//! - [`verify`]: the named verification suites run by the CLI and the
//!   acceptance tests.

// Validation uses `!(x > 0.0)` deliberately: unlike `x <= 0.0` it also
// rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beta;
pub mod error;
pub mod generators;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod measures;
pub mod multiscale;
pub mod statistics;
pub mod summation;
pub mod verify;

pub use error::CoreError;
pub use generators::{GeneratorKind, GeneratorSpec, WeightRule};
pub use geometry::{Ball, Line, Point2, Triple};
pub use kernels::KernelId;
pub use measures::DiscreteMeasure;
pub use statistics::{SumEstimate, SumMethod, TripleSumOptions};
