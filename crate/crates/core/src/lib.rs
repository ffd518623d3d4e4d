//! Numerical laboratory for sphere-valued double-phase variational problems.
//!
//! Discrete maps into the unit sphere are minimized for
//! `int |Du|^p + a(x)|Du|^q` and screened for singular points with an
//! intrinsic excess criterion. The points found can then be measured with
//! weighted Hausdorff measures and Musielak-Orlicz capacities.

// Validation is written as `!(x > 0.0)` and the like so that NaN is rejected
// along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil loops index several per-axis arrays with the same axis.
#![allow(clippy::needless_range_loop)]

pub mod energy;
pub mod error;
pub mod fields;
pub mod grid;
pub mod io;
pub mod measure;
pub mod regularity;
pub mod solver;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
