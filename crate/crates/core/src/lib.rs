//! Numerical toolkit for relaxation of scalar integral functionals.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convexify;
pub mod detachment;
pub mod energy;
pub mod error;
pub mod gallery;
pub mod io;
pub mod lagrangian;
pub mod laminate;
pub mod nonauto;
pub mod par;
pub mod types;

pub use error::{Error, Result};
pub use lagrangian::{Flags, Lagrangian, LagrangianKind};
pub use types::{BoxDomain, Extended, Mesh, PLField, SampledSlice, SliceContext, XiGrid};
