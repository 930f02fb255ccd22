//! Numerical experiments on meromorphic functions near an isolated
//! singular point: Nevanlinna characteristics, growth estimates,
//! logarithmic-derivative bounds, Wiman-Valiron quantities and growth of
//! solutions of linear ODEs with singular coefficients.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod funcexpr;
pub mod growth;
pub mod logderiv;
pub mod wiman;
pub mod nevanlinna;
pub mod numerics;
pub mod odegrowth;
pub mod report;
pub(crate) mod util;

pub use error::{Error, Result};
pub use funcexpr::{parse_fn, FnExpr};
pub use numerics::{LogComplex, PrecisionPolicy};
