// Comparisons like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod hopf;
pub mod ode;
pub mod roots;
pub mod rotgeom;
pub mod soliton;
pub mod speed;
pub mod sphere;
pub mod table;
pub mod tolerances;

pub use error::{Error, Result};
