//! Exterior calculus, Laurent decomposition, desingularization, moment maps
//! and reduction for b^m-symplectic chart models.

pub mod chart;
pub mod desing;
pub mod error;
pub mod examples;
pub mod expr;
pub mod forms;
pub mod integrate;
pub mod laurent;
pub mod moduli;
pub mod moment;
pub mod props;
pub mod quasi;
pub mod reduction;

pub use chart::{ChartModel, Coordinate, SampleGrid};
pub use error::{Error, Result};
pub use expr::bm::{split_bm_scalar, BmFunction};
pub use expr::{parse_expr, Env, Expr};
pub use forms::{Frame, SingularForm, VectorFieldExpr};
