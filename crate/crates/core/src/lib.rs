//! Symbolic connections, curvature and covariant differentials on a single
//! chart, with numeric checks of the identities relating them.

pub mod connection;
pub mod covariant;
pub mod curvature;
pub mod expr;
pub mod generate;
pub mod parse;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod tensor;

pub use connection::{ClassicalConnection, FieldType, LinearConnection};
pub use curvature::{curvature, CurvatureField};
pub use expr::{BasePoint, ScalarExpr};
pub use parse::parse;
pub use report::CheckReport;
pub use tensor::{TensorField, TensorValue};
