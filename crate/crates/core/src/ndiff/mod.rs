//! Dense `f64` arrays with reverse-mode automatic differentiation and a
//! central-difference gradient checker.

mod array;
mod gradcheck;
mod graph;
mod params;

pub use array::Array;
pub use gradcheck::{grad_check, relative_error, GradCheckReport, WorstEntry, REL_FLOOR};
pub use graph::{bce, sigmoid, Fault, Gradients, Graph, Var, BCE_EPS, MASK_NEG};
pub use params::{ParamStore, PARAMS_FORMAT, PARAMS_VERSION};
