pub mod boundary;
pub mod forcing;
pub mod grid;
pub mod nonlinearity;
pub mod problem;
pub mod validate;

pub use boundary::{make_boundary_datum, BoundaryDatum, BoundaryKind, BoundaryMeta};
pub use forcing::{make_forcing, Forcing, ForcingKind, ForcingMeta};
pub use grid::{sample_to_grid, FarField, Grid, GridFunction, Node, ScalarFn};
pub use nonlinearity::{make_nonlinearity, Nonlinearity, NonlinearityKind, NonlinearityMeta};
pub use problem::{ProblemSpec, Truncation};
pub use validate::{validate_problem, ConditionCheck, ValidationReport};
