//! Theorem-level checks on discrete solutions.

mod comparison;
mod convergence;
mod holder;
mod oracle_case;
mod transformed;

pub use comparison::{comparison_test, comparison_test_with, ComparisonReport, COMPARISON_TOL};
pub use convergence::{convergence_study, ConvergenceRow, ConvergenceTable};
pub use holder::{
    difference_quotient_probe, holder_seminorm, HolderReport, QuotientReport, ScaleRow,
};
pub use oracle_case::{
    cosine_constant, linear_case_oracle_test, LinearOracleReport, OraclePoint, ORACLE_RHO,
};
pub use transformed::{transformed_equation_check, TransformedCheck};
