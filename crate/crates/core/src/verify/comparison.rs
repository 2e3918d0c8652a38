use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::grid::GridFunction;
use crate::model::problem::ProblemSpec;
use crate::operator::residual_field;
use crate::quadrature::KernelWeights;

/// Residual slack allowed in the sub- and supersolution certificates.
pub const COMPARISON_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// `min (I[u] - g)` over the region.
    pub sub_min_residual: f64,
    /// `max (I[v] - g)` over the region.
    pub super_max_residual: f64,
    /// `max (u - v)` over the solver region.
    pub max_difference: f64,
    pub worst_node: Vec<f64>,
    /// `max (u - v)` over the box nodes outside the region.
    pub exterior_max_difference: f64,
    /// `10 tol / mu`
    pub threshold: f64,
    pub passed: bool,
}

/// Checks `u <= v` for a certified subsolution `u` and supersolution `v`
/// with the default slack.
pub fn comparison_test(
    u: &GridFunction,
    v: &GridFunction,
    spec: &ProblemSpec,
    w: &KernelWeights,
) -> Result<ComparisonReport> {
    comparison_test_with(u, v, spec, w, COMPARISON_TOL)
}

/// Both inputs must carry residual sign certificates: `I[u] - g >= -tol`
/// and `I[v] - g <= tol` on the solver region. The ordering passes when
/// `max (u - v) <= 10 tol / mu` on the region and `u <= v + tol` on the rest
/// of the box.
pub fn comparison_test_with(
    u: &GridFunction,
    v: &GridFunction,
    spec: &ProblemSpec,
    w: &KernelWeights,
    tol: f64,
) -> Result<ComparisonReport> {
    let ru = residual_field(u, spec, w)?;
    let rv = residual_field(v, spec, w)?;
    let dim = spec.dim();
    let at = |m: [i64; 2]| spec.grid.coords(m)[..dim].to_vec();
    let sub_min_residual = ru.min();
    if sub_min_residual < -tol {
        return Err(Error::Precondition(format!(
            "first argument is not a certified subsolution: residual {sub_min_residual:.3e} at x = {:?}",
            at(ru.argmin())
        )));
    }
    let super_max_residual = rv.max();
    if super_max_residual > tol {
        return Err(Error::Precondition(format!(
            "second argument is not a certified supersolution: residual {super_max_residual:.3e} at x = {:?}",
            at(rv.argmax())
        )));
    }
    let mut max_difference = f64::NEG_INFINITY;
    let mut worst = [0i64; 2];
    let mut exterior_max_difference = f64::NEG_INFINITY;
    for m in spec.grid.nodes() {
        let d = u.at(m) - v.at(m);
        if spec.grid.in_region(m) {
            if d > max_difference {
                max_difference = d;
                worst = m;
            }
        } else {
            exterior_max_difference = exterior_max_difference.max(d);
        }
    }
    let threshold = 10.0 * tol / spec.g.mu();
    let passed = max_difference <= threshold && exterior_max_difference <= tol;
    Ok(ComparisonReport {
        sub_min_residual,
        super_max_residual,
        max_difference,
        worst_node: at(worst),
        exterior_max_difference,
        threshold,
        passed,
    })
}
