use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::model::grid::{sample_to_grid, FarField, Grid};
use crate::model::nonlinearity::{make_nonlinearity, NonlinearityKind};
use crate::operator::eval_operator;
use crate::quadrature::{build_kernel_weights_with, quadrature_oracle, OracleDomain, TailOptions};

/// Tail radius of the cosine test.
pub const ORACLE_RHO: f64 = 40.0;
/// Fixed-width tail panels reach this radius before the geometric panels.
const ORACLE_BAND_END: f64 = 2e4;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OraclePoint {
    pub x: f64,
    pub computed: f64,
    pub expected: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LinearOracleReport {
    pub sigma: f64,
    pub h: f64,
    /// `C(sigma) = int 2(1 - cos y) |y|^(-1-sigma) dy`
    pub c_sigma: f64,
    pub points: Vec<OraclePoint>,
    pub max_rel_error: f64,
    /// `|I[cos(. + pi/2)](0)|`, where the exact value is zero.
    pub zero_abs_error: f64,
}

/// `C(sigma)` from the independent adaptive integrator.
pub fn cosine_constant(sigma: f64) -> Result<f64> {
    let v = quadrature_oracle(
        |y| 4.0 * (0.5 * y[0]).sin().powi(2),
        sigma,
        1,
        OracleDomain::Whole,
    )?;
    Ok(v.value)
}

/// Compares the discrete operator with `F = identity` on `u = cos` against
/// `I[cos](x) = -C(sigma) cos(x)` at the nodes nearest `x = 0, +-1, +-2`, and checks the
/// zero of `cos` at `pi/2` through the shifted function `cos(x + pi/2)`.
pub fn linear_case_oracle_test(sigma: f64, h: f64) -> Result<LinearOracleReport> {
    let c = cosine_constant(sigma)?;
    let grid = Grid::new(1, h, 2.0 * ORACLE_RHO)?;
    let w = build_kernel_weights_with(
        1,
        sigma,
        h,
        ORACLE_RHO,
        TailOptions::oscillatory(ORACLE_BAND_END),
    )?;
    let f = make_nonlinearity(NonlinearityKind::Identity)?;
    let cos_far = FarField::Analytic {
        f: Arc::new(|x: &[f64]| x[0].cos()),
        label: "cos".into(),
    };
    let u = sample_to_grid(|x| x[0].cos(), grid, cos_far)?;
    let mut points = Vec::new();
    for target in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let node = [(target / h).round() as i64, 0];
        let x = grid.coords(node)[0];
        let computed = eval_operator(&u, &f, &w, node)?;
        let expected = -c * f64::cos(x);
        points.push(OraclePoint {
            x,
            computed,
            expected,
            rel_error: (computed - expected).abs() / expected.abs(),
        });
    }
    let shifted_far = FarField::Analytic {
        f: Arc::new(|x: &[f64]| (x[0] + FRAC_PI_2).cos()),
        label: "cos_shift".into(),
    };
    let shifted = sample_to_grid(|x| (x[0] + FRAC_PI_2).cos(), grid, shifted_far)?;
    let zero_abs_error = eval_operator(&shifted, &f, &w, [0, 0])?.abs();
    let max_rel_error = points.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    Ok(LinearOracleReport {
        sigma,
        h,
        c_sigma: c,
        points,
        max_rel_error,
        zero_abs_error,
    })
}
