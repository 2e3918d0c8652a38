use std::fmt::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::grid::GridFunction;
use crate::model::problem::ProblemSpec;
use crate::quadrature::build_kernel_weights_with;
use crate::quadrature::TailOptions;
use crate::solver::{needs_continuation, solve_degenerate, solve_uniformly_elliptic, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub iterations: usize,
    pub final_residual: f64,
    /// `||u_h - u_{h/2}||_inf` on the coarse nodes; `None` on the finest grid.
    pub diff_to_next: Option<f64>,
    /// `log2` of the ratio of consecutive differences.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Set when the differences fail to decrease.
    pub non_monotone: bool,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,iterations,final_residual,diff_to_next,order\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:?},{},{:?},{},{}",
                r.h,
                r.iterations,
                r.final_residual,
                opt(r.diff_to_next),
                opt(r.order)
            );
        }
        s
    }

    /// Smallest observed order.
    pub fn min_order(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.order).reduce(f64::min)
    }
}

/// `||coarse - fine||_inf` over the coarse nodes, which are every other
/// fine node.
fn nested_difference(coarse: &GridFunction, fine: &GridFunction) -> f64 {
    let g = coarse.grid();
    g.nodes()
        .map(|m| (coarse.at(m) - fine.at([2 * m[0], 2 * m[1]])).abs())
        .fold(0.0, f64::max)
}

/// Solves `spec` on each spacing in `hs` (successive halvings) and reports
/// the differences between consecutive solutions.
pub fn convergence_study(
    spec: &ProblemSpec,
    hs: &[f64],
    tail: TailOptions,
    config: &SolverConfig,
) -> Result<ConvergenceTable> {
    if hs.len() < 3 {
        return Err(Error::param("grids", "need at least three spacings"));
    }
    if hs.windows(2).any(|p| (p[0] / p[1] - 2.0).abs() > 1e-9) {
        return Err(Error::param(
            "grids",
            "spacings must be successive halvings",
        ));
    }
    let mut sols = Vec::new();
    let mut rows = Vec::new();
    for &h in hs {
        let s = spec.with_spacing(h)?;
        let w = build_kernel_weights_with(s.dim(), s.sigma, h, s.rho_tail, tail)?;
        let rep = if needs_continuation(&s.f) {
            solve_degenerate(&s, &w, config)?
        } else {
            solve_uniformly_elliptic(&s, &w, config, None)?
        };
        rows.push(ConvergenceRow {
            h,
            iterations: rep.iterations,
            final_residual: rep.final_residual,
            diff_to_next: None,
            order: None,
        });
        sols.push(rep.u);
    }
    for k in 0..sols.len() - 1 {
        rows[k].diff_to_next = Some(nested_difference(&sols[k], &sols[k + 1]));
    }
    let mut non_monotone = false;
    for k in 1..rows.len() - 1 {
        let (a, b) = (
            rows[k - 1].diff_to_next.unwrap(),
            rows[k].diff_to_next.unwrap(),
        );
        if b > a {
            non_monotone = true;
        }
        if a > 0.0 && b > 0.0 {
            rows[k].order = Some((a / b).log2());
        }
    }
    Ok(ConvergenceTable { rows, non_monotone })
}
