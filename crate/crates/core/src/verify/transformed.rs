use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::model::grid::GridFunction;
use crate::model::grid::Node;
use crate::model::problem::ProblemSpec;
use crate::operator::{transformed_rhs, OperatorContext};
use crate::quadrature::{symmetric_difference, KernelWeights};

#[derive(Debug, Clone, Serialize)]
pub struct TransformedCheck {
    /// `max |I[w] - G|` over the region, `w = u - phi`.
    pub max_defect: f64,
    pub worst_node: Vec<f64>,
    /// `max |I[u] - g|`, the residual of `u` itself.
    pub residual: f64,
    /// Largest total error, over the region, of the coefficient quadrature:
    /// `sum |a dphi - (F(du) - F(dw))|` weighted like the operator.
    pub consistency: f64,
    pub clamped: usize,
}

/// Error of `a dphi` against `F(du) - F(du - dphi)` at one node.
fn consistency_at(
    spec: &ProblemSpec,
    w: &KernelWeights,
    u: &GridFunction,
    phi: &GridFunction,
    m: Node,
) -> f64 {
    let f = &spec.f;
    let mut acc = 0.0;
    for mw in &w.mid {
        let dphi = symmetric_difference(phi, m, mw.offset);
        if dphi != 0.0 {
            let du = symmetric_difference(u, m, mw.offset);
            let a = crate::operator::coefficient_from_differences(f, du, dphi);
            acc += 2.0 * mw.weight * (a * dphi - (f.eval(du) - f.eval(du - dphi))).abs();
        }
    }
    let dim = spec.dim();
    let x = spec.grid.coords(m);
    let (uc, pc) = (u.at(m), phi.at(m));
    for p in &w.tail.points {
        let mut plus = [0.0; 2];
        let mut minus = [0.0; 2];
        for i in 0..dim {
            plus[i] = x[i] + p.y[i];
            minus[i] = x[i] - p.y[i];
        }
        let s = spec.phi.eval(&plus[..dim]) + spec.phi.eval(&minus[..dim]);
        let (du, dphi) = (s - 2.0 * uc, s - 2.0 * pc);
        let a = crate::operator::coefficient_from_differences(f, du, dphi);
        acc += p.weight * (a * dphi - (f.eval(du) - f.eval(du - dphi))).abs();
    }
    acc
}

/// Defect of the equation satisfied by `w = u - phi` on the operator's own
/// weights. It reduces to the residual of `u` up to the quadrature of the
/// coefficient `a`, which is measured separately.
pub fn transformed_equation_check(
    u: &GridFunction,
    spec: &ProblemSpec,
    w: &KernelWeights,
) -> Result<TransformedCheck> {
    let ctx = OperatorContext::new(spec.grid, w.clone())?;
    let phi = spec.phi_grid();
    let wfun = spec.difference_from_phi(u);
    let lhs = ctx.eval_field(&wfun, &spec.f);
    let res = ctx.residual(u, spec, &spec.f);
    let rows: Vec<(f64, f64, usize)> = ctx
        .region()
        .par_iter()
        .enumerate()
        .map(|(k, &m)| {
            let parts = transformed_rhs(u, spec, w, m)?;
            Ok((
                (lhs[k] - parts.value()).abs(),
                consistency_at(spec, w, u, &phi, m),
                parts.clamped,
            ))
        })
        .collect::<Result<_>>()?;
    let (mut max_defect, mut worst) = (0.0, 0);
    for (k, r) in rows.iter().enumerate() {
        if r.0 > max_defect {
            max_defect = r.0;
            worst = k;
        }
    }
    Ok(TransformedCheck {
        max_defect,
        worst_node: spec.grid.coords(ctx.region()[worst])[..spec.dim()].to_vec(),
        residual: res.iter().fold(0.0, |m, v| m.max(v.abs())),
        consistency: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        clamped: rows.iter().map(|r| r.2).sum(),
    })
}
