//! Quantities of the equation satisfied by `w = u - phi`:
//! `int F(dw) K = g(x, w) - int dphi a K` with
//! `a(x,y) = int_0^1 F'(du - t dphi) dt`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::gauss::GaussLegendre;
use crate::model::grid::{GridFunction, Node};
use crate::model::nonlinearity::Nonlinearity;
use crate::model::problem::ProblemSpec;
use crate::quadrature::{symmetric_difference, KernelWeights};

fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// `int_0^1 F'(du - t dphi) dt` by 8-point Gauss-Legendre.
pub fn coefficient_from_differences(f: &Nonlinearity, du: f64, dphi: f64) -> f64 {
    if dphi == 0.0 {
        return f.deriv(du);
    }
    gl8()
        .mapped(0.0, 1.0)
        .map(|(t, w)| w * f.deriv(du - t * dphi))
        .sum()
}

/// `a(x, y)` for lattice `x` and lattice offset `y`.
pub fn internal_coefficient(
    u: &GridFunction,
    phi: &GridFunction,
    f: &Nonlinearity,
    x: Node,
    y: Node,
) -> f64 {
    coefficient_from_differences(
        f,
        symmetric_difference(u, x, y),
        symmetric_difference(phi, x, y),
    )
}

/// Pieces of the transformed right-hand side at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedParts {
    /// `g(x, w(x))`
    pub forcing: f64,
    /// `int dphi a K`, split as the near, mid and tail contributions.
    pub near: f64,
    pub mid: f64,
    pub tail: f64,
    /// Tail nodes where `a` had to be clamped into its admissible interval.
    pub clamped: usize,
}

impl TransformedParts {
    /// `G(x) = g(x, w) - int dphi a K`.
    pub fn value(&self) -> f64 {
        self.forcing - (self.near + self.mid + self.tail)
    }
}

/// `G(x) = g(x, w(x)) - int dphi(x,y) a(x,y) dy / |y|^(n+sigma)` on the same
/// weights as the operator. The near field is linear in the scheme, so its
/// coefficient is `F'(0)` exactly.
pub fn transformed_rhs(
    u: &GridFunction,
    spec: &ProblemSpec,
    w: &KernelWeights,
    x: Node,
) -> Result<TransformedParts> {
    let grid = *u.grid();
    if !grid.in_region(x) {
        return Err(Error::OutsideSolverRegion {
            at: grid.coords(x)[..grid.dim()].to_vec(),
        });
    }
    let f = &spec.f;
    let phi = spec.phi_grid();
    let dim = grid.dim();
    let xc = grid.coords(x);
    let wx = u.at(x) - phi.at(x);
    let forcing = spec.g.eval(&xc[..dim], wx);

    let h = grid.h();
    let mut lap = 0.0;
    for i in 0..dim {
        let mut e = [0i64; 2];
        e[i] = 1;
        lap += symmetric_difference(&phi, x, e);
    }
    let near = f.deriv(0.0) * w.near_field_coeff * lap / (dim as f64 * h * h);

    let mut mid = 0.0;
    for m in &w.mid {
        let dphi = symmetric_difference(&phi, x, m.offset);
        if dphi != 0.0 {
            let du = symmetric_difference(u, x, m.offset);
            mid += 2.0 * m.weight * coefficient_from_differences(f, du, dphi) * dphi;
        }
    }

    let lower = if f.meta.ellipticity_lower > 0.0 {
        f.meta.ellipticity_lower
    } else {
        0.0
    };
    let upper = f.meta.lip_bound;
    let (uc, pc) = (u.at(x), phi.at(x));
    let mut tail = 0.0;
    let mut clamped = 0;
    for p in &w.tail.points {
        let mut plus = [0.0; 2];
        let mut minus = [0.0; 2];
        for i in 0..dim {
            plus[i] = xc[i] + p.y[i];
            minus[i] = xc[i] - p.y[i];
        }
        let s = spec.phi.eval(&plus[..dim]) + spec.phi.eval(&minus[..dim]);
        let (du, dphi) = (s - 2.0 * uc, s - 2.0 * pc);
        let a = coefficient_from_differences(f, du, dphi);
        let a_safe = a.clamp(lower, upper);
        if a_safe != a {
            clamped += 1;
        }
        tail += p.weight * a_safe * dphi;
    }
    if clamped > 0 {
        log::debug!(
            "coefficient clamped at {clamped} tail nodes for x = {:?}",
            &xc[..dim]
        );
    }
    let parts = TransformedParts {
        forcing,
        near,
        mid,
        tail,
        clamped,
    };
    if parts.value().is_finite() {
        Ok(parts)
    } else {
        Err(Error::NonFiniteOperator {
            at: xc[..dim].to_vec(),
        })
    }
}
