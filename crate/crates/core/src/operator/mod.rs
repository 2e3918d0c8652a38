//! Evaluation of `I[u,x] = int F(du(x,y)) dy / |y|^(n+sigma)` on the lattice.

mod regularize;
mod transformed;

pub use regularize::{regularize_f, regularize_f_on};
pub use transformed::{
    coefficient_from_differences, internal_coefficient, transformed_rhs, TransformedParts,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::grid::{FarField, Grid, GridFunction, Node};
use crate::model::nonlinearity::Nonlinearity;
use crate::model::problem::ProblemSpec;
use crate::quadrature::{tail_sum, KernelWeights};

/// Largest tail cache, in stored values, built eagerly.
const TAIL_CACHE_BUDGET: usize = 40_000_000;

/// Lattice, weights and solver region bundled for repeated evaluation.
///
/// When a far-field closure is attached, the closure sums
/// `closure(x + y_t) + closure(x - y_t)` at every tail node are cached per
/// region node, so that repeated evaluations only pay for `F`.
#[derive(Debug, Clone)]
pub struct OperatorContext {
    grid: Grid,
    weights: KernelWeights,
    region: Vec<Node>,
    cache: Option<(FarField, Vec<f64>)>,
}

impl OperatorContext {
    pub fn new(grid: Grid, weights: KernelWeights) -> Result<Self> {
        if grid.dim() != weights.dim {
            return Err(Error::param(
                "n",
                "grid and kernel weights disagree on the dimension",
            ));
        }
        if (grid.h() - weights.h).abs() > 1e-12 * grid.h() {
            return Err(Error::param(
                "grid.h",
                "grid and kernel weights disagree on the spacing",
            ));
        }
        let reach = grid.region_half() as f64 * grid.h() + weights.rho_tail;
        if reach > grid.box_radius() * (1.0 + 1e-12) + grid.h() {
            log::debug!(
                "mid-field offsets reach {reach} beyond the box; the closure supplies those values"
            );
        }
        Ok(Self {
            region: grid.region_nodes(),
            grid,
            weights,
            cache: None,
        })
    }

    /// Context for a problem, with the tail cached against `phi`.
    pub fn for_problem(spec: &ProblemSpec, weights: KernelWeights) -> Result<Self> {
        Ok(Self::new(spec.grid, weights)?.with_far_cache(&spec.phi_far()))
    }

    pub fn with_far_cache(mut self, far: &FarField) -> Self {
        let points = self.weights.tail.len();
        if points * self.region.len() > TAIL_CACHE_BUDGET {
            log::debug!(
                "tail cache skipped ({} x {} values)",
                self.region.len(),
                points
            );
            self.cache = None;
            return self;
        }
        let dim = self.grid.dim();
        let sums: Vec<f64> = self
            .region
            .par_iter()
            .flat_map_iter(|&m| {
                let x = self.grid.coords(m);
                self.weights.tail.points.iter().map(move |p| {
                    let mut plus = [0.0; 2];
                    let mut minus = [0.0; 2];
                    for i in 0..dim {
                        plus[i] = x[i] + p.y[i];
                        minus[i] = x[i] - p.y[i];
                    }
                    far.eval(&plus[..dim]) + far.eval(&minus[..dim])
                })
            })
            .collect();
        self.cache = Some((far.clone(), sums));
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &KernelWeights {
        &self.weights
    }

    /// Nodes of the solver region in grid index order.
    pub fn region(&self) -> &[Node] {
        &self.region
    }

    fn cached_sums(&self, far: &FarField, k: usize) -> Option<&[f64]> {
        match &self.cache {
            Some((cached, sums)) if cached.same_as(far) => {
                let n = self.weights.tail.len();
                Some(&sums[k * n..(k + 1) * n])
            }
            _ => None,
        }
    }

    /// `F'(0) C_near / (n h^2)`: weight of each nearest neighbour in the
    /// near-field model.
    fn near_weight(&self, f: &Nonlinearity) -> f64 {
        let h = self.grid.h();
        f.deriv(0.0) * self.weights.near_field_coeff / (self.grid.dim() as f64 * h * h)
    }

    /// `I[u, x]` at the `k`-th region node.
    pub fn eval_region(&self, u: &GridFunction, f: &Nonlinearity, k: usize) -> f64 {
        let m = self.region[k];
        let uc = u.at(m);
        let dim = self.grid.dim();
        let mut near = 0.0;
        for i in 0..dim {
            let mut e = [0i64; 2];
            e[i] = 1;
            near += u.at([m[0] + e[0], m[1] + e[1]]) + u.at([m[0] - e[0], m[1] - e[1]]) - 2.0 * uc;
        }
        let mut mid = 0.0;
        for w in &self.weights.mid {
            let y = w.offset;
            let d = u.at([m[0] + y[0], m[1] + y[1]]) + u.at([m[0] - y[0], m[1] - y[1]]) - 2.0 * uc;
            mid += w.weight * f.eval(d);
        }
        let tail = match self.cached_sums(u.far_field(), k) {
            Some(sums) => sums
                .iter()
                .zip(&self.weights.tail.points)
                .map(|(s, p)| p.weight * f.eval(s - 2.0 * uc))
                .sum(),
            None => {
                let x = self.grid.coords(m);
                tail_sum(u.far_field(), uc, &x[..dim], f, &self.weights.tail)
            }
        };
        self.near_weight(f) * near + 2.0 * mid + tail
    }

    /// `I[u, .]` on the whole solver region, in region order.
    pub fn eval_field(&self, u: &GridFunction, f: &Nonlinearity) -> Vec<f64> {
        (0..self.region.len())
            .into_par_iter()
            .map(|k| self.eval_region(u, f, k))
            .collect()
    }

    /// Partial derivatives of `I[u, x_k]` with respect to the lattice values
    /// of `u`. Entries for nodes outside the box are dropped; entries may
    /// repeat for the same node.
    pub fn jacobian_row(
        &self,
        u: &GridFunction,
        f: &Nonlinearity,
        k: usize,
        mut emit: impl FnMut(usize, f64),
    ) {
        let m = self.region[k];
        let grid = &self.grid;
        let uc = u.at(m);
        let mut diag = 0.0;
        let mut push = |node: Node, v: f64| {
            if grid.contains(node) {
                emit(grid.index(node), v);
            }
        };
        let kappa = self.near_weight(f);
        for i in 0..grid.dim() {
            let mut e = [0i64; 2];
            e[i] = 1;
            push([m[0] + e[0], m[1] + e[1]], kappa);
            push([m[0] - e[0], m[1] - e[1]], kappa);
            diag -= 2.0 * kappa;
        }
        for w in &self.weights.mid {
            let y = w.offset;
            let p = [m[0] + y[0], m[1] + y[1]];
            let q = [m[0] - y[0], m[1] - y[1]];
            let d = u.at(p) + u.at(q) - 2.0 * uc;
            let c = 2.0 * w.weight * f.deriv(d);
            push(p, c);
            push(q, c);
            diag -= 2.0 * c;
        }
        let dim = grid.dim();
        let tail_slope: f64 = match self.cached_sums(u.far_field(), k) {
            Some(sums) => sums
                .iter()
                .zip(&self.weights.tail.points)
                .map(|(s, p)| p.weight * f.deriv(s - 2.0 * uc))
                .sum(),
            None => {
                let x = grid.coords(m);
                let far = u.far_field();
                self.weights
                    .tail
                    .points
                    .iter()
                    .map(|p| {
                        let mut plus = [0.0; 2];
                        let mut minus = [0.0; 2];
                        for i in 0..dim {
                            plus[i] = x[i] + p.y[i];
                            minus[i] = x[i] - p.y[i];
                        }
                        p.weight
                            * f.deriv(far.eval(&plus[..dim]) + far.eval(&minus[..dim]) - 2.0 * uc)
                    })
                    .sum()
            }
        };
        diag -= 2.0 * tail_slope;
        push(m, diag);
    }

    /// `I[u, x_k] - g(x_k, u - phi)` over the region.
    pub fn residual(&self, u: &GridFunction, spec: &ProblemSpec, f: &Nonlinearity) -> Vec<f64> {
        let dim = self.grid.dim();
        (0..self.region.len())
            .into_par_iter()
            .map(|k| {
                let m = self.region[k];
                let x = self.grid.coords(m);
                let t = u.at(m) - spec.phi.eval(&x[..dim]);
                self.eval_region(u, f, k) - spec.g.eval(&x[..dim], t)
            })
            .collect()
    }
}

fn check_finite(v: f64, grid: &Grid, m: Node) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteOperator {
            at: grid.coords(m)[..grid.dim()].to_vec(),
        })
    }
}

/// `I[u, x]` at a single node of the solver region.
pub fn eval_operator(
    u: &GridFunction,
    f: &Nonlinearity,
    w: &KernelWeights,
    x: Node,
) -> Result<f64> {
    let grid = *u.grid();
    if !grid.in_region(x) {
        return Err(Error::OutsideSolverRegion {
            at: grid.coords(x)[..grid.dim()].to_vec(),
        });
    }
    let ctx = OperatorContext {
        grid,
        weights: w.clone(),
        region: vec![x],
        cache: None,
    };
    check_finite(ctx.eval_region(u, f, 0), &grid, x)
}

/// Residual of the equation on the solver region; nodes outside the region
/// carry zero and are flagged in `in_region`.
#[derive(Debug, Clone)]
pub struct ResidualField {
    pub field: GridFunction,
    pub in_region: Vec<bool>,
}

impl ResidualField {
    pub fn region_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.field
            .values()
            .iter()
            .zip(&self.in_region)
            .filter(|(_, r)| **r)
            .map(|(v, _)| *v)
    }

    pub fn sup_norm(&self) -> f64 {
        self.region_values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.region_values().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.region_values().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Region node with the smallest residual.
    pub fn argmin(&self) -> Node {
        self.arg_by(|a, b| a < b)
    }

    pub fn argmax(&self) -> Node {
        self.arg_by(|a, b| a > b)
    }

    fn arg_by(&self, better: impl Fn(f64, f64) -> bool) -> Node {
        let grid = self.field.grid();
        let mut best: Option<(usize, f64)> = None;
        for (k, (&v, &r)) in self.field.values().iter().zip(&self.in_region).enumerate() {
            if r && best.is_none_or(|(_, b)| better(v, b)) {
                best = Some((k, v));
            }
        }
        grid.node(best.map(|b| b.0).unwrap_or(0))
    }
}

pub(crate) fn scatter_region(grid: &Grid, region: &[Node], values: &[f64]) -> ResidualField {
    let mut out = vec![0.0; grid.len()];
    let mut mask = vec![false; grid.len()];
    for (m, v) in region.iter().zip(values) {
        let i = grid.index(*m);
        out[i] = *v;
        mask[i] = true;
    }
    ResidualField {
        field: GridFunction::from_values(*grid, out, FarField::Zero).expect("finite"),
        in_region: mask,
    }
}

/// `r(x) = I[u,x] - g(x, u(x) - phi(x))` over the solver region.
pub fn residual_field(
    u: &GridFunction,
    spec: &ProblemSpec,
    w: &KernelWeights,
) -> Result<ResidualField> {
    let ctx = OperatorContext::new(*u.grid(), w.clone())?;
    residual_with(&ctx, u, spec, &spec.f)
}

pub(crate) fn residual_with(
    ctx: &OperatorContext,
    u: &GridFunction,
    spec: &ProblemSpec,
    f: &Nonlinearity,
) -> Result<ResidualField> {
    let values = ctx.residual(u, spec, f);
    for (k, v) in values.iter().enumerate() {
        check_finite(*v, ctx.grid(), ctx.region()[k])?;
    }
    Ok(scatter_region(ctx.grid(), ctx.region(), &values))
}
