//! Sup and inf convolutions `u^eps(x) = sup_y (u(y) - |y-x|^2/eps)` and
//! `u_eps(x) = inf_y (u(y) + |y-x|^2/eps)` on the lattice.
//!
//! The maximizer satisfies `|y - x|^2 <= 2 eps ||u||_inf`, so each node only
//! searches a ball of radius `sqrt(2 eps ||u||_inf) + 2h` and the result is
//! the exact discrete envelope over the box.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::grid::{GridFunction, Node};

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub env: GridFunction,
    /// Maximizer (sup case) or minimizer (inf case) for each lattice node.
    pub argpoint: Vec<Node>,
    pub eps: f64,
    /// Search radius in physical units.
    pub radius: f64,
    pub is_sup: bool,
}

impl EnvelopeResult {
    /// `argpoint(x) - x` in physical units along the first axis.
    pub fn offsets(&self) -> Vec<f64> {
        let grid = self.env.grid();
        grid.nodes()
            .zip(&self.argpoint)
            .map(|(m, a)| (a[0] - m[0]) as f64 * grid.h())
            .collect()
    }
}

fn dist2(grid_h: f64, a: Node, b: Node) -> f64 {
    let dx = (a[0] - b[0]) as f64 * grid_h;
    let dy = (a[1] - b[1]) as f64 * grid_h;
    dx * dx + dy * dy
}

/// Value of the parabola with vertex data `(y, u(y))` at `x`; shared by the
/// envelope and the touching check so both use identical arithmetic.
#[inline]
fn parabola(uy: f64, d2: f64, eps: f64, sign: f64) -> f64 {
    uy - sign * d2 / eps
}

fn envelope(u: &GridFunction, eps: f64, sign: f64) -> Result<EnvelopeResult> {
    if !(eps > 0.0) {
        return Err(Error::param("eps_env", "must be positive"));
    }
    let grid = *u.grid();
    let h = grid.h();
    let radius = (2.0 * eps * u.sup_norm()).sqrt() + 2.0 * h;
    if radius > grid.box_radius() {
        return Err(Error::EnvelopeWindowTooLarge {
            radius,
            box_radius: grid.box_radius(),
        });
    }
    let steps = (radius / h).ceil() as i64;
    let r2 = radius * radius;
    let dim = grid.dim();
    let values = u.values();
    let (env, argpoint): (Vec<f64>, Vec<Node>) = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.node(k);
            let mut best = (values[k], x);
            let ys = if dim == 2 { -steps..=steps } else { 0..=0 };
            for dx in -steps..=steps {
                for dy in ys.clone() {
                    let y = [x[0] + dx, x[1] + dy];
                    if (dx == 0 && dy == 0) || !grid.contains(y) {
                        continue;
                    }
                    let d2 = dist2(h, x, y);
                    if d2 > r2 {
                        continue;
                    }
                    let v = parabola(values[grid.index(y)], d2, eps, sign);
                    if sign * v > sign * best.0 {
                        best = (v, y);
                    }
                }
            }
            best
        })
        .unzip();
    let env = GridFunction::from_values(grid, env, u.far_field().clone())?;
    Ok(EnvelopeResult {
        env,
        argpoint,
        eps,
        radius,
        is_sup: sign > 0.0,
    })
}

pub fn sup_envelope(u: &GridFunction, eps: f64) -> Result<EnvelopeResult> {
    envelope(u, eps, 1.0)
}

pub fn inf_envelope(u: &GridFunction, eps: f64) -> Result<EnvelopeResult> {
    envelope(u, eps, -1.0)
}

/// Outcome of [`check_touching_parabola`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TouchCheck {
    pub ok: bool,
    /// First node where the parabola crosses the envelope.
    pub witness: Option<Node>,
}

/// The parabola `P(z) = u(x*) -+ |z - x*|^2 / eps` through the recorded
/// argpoint must touch the envelope at `x` and stay on one side of it on
/// the search neighbourhood.
pub fn check_touching_parabola(res: &EnvelopeResult, u: &GridFunction, x: Node) -> TouchCheck {
    let grid = *u.grid();
    let h = grid.h();
    let sign = if res.is_sup { 1.0 } else { -1.0 };
    let star = res.argpoint[grid.index(x)];
    if !grid.contains(star) {
        return TouchCheck {
            ok: false,
            witness: Some(x),
        };
    }
    let u_star = u.at(star);
    let env = res.env.values();
    if parabola(u_star, dist2(h, x, star), res.eps, sign) != env[grid.index(x)] {
        return TouchCheck {
            ok: false,
            witness: Some(x),
        };
    }
    let steps = (res.radius / h).ceil() as i64;
    let r2 = res.radius * res.radius;
    let ys = if grid.dim() == 2 {
        -steps..=steps
    } else {
        0..=0
    };
    for dx in -steps..=steps {
        for dy in ys.clone() {
            let z = [x[0] + dx, x[1] + dy];
            if !grid.contains(z) || dist2(h, x, z) > r2 {
                continue;
            }
            let p = parabola(u_star, dist2(h, z, star), res.eps, sign);
            if sign * (p - env[grid.index(z)]) > 1e-12 {
                return TouchCheck {
                    ok: false,
                    witness: Some(z),
                };
            }
        }
    }
    TouchCheck {
        ok: true,
        witness: None,
    }
}

/// Smallest axis second difference of a sup envelope (largest for an inf
/// envelope) over interior nodes; bounded by `-+2/eps`.
pub fn semiconvexity_probe(res: &EnvelopeResult) -> f64 {
    let env = &res.env;
    let grid = *env.grid();
    let h = grid.h();
    let sign = if res.is_sup { 1.0 } else { -1.0 };
    let mut extreme = f64::INFINITY;
    for m in grid.nodes() {
        for axis in 0..grid.dim() {
            let mut e = [0i64; 2];
            e[axis] = 1;
            let (p, q) = ([m[0] + e[0], m[1] + e[1]], [m[0] - e[0], m[1] - e[1]]);
            if grid.contains(p) && grid.contains(q) {
                let d2 = (env.at(p) + env.at(q) - 2.0 * env.at(m)) / (h * h);
                extreme = extreme.min(sign * d2);
            }
        }
    }
    sign * extreme
}
