//! Discrete solution of `I[u] = g(x, u - phi)` on the solver region, with
//! `u = phi` on the rest of the box and beyond.
//!
//! Iterates are kept between `phi` and a certified supersolution. The
//! default iteration is damped Newton on the dense Jacobian; the explicit
//! relaxation `u <- u + tau (I[u] - g)` is available for problems where `g`
//! or `F` is not differentiable.

use std::time::Instant;

use faer::prelude::*;
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::barriers::{upper_barrier, Barrier, BarrierSummary};
use crate::error::{Error, Result};
use crate::model::grid::GridFunction;
use crate::model::nonlinearity::Nonlinearity;
use crate::model::problem::ProblemSpec;
use crate::operator::{regularize_f, OperatorContext};
use crate::quadrature::KernelWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Newton,
    Relaxation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationConfig {
    pub eps0: f64,
    pub shrink: f64,
    /// Stop once `||u_k - u_{k-1}||_inf` drops below this.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            eps0: 0.1,
            shrink: 0.5,
            tol: 1e-5,
            max_steps: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub damping: Damping,
    pub tol_residual: f64,
    pub max_iters: usize,
    pub continuation: ContinuationConfig,
    pub clip_to_barriers: bool,
    /// Log the residual every this many iterations; 0 disables.
    pub log_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Newton,
            damping: Damping::Auto,
            tol_residual: 1e-8,
            max_iters: 100,
            continuation: ContinuationConfig::default(),
            clip_to_barriers: true,
            log_every: 0,
        }
    }
}

impl SolverConfig {
    pub fn relaxation(max_iters: usize) -> Self {
        Self {
            method: SolverMethod::Relaxation,
            max_iters,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::param("solver.tol", "must be positive"));
        }
        if let Damping::Fixed(t) = self.damping {
            if !(t > 0.0) {
                return Err(Error::param("solver.damping", "must be positive"));
            }
        }
        let c = &self.continuation;
        if !(c.eps0 > 0.0) || !(c.shrink > 0.0 && c.shrink < 1.0) || !(c.tol > 0.0) {
            return Err(Error::param(
                "continuation",
                "need eps0 > 0, shrink in (0,1), tol > 0",
            ));
        }
        Ok(())
    }
}

/// One leg of the continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationStep {
    pub k: usize,
    pub eps: f64,
    /// `||u_k - u_{k-1}||_inf`; `None` for the first leg.
    pub gap: Option<f64>,
    pub iterations: usize,
    pub final_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub u: GridFunction,
    pub method: SolverMethod,
    pub iterations: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    pub continuation: Vec<ContinuationStep>,
    pub barriers: Vec<BarrierSummary>,
    pub sandwich_violations: usize,
    pub clip_activations: usize,
    pub tau_relax: Option<f64>,
    /// Set when Newton stopped because its step fell below rounding level
    /// before the residual reached the tolerance; the residual is then
    /// limited by cancellation in the operator sums.
    pub roundoff_limited: bool,
    /// Excluded from serialization so that reports are reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl SolveReport {
    /// `||u - phi||_inf` over the box.
    pub fn gap_from_phi(&self, spec: &ProblemSpec) -> f64 {
        spec.difference_from_phi(&self.u).sup_norm()
    }
}

/// Largest `dg/dt` over `|t| <= t_bound` at the region nodes, sampled at
/// `t = 0, +-t_bound/2, +-t_bound`.
fn forcing_slope(spec: &ProblemSpec, ctx: &OperatorContext, t_bound: f64) -> f64 {
    let dim = spec.dim();
    let ts = [0.0, 0.5 * t_bound, t_bound, -0.5 * t_bound, -t_bound];
    ctx.region()
        .iter()
        .flat_map(|&m| {
            let x = spec.grid.coords(m);
            ts.map(|t| spec.g.deriv_t(&x[..dim], t))
        })
        .fold(0.0, f64::max)
}

/// `0.9 / (Lambda * total_mass + mu + g_t)` with `g_t` the forcing slope at
/// `t = 0`: the stability budget of the explicit relaxation.
pub fn auto_damping(spec: &ProblemSpec, w: &KernelWeights) -> f64 {
    let ctx = OperatorContext::new(spec.grid, w.clone()).expect("weights match the grid");
    damping_for(spec, &ctx, &spec.f, 0.0)
}

fn damping_for(spec: &ProblemSpec, ctx: &OperatorContext, f: &Nonlinearity, t_bound: f64) -> f64 {
    let lambda = f
        .meta
        .ellipticity_upper
        .max(f.meta.ellipticity_lower)
        .max(f.deriv(0.0));
    let budget =
        lambda * ctx.weights().total_mass() + spec.g.mu() + forcing_slope(spec, ctx, t_bound);
    (0.9 / budget).min(1.0)
}

/// Relative size of a Newton step treated as rounding noise.
const STEP_FLOOR: f64 = 1e-12;

struct Leg {
    u: GridFunction,
    history: Vec<f64>,
    clip_activations: usize,
    tau: Option<f64>,
    roundoff_limited: bool,
}

/// Region values of `phi` and of the upper barrier (infinite without one).
struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    fn clip(&self, values: &mut [f64], idx: &[usize]) -> usize {
        let mut hits = 0;
        for (k, &i) in idx.iter().enumerate() {
            let v = values[i];
            let c = v.clamp(self.lower[k], self.upper[k]);
            if c != v {
                hits += 1;
                values[i] = c;
            }
        }
        hits
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `u_init` restricted to the region, with `phi` on the band and as closure.
fn initial_state(
    spec: &ProblemSpec,
    ctx: &OperatorContext,
    u_init: Option<&GridFunction>,
) -> Result<GridFunction> {
    let phi = spec.phi_grid();
    let Some(init) = u_init else { return Ok(phi) };
    if init.grid() != &spec.grid {
        return Err(Error::param("u_init", "grid differs from the problem grid"));
    }
    let mut values = phi.values().to_vec();
    for &m in ctx.region() {
        let i = spec.grid.index(m);
        values[i] = init.values()[i];
    }
    GridFunction::from_values(spec.grid, values, spec.phi_far())
}

fn solve_leg(
    spec: &ProblemSpec,
    ctx: &OperatorContext,
    f: &Nonlinearity,
    config: &SolverConfig,
    start: GridFunction,
    bounds: &Bounds,
) -> Result<Leg> {
    let idx: Vec<usize> = ctx.region().iter().map(|&m| spec.grid.index(m)).collect();
    let mut u = start;
    let mut clips = bounds.clip(u.values_mut(), &idx);
    let mut history = Vec::new();
    let mut r = ctx.residual(&u, spec, f);
    let tau = match (config.method, config.damping) {
        (SolverMethod::Relaxation, Damping::Fixed(t)) => Some(t),
        (SolverMethod::Relaxation, Damping::Auto) => {
            let t_bound = bounds
                .upper
                .iter()
                .zip(&bounds.lower)
                .map(|(a, b)| a - b)
                .filter(|d| d.is_finite())
                .fold(0.0, f64::max);
            Some(damping_for(spec, ctx, f, t_bound.max(sup_norm(&r))))
        }
        _ => None,
    };
    let mut rises = 0;
    let mut roundoff_limited = false;
    for it in 0.. {
        let norm = sup_norm(&r);
        if !norm.is_finite() {
            return Err(Error::NonFiniteOperator { at: vec![] });
        }
        history.push(norm);
        if config.log_every > 0 && it % config.log_every == 0 {
            log::info!("iteration {it}: residual {norm:.3e}");
        }
        if norm <= config.tol_residual {
            break;
        }
        if it >= config.max_iters {
            return Err(Error::MaxIterations {
                iterations: it,
                residual: norm,
                history,
            });
        }
        match tau {
            Some(tau) => {
                for (k, &i) in idx.iter().enumerate() {
                    u.values_mut()[i] += tau * r[k];
                }
                clips += bounds.clip(u.values_mut(), &idx);
                r = ctx.residual(&u, spec, f);
                let next = sup_norm(&r);
                rises = if next > norm { rises + 1 } else { 0 };
                if rises >= 3 {
                    history.push(next);
                    return Err(Error::Oscillation {
                        iteration: it + 1,
                        history,
                    });
                }
            }
            None => {
                let step = newton_step(spec, ctx, f, &u, &r, &idx)?;
                let scale = idx.iter().fold(1.0_f64, |m, &i| m.max(u.values()[i].abs()));
                if sup_norm(&step) <= STEP_FLOOR * scale {
                    log::info!("Newton step below roundoff at residual {norm:.3e}; stopping");
                    roundoff_limited = true;
                    break;
                }
                let mut alpha = 1.0;
                loop {
                    let mut cand = u.clone();
                    for (k, &i) in idx.iter().enumerate() {
                        cand.values_mut()[i] += alpha * step[k];
                    }
                    let hits = bounds.clip(cand.values_mut(), &idx);
                    let rc = ctx.residual(&cand, spec, f);
                    let nc = sup_norm(&rc);
                    if nc < (1.0 - 1e-4 * alpha) * norm || alpha < 1e-6 {
                        if alpha < 1e-6 && nc >= norm {
                            return Err(Error::MaxIterations {
                                iterations: it,
                                residual: norm,
                                history,
                            });
                        }
                        u = cand;
                        r = rc;
                        clips += hits;
                        break;
                    }
                    alpha *= 0.5;
                }
            }
        }
    }
    Ok(Leg {
        u,
        history,
        clip_activations: clips,
        tau,
        roundoff_limited,
    })
}

/// Solves `J d = -r` with `J` the Jacobian of `I[u] - g(x, u - phi)` in the
/// region unknowns.
fn newton_step(
    spec: &ProblemSpec,
    ctx: &OperatorContext,
    f: &Nonlinearity,
    u: &GridFunction,
    r: &[f64],
    idx: &[usize],
) -> Result<Vec<f64>> {
    let n = idx.len();
    let mut col_of = vec![usize::MAX; spec.grid.len()];
    for (k, &i) in idx.iter().enumerate() {
        col_of[i] = k;
    }
    let dim = spec.dim();
    let phi = &spec.phi;
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut row = Vec::new();
            ctx.jacobian_row(u, f, k, |i, v| {
                if col_of[i] != usize::MAX {
                    row.push((col_of[i], v));
                }
            });
            let m = ctx.region()[k];
            let x = spec.grid.coords(m);
            let t = u.at(m) - phi.eval(&x[..dim]);
            row.push((k, -spec.g.deriv_t(&x[..dim], t)));
            row
        })
        .collect();
    let mut dense = vec![0.0; n * n];
    for (k, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            dense[k * n + j] += v;
        }
    }
    let jac = Mat::<f64>::from_fn(n, n, |i, j| dense[i * n + j]);
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| -r[i]);
    let sol = jac.partial_piv_lu().solve(&rhs);
    let step: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    if step.iter().all(|v| v.is_finite()) {
        Ok(step)
    } else {
        Err(Error::LinearSolve("Newton system is singular".into()))
    }
}

fn bounds_for(spec: &ProblemSpec, ctx: &OperatorContext, barrier: Option<&Barrier>) -> Bounds {
    let phi = spec.phi_grid();
    let lower = ctx.region().iter().map(|&m| phi.at(m)).collect();
    let upper = match barrier {
        Some(b) => ctx.region().iter().map(|&m| b.profile.at(m)).collect(),
        None => vec![f64::INFINITY; ctx.region().len()],
    };
    Bounds { lower, upper }
}

/// Nodes of `u` outside `[phi, upper]`.
fn sandwich_violations(spec: &ProblemSpec, u: &GridFunction, barrier: Option<&Barrier>) -> usize {
    let phi = spec.phi_grid();
    spec.grid
        .nodes()
        .filter(|&m| {
            let v = u.at(m);
            v < phi.at(m) || barrier.is_some_and(|b| v > b.profile.at(m))
        })
        .count()
}

/// Solves the problem for a uniformly elliptic `F` (`lambda > 0`), starting
/// from `u_init` (default `phi`).
pub fn solve_uniformly_elliptic(
    spec: &ProblemSpec,
    w: &KernelWeights,
    config: &SolverConfig,
    u_init: Option<&GridFunction>,
) -> Result<SolveReport> {
    config.check()?;
    if !(spec.f.meta.ellipticity_lower > 0.0) {
        return Err(Error::Precondition(format!(
            "nonlinearity `{}` is not uniformly elliptic; use the continuation solver",
            spec.f.label()
        )));
    }
    let clock = Instant::now();
    let ctx = OperatorContext::for_problem(spec, w.clone())?;
    let barrier = if config.clip_to_barriers {
        Some(upper_barrier(spec, w, &spec.f)?)
    } else {
        None
    };
    let bounds = bounds_for(spec, &ctx, barrier.as_ref());
    let start = initial_state(spec, &ctx, u_init)?;
    let leg = solve_leg(spec, &ctx, &spec.f, config, start, &bounds)?;
    let violations = sandwich_violations(spec, &leg.u, barrier.as_ref());
    Ok(SolveReport {
        method: config.method,
        iterations: leg.history.len() - 1,
        final_residual: *leg.history.last().unwrap(),
        residual_history: leg.history,
        continuation: Vec::new(),
        barriers: barrier.iter().map(|b| b.summary()).collect(),
        sandwich_violations: violations,
        clip_activations: leg.clip_activations,
        tau_relax: leg.tau,
        roundoff_limited: leg.roundoff_limited,
        u: leg.u,
        wall_time_s: clock.elapsed().as_secs_f64(),
    })
}

/// Ellipticity ratio below which a direct solve is replaced by continuation.
pub const CONTINUATION_RATIO: f64 = 1e-3;

/// Whether `F` is degenerate, or so weakly elliptic that a direct Newton solve
/// is ill-conditioned: `lambda <= CONTINUATION_RATIO * Lambda`.
pub fn needs_continuation(f: &Nonlinearity) -> bool {
    f.meta.ellipticity_lower <= CONTINUATION_RATIO * f.meta.ellipticity_upper
}

/// Continuation in `eps_k = eps0 shrink^k`: each leg solves with
/// `F_eps_k`, warm-started from the previous leg, until consecutive
/// solutions differ by less than the continuation tolerance.
pub fn solve_degenerate(
    spec: &ProblemSpec,
    w: &KernelWeights,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.check()?;
    let clock = Instant::now();
    let cont = config.continuation;
    let ctx = OperatorContext::for_problem(spec, w.clone())?;
    let mut trace = Vec::new();
    let mut history = Vec::new();
    let mut barriers = Vec::new();
    let mut clips = 0;
    let mut tau = None;
    let mut roundoff = false;
    let mut prev: Option<GridFunction> = None;
    let mut gaps: Vec<f64> = Vec::new();
    let mut last_barrier = None;
    let mut eps = cont.eps0;
    for k in 0..cont.max_steps {
        let f = regularize_f(&spec.f, eps);
        let barrier = if config.clip_to_barriers {
            Some(upper_barrier(spec, w, &f)?)
        } else {
            None
        };
        let bounds = bounds_for(spec, &ctx, barrier.as_ref());
        let start = match &prev {
            Some(u) => u.clone(),
            None => spec.phi_grid(),
        };
        let leg = solve_leg(spec, &ctx, &f, config, start, &bounds)?;
        let gap = prev.as_ref().map(|p| {
            p.values()
                .iter()
                .zip(leg.u.values())
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        });
        let final_residual = *leg.history.last().unwrap();
        log::info!(
            "continuation k = {k}, eps = {eps:.3e}: {} iterations, gap {gap:?}",
            leg.history.len() - 1
        );
        trace.push(ContinuationStep {
            k,
            eps,
            gap,
            iterations: leg.history.len() - 1,
            final_residual,
        });
        history.extend_from_slice(&leg.history);
        clips += leg.clip_activations;
        tau = leg.tau.or(tau);
        roundoff |= leg.roundoff_limited;
        if let Some(b) = &barrier {
            barriers.push(b.summary());
        }
        prev = Some(leg.u);
        last_barrier = barrier;
        if let Some(g) = gap {
            gaps.push(g);
            if g <= cont.tol {
                break;
            }
            let n = gaps.len();
            if n >= 4 && gaps[n - 4..].windows(2).all(|p| p[1] >= p[0]) {
                return Err(Error::ContinuationStalled { eps, gaps });
            }
        }
        eps *= cont.shrink;
    }
    let u = prev.expect("at least one continuation step");
    let violations = sandwich_violations(spec, &u, last_barrier.as_ref());
    let final_residual = trace.last().map(|s| s.final_residual).unwrap_or(f64::NAN);
    Ok(SolveReport {
        method: config.method,
        iterations: trace.iter().map(|s| s.iterations).sum(),
        final_residual,
        residual_history: history,
        continuation: trace,
        barriers,
        sandwich_violations: violations,
        clip_activations: clips,
        tau_relax: tau,
        roundoff_limited: roundoff,
        u,
        wall_time_s: clock.elapsed().as_secs_f64(),
    })
}
