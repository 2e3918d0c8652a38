//! Sub- and supersolutions of the Dirichlet problem, each with a numerical
//! certificate checked on the solver region.

mod riesz;

pub use riesz::RieszProfile;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::boundary::BoundaryDatum;
use crate::model::grid::{sample_to_grid, FarField, GridFunction, Node};
use crate::model::nonlinearity::{make_nonlinearity, Nonlinearity, NonlinearityKind};
use crate::model::problem::ProblemSpec;
use crate::operator::{eval_operator, OperatorContext};
use crate::quadrature::KernelWeights;

/// Slack allowed in every certificate inequality.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// Largest amplitude tried by the doubling search.
pub const M_MAX: f64 = 1_073_741_824.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    SubsolutionPhi,
    SuperSuperlinear,
    SuperConcave,
    /// `phi + M u0` with the superlinear profile, certified for a forcing
    /// that is only monotone.
    SuperCertifiedProfile,
}

/// Outcome of checking a one-sided inequality at every region node.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub passed: bool,
    /// Worst value of the inequality: the largest `I - g` for supersolutions,
    /// the smallest for subsolutions.
    pub worst_value: f64,
    pub worst_node: Vec<f64>,
    pub tolerance: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub struct Barrier {
    pub kind: BarrierKind,
    pub profile: GridFunction,
    pub m: f64,
    /// Decay exponent of `u0`: `p` or `tau`.
    pub exponent: f64,
    pub certificate: Certificate,
    /// Largest `profile - phi` on the boundary of the box.
    pub edge_gap: f64,
    /// Largest `I_F[profile] - g` with the true nonlinearity; equals the
    /// certificate value except for the concave barrier, whose certificate
    /// is the linearized bound.
    pub nonlinear_residual: f64,
}

impl Barrier {
    pub fn summary(&self) -> BarrierSummary {
        BarrierSummary {
            kind: self.kind,
            m: self.m,
            p_or_tau: self.exponent,
            max_residual: self.certificate.worst_value,
            worst_node: self.certificate.worst_node.clone(),
            passed: self.certificate.passed,
            edge_gap: self.edge_gap,
        }
    }
}

/// Serializable view of a barrier.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierSummary {
    pub kind: BarrierKind,
    #[serde(rename = "M")]
    pub m: f64,
    pub p_or_tau: f64,
    pub max_residual: f64,
    pub worst_node: Vec<f64>,
    pub passed: bool,
    pub edge_gap: f64,
}

fn coords(spec: &ProblemSpec, m: Node) -> Vec<f64> {
    spec.grid.coords(m)[..spec.dim()].to_vec()
}

fn worst(values: &[f64], region: &[Node], larger: bool) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (k, &v) in values.iter().enumerate() {
        if (larger && v > best.1) || (!larger && v < best.1) {
            best = (k, v);
        }
    }
    debug_assert_eq!(values.len(), region.len());
    best
}

fn certificate(spec: &ProblemSpec, region: &[Node], values: &[f64], larger: bool) -> Certificate {
    let (k, v) = worst(values, region, larger);
    let passed = if larger {
        v <= CERTIFICATE_TOL
    } else {
        v >= -CERTIFICATE_TOL
    } && values.iter().all(|v| v.is_finite());
    Certificate {
        passed,
        worst_value: v,
        worst_node: coords(spec, region[k]),
        tolerance: CERTIFICATE_TOL,
        nodes: values.len(),
    }
}

/// Checks `I[phi, x] >= g(x, 0) - tol` on the solver region. For convex
/// `phi` this is a sign identity; a failure points at the quadrature.
pub fn check_subsolution_phi(spec: &ProblemSpec, w: &KernelWeights) -> Result<Certificate> {
    let ctx = OperatorContext::new(spec.grid, w.clone())?;
    let phi = spec.phi_grid();
    let values = ctx.residual(&phi, spec, &spec.f);
    Ok(certificate(spec, ctx.region(), &values, false))
}

fn edge_gap(profile: &GridFunction, phi: &GridFunction) -> f64 {
    let grid = profile.grid();
    let half = grid.half_nodes();
    grid.nodes()
        .filter(|m| m[0].abs() == half || (grid.dim() == 2 && m[1].abs() == half))
        .map(|m| profile.at(m) - phi.at(m))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `u0(x) = (1 + |x|^2)^(-p/2)`.
fn algebraic_profile(x: &[f64], p: f64) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(-0.5 * p)
}

/// `phi + M (1 + |x|^2)^(-p/2)` with the same expression as closure.
pub fn algebraic_barrier_profile(
    phi: &Arc<BoundaryDatum>,
    spec: &ProblemSpec,
    p: f64,
    m: f64,
) -> GridFunction {
    let closure = {
        let phi = phi.clone();
        move |x: &[f64]| phi.eval(x) + m * algebraic_profile(x, p)
    };
    let far = FarField::analytic(format!("phi + {m} u0"), closure.clone());
    sample_to_grid(closure, spec.grid, far).expect("barrier profile is finite")
}

/// Doubling search on `M` for `phi + M (1+|x|^2)^(-p/2)`, `p = (sigma-1)/2`,
/// certified against `f`.
fn doubling_search(
    spec: &ProblemSpec,
    w: &KernelWeights,
    f: &Nonlinearity,
    kind: BarrierKind,
) -> Result<Barrier> {
    let ctx = OperatorContext::new(spec.grid, w.clone())?;
    let p = 0.5 * (spec.sigma - 1.0);
    let phi = spec.phi_grid();
    let mut m = 1.0;
    loop {
        let profile = algebraic_barrier_profile(&spec.phi, spec, p, m);
        let values = ctx.residual(&profile, spec, f);
        let cert = certificate(spec, ctx.region(), &values, true);
        if cert.passed {
            log::info!(
                "{kind:?} barrier certified with M = {m} (max residual {:.3e})",
                cert.worst_value
            );
            let nonlinear_residual = cert.worst_value;
            return Ok(Barrier {
                kind,
                edge_gap: edge_gap(&profile, &phi),
                profile,
                m,
                exponent: p,
                certificate: cert,
                nonlinear_residual,
            });
        }
        log::debug!(
            "M = {m}: max residual {:.3e} at {:?}",
            cert.worst_value,
            cert.worst_node
        );
        m *= 2.0;
        if m > M_MAX {
            return Err(Error::BarrierFailed {
                reason: "superlinearity too weak at this scale".into(),
                worst_node: cert.worst_node,
            });
        }
    }
}

/// `phi + M u0` with `u0 = (1+|x|^2)^(-p/2)`, `p = (sigma-1)/2`, and `M` the
/// first power of two for which `I[u, x] <= g(x, M u0(x)) + tol` on the
/// region.
pub fn build_supersolution_superlinear(spec: &ProblemSpec, w: &KernelWeights) -> Result<Barrier> {
    if !spec.g.meta.superlinear {
        return Err(Error::Precondition(format!(
            "forcing `{}` is not superlinear; use the certified-profile barrier",
            spec.g.meta.label
        )));
    }
    doubling_search(spec, w, &spec.f, BarrierKind::SuperSuperlinear)
}

/// The same construction for a forcing that is only monotone. Nothing
/// guarantees success a priori; the certificate is what counts.
pub fn build_supersolution_profile(spec: &ProblemSpec, w: &KernelWeights) -> Result<Barrier> {
    doubling_search(spec, w, &spec.f, BarrierKind::SuperCertifiedProfile)
}

/// Supersolution used to clip solver iterates, certified against `f`
/// (which may be a regularization of `spec.f`).
pub fn upper_barrier(spec: &ProblemSpec, w: &KernelWeights, f: &Nonlinearity) -> Result<Barrier> {
    let kind = if spec.g.meta.superlinear {
        BarrierKind::SuperSuperlinear
    } else {
        BarrierKind::SuperCertifiedProfile
    };
    doubling_search(spec, w, f, kind)
}

/// Supersolution for concave `F` in the plane: `phi + M u0` with `u0` the
/// Riesz-type potential of `min(1, |x|^(-sigma-tau))`,
/// `tau = min(sigma-1, n-sigma)/2`.
///
/// The certificate is the linearized bound
/// `M F'(0) I_id[u0] + L1 I_id[phi] <= g(x, M u0) + tol`. Before that, the
/// profile must satisfy `I_id[u0] <= tol` on the region.
pub fn build_supersolution_concave(spec: &ProblemSpec, w: &KernelWeights) -> Result<Barrier> {
    let n = spec.dim() as f64;
    if n <= spec.sigma {
        return Err(Error::Precondition(
            "concave-F barrier requires n>sigma; use the superlinear barrier instead".into(),
        ));
    }
    if !spec.f.meta.concave_on_positive {
        return Err(Error::Precondition(format!(
            "nonlinearity `{}` is not flagged concave on [0,inf)",
            spec.f.label()
        )));
    }
    let tau = 0.5 * (spec.sigma - 1.0).min(n - spec.sigma);
    let h = spec.grid.h();
    let reach = spec.grid.box_radius() * std::f64::consts::SQRT_2 + spec.rho_tail;
    let riesz = Arc::new(RieszProfile::build(spec.sigma, tau, h / 4.0, reach));
    let u0 = {
        let r = riesz.clone();
        let far = FarField::analytic("riesz u0", move |x: &[f64]| r.eval(x));
        let r = riesz.clone();
        sample_to_grid(move |x| r.eval(x), spec.grid, far)?
    };

    let id = make_nonlinearity(NonlinearityKind::Identity)?;
    let ctx = OperatorContext::new(spec.grid, w.clone())?;
    let lin_u0 = ctx.eval_field(&u0, &id);
    let lin_phi = ctx.eval_field(&spec.phi_grid(), &id);
    let region = ctx.region().to_vec();
    let superharmonic = certificate(spec, &region, &lin_u0, true);
    if !superharmonic.passed {
        return Err(Error::BarrierFailed {
            reason: format!(
                "profile is not superharmonic: I_id[u0] = {:.3e}",
                superharmonic.worst_value
            ),
            worst_node: superharmonic.worst_node,
        });
    }

    let fp0 = spec.f.deriv(0.0);
    let l1 = spec.f.meta.lip_bound;
    let dim = spec.dim();
    let phi = spec.phi_grid();
    let mut m = 1.0;
    loop {
        let values: Vec<f64> = region
            .iter()
            .enumerate()
            .map(|(k, &node)| {
                let x = spec.grid.coords(node);
                m * fp0 * lin_u0[k] + l1 * lin_phi[k] - spec.g.eval(&x[..dim], m * u0.at(node))
            })
            .collect();
        let cert = certificate(spec, &region, &values, true);
        if cert.passed {
            let profile = phi.combine(1.0, &u0, m, {
                let (r, p) = (riesz.clone(), spec.phi.clone());
                FarField::analytic(format!("phi + {m} riesz u0"), move |x: &[f64]| {
                    p.eval(x) + m * r.eval(x)
                })
            });
            let nonlinear_residual = ctx
                .residual(&profile, spec, &spec.f)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            log::info!("concave barrier certified with M = {m} (nonlinear residual {nonlinear_residual:.3e})");
            return Ok(Barrier {
                kind: BarrierKind::SuperConcave,
                edge_gap: edge_gap(&profile, &phi),
                profile,
                m,
                exponent: tau,
                certificate: cert,
                nonlinear_residual,
            });
        }
        m *= 2.0;
        if m > M_MAX {
            return Err(Error::BarrierFailed {
                reason: "linearized bound fails for every M".into(),
                worst_node: cert.worst_node,
            });
        }
    }
}

/// Values of `I_id[phi]` along the first axis and their power-law fit.
#[derive(Debug, Clone, Serialize)]
pub struct ConeDecayReport {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Indices of radii with a non-positive value.
    pub nonpositive: Vec<usize>,
    /// Least-squares slope of `log value` against `log radius` over the
    /// last four radii; `None` when the fit is degenerate.
    pub slope: Option<f64>,
    pub constant: Option<f64>,
    /// `-(sigma - 1)`.
    pub predicted_slope: f64,
    pub degenerate: bool,
}

/// `I_id[phi]` at radii `1, 2, 4, ...` up to the edge of the solver region,
/// fitted as `C r^slope`.
pub fn cone_decay_check(spec: &ProblemSpec, w: &KernelWeights) -> Result<ConeDecayReport> {
    let id = make_nonlinearity(NonlinearityKind::Identity)?;
    let phi = spec.phi_grid();
    let h = spec.grid.h();
    let edge = spec.grid.region_half() as f64 * h;
    let mut radii = Vec::new();
    let mut r = 1.0;
    while r <= edge * (1.0 + 1e-12) {
        radii.push(r);
        r *= 2.0;
    }
    let values = radii
        .iter()
        .map(|&r| eval_operator(&phi, &id, w, [(r / h).round() as i64, 0]))
        .collect::<Result<Vec<f64>>>()?;
    let nonpositive: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v <= 0.0)
        .map(|(k, _)| k)
        .collect();
    let start = radii.len().saturating_sub(4);
    let fit_pts: Vec<(f64, f64)> = radii[start..]
        .iter()
        .zip(&values[start..])
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    let (slope, constant) = if fit_pts.len() >= 2 && fit_pts.len() == radii.len() - start {
        let k = fit_pts.len() as f64;
        let mx = fit_pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = fit_pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = fit_pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = fit_pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let s = sxy / sxx;
        (Some(s), Some((my - s * mx).exp()))
    } else {
        (None, None)
    };
    Ok(ConeDecayReport {
        radii,
        values,
        nonpositive,
        degenerate: slope.is_none(),
        slope,
        constant,
        predicted_slope: 1.0 - spec.sigma,
    })
}
