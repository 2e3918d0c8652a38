//! Sampled audits of the structural hypotheses on `F`, `g` and `phi`.
//!
//! Every hypothesis is universally quantified, so each check samples it on a
//! documented finite set and reports the first violating witness.

use serde::Serialize;

use crate::model::problem::ProblemSpec;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConditionCheck {
    pub id: &'static str,
    pub description: &'static str,
    pub passed: bool,
    pub witness: Option<String>,
    pub sampling: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, id: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// `0, +-10^e` for `e` on 91 equispaced exponents in `[-6, 3]`, sorted.
pub fn log_samples() -> Vec<f64> {
    let mut t: Vec<f64> = (0..=90)
        .flat_map(|k| {
            let v = 10f64.powf(-6.0 + k as f64 * 0.1);
            [v, -v]
        })
        .collect();
    t.push(0.0);
    t.sort_by(f64::total_cmp);
    t
}

const T_SAMPLING: &str = "t in {0, +-10^e : e = -6.0, -5.9, ..., 3.0}";
const REL: f64 = 1e-12;

fn check(
    id: &'static str,
    description: &'static str,
    sampling: String,
    witness: Option<String>,
) -> ConditionCheck {
    ConditionCheck {
        id,
        description,
        passed: witness.is_none(),
        witness,
        sampling,
    }
}

/// Up to ~2000 lattice points spread over the box.
fn lattice_samples(spec: &ProblemSpec) -> (Vec<[f64; 2]>, String) {
    let grid = &spec.grid;
    let total = grid.len();
    let stride = (total / 2000).max(1);
    let pts = (0..total)
        .step_by(stride)
        .map(|k| grid.coords(grid.node(k)))
        .collect::<Vec<_>>();
    (
        pts,
        format!(
            "every {stride}-th lattice node of the box ({} points)",
            total.div_ceil(stride)
        ),
    )
}

fn sym_eigs(h: [[f64; 2]; 2], dim: usize) -> (f64, f64) {
    if dim == 1 {
        return (h[0][0], h[0][0]);
    }
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr - disc, 0.5 * tr + disc)
}

pub fn validate_problem(spec: &ProblemSpec) -> ValidationReport {
    let f = &spec.f;
    let g = &spec.g;
    let phi = &spec.phi;
    let dim = spec.dim();
    let ts = log_samples();
    let (xs, x_sampling) = lattice_samples(spec);
    let mut checks = Vec::new();

    checks.push(check(
        "sigma_in_range",
        "order sigma lies strictly inside (1,2)",
        "exact".into(),
        (!(spec.sigma > 1.0 && spec.sigma < 2.0)).then(|| format!("sigma = {}", spec.sigma)),
    ));

    let f0 = f.eval(0.0);
    checks.push(check(
        "f_vanishes_at_zero",
        "F(0) = 0",
        "exact evaluation at t = 0".into(),
        (f0 != 0.0).then(|| format!("F(0) = {f0:e}")),
    ));

    let l1 = f.meta.lip_bound;
    let lip_witness = ts.windows(2).find_map(|w| {
        let (s, t) = (w[0], w[1]);
        let slope = (f.eval(t) - f.eval(s)) / (t - s);
        (slope.abs() > l1 * (1.0 + REL) || f.deriv(t).abs() > l1 * (1.0 + REL))
            .then(|| format!("difference quotient {slope:e} on [{s:e}, {t:e}] exceeds L1 = {l1:e}"))
    });
    checks.push(check(
        "f_lipschitz",
        "Lip(F) <= L1",
        format!("consecutive pairs of {T_SAMPLING}"),
        lip_witness,
    ));

    let inc_witness = ts.iter().find_map(|&t| {
        let d = f.deriv(t);
        (!(d > 0.0)).then(|| format!("F'({t:e}) = {d:e}"))
    });
    checks.push(check(
        "f_increasing",
        "F' > 0",
        T_SAMPLING.into(),
        inc_witness,
    ));

    let (lo, hi) = (f.meta.ellipticity_lower, f.meta.ellipticity_upper);
    if lo > 0.0 {
        let witness = ts.iter().find_map(|&t| {
            let d = f.deriv(t);
            (d < lo * (1.0 - REL) || d > hi * (1.0 + REL))
                .then(|| format!("F'({t:e}) = {d:e} outside [{lo:e}, {hi:e}]"))
        });
        checks.push(check(
            "f_uniform_ellipticity",
            "lambda <= F' <= Lambda",
            T_SAMPLING.into(),
            witness,
        ));
    }

    let l2 = g.meta.x_lip;
    let mut gx_witness = None;
    'outer: for pair in xs.windows(2) {
        let (x, y) = (&pair[0][..dim], &pair[1][..dim]);
        let dist = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        for &t in ts.iter().step_by(10) {
            let diff = (g.eval(x, t) - g.eval(y, t)).abs();
            if diff > l2 * dist * (1.0 + REL) + 1e-14 * (1.0 + t.abs()) {
                gx_witness = Some(format!(
                    "|g({x:?},{t:e}) - g({y:?},{t:e})| = {diff:e} > L2 |x-y|"
                ));
                break 'outer;
            }
        }
    }
    checks.push(check(
        "g_lipschitz_in_x",
        "|g(x,t) - g(x',t)| <= L2 |x - x'|",
        format!("{x_sampling}, consecutive pairs, every 10th t sample"),
        gx_witness,
    ));

    let mu = g.meta.monotone_rate;
    let mut mono_witness = None;
    'outer2: for x in &xs {
        for w in ts.windows(2) {
            let (s, t) = (w[0], w[1]);
            let inc = g.eval(&x[..dim], t) - g.eval(&x[..dim], s);
            if inc < mu * (t - s) * (1.0 - 1e-9) {
                mono_witness = Some(format!(
                    "g(x,{t:e}) - g(x,{s:e}) = {inc:e} < mu (t - s) = {:e} at x = {:?}",
                    mu * (t - s),
                    &x[..dim]
                ));
                break 'outer2;
            }
        }
    }
    checks.push(check(
        "g_monotone_in_t",
        "g(x,t) - g(x,s) >= mu (t - s) for t > s",
        format!("{x_sampling}; consecutive pairs of {T_SAMPLING}"),
        mono_witness,
    ));

    let g0_witness = xs.iter().find_map(|x| {
        let v = g.eval(&x[..dim], 0.0);
        (v != 0.0).then(|| format!("g({:?}, 0) = {v:e}", &x[..dim]))
    });
    checks.push(check(
        "g_vanishes_at_zero",
        "g(x,0) = 0",
        x_sampling.clone(),
        g0_witness,
    ));

    let l3 = phi.meta.hess_bound;
    let hess_witness = xs.iter().find_map(|x| {
        let (emin, emax) = sym_eigs(phi.hess(&x[..dim]), dim);
        (emin < -1e-14 || emax > l3 * (1.0 + REL)).then(|| {
            format!(
                "Hessian eigenvalues [{emin:e}, {emax:e}] at x = {:?} outside [0, {l3:e}]",
                &x[..dim]
            )
        })
    });
    checks.push(check(
        "phi_hessian_bounds",
        "0 <= D^2 phi <= L3",
        x_sampling.clone(),
        hess_witness,
    ));

    let l4 = phi.meta.lip_bound;
    let grad_witness = xs.iter().find_map(|x| {
        let gr = phi.grad(&x[..dim]);
        let norm = (gr[0] * gr[0] + gr[1] * gr[1]).sqrt();
        (norm > l4 * (1.0 + REL))
            .then(|| format!("|grad phi({:?})| = {norm:e} > L4 = {l4:e}", &x[..dim]))
    });
    checks.push(check(
        "phi_lipschitz",
        "|grad phi| <= L4",
        x_sampling.clone(),
        grad_witness,
    ));

    let l5 = phi.l1_kernel_norm(spec.sigma);
    checks.push(check(
        "phi_weighted_l1",
        "int |phi| (1+|y|)^(-n-sigma) dy = L5 < inf",
        "adaptive Gauss-Kronrod in the radial variable, relative tolerance 1e-11".into(),
        match l5 {
            Ok(v) if v.is_finite() => None,
            Ok(v) => Some(format!("L5 = {v}")),
            Err(e) => Some(e.to_string()),
        },
    ));

    let (c, eps) = (phi.meta.cone_const, phi.meta.cone_eps);
    let cone_witness = (0..=300).find_map(|k| {
        let r = 10.0 * 10f64.powf(k as f64 / 100.0);
        let mut x = [0.0; 2];
        x[0] = r / (dim as f64).sqrt();
        if dim == 2 {
            x[1] = x[0];
        }
        let value = phi.eval(&x[..dim]);
        let eta = (value - phi.cone(&x[..dim])).abs();
        // the subtraction cancels; its rounding error scales with |phi|
        let rounding = 4.0 * f64::EPSILON * value.abs();
        (eta > c * r.powf(-eps) * (1.0 + 1e-9) + rounding + 1e-13)
            .then(|| format!("|phi - cone| = {eta:e} > C|x|^-eps at |x| = {r}"))
    });
    checks.push(check(
        "phi_close_to_cone",
        "|phi(x) - Gamma(x)| <= C |x|^(-eps) for |x| >= 10",
        "301 log-spaced radii in [10, 1e4] along the diagonal".into(),
        cone_witness,
    ));

    ValidationReport { checks }
}
