use std::f64::consts::PI;

use crate::gauss::GaussLegendre;
use crate::model::grid::FarField;
use crate::model::nonlinearity::Nonlinearity;

/// Layout of the radial rule on `|y| > rho`.
///
/// Unit-scale panels cover `[rho, band_end]` with Gauss-Legendre nodes in `r`.
/// Beyond that, geometric panels are integrated in the variable
/// `s = r^(1 - sigma)`, in which the slowly decaying kernel against a
/// linearly growing closure becomes a smooth, bounded integrand; a final
/// panel in `s` reaches infinity.
///
/// For bounded closures that oscillate forever the geometric panels alias;
/// `mean_beyond_band` instead closes the integral past `band_end = Y` with
/// the mean of the integrand over `[Y/2, Y]` times the exact kernel mass of
/// `r > Y`, an `O(Y^(-1-sigma))` approximation that reuses the band nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailOptions {
    /// End of the band of fixed-width panels; `None` means `4 rho`.
    pub band_end: Option<f64>,
    pub band_width: f64,
    pub geometric_panels: usize,
    pub geometric_ratio: f64,
    pub order: usize,
    /// Directions on the half circle (two dimensions only).
    pub angles: usize,
    pub mean_beyond_band: bool,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self {
            band_end: None,
            band_width: 1.0,
            geometric_panels: 40,
            geometric_ratio: 2.0,
            order: 8,
            angles: 32,
            mean_beyond_band: false,
        }
    }
}

impl TailOptions {
    /// Fixed-width panels out to `band_end`, for closures that oscillate on
    /// the unit scale.
    pub fn oscillatory(band_end: f64) -> Self {
        Self {
            band_end: Some(band_end),
            band_width: 2.0,
            mean_beyond_band: true,
            ..Self::default()
        }
    }

    /// The same layout with every panel split and more nodes per panel.
    pub fn refined(&self) -> Self {
        Self {
            band_end: self.band_end,
            band_width: self.band_width / 2.0,
            geometric_panels: self.geometric_panels * 2,
            geometric_ratio: self.geometric_ratio.sqrt(),
            order: self.order + 4,
            angles: self.angles * 2,
            mean_beyond_band: self.mean_beyond_band,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPoint {
    pub y: [f64; 2],
    pub weight: f64,
}

/// Nodes and weights for `int_{|y|>rho} f(y) dy / |y|^(n+sigma)` where `f` is
/// even in `y`: only a half space of directions is stored.
#[derive(Debug, Clone)]
pub struct TailRule {
    pub dim: usize,
    pub sigma: f64,
    pub rho: f64,
    pub options: TailOptions,
    pub points: Vec<TailPoint>,
}

impl TailRule {
    pub fn build(dim: usize, sigma: f64, rho: f64, options: TailOptions) -> Self {
        let radial = radial_rule(sigma, rho, &options);
        let directions: Vec<([f64; 2], f64)> = if dim == 1 {
            vec![([1.0, 0.0], 2.0)]
        } else {
            let m = options.angles;
            (0..m)
                .map(|k| {
                    let t = PI * (k as f64 + 0.5) / m as f64;
                    ([t.cos(), t.sin()], 2.0 * PI / m as f64)
                })
                .collect()
        };
        let mut points = Vec::with_capacity(radial.len() * directions.len());
        for &(r, wr) in &radial {
            for &(d, wd) in &directions {
                points.push(TailPoint {
                    y: [r * d[0], r * d[1]],
                    weight: wr * wd,
                });
            }
        }
        Self {
            dim,
            sigma,
            rho,
            options,
            points,
        }
    }

    pub fn refined(&self) -> Self {
        Self::build(self.dim, self.sigma, self.rho, self.options.refined())
    }

    /// Discrete kernel mass; the exact value is `|S^(n-1)| rho^(-sigma) / sigma`.
    pub fn mass(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `(r, w)` with `sum w g(r) ~ int_rho^inf g(r) r^(-1-sigma) dr`.
fn radial_rule(sigma: f64, rho: f64, opts: &TailOptions) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(opts.order);
    let mut out = Vec::new();
    let band_end = opts.band_end.unwrap_or(4.0 * rho).max(rho);
    let panels = ((band_end - rho) / opts.band_width).ceil() as usize;
    let mean_from = 0.5 * band_end;
    let use_mean = opts.mean_beyond_band && mean_from >= rho && panels > 0;
    let far_mass = band_end.powf(-sigma) / sigma;
    if panels > 0 {
        let width = (band_end - rho) / panels as f64;
        let band: Vec<(f64, f64)> = (0..panels)
            .flat_map(|k| gl.mapped(rho + k as f64 * width, rho + (k + 1) as f64 * width))
            .collect();
        let window: f64 = band
            .iter()
            .filter(|(r, _)| *r >= mean_from)
            .map(|(_, w)| w)
            .sum();
        for (r, w) in band {
            let mut weight = w * r.powf(-1.0 - sigma);
            if use_mean && r >= mean_from {
                weight += w * far_mass / window;
            }
            out.push((r, weight));
        }
    }
    if use_mean {
        return out;
    }
    // In s = r^(1-sigma): dr / r^(1+sigma) = ds / ((sigma - 1) r).
    let s_of = |r: f64| r.powf(1.0 - sigma);
    let r_of = |s: f64| s.powf(1.0 / (1.0 - sigma));
    let push_s_panel = |s_lo: f64, s_hi: f64, out: &mut Vec<(f64, f64)>| {
        for (s, w) in gl.mapped(s_lo, s_hi) {
            let r = r_of(s);
            out.push((r, w / ((sigma - 1.0) * r)));
        }
    };
    let mut a = band_end;
    for _ in 0..opts.geometric_panels {
        let b = a * opts.geometric_ratio;
        push_s_panel(s_of(b), s_of(a), &mut out);
        a = b;
    }
    push_s_panel(0.0, s_of(a), &mut out);
    out
}

/// Tail integral together with the result of the refined rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub value: f64,
    pub refined: f64,
    pub error: f64,
    /// Set when the refinement changes the value by more than 10%.
    pub warning: bool,
}

/// `sum_t w_t F(closure(x + y_t) + closure(x - y_t) - 2 u_center)`.
pub fn tail_sum(
    far: &FarField,
    u_center: f64,
    x: &[f64],
    f: &Nonlinearity,
    rule: &TailRule,
) -> f64 {
    let dim = x.len();
    let mut plus = [0.0; 2];
    let mut minus = [0.0; 2];
    let mut acc = 0.0;
    for p in &rule.points {
        for i in 0..dim {
            plus[i] = x[i] + p.y[i];
            minus[i] = x[i] - p.y[i];
        }
        let s = far.eval(&plus[..dim]) + far.eval(&minus[..dim]);
        acc += p.weight * f.eval(s - 2.0 * u_center);
    }
    acc
}

/// Far-field part of the operator at `x`, with an error estimate from one
/// level of rule refinement.
pub fn tail_integral(
    far: &FarField,
    u_center: f64,
    x: &[f64],
    f: &Nonlinearity,
    rule: &TailRule,
) -> TailEstimate {
    let value = tail_sum(far, u_center, x, f, rule);
    let refined = tail_sum(far, u_center, x, f, &rule.refined());
    let error = (value - refined).abs();
    let warning = error > 0.1 * refined.abs() && error > 1e-14;
    if warning {
        log::warn!(
            "tail integral at x = {x:?} unstable under refinement: {value:e} vs {refined:e}"
        );
    }
    TailEstimate {
        value,
        refined,
        error,
        warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::boundary::{make_boundary_datum, BoundaryKind};
    use crate::model::nonlinearity::{make_nonlinearity, NonlinearityKind};
    use std::sync::Arc;

    #[test]
    fn mass_matches_closed_form() {
        for sigma in [1.1, 1.5, 1.9] {
            let r1 = TailRule::build(1, sigma, 10.0, TailOptions::default());
            let exact = 2.0 * 10f64.powf(-sigma) / sigma;
            assert!(
                ((r1.mass() - exact) / exact).abs() < 1e-11,
                "sigma {sigma}: {} vs {exact}",
                r1.mass()
            );
            let r2 = TailRule::build(2, sigma, 3.2, TailOptions::default());
            let exact = 2.0 * PI * 3.2f64.powf(-sigma) / sigma;
            assert!(((r2.mass() - exact) / exact).abs() < 1e-11);
        }
    }

    #[test]
    fn zero_closure_gives_zero() {
        let f = make_nonlinearity(NonlinearityKind::Identity).unwrap();
        let rule = TailRule::build(1, 1.5, 10.0, TailOptions::default());
        let est = tail_integral(&FarField::Zero, 0.0, &[0.0], &f, &rule);
        assert_eq!(est.value, 0.0);
        assert!(!est.warning);
    }

    #[test]
    fn lipschitz_bound_of_the_tail() {
        let phi =
            Arc::new(make_boundary_datum(BoundaryKind::SmoothedCone { slope: 1.0 }, 1).unwrap());
        let far = FarField::Datum(phi.clone());
        let rule = TailRule::build(1, 1.5, 10.0, TailOptions::default());
        let id = make_nonlinearity(NonlinearityKind::Identity).unwrap();
        let f = make_nonlinearity(NonlinearityKind::ArctanScaled {
            floor: 0.2,
            amplitude: 1.0,
            scale: 1.0,
        })
        .unwrap();
        for x in [0.0, 3.0, -7.5] {
            let uc = phi.eval(&[x]) + 0.3;
            let abs_tail: f64 = rule
                .points
                .iter()
                .map(|p| {
                    p.weight * (phi.eval(&[x + p.y[0]]) + phi.eval(&[x - p.y[0]]) - 2.0 * uc).abs()
                })
                .sum();
            let v = tail_sum(&far, uc, &[x], &f, &rule);
            assert!(v.abs() <= f.meta.lip_bound * abs_tail + 1e-15);
            let lin = tail_sum(&far, uc, &[x], &id, &rule);
            assert!(lin > 0.0);
        }
    }
}
