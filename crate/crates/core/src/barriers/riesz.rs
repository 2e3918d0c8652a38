//! Radial profile `u0 = k * |x|^(sigma-2)` in the plane with
//! `k(y) = min(1, |y|^(-sigma-tau))`.
//!
//! Up to a positive constant `u0` is the potential of `k` under the
//! fundamental solution of the fractional Laplacian, so the bare-kernel
//! operator of `u0` is `-c k <= 0`, and `u0 ~ |x|^(-tau)` at infinity.

use std::f64::consts::PI;

use crate::gauss::{adaptive, AdaptiveOptions, GaussLegendre};
use crate::spline::HermiteTable;

#[derive(Debug, Clone)]
pub struct RieszProfile {
    pub sigma: f64,
    pub tau: f64,
    table: HermiteTable,
    r_max: f64,
    /// `u0(r) ~ far_coeff r^(-tau)` beyond the table.
    far_coeff: f64,
}

/// Angular integral `int_0^{2 pi} (r^2 + s^2 - 2 r s cos t)^alpha dt` with
/// `alpha = (sigma - 2)/2`, using `t = pi q^2` to absorb the singularity at
/// `s = r`.
fn angular(gl: &GaussLegendre, r: f64, s: f64, alpha: f64) -> f64 {
    const BREAKS: [f64; 7] = [0.0, 1e-3, 1e-2, 0.05, 0.15, 0.4, 1.0];
    let mut acc = 0.0;
    for w in BREAKS.windows(2) {
        for (q, wq) in gl.mapped(w[0], w[1]) {
            let t = PI * q * q;
            // r^2 + s^2 - 2rs cos t = (r - s)^2 + 4 r s sin^2(t/2)
            let half = (0.5 * t).sin();
            let d2 = (r - s) * (r - s) + 4.0 * r * s * half * half;
            acc += wq * 2.0 * PI * q * d2.powf(alpha);
        }
    }
    2.0 * acc
}

/// Unnormalized `u0(r)`.
fn potential(gl: &GaussLegendre, sigma: f64, tau: f64, r: f64) -> f64 {
    let alpha = 0.5 * (sigma - 2.0);
    let k = |s: f64| if s <= 1.0 { 1.0 } else { s.powf(-sigma - tau) };
    let far = 100f64.max(50.0 * r);
    let mut breaks = vec![0.0, 1.0, far];
    if r > 0.0 && r != 1.0 && r < far {
        breaks.push(r);
    }
    breaks.sort_by(f64::total_cmp);
    let opts = AdaptiveOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        max_panels: 4000,
    };
    let body = adaptive(|s: f64| k(s) * s * angular(gl, r, s, alpha), &breaks, opts)
        .map(|e| e.value)
        .unwrap_or_else(|_| {
            // fall back to a fixed composite rule; only reached for pathological radii
            breaks
                .windows(2)
                .map(|w| {
                    GaussLegendre::new(40)
                        .integrate(w[0], w[1], |s| k(s) * s * angular(gl, r, s, alpha))
                })
                .sum()
        });
    let tail = 2.0
        * PI
        * (far.powf(-tau) / tau + alpha * alpha * r * r * far.powf(-tau - 2.0) / (tau + 2.0));
    body + tail
}

impl RieszProfile {
    /// Tabulates the profile with spacing `dr` on `[0, r_dense]` and on a
    /// logarithmic grid out to `1e4 r_dense`; normalized so that `u0(0) = 1`.
    pub fn build(sigma: f64, tau: f64, dr: f64, r_dense: f64) -> Self {
        let gl = GaussLegendre::new(16);
        let mut knots: Vec<f64> = (0..=((r_dense / dr).ceil() as usize))
            .map(|i| i as f64 * dr)
            .collect();
        let mut r = *knots.last().unwrap();
        let r_max = r_dense * 1e4;
        while r < r_max {
            r *= 1.05;
            knots.push(r);
        }
        let raw: Vec<f64> = knots
            .iter()
            .map(|&r| potential(&gl, sigma, tau, r))
            .collect();
        let norm = raw[0];
        let values: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let n = knots.len();
        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            // three-point derivative on a non-uniform grid
            let (h0, h1) = (knots[i] - knots[i - 1], knots[i + 1] - knots[i]);
            slopes[i] = (h0 * h0 * (values[i + 1] - values[i])
                + h1 * h1 * (values[i] - values[i - 1]))
                / (h0 * h1 * (h0 + h1));
        }
        slopes[n - 1] = -tau * values[n - 1] / knots[n - 1];
        let far_coeff = values[n - 1] * knots[n - 1].powf(tau);
        let r_max = knots[n - 1];
        Self {
            sigma,
            tau,
            table: HermiteTable::new(knots, values, slopes),
            r_max,
            far_coeff,
        }
    }

    #[inline]
    pub fn eval_radius(&self, r: f64) -> f64 {
        if r >= self.r_max {
            self.far_coeff * r.powf(-self.tau)
        } else {
            self.table.eval(r)
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_radius(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Normalized profile computed directly, bypassing the table.
    pub fn direct(&self, r: f64) -> f64 {
        let gl = GaussLegendre::new(16);
        potential(&gl, self.sigma, self.tau, r) / potential(&gl, self.sigma, self.tau, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_is_decreasing_bounded_and_decays_like_r_to_minus_tau() {
        let p = RieszProfile::build(1.5, 0.25, 0.05, 10.0);
        assert!((p.eval_radius(0.0) - 1.0).abs() < 1e-12);
        let mut last = 1.0 + 1e-12;
        for k in 0..400 {
            let r = k as f64 * 0.137;
            let v = p.eval_radius(r);
            assert!(v <= last && v > 0.0, "r = {r}");
            last = v;
        }
        let a = p.eval_radius(1e3) * 1e3f64.powf(0.25);
        let b = p.eval_radius(1e4) * 1e4f64.powf(0.25);
        assert!(((a - b) / b).abs() < 0.05, "{a} {b}");
        for r in [0.33, 2.71, 7.9] {
            assert!((p.eval_radius(r) - p.direct(r)).abs() < 1e-7);
        }
    }
}
