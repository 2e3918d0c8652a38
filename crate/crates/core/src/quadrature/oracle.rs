//! Reference integrator for `int f(y) dy / |y|^(n+sigma)`.
//!
//! Shares nothing with the lattice weights: the radial integral is computed
//! by adaptive Gauss-Kronrod with a change of variables at the origin, and
//! in two dimensions the angular integral is adaptive as well.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gauss::{adaptive, AdaptiveOptions};
use crate::model::problem::check_sigma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleDomain {
    Whole,
    Ball(f64),
    Exterior(f64),
    Annulus(f64, f64),
}

impl OracleDomain {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            OracleDomain::Whole => (0.0, f64::INFINITY),
            OracleDomain::Ball(r) => (0.0, r),
            OracleDomain::Exterior(r) => (r, f64::INFINITY),
            OracleDomain::Annulus(a, b) => (a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    pub error: f64,
}

/// Radius beyond which the integral is closed by a far-field model.
fn far_radius(dim: usize) -> f64 {
    if dim == 1 {
        131_072.0
    } else {
        1024.0
    }
}

/// Adaptive quadrature of `int_domain f(y) dy / |y|^(n+sigma)` to a relative
/// accuracy of about `1e-10`.
///
/// `f` must be bounded by `C |y|^2` near the origin and evaluated without
/// cancellation there (write `cos y - 1` as `-2 sin^2(y/2)`). Beyond a large radius
/// `Y` the integral is first attempted in the variable `t = 1/r`; closures
/// that oscillate forever defeat that, in which case `f` is replaced by its
/// mean over `[Y/2, Y]` and the change of that mean from `[Y/4, Y/2]` is
/// reported as the error.
pub fn quadrature_oracle<F>(
    f: F,
    sigma: f64,
    dim: usize,
    domain: OracleDomain,
) -> Result<OracleValue>
where
    F: Fn(&[f64]) -> f64,
{
    check_sigma(sigma)?;
    if !(1..=2).contains(&dim) {
        return Err(Error::param(
            "n",
            format!("dimension {dim} not supported (1 or 2)"),
        ));
    }
    let (a, b) = domain.bounds();
    if !(a >= 0.0 && b > a) {
        return Err(Error::param(
            "domain",
            format!("empty radial range [{a}, {b}]"),
        ));
    }
    let opts = AdaptiveOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-11,
        max_panels: 400_000,
    };
    let g = |r: f64| -> Result<f64> {
        if dim == 1 {
            Ok(f(&[r]) + f(&[-r]))
        } else {
            let ang = adaptive(
                |t: f64| f(&[r * t.cos(), r * t.sin()]),
                &[0.0, 0.5 * PI, PI, 1.5 * PI, 2.0 * PI],
                AdaptiveOptions {
                    abs_tol: 1e-16,
                    rel_tol: 1e-13,
                    max_panels: 4000,
                },
            )?;
            Ok(ang.value)
        }
    };
    // Errors raised inside closures are carried out through this slot.
    let failure = std::cell::RefCell::new(None);
    let radial = |r: f64| match g(r) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };

    let mut value = 0.0;
    let mut error = 0.0;

    // [a, min(b, 1)] in t = r^(2-sigma): dr / r^(1+sigma) = dt / ((2-sigma) r^sigma t)
    let inner_end = b.min(1.0);
    if a < inner_end {
        let p = 2.0 - sigma;
        let est = adaptive(
            |t: f64| {
                let r = t.powf(1.0 / p);
                radial(r) * r.powf(-sigma) / (p * t)
            },
            &[a.powf(p), inner_end.powf(p)],
            opts,
        )?;
        value += est.value;
        error += est.error;
    }

    let y_far = far_radius(dim);
    let mid_lo = a.max(1.0);
    let mid_hi = if b.is_finite() { b } else { y_far.max(mid_lo) };
    if mid_lo < mid_hi {
        let est = adaptive(
            |r: f64| radial(r) * r.powf(-1.0 - sigma),
            &unit_breaks(mid_lo, mid_hi),
            opts,
        )?;
        value += est.value;
        error += est.error;
    }

    if b.is_infinite() {
        let start = mid_hi;
        let sub = adaptive(
            |t: f64| radial(1.0 / t) * t.powf(sigma - 1.0),
            &[0.0, 1.0 / start],
            AdaptiveOptions {
                max_panels: 3000,
                ..opts
            },
        );
        match sub {
            Ok(est) => {
                value += est.value;
                error += est.error;
            }
            Err(_) => {
                let mean = |lo: f64, hi: f64| -> Result<f64> {
                    Ok(adaptive(radial, &unit_breaks(lo, hi), opts)?.value / (hi - lo))
                };
                let m1 = mean(start / 2.0, start)?;
                let m0 = mean(start / 4.0, start / 2.0)?;
                let mass = start.powf(-sigma) / sigma;
                value += m1 * mass;
                error += (m1 - m0).abs() * mass;
            }
        }
    }

    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(OracleValue { value, error })
}

fn unit_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let mut v = vec![lo];
    let mut k = lo.floor() + 1.0;
    while k < hi {
        v.push(k);
        k += 1.0;
    }
    v.push(hi);
    v
}
