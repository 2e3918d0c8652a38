use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spline::HermiteTable;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Structural constants attached to an internal nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityMeta {
    /// Global Lipschitz bound `L1`.
    pub lip_bound: f64,
    /// Lower ellipticity bound `lambda` (zero for degenerate nonlinearities).
    pub ellipticity_lower: f64,
    /// Upper ellipticity bound `Lambda <= L1`.
    pub ellipticity_upper: f64,
    /// Bound `L6` on `|F''|`, when known.
    pub second_deriv_bound: Option<f64>,
    /// `F` is concave on `[0, inf)`.
    pub concave_on_positive: bool,
    pub label: String,
}

/// Parameters accepted by [`make_nonlinearity`].
#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityKind {
    Identity,
    /// Continuous odd piecewise-linear profile with slopes `s1` on `|t| < a`,
    /// `s2` on `a < |t| < b` and `s3` beyond `b`; corners are smoothed over
    /// a width of `a / 10`.
    SmoothPiecewiseSlopes {
        s1: f64,
        s2: f64,
        s3: f64,
        a: f64,
        b: f64,
    },
    /// `F(t) = floor * t + amplitude * scale * atan(t / scale)`.
    ArctanScaled {
        floor: f64,
        amplitude: f64,
        scale: f64,
    },
    /// `F(t) = c log(1 + t/c)` for `t >= 0`, mirrored as `-c log(1 - t/c)`.
    ConcaveSoft {
        scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PiecewiseSlopes {
    s: [f64; 3],
    a: f64,
    b: f64,
    width: f64,
    // P(tau) at the five breakpoints a-w/2, a+w/2, b-w/2, b+w/2
    knots: [f64; 4],
    values: [f64; 4],
}

impl PiecewiseSlopes {
    fn new(s1: f64, s2: f64, s3: f64, a: f64, b: f64) -> Self {
        let width = a / 10.0;
        let knots = [
            a - width / 2.0,
            a + width / 2.0,
            b - width / 2.0,
            b + width / 2.0,
        ];
        let p1 = s1 * knots[0];
        let p2 = p1 + width * (s1 + s2) / 2.0;
        let p3 = p2 + s2 * (knots[2] - knots[1]);
        let p4 = p3 + width * (s2 + s3) / 2.0;
        Self {
            s: [s1, s2, s3],
            a,
            b,
            width,
            knots,
            values: [p1, p2, p3, p4],
        }
    }

    fn slope(&self, tau: f64) -> f64 {
        let [s1, s2, s3] = self.s;
        let k = &self.knots;
        if tau <= k[0] {
            s1
        } else if tau < k[1] {
            s1 + (s2 - s1) * (tau - k[0]) / self.width
        } else if tau <= k[2] {
            s2
        } else if tau < k[3] {
            s2 + (s3 - s2) * (tau - k[2]) / self.width
        } else {
            s3
        }
    }

    fn primitive(&self, tau: f64) -> f64 {
        let [s1, s2, s3] = self.s;
        let k = &self.knots;
        let v = &self.values;
        if tau <= k[0] {
            s1 * tau
        } else if tau < k[1] {
            let d = tau - k[0];
            v[0] + s1 * d + (s2 - s1) * d * d / (2.0 * self.width)
        } else if tau <= k[2] {
            v[1] + s2 * (tau - k[1])
        } else if tau < k[3] {
            let d = tau - k[2];
            v[2] + s2 * d + (s3 - s2) * d * d / (2.0 * self.width)
        } else {
            v[3] + s3 * (tau - k[3])
        }
    }

    fn curvature(&self, tau: f64) -> f64 {
        let [s1, s2, s3] = self.s;
        let k = &self.knots;
        if tau > k[0] && tau < k[1] {
            (s2 - s1) / self.width
        } else if tau > k[2] && tau < k[3] {
            (s3 - s2) / self.width
        } else {
            0.0
        }
    }
}

#[derive(Clone)]
enum Shape {
    Identity,
    Piecewise(PiecewiseSlopes),
    Arctan {
        floor: f64,
        amplitude: f64,
        scale: f64,
    },
    ConcaveSoft {
        scale: f64,
    },
    Custom {
        eval: ScalarFn,
        deriv: ScalarFn,
    },
    Regularized {
        base: Arc<Nonlinearity>,
        eps: f64,
        correction: Arc<HermiteTable>,
    },
}

/// The internal nonlinearity `F` applied to symmetric differences.
#[derive(Clone)]
pub struct Nonlinearity {
    shape: Shape,
    pub meta: NonlinearityMeta,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("meta", &self.meta)
            .finish()
    }
}

/// Builds one of the named nonlinearity families, rejecting parameters that
/// would break monotonicity or continuity.
pub fn make_nonlinearity(kind: NonlinearityKind) -> Result<Nonlinearity> {
    match kind {
        NonlinearityKind::Identity => Ok(Nonlinearity {
            shape: Shape::Identity,
            meta: NonlinearityMeta {
                lip_bound: 1.0,
                ellipticity_lower: 1.0,
                ellipticity_upper: 1.0,
                second_deriv_bound: Some(0.0),
                concave_on_positive: true,
                label: "identity".into(),
            },
        }),
        NonlinearityKind::SmoothPiecewiseSlopes { s1, s2, s3, a, b } => {
            for (name, s) in [("s1", s1), ("s2", s2), ("s3", s3)] {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "slope",
                        reason: format!("{name} = {s} must be positive (F must be increasing)"),
                    });
                }
            }
            if !(a > 0.0) {
                return Err(Error::param(
                    "a",
                    format!("threshold a = {a} must be positive"),
                ));
            }
            if a >= b {
                return Err(Error::param(
                    "b",
                    format!("thresholds must satisfy a < b (a = {a}, b = {b})"),
                ));
            }
            if b - a <= a / 10.0 {
                return Err(Error::param(
                    "b",
                    "thresholds too close for the corner smoothing width a/10",
                ));
            }
            let p = PiecewiseSlopes::new(s1, s2, s3, a, b);
            let hi = s1.max(s2).max(s3);
            let lo = s1.min(s2).min(s3);
            Ok(Nonlinearity {
                shape: Shape::Piecewise(p),
                meta: NonlinearityMeta {
                    lip_bound: hi,
                    ellipticity_lower: lo,
                    ellipticity_upper: hi,
                    second_deriv_bound: Some((s2 - s1).abs().max((s3 - s2).abs()) / p.width),
                    concave_on_positive: s1 >= s2 && s2 >= s3,
                    label: format!("piecewise_slopes({s1:e},{s2:e},{s3:e};{a},{b})"),
                },
            })
        }
        NonlinearityKind::ArctanScaled {
            floor,
            amplitude,
            scale,
        } => {
            if !(floor >= 0.0) {
                return Err(Error::param("floor", "floor slope must be non-negative"));
            }
            if !(amplitude > 0.0) || !(scale > 0.0) {
                return Err(Error::param(
                    "amplitude",
                    "amplitude and scale must be positive",
                ));
            }
            Ok(Nonlinearity {
                shape: Shape::Arctan {
                    floor,
                    amplitude,
                    scale,
                },
                meta: NonlinearityMeta {
                    lip_bound: floor + amplitude,
                    ellipticity_lower: floor,
                    ellipticity_upper: floor + amplitude,
                    second_deriv_bound: Some(amplitude / scale * 3.0 * 3f64.sqrt() / 8.0),
                    concave_on_positive: true,
                    label: format!("arctan_scaled({floor},{amplitude},{scale})"),
                },
            })
        }
        NonlinearityKind::ConcaveSoft { scale } => {
            if !(scale > 0.0) {
                return Err(Error::param("scale", "scale must be positive"));
            }
            Ok(Nonlinearity {
                shape: Shape::ConcaveSoft { scale },
                meta: NonlinearityMeta {
                    lip_bound: 1.0,
                    ellipticity_lower: 0.0,
                    ellipticity_upper: 1.0,
                    second_deriv_bound: Some(1.0 / scale),
                    concave_on_positive: true,
                    label: format!("concave_soft({scale})"),
                },
            })
        }
    }
}

impl Nonlinearity {
    /// A user-supplied nonlinearity. No structural checks are made here; run
    /// the problem validation to audit it.
    pub fn custom<E, D>(eval: E, deriv: D, meta: NonlinearityMeta) -> Self
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            shape: Shape::Custom {
                eval: Arc::new(eval),
                deriv: Arc::new(deriv),
            },
            meta,
        }
    }

    pub(crate) fn regularized(base: Nonlinearity, eps: f64, correction: HermiteTable) -> Self {
        let m = &base.meta;
        let meta = NonlinearityMeta {
            lip_bound: m.lip_bound.max(eps),
            ellipticity_lower: m.ellipticity_lower.max(eps),
            ellipticity_upper: m.ellipticity_upper.max(eps),
            second_deriv_bound: m.second_deriv_bound,
            concave_on_positive: m.concave_on_positive,
            label: format!("{}|eps={eps:e}", m.label),
        };
        Self {
            shape: Shape::Regularized {
                base: Arc::new(base),
                eps,
                correction: Arc::new(correction),
            },
            meta,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Identity => t,
            Shape::Piecewise(p) => t.signum() * p.primitive(t.abs()),
            Shape::Arctan {
                floor,
                amplitude,
                scale,
            } => floor * t + amplitude * scale * (t / scale).atan(),
            Shape::ConcaveSoft { scale } => t.signum() * scale * (t.abs() / scale).ln_1p(),
            Shape::Custom { eval, .. } => eval(t),
            Shape::Regularized {
                base, correction, ..
            } => base.eval(t) + correction.eval(t),
        }
    }

    #[inline]
    pub fn deriv(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Identity => 1.0,
            Shape::Piecewise(p) => p.slope(t.abs()),
            Shape::Arctan {
                floor,
                amplitude,
                scale,
            } => {
                let r = t / scale;
                floor + amplitude / (1.0 + r * r)
            }
            Shape::ConcaveSoft { scale } => 1.0 / (1.0 + t.abs() / scale),
            Shape::Custom { deriv, .. } => deriv(t),
            Shape::Regularized { base, eps, .. } => base.deriv(t).max(*eps),
        }
    }

    /// `F''(t)` where the family provides it in closed form.
    pub fn second_deriv(&self, t: f64) -> Option<f64> {
        match &self.shape {
            Shape::Identity => Some(0.0),
            Shape::Piecewise(p) => Some(t.signum() * p.curvature(t.abs())),
            Shape::Arctan {
                amplitude, scale, ..
            } => {
                let r = t / scale;
                Some(-2.0 * amplitude * r / (scale * (1.0 + r * r).powi(2)))
            }
            Shape::ConcaveSoft { scale } => {
                Some(-t.signum() / (scale * (1.0 + t.abs() / scale).powi(2)))
            }
            Shape::Custom { .. } => None,
            Shape::Regularized { base, eps, .. } => {
                if base.deriv(t) > *eps {
                    base.second_deriv(t)
                } else {
                    Some(0.0)
                }
            }
        }
    }

    /// Regularization floor when this nonlinearity came from `regularize_f`.
    pub fn regularization_eps(&self) -> Option<f64> {
        match &self.shape {
            Shape::Regularized { eps, .. } => Some(*eps),
            _ => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.shape, Shape::Identity)
    }

    pub fn label(&self) -> &str {
        &self.meta.label
    }
}
