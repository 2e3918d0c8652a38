use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ForcingFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingMeta {
    /// Lipschitz constant `L2` in the spatial variable.
    pub x_lip: f64,
    /// Monotonicity rate `mu > 0` in the second variable.
    pub monotone_rate: f64,
    /// `g(x,t)/t -> +inf` as `t -> +inf`.
    pub superlinear: bool,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForcingKind {
    /// `g(x,t) = mu t`
    Linear { mu: f64 },
    /// `g(x,t) = mu t + c t^3`
    Superlinear { mu: f64, cubic: f64 },
    /// `g(x,t) = t^3`; not uniformly increasing at the origin.
    PureCubic,
}

#[derive(Clone)]
enum Shape {
    Linear { mu: f64 },
    Superlinear { mu: f64, cubic: f64 },
    PureCubic,
    Custom { eval: ForcingFn, deriv: ForcingFn },
}

/// Forcing term `g(x, t)` evaluated at `t = u(x) - phi(x)`.
#[derive(Clone)]
pub struct Forcing {
    shape: Shape,
    pub meta: ForcingMeta,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing").field("meta", &self.meta).finish()
    }
}

pub fn make_forcing(kind: ForcingKind) -> Result<Forcing> {
    match kind {
        ForcingKind::Linear { mu } => {
            if !(mu > 0.0) {
                return Err(Error::param(
                    "mu",
                    format!("monotonicity rate {mu} must be positive"),
                ));
            }
            Ok(Forcing {
                shape: Shape::Linear { mu },
                meta: ForcingMeta {
                    x_lip: 0.0,
                    monotone_rate: mu,
                    superlinear: false,
                    label: format!("{mu}*t"),
                },
            })
        }
        ForcingKind::Superlinear { mu, cubic } => {
            if !(mu > 0.0) || !(cubic > 0.0) {
                return Err(Error::param(
                    "mu",
                    "mu and the cubic coefficient must be positive",
                ));
            }
            Ok(Forcing {
                shape: Shape::Superlinear { mu, cubic },
                meta: ForcingMeta {
                    x_lip: 0.0,
                    monotone_rate: mu,
                    superlinear: true,
                    label: format!("{mu}*t+{cubic}*t^3"),
                },
            })
        }
        ForcingKind::PureCubic => Ok(Forcing {
            shape: Shape::PureCubic,
            // the claimed rate is what validation is expected to refute
            meta: ForcingMeta {
                x_lip: 0.0,
                monotone_rate: 1.0,
                superlinear: true,
                label: "t^3".into(),
            },
        }),
    }
}

impl Forcing {
    pub fn custom<E, D>(eval: E, deriv_t: D, meta: ForcingMeta) -> Self
    where
        E: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        D: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            shape: Shape::Custom {
                eval: Arc::new(eval),
                deriv: Arc::new(deriv_t),
            },
            meta,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match &self.shape {
            Shape::Linear { mu } => mu * t,
            Shape::Superlinear { mu, cubic } => mu * t + cubic * t * t * t,
            Shape::PureCubic => t * t * t,
            Shape::Custom { eval, .. } => eval(x, t),
        }
    }

    /// Partial derivative in the second variable.
    #[inline]
    pub fn deriv_t(&self, x: &[f64], t: f64) -> f64 {
        match &self.shape {
            Shape::Linear { mu } => *mu,
            Shape::Superlinear { mu, cubic } => mu + 3.0 * cubic * t * t,
            Shape::PureCubic => 3.0 * t * t,
            Shape::Custom { deriv, .. } => deriv(x, t),
        }
    }

    /// A copy with every value multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Forcing {
        let inner = self.clone();
        let inner_d = self.clone();
        let mut meta = self.meta.clone();
        meta.monotone_rate *= factor;
        meta.x_lip *= factor;
        meta.label = format!("{factor}*({})", meta.label);
        Forcing::custom(
            move |x, t| factor * inner.eval(x, t),
            move |x, t| factor * inner_d.deriv_t(x, t),
            meta,
        )
    }

    pub fn mu(&self) -> f64 {
        self.meta.monotone_rate
    }
}
