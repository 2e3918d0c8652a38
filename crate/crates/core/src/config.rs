//! Flat `key = value` problem files.
//!
//! One assignment per line; `#` starts a comment. Recognised keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `n` | dimension, 1 or 2 | 1 |
//! | `sigma` | order in (1,2) | required |
//! | `F.kind` | `identity`, `smooth_piecewise_slopes`, `arctan_scaled`, `concave_soft` | `identity` |
//! | `F.s1`, `F.s2`, `F.s3`, `F.a`, `F.b` | slopes and thresholds of `smooth_piecewise_slopes` | `1e5, 1, 1e-5, 0.01, 100` |
//! | `F.floor`, `F.amplitude`, `F.scale` | `arctan_scaled` and `concave_soft` parameters | `0.2, 1, 1` |
//! | `g.kind` | `linear`, `superlinear`, `cubic` | `linear` |
//! | `g.mu`, `g.cubic` | `g = mu t + cubic t^3` | `1, 1` |
//! | `phi.kind` | `smoothed_cone`, `flat_plus_bump` | `smoothed_cone` |
//! | `phi.slope` | cone slope | 1 |
//! | `phi.amplitude`, `phi.width` | bump parameters | `1, 1` |
//! | `grid.R`, `grid.h` | box half-width and spacing | required |
//! | `tail.rho` | tail radius | `R/2` |
//! | `solver.method` | `newton` or `relaxation` | `newton` |
//! | `solver.damping` | `auto` or a positive number | `auto` |
//! | `solver.tol`, `solver.max_iters`, `solver.clip`, `solver.log_every` | | `1e-8, 100, true, 0` |
//! | `continuation.enabled` | `auto`, `true` or `false`; `auto` follows [`needs_continuation`] | `auto` |
//! | `continuation.eps0`, `.shrink`, `.tol`, `.max_steps` | | `0.1, 0.5, 1e-5, 40` |

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::boundary::{make_boundary_datum, BoundaryKind};
use crate::model::forcing::{make_forcing, ForcingKind};
use crate::model::nonlinearity::{make_nonlinearity, NonlinearityKind};
use crate::model::problem::{ProblemSpec, Truncation};
use crate::solver::{needs_continuation, Damping, SolverConfig, SolverMethod};

const KEYS: &[&str] = &[
    "n",
    "sigma",
    "F.kind",
    "F.s1",
    "F.s2",
    "F.s3",
    "F.a",
    "F.b",
    "F.floor",
    "F.amplitude",
    "F.scale",
    "g.kind",
    "g.mu",
    "g.cubic",
    "phi.kind",
    "phi.slope",
    "phi.amplitude",
    "phi.width",
    "grid.R",
    "grid.h",
    "tail.rho",
    "solver.method",
    "solver.damping",
    "solver.tol",
    "solver.max_iters",
    "solver.clip",
    "solver.log_every",
    "continuation.enabled",
    "continuation.eps0",
    "continuation.shrink",
    "continuation.tol",
    "continuation.max_steps",
];

/// A parsed problem file.
#[derive(Debug, Clone)]
pub struct Config {
    pub spec: ProblemSpec,
    pub solver: SolverConfig,
    /// Solve by continuation in `eps` rather than directly.
    pub continuation: bool,
    /// Assignments as written, with their line numbers.
    pub entries: BTreeMap<String, (usize, String)>,
}

struct Entries<'a>(&'a BTreeMap<String, (usize, String)>);

impl Entries<'_> {
    fn line(&self, key: &str) -> usize {
        self.0.get(key).map(|e| e.0).unwrap_or(0)
    }

    fn text(&self, key: &str, default: &str) -> String {
        self.0
            .get(key)
            .map(|e| e.1.clone())
            .unwrap_or_else(|| default.to_string())
    }

    fn num(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.0.get(key) {
            Some((line, v)) => v.parse::<f64>().map_err(|_| Error::Config {
                line: *line,
                message: format!("`{key}` expects a number, got `{v}`"),
            }),
            None => default.ok_or_else(|| Error::Config {
                line: 0,
                message: format!("missing required key `{key}`"),
            }),
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        match self.0.get(key) {
            Some((line, v)) => v.parse::<usize>().map_err(|_| Error::Config {
                line: *line,
                message: format!("`{key}` expects a count, got `{v}`"),
            }),
            None => Ok(default),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.0.get(key).map(|(l, v)| (*l, v.as_str())) {
            None => Ok(default),
            Some((_, "true" | "on" | "1")) => Ok(true),
            Some((_, "false" | "off" | "0")) => Ok(false),
            Some((line, v)) => Err(Error::Config {
                line,
                message: format!("`{key}` expects true or false, got `{v}`"),
            }),
        }
    }

    fn bad_kind(&self, key: &str, v: &str, allowed: &str) -> Error {
        Error::Config {
            line: self.line(key),
            message: format!("unknown `{key}` value `{v}` (expected {allowed})"),
        }
    }
}

/// Splits the text into assignments, rejecting unknown keys, duplicates
/// and malformed lines.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(Error::Config {
                line,
                message: format!("expected `key = value`, got `{body}`"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config {
                line,
                message: format!("unknown key `{k}`"),
            });
        }
        if v.is_empty() {
            return Err(Error::Config {
                line,
                message: format!("empty value for `{k}`"),
            });
        }
        if let Some((first, _)) = out.insert(k.to_string(), (line, v.to_string())) {
            return Err(Error::Config {
                line,
                message: format!("`{k}` already set on line {first}"),
            });
        }
    }
    Ok(out)
}

/// Parses a problem file into a validated-by-construction problem and
/// solver settings.
pub fn parse_config(text: &str) -> Result<Config> {
    let entries = parse_entries(text)?;
    let e = Entries(&entries);
    let n = e.count("n", 1)?;
    let sigma = e.num("sigma", None)?;

    let f_kind = e.text("F.kind", "identity");
    let f = match f_kind.as_str() {
        "identity" => NonlinearityKind::Identity,
        "smooth_piecewise_slopes" => NonlinearityKind::SmoothPiecewiseSlopes {
            s1: e.num("F.s1", Some(1e5))?,
            s2: e.num("F.s2", Some(1.0))?,
            s3: e.num("F.s3", Some(1e-5))?,
            a: e.num("F.a", Some(0.01))?,
            b: e.num("F.b", Some(100.0))?,
        },
        "arctan_scaled" => NonlinearityKind::ArctanScaled {
            floor: e.num("F.floor", Some(0.2))?,
            amplitude: e.num("F.amplitude", Some(1.0))?,
            scale: e.num("F.scale", Some(1.0))?,
        },
        "concave_soft" => NonlinearityKind::ConcaveSoft {
            scale: e.num("F.scale", Some(1.0))?,
        },
        other => {
            return Err(e.bad_kind(
                "F.kind",
                other,
                "identity, smooth_piecewise_slopes, arctan_scaled, concave_soft",
            ))
        }
    };
    let g_kind = e.text("g.kind", "linear");
    let g = match g_kind.as_str() {
        "linear" => ForcingKind::Linear {
            mu: e.num("g.mu", Some(1.0))?,
        },
        "superlinear" => ForcingKind::Superlinear {
            mu: e.num("g.mu", Some(1.0))?,
            cubic: e.num("g.cubic", Some(1.0))?,
        },
        "cubic" => ForcingKind::PureCubic,
        other => return Err(e.bad_kind("g.kind", other, "linear, superlinear, cubic")),
    };
    let phi_kind = e.text("phi.kind", "smoothed_cone");
    let phi = match phi_kind.as_str() {
        "smoothed_cone" => BoundaryKind::SmoothedCone {
            slope: e.num("phi.slope", Some(1.0))?,
        },
        "flat_plus_bump" => BoundaryKind::FlatPlusBump {
            amplitude: e.num("phi.amplitude", Some(1.0))?,
            width: e.num("phi.width", Some(1.0))?,
        },
        other => return Err(e.bad_kind("phi.kind", other, "smoothed_cone, flat_plus_bump")),
    };
    let trunc = Truncation {
        box_radius: e.num("grid.R", None)?,
        h: e.num("grid.h", None)?,
        rho_tail: if entries.contains_key("tail.rho") {
            Some(e.num("tail.rho", None)?)
        } else {
            None
        },
    };
    let spec = ProblemSpec::new(
        sigma,
        make_nonlinearity(f)?,
        make_forcing(g)?,
        make_boundary_datum(phi, n)?,
        trunc,
    )?;

    let mut solver = SolverConfig::default();
    solver.method = match e.text("solver.method", "newton").as_str() {
        "newton" => SolverMethod::Newton,
        "relaxation" => SolverMethod::Relaxation,
        other => return Err(e.bad_kind("solver.method", other, "newton, relaxation")),
    };
    solver.damping = match e.text("solver.damping", "auto").as_str() {
        "auto" => Damping::Auto,
        _ => Damping::Fixed(e.num("solver.damping", None)?),
    };
    solver.tol_residual = e.num("solver.tol", Some(solver.tol_residual))?;
    solver.max_iters = e.count("solver.max_iters", solver.max_iters)?;
    solver.clip_to_barriers = e.flag("solver.clip", true)?;
    solver.log_every = e.count("solver.log_every", 0)?;
    let c = &mut solver.continuation;
    c.eps0 = e.num("continuation.eps0", Some(c.eps0))?;
    c.shrink = e.num("continuation.shrink", Some(c.shrink))?;
    c.tol = e.num("continuation.tol", Some(c.tol))?;
    c.max_steps = e.count("continuation.max_steps", c.max_steps)?;
    let continuation = match e.text("continuation.enabled", "auto").as_str() {
        "auto" => needs_continuation(&spec.f),
        _ => e.flag("continuation.enabled", false)?,
    };
    Ok(Config {
        spec,
        solver,
        continuation,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const REGRESSION: &str = "\
# smoothed cone, identity F
n = 1
sigma = 1.5
F.kind = identity
g.kind = linear
g.mu = 1
phi.kind = smoothed_cone
phi.slope = 1
grid.R = 20
grid.h = 0.01
";

    #[test]
    fn parses_the_regression_problem() {
        let c = parse_config(REGRESSION).unwrap();
        assert_eq!(c.spec.sigma, 1.5);
        assert_eq!(c.spec.grid.len(), 4001);
        assert_eq!(c.spec.rho_tail, 10.0);
        assert_eq!(c.solver.method, SolverMethod::Newton);
        assert!(!c.continuation);
        let forced = parse_config(&format!("{REGRESSION}continuation.enabled = true\n")).unwrap();
        assert!(forced.continuation);
        let slopes = REGRESSION.replace("F.kind = identity", "F.kind = smooth_piecewise_slopes");
        assert!(parse_config(&slopes).unwrap().continuation);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = format!("{REGRESSION}grid.q = 3\n");
        match parse_config(&text) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 11);
                assert!(message.contains("grid.q"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sigma_two_is_out_of_range() {
        let text = REGRESSION.replace("sigma = 1.5", "sigma = 2.0");
        assert!(matches!(
            parse_config(&text),
            Err(Error::SigmaOutOfRange(_))
        ));
    }

    #[test]
    fn malformed_and_duplicate_lines() {
        assert!(matches!(
            parse_entries("sigma 1.5"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            parse_entries("sigma = 1.5\nsigma = 1.2"),
            Err(Error::Config { line: 2, .. })
        ));
        let text = REGRESSION.replace("g.mu = 1", "g.mu = one");
        assert!(matches!(
            parse_config(&text),
            Err(Error::Config { line: 6, .. })
        ));
    }
}
