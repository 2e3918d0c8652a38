use crate::gauss::{adaptive, AdaptiveOptions};
use crate::model::nonlinearity::Nonlinearity;
use crate::spline::{hermite, HermiteTable};

/// Default half-width of the tabulated range of `F_eps - F`.
const DEFAULT_RANGE: f64 = 1e4;
const TABLE_TOL: f64 = 1e-9;

/// `F_eps(t) = int_0^t max(eps, F'(s)) ds`, the uniformly elliptic
/// approximation of a degenerate `F`.
///
/// `F_eps = F + D` where `D(t) = int_0^t (eps - F'(s))^+ ds` is tabulated as
/// a cubic Hermite spline with exact slopes on `[-1e4, 1e4]` and extended
/// linearly beyond.
pub fn regularize_f(f: &Nonlinearity, eps: f64) -> Nonlinearity {
    regularize_f_on(f, eps, DEFAULT_RANGE)
}

/// As [`regularize_f`] with the table covering `[-range, range]`.
pub fn regularize_f_on(f: &Nonlinearity, eps: f64, range: f64) -> Nonlinearity {
    assert!(eps > 0.0, "regularization parameter must be positive");
    assert!(range > 0.0);
    if eps <= f.meta.ellipticity_lower {
        return Nonlinearity::regularized(f.clone(), eps, HermiteTable::zero());
    }
    let slope = |t: f64| (eps - f.deriv(t)).max(0.0);
    let pos = build_half(&slope, range);
    let neg = build_half(&|t: f64| slope(-t), range);
    let mut knots = Vec::with_capacity(pos.0.len() + neg.0.len());
    let mut values = Vec::with_capacity(knots.capacity());
    let mut slopes = Vec::with_capacity(knots.capacity());
    // D is odd about 0 only for odd F; mirror the negative half explicitly.
    for i in (1..neg.0.len()).rev() {
        knots.push(-neg.0[i]);
        values.push(-neg.1[i]);
        slopes.push(neg.2[i]);
    }
    knots.extend_from_slice(&pos.0);
    values.extend_from_slice(&pos.1);
    slopes.extend_from_slice(&pos.2);
    Nonlinearity::regularized(f.clone(), eps, HermiteTable::new(knots, values, slopes))
}

type Half = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Knots, values and slopes of `D(t) = int_0^t slope` on `[0, range]`.
fn build_half(slope: &dyn Fn(f64) -> f64, range: f64) -> Half {
    let opts = AdaptiveOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        max_panels: 5000,
    };
    let integral = |a: f64, b: f64| match adaptive(slope, &[a, b], opts) {
        Ok(e) => e.value,
        Err(_) => crate::gauss::GaussLegendre::new(20).integrate(a, b, slope),
    };
    // Seed with a geometric partition so that small and large scales are both present.
    let mut seeds = vec![0.0];
    let mut t = 1e-6;
    while t < range {
        seeds.push(t);
        t *= 4.0;
    }
    seeds.push(range);

    let mut knots = vec![0.0];
    let mut values = vec![0.0];
    let mut slopes = vec![slope(0.0)];
    for w in seeds.windows(2) {
        refine(
            slope,
            &integral,
            w[0],
            w[1],
            *values.last().unwrap(),
            0,
            &mut knots,
            &mut values,
            &mut slopes,
        );
    }
    (knots, values, slopes)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    slope: &dyn Fn(f64) -> f64,
    integral: &dyn Fn(f64, f64) -> f64,
    a: f64,
    b: f64,
    da: f64,
    depth: u32,
    knots: &mut Vec<f64>,
    values: &mut Vec<f64>,
    slopes: &mut Vec<f64>,
) {
    let db = da + integral(a, b);
    let (sa, sb) = (slope(a), slope(b));
    let ok = depth >= 50
        || [0.25, 0.5, 0.75].iter().all(|&q| {
            let t = a + q * (b - a);
            let exact = da + integral(a, t);
            (hermite(a, b, da, db, sa, sb, t) - exact).abs() <= TABLE_TOL
        });
    if ok {
        knots.push(b);
        values.push(db);
        slopes.push(sb);
    } else {
        let m = 0.5 * (a + b);
        refine(slope, integral, a, m, da, depth + 1, knots, values, slopes);
        let dm = *values.last().unwrap();
        refine(slope, integral, m, b, dm, depth + 1, knots, values, slopes);
    }
}
