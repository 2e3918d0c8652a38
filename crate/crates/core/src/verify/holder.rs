use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::grid::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleRow {
    /// Increment length in physical units.
    pub step: f64,
    pub max_increment: f64,
    pub max_quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub beta: f64,
    pub estimate: f64,
    pub scales: Vec<ScaleRow>,
}

/// Largest `|u(x + s e) - u(x)|` over box nodes and coordinate axes.
fn max_increment(u: &GridFunction, steps: i64) -> f64 {
    let grid = *u.grid();
    let vals = u.values();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let m = grid.node(i);
            let mut best = 0.0_f64;
            for axis in 0..grid.dim() {
                let mut p = m;
                p[axis] += steps;
                if grid.contains(p) {
                    best = best.max((vals[grid.index(p)] - vals[i]).abs());
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Dyadic lattice steps `s = 1, 2, 4, ...` with `s h` in `[lo, hi]`.
fn dyadic_steps(h: f64, lo: f64, hi: f64) -> Vec<i64> {
    let mut out = Vec::new();
    let mut s = 1i64;
    while s as f64 * h <= hi * (1.0 + 1e-12) {
        if s as f64 * h >= lo * (1.0 - 1e-12) {
            out.push(s);
        }
        s *= 2;
    }
    out
}

/// `max |u(x + t e) - u(x)| / t^beta` over lattice `x`, axes `e`, and
/// dyadic `t` in `h_range`, together with the per-scale maxima.
pub fn holder_seminorm(u: &GridFunction, beta: f64, h_range: (f64, f64)) -> Result<HolderReport> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param("beta", "must lie in (0,1]"));
    }
    let h = u.grid().h();
    let (lo, hi) = h_range;
    if !(lo <= hi) || hi < h {
        return Err(Error::param(
            "h_range",
            format!("range [{lo}, {hi}] contains no lattice step"),
        ));
    }
    let scales: Vec<ScaleRow> = dyadic_steps(h, lo.max(h), hi)
        .into_iter()
        .map(|s| {
            let step = s as f64 * h;
            let inc = max_increment(u, s);
            ScaleRow {
                step,
                max_increment: inc,
                max_quotient: inc / step.powf(beta),
            }
        })
        .collect();
    let estimate = scales.iter().map(|r| r.max_quotient).fold(0.0, f64::max);
    Ok(HolderReport {
        beta,
        estimate,
        scales,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientReport {
    pub beta: f64,
    /// `(h, sup |w(x + h e) - w(x)| / h^beta)`
    pub rows: Vec<(f64, f64)>,
    /// Log-log slope of the quotient norms against `h`.
    pub slope: f64,
    /// `beta + slope`: the empirical Holder exponent of the increments.
    pub exponent: f64,
    /// Whether the quotients shrink with `h`, i.e. `exponent > beta`.
    pub improves: bool,
}

/// Sup norms of `(w(x + h e) - w(x)) / h^beta` for each `h` (rounded to
/// lattice steps) and their log-log slope.
pub fn difference_quotient_probe(
    w: &GridFunction,
    beta: f64,
    h_list: &[f64],
) -> Result<QuotientReport> {
    if h_list.len() < 2 {
        return Err(Error::param("h_list", "need at least two increments"));
    }
    let h = w.grid().h();
    let rows: Vec<(f64, f64)> = h_list
        .iter()
        .map(|&t| {
            let s = ((t / h).round() as i64).max(1);
            let step = s as f64 * h;
            (step, max_increment(w, s) / step.powf(beta))
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.1 > 0.0)
        .map(|r| (r.0.ln(), r.1.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
    } else {
        0.0
    };
    Ok(QuotientReport {
        beta,
        rows,
        slope,
        exponent: beta + slope,
        improves: slope > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::grid::{sample_to_grid, FarField, Grid};

    #[test]
    fn constants_and_homogeneity() {
        let g = Grid::new(1, 0.01, 2.0).unwrap();
        let c = sample_to_grid(|_| 3.0, g, FarField::Zero).unwrap();
        assert_eq!(holder_seminorm(&c, 0.5, (0.01, 1.0)).unwrap().estimate, 0.0);
        let u = sample_to_grid(|x| (2.0 * x[0]).sin(), g, FarField::Zero).unwrap();
        let u3 = u.map(FarField::Zero, |v| -3.0 * v);
        let a = holder_seminorm(&u, 0.25, (0.01, 1.0)).unwrap().estimate;
        let b = holder_seminorm(&u3, 0.25, (0.01, 1.0)).unwrap().estimate;
        assert!((3.0 * a - b).abs() <= 1e-14 * b);
    }

    #[test]
    fn square_root_is_exactly_half_holder() {
        // |(t+s)^(1/2) - t^(1/2)| <= s^(1/2) with equality at t = 0
        let g = Grid::new(1, 1.0 / 1024.0, 1.0).unwrap();
        let u = sample_to_grid(|x| x[0].abs().sqrt(), g, FarField::Zero).unwrap();
        let r = holder_seminorm(&u, 0.5, (1.0 / 1024.0, 0.5)).unwrap();
        assert!((r.estimate - 1.0).abs() < 1e-12, "{}", r.estimate);
        let coarse = holder_seminorm(&u, 0.6, (1.0 / 64.0, 0.5))
            .unwrap()
            .estimate;
        let fine = holder_seminorm(&u, 0.6, (1.0 / 1024.0, 0.5))
            .unwrap()
            .estimate;
        assert!(fine > 1.3 * coarse);
    }

    #[test]
    fn quotient_slopes_of_fixtures() {
        let g = Grid::new(1, 1e-3, 2.0).unwrap();
        let hs = [0.004, 0.008, 0.016, 0.032];
        let gauss = sample_to_grid(|x| (-x[0] * x[0]).exp(), g, FarField::Zero).unwrap();
        let r = difference_quotient_probe(&gauss, 0.25, &hs).unwrap();
        assert!((r.slope - 0.75).abs() < 0.02, "{}", r.slope);
        assert!(r.improves);
        let cusp = sample_to_grid(|x| x[0].abs().powf(0.3), g, FarField::Zero).unwrap();
        let r = difference_quotient_probe(&cusp, 0.25, &hs).unwrap();
        assert!((r.slope - 0.05).abs() < 0.01, "{}", r.slope);
    }
}
