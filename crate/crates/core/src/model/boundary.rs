use crate::error::{Error, Result};
use crate::gauss::{adaptive, AdaptiveOptions};

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryKind {
    /// `phi(x) = a sqrt(1 + |x|^2)`, asymptotic to the cone `a|x|`.
    SmoothedCone { slope: f64 },
    /// `phi(x) = A w (sqrt(1 + |x/w|^2) - |x/w|)`: a decaying bump that is
    /// not convex at the origin and is rejected whenever `A > 0`.
    FlatPlusBump { amplitude: f64, width: f64 },
}

/// Structural constants of the boundary datum.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMeta {
    /// `L4 >= |grad phi|`
    pub lip_bound: f64,
    /// `L3 >= D^2 phi`
    pub hess_bound: f64,
    /// `L7`, Lipschitz bound of the Hessian.
    pub hess_lip: Option<f64>,
    /// Slope of the asymptotic cone.
    pub cone_slope: f64,
    /// Decay exponent of `phi - cone`.
    pub cone_eps: f64,
    /// Decay constant: `|phi - cone| <= C |x|^(-cone_eps)` for `|x| >= 1`.
    pub cone_const: f64,
}

/// Convex boundary datum `phi` which is close to a cone at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDatum {
    dim: usize,
    slope: f64,
    pub meta: BoundaryMeta,
}

pub fn make_boundary_datum(kind: BoundaryKind, dim: usize) -> Result<BoundaryDatum> {
    if !(1..=2).contains(&dim) {
        return Err(Error::param(
            "n",
            format!("dimension {dim} not supported (1 or 2)"),
        ));
    }
    match kind {
        BoundaryKind::SmoothedCone { slope } => {
            if !(slope >= 0.0) || !slope.is_finite() {
                return Err(Error::param(
                    "slope",
                    format!("cone slope {slope} must be non-negative"),
                ));
            }
            Ok(BoundaryDatum::smoothed_cone(slope, dim))
        }
        BoundaryKind::FlatPlusBump { amplitude, width } => {
            if !(width > 0.0) {
                return Err(Error::param("width", "bump width must be positive"));
            }
            if amplitude == 0.0 {
                return Ok(BoundaryDatum::smoothed_cone(0.0, dim));
            }
            let bump = |x: f64| {
                let s = x / width;
                amplitude * width * ((1.0 + s * s).sqrt() - s.abs())
            };
            let d = width * 1e-3;
            let worst = sample_line(width)
                .map(|x| (x, (bump(x + d) + bump(x - d) - 2.0 * bump(x)) / (d * d)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("samples");
            if worst.1 < 0.0 {
                let mut at = vec![worst.0];
                at.resize(dim, 0.0);
                return Err(Error::NotConvex {
                    at,
                    eigenvalue: worst.1,
                });
            }
            Err(Error::param(
                "amplitude",
                "bump profile is not close to a cone",
            ))
        }
    }
}

/// `int_1^inf r^k (1+r)^(-k-sigma) dr`, expanding `(t-1)^k` with `t = 1+r`.
fn cone_tail_moment(k: i32, sigma: f64) -> f64 {
    let mut binom = 1.0;
    let mut total = 0.0;
    for j in 0..=k {
        if j > 0 {
            binom *= (k - j + 1) as f64 / j as f64;
        }
        let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
        // int_2^inf t^(j-k-sigma) dt
        let e = (k - j) as f64 + sigma - 1.0;
        total += sign * binom * 2f64.powf(-e) / e;
    }
    total
}

fn sample_line(scale: f64) -> impl Iterator<Item = f64> {
    (-400..=400).map(move |k| k as f64 * scale / 40.0)
}

impl BoundaryDatum {
    fn smoothed_cone(slope: f64, dim: usize) -> Self {
        let a = slope;
        // |eta| = a / (sqrt(1+r^2) + r) <= a / (2r); the decay exponent must stay below n
        let cone_eps = if dim >= 2 { 1.0 } else { 0.9 };
        Self {
            dim,
            slope: a,
            meta: BoundaryMeta {
                lip_bound: a,
                hess_bound: a,
                // |d/dr (1+r^2)^{-3/2}| peaks at r = 1/2
                hess_lip: (dim == 1).then(|| 1.5 * a / 1.25f64.powf(2.5)),
                cone_slope: a,
                cone_eps,
                cone_const: a / 2.0,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    #[inline]
    fn norm2(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.slope == 0.0 {
            return 0.0;
        }
        self.slope * (1.0 + Self::norm2(x)).sqrt()
    }

    /// The asymptotic cone `Gamma(x) = a |x|`.
    pub fn cone(&self, x: &[f64]) -> f64 {
        self.slope * Self::norm2(x).sqrt()
    }

    /// `eta = phi - Gamma`, written to avoid cancellation.
    pub fn perturbation(&self, x: &[f64]) -> f64 {
        let r2 = Self::norm2(x);
        self.slope / ((1.0 + r2).sqrt() + r2.sqrt())
    }

    pub fn grad(&self, x: &[f64]) -> [f64; 2] {
        let s = (1.0 + Self::norm2(x)).sqrt();
        let mut g = [0.0; 2];
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi = self.slope * xi / s;
        }
        g
    }

    pub fn hess(&self, x: &[f64]) -> [[f64; 2]; 2] {
        let s2 = 1.0 + Self::norm2(x);
        let s = s2.sqrt();
        let mut h = [[0.0; 2]; 2];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let id = if i == j { 1.0 } else { 0.0 };
                h[i][j] = self.slope * (id / s - x[i] * x[j] / (s2 * s));
            }
        }
        h
    }

    /// Laplacian of `phi`.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let h = self.hess(x);
        (0..self.dim).map(|i| h[i][i]).sum()
    }

    /// `L5 = int |phi(y)| (1+|y|)^(-n-sigma) dy`, by adaptive quadrature in
    /// the radial variable.
    pub fn l1_kernel_norm(&self, sigma: f64) -> Result<f64> {
        self.l1_kernel_norm_with(sigma, 1e-11)
    }

    pub fn l1_kernel_norm_with(&self, sigma: f64, rel_tol: f64) -> Result<f64> {
        if self.slope == 0.0 {
            return Ok(0.0);
        }
        let n = self.dim as f64;
        let (shell, power) = if self.dim == 1 {
            (2.0, 0)
        } else {
            (2.0 * std::f64::consts::PI, 1)
        };
        let radial = |r: f64| {
            let x = [r, 0.0];
            self.eval(&x[..self.dim]).abs() * r.powi(power) * (1.0 + r).powf(-n - sigma)
        };
        let opts = AdaptiveOptions {
            abs_tol: 1e-14,
            rel_tol,
            max_panels: 50_000,
        };
        let near = adaptive(radial, &[0.0, 1.0], opts)?;
        // On [1, inf) the cone part a r^(power+1) decays like r^(-sigma), too slowly
        // for quadrature near sigma = 1; it is integrated exactly and only the
        // perturbation, which decays one power faster, goes through r = 1/s.
        let cone = self.slope * cone_tail_moment(power + 1, sigma);
        let rest = |r: f64| {
            let x = [r, 0.0];
            self.perturbation(&x[..self.dim]) * r.powi(power) * (1.0 + r).powf(-n - sigma)
        };
        let far = adaptive(|s: f64| rest(1.0 / s) / (s * s), &[0.0, 1.0], opts)?;
        Ok(shell * (near.value + cone + far.value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_slope_is_identically_zero() {
        let phi = make_boundary_datum(BoundaryKind::SmoothedCone { slope: 0.0 }, 1).unwrap();
        assert_eq!(phi.eval(&[3.0]), 0.0);
        assert_eq!(phi.meta.hess_bound, 0.0);
        assert_eq!(phi.meta.lip_bound, 0.0);
    }

    #[test]
    fn perturbation_decays_like_half_inverse_radius() {
        let phi = make_boundary_datum(BoundaryKind::SmoothedCone { slope: 1.0 }, 1).unwrap();
        // dense sampling on |x| in [1, 100]
        for k in 0..=99_000 {
            let r = 1.0 + k as f64 * 1e-3;
            let eta = phi.perturbation(&[r]);
            assert!(eta <= 0.5 / r, "eta({r}) = {eta}");
            assert!((eta - (phi.eval(&[r]) - phi.cone(&[r]))).abs() < 1e-12);
            assert!(eta <= phi.meta.cone_const * r.powf(-phi.meta.cone_eps));
        }
    }

    #[test]
    fn second_derivative_in_one_dimension() {
        let a = 1.7;
        let phi = make_boundary_datum(BoundaryKind::SmoothedCone { slope: a }, 1).unwrap();
        for x in [-30.0, -1.0, 0.0, 0.3, 2.0, 50.0] {
            let h = phi.hess(&[x])[0][0];
            let exact = a * (1.0 + x * x).powf(-1.5);
            assert!((h - exact).abs() < 1e-14);
            assert!(h > 0.0 && h <= a);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_in_two_dimensions() {
        let phi = make_boundary_datum(BoundaryKind::SmoothedCone { slope: 1.0 }, 2).unwrap();
        let x = [0.7, -1.3];
        let g = phi.grad(&x);
        let d = 1e-6;
        let gx = (phi.eval(&[x[0] + d, x[1]]) - phi.eval(&[x[0] - d, x[1]])) / (2.0 * d);
        let gy = (phi.eval(&[x[0], x[1] + d]) - phi.eval(&[x[0], x[1] - d])) / (2.0 * d);
        assert!((g[0] - gx).abs() < 1e-8 && (g[1] - gy).abs() < 1e-8);
    }

    #[test]
    fn rejects_negative_slope_and_bump() {
        assert!(make_boundary_datum(BoundaryKind::SmoothedCone { slope: -1.0 }, 1).is_err());
        let err = make_boundary_datum(
            BoundaryKind::FlatPlusBump {
                amplitude: 1.0,
                width: 1.0,
            },
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotConvex { .. }), "{err:?}");
    }

    #[test]
    fn l1_norm_is_stable_under_refinement() {
        for dim in [1, 2] {
            let phi = make_boundary_datum(BoundaryKind::SmoothedCone { slope: 1.0 }, dim).unwrap();
            let coarse = phi.l1_kernel_norm_with(1.5, 1e-8).unwrap();
            let fine = phi.l1_kernel_norm_with(1.5, 1e-12).unwrap();
            assert!(coarse.is_finite() && coarse > 0.0);
            assert!(((coarse - fine) / fine).abs() < 1e-6);
        }
    }

    /// Trapezoid sum in `u = ln r` on `[1, inf)` plus Simpson on `[0, 1]`,
    /// with the geometric remainder past `u_max` added in closed form.
    fn l1_by_log_trapezoid(a: f64, dim: usize, sigma: f64) -> f64 {
        let n = dim as f64;
        let k = (dim - 1) as i32;
        let radial = |r: f64| a * r.hypot(1.0) * r.powi(k) * (1.0 + r).powf(-n - sigma);
        let m = 20_000;
        let near: f64 = (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * radial(i as f64 / m as f64)
            })
            .sum::<f64>()
            / (3.0 * m as f64);
        let (du, u_max) = (1e-3, 300.0);
        let steps = (u_max / du) as usize;
        // log space: (1+r)^(-n-sigma) underflows long before the tail is negligible
        let g = |u: f64| {
            let log_phi = a.ln() + u + (-2.0 * u).exp().ln_1p() / 2.0;
            let log_shell = (k + 1) as f64 * u;
            let log_kernel = -(n + sigma) * (u + (-u).exp().ln_1p());
            (log_phi + log_shell + log_kernel).exp()
        };
        let mut far = 0.5 * (g(0.0) + g(u_max));
        for i in 1..steps {
            far += g(i as f64 * du);
        }
        far *= du;
        // g(u) ~ a e^(-(sigma-1) u) beyond u_max
        far += a * (-(sigma - 1.0) * u_max).exp() / (sigma - 1.0);
        let shell = if dim == 1 {
            2.0
        } else {
            2.0 * std::f64::consts::PI
        };
        shell * (near + far)
    }

    #[test]
    fn l1_norm_matches_log_trapezoid_near_sigma_one() {
        for (dim, sigma) in [(1, 1.05), (1, 1.5), (2, 1.05), (2, 1.9)] {
            let phi = make_boundary_datum(BoundaryKind::SmoothedCone { slope: 2.0 }, dim).unwrap();
            let got = phi.l1_kernel_norm(sigma).unwrap();
            let want = l1_by_log_trapezoid(2.0, dim, sigma);
            assert!(
                ((got - want) / want).abs() < 1e-6,
                "dim {dim}, sigma {sigma}: {got} vs {want}"
            );
        }
    }
}
