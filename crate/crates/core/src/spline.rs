/// Piecewise cubic Hermite interpolant on sorted knots, extended linearly
/// beyond the end knots with the end slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteTable {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteTable {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert!(knots.len() >= 2 && knots.len() == values.len() && knots.len() == slopes.len());
        debug_assert!(knots.windows(2).all(|w| w[0] < w[1]), "knots must increase");
        Self {
            knots,
            values,
            slopes,
        }
    }

    /// Identically zero table.
    pub fn zero() -> Self {
        Self::new(vec![-1.0, 1.0], vec![0.0; 2], vec![0.0; 2])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        let last = k.len() - 1;
        if t <= k[0] {
            return self.values[0] + self.slopes[0] * (t - k[0]);
        }
        if t >= k[last] {
            return self.values[last] + self.slopes[last] * (t - k[last]);
        }
        let i = k.partition_point(|&x| x <= t) - 1;
        hermite(
            k[i],
            k[i + 1],
            self.values[i],
            self.values[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            t,
        )
    }
}

#[inline]
pub(crate) fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = x1 - x0;
    let s = (t - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}
