use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::boundary::BoundaryDatum;

/// Lattice index relative to the origin; unused trailing axes are zero.
pub type Node = [i64; 2];

/// Uniform lattice `h Z^n` restricted to the box `[-R, R]^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    h: f64,
    half: i64,
}

impl Grid {
    /// `box_radius` must be an integer multiple of `h`.
    pub fn new(dim: usize, h: f64, box_radius: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::param(
                "n",
                format!("dimension {dim} not supported (1 or 2)"),
            ));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::param(
                "grid.h",
                format!("spacing {h} must be positive"),
            ));
        }
        let ratio = box_radius / h;
        let half = ratio.round();
        if (ratio - half).abs() > 1e-8 * ratio.max(1.0) {
            return Err(Error::param(
                "grid.R",
                format!("h = {h} does not divide R = {box_radius}"),
            ));
        }
        if half < 10.0 {
            return Err(Error::param(
                "grid.R",
                format!("box radius {box_radius} is less than 10 grid units"),
            ));
        }
        Ok(Self {
            dim,
            h,
            half: half as i64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of lattice steps from the origin to the box edge.
    pub fn half_nodes(&self) -> i64 {
        self.half
    }

    pub fn box_radius(&self) -> f64 {
        self.half as f64 * self.h
    }

    pub fn side(&self) -> usize {
        (2 * self.half + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice steps from the origin to the edge of the solver region `|x|_inf <= R/2`.
    pub fn region_half(&self) -> i64 {
        self.half / 2
    }

    #[inline]
    pub fn contains(&self, m: Node) -> bool {
        m[0].abs() <= self.half && (self.dim == 1 || m[1].abs() <= self.half)
    }

    #[inline]
    pub fn in_region(&self, m: Node) -> bool {
        let r = self.region_half();
        m[0].abs() <= r && (self.dim == 1 || m[1].abs() <= r)
    }

    #[inline]
    pub fn index(&self, m: Node) -> usize {
        let side = self.side() as i64;
        let i = (m[0] + self.half) as usize;
        if self.dim == 1 {
            i
        } else {
            i * side as usize + (m[1] + self.half) as usize
        }
    }

    #[inline]
    pub fn node(&self, index: usize) -> Node {
        let side = self.side();
        if self.dim == 1 {
            [index as i64 - self.half, 0]
        } else {
            [
                (index / side) as i64 - self.half,
                (index % side) as i64 - self.half,
            ]
        }
    }

    #[inline]
    pub fn coords(&self, m: Node) -> [f64; 2] {
        [m[0] as f64 * self.h, m[1] as f64 * self.h]
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.len()).map(move |k| self.node(k))
    }

    /// Nodes of the solver region in index order.
    pub fn region_nodes(&self) -> Vec<Node> {
        self.nodes().filter(|&m| self.in_region(m)).collect()
    }

    /// The same box with spacing `h / 2`.
    pub fn refined(&self) -> Grid {
        Grid {
            dim: self.dim,
            h: self.h / 2.0,
            half: self.half * 2,
        }
    }
}

/// A shareable analytic function of position.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Values assumed by a grid function outside the box.
#[derive(Clone)]
pub enum FarField {
    Zero,
    Datum(Arc<BoundaryDatum>),
    Analytic { f: ScalarFn, label: String },
}

impl FarField {
    pub fn analytic<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        FarField::Analytic {
            f: Arc::new(f),
            label: label.into(),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FarField::Zero => 0.0,
            FarField::Datum(phi) => phi.eval(x),
            FarField::Analytic { f, .. } => f(x),
        }
    }

    /// Whether both closures are the same function (by identity, not value).
    pub fn same_as(&self, other: &FarField) -> bool {
        match (self, other) {
            (FarField::Zero, FarField::Zero) => true,
            (FarField::Datum(a), FarField::Datum(b)) => Arc::ptr_eq(a, b) || a == b,
            (FarField::Analytic { f: a, .. }, FarField::Analytic { f: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            FarField::Zero => "zero",
            FarField::Datum(_) => "phi",
            FarField::Analytic { label, .. } => label,
        }
    }
}

impl fmt::Debug for FarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FarField({})", self.label())
    }
}

/// Samples of a function on the lattice plus the closure used outside it.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    far: FarField,
}

impl GridFunction {
    pub fn from_values(grid: Grid, values: Vec<f64>, far: FarField) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param(
                "values",
                format!("expected {} values, got {}", grid.len(), values.len()),
            ));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let m = grid.node(k);
            return Err(Error::NonFiniteSample {
                index: m[..grid.dim()].to_vec(),
                at: grid.coords(m)[..grid.dim()].to_vec(),
            });
        }
        Ok(Self { grid, values, far })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            far: FarField::Zero,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn far_field(&self) -> &FarField {
        &self.far
    }

    pub fn with_far_field(mut self, far: FarField) -> Self {
        self.far = far;
        self
    }

    /// Value at an arbitrary lattice node, falling back to the closure
    /// outside the box.
    #[inline]
    pub fn at(&self, m: Node) -> f64 {
        if self.grid.contains(m) {
            self.values[self.grid.index(m)]
        } else {
            let x = self.grid.coords(m);
            self.far.eval(&x[..self.grid.dim()])
        }
    }

    /// Value of the analytic closure at a physical point.
    #[inline]
    pub fn far_at(&self, x: &[f64]) -> f64 {
        self.far.eval(x)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Sup norm over the solver region only.
    pub fn region_sup_norm(&self) -> f64 {
        self.grid
            .nodes()
            .filter(|&m| self.grid.in_region(m))
            .fold(0.0_f64, |acc, m| {
                acc.max(self.values[self.grid.index(m)].abs())
            })
    }

    /// Pointwise combination `a * self + b * other` with the given closure.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64, far: FarField) -> GridFunction {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| a * u + b * v)
            .collect();
        GridFunction {
            grid: self.grid,
            values,
            far,
        }
    }

    pub fn map(&self, far: FarField, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            far,
        }
    }
}

/// Samples `f` at every lattice node of `grid` and records the closure.
pub fn sample_to_grid<F>(f: F, grid: Grid, far: FarField) -> Result<GridFunction>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = grid.dim();
    let mut values = Vec::with_capacity(grid.len());
    for m in grid.nodes() {
        let x = grid.coords(m);
        let v = f(&x[..dim]);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample {
                index: m[..dim].to_vec(),
                at: x[..dim].to_vec(),
            });
        }
        values.push(v);
    }
    Ok(GridFunction { grid, values, far })
}
