use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::boundary::BoundaryDatum;
use crate::model::forcing::Forcing;
use crate::model::grid::{sample_to_grid, FarField, Grid, GridFunction};
use crate::model::nonlinearity::Nonlinearity;

/// Truncation parameters of the whole-space problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub box_radius: f64,
    pub h: f64,
    /// Radius beyond which the kernel is integrated against the analytic closure.
    /// Defaults to half the box radius.
    pub rho_tail: Option<f64>,
}

/// A fully specified Dirichlet problem `I[u] = g(x, u - phi)`, `u - phi -> 0`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub sigma: f64,
    pub f: Nonlinearity,
    pub g: Forcing,
    pub phi: Arc<BoundaryDatum>,
    pub grid: Grid,
    pub rho_tail: f64,
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 1.0 && sigma < 2.0 {
        Ok(())
    } else {
        Err(Error::SigmaOutOfRange(sigma))
    }
}

impl ProblemSpec {
    pub fn new(
        sigma: f64,
        f: Nonlinearity,
        g: Forcing,
        phi: BoundaryDatum,
        trunc: Truncation,
    ) -> Result<Self> {
        check_sigma(sigma)?;
        let grid = Grid::new(phi.dim(), trunc.h, trunc.box_radius)?;
        if trunc.h >= 1.0 {
            return Err(Error::param("grid.h", "spacing must be below 1"));
        }
        let rho = trunc
            .rho_tail
            .unwrap_or(grid.region_half() as f64 * grid.h());
        let steps = rho / grid.h();
        if (steps - steps.round()).abs() > 1e-8 * steps.max(1.0) {
            return Err(Error::param(
                "tail.rho",
                format!("rho = {rho} is not a multiple of h"),
            ));
        }
        if rho < 1.0 || rho > grid.box_radius() {
            return Err(Error::param(
                "tail.rho",
                format!("rho = {rho} must lie in [1, R]"),
            ));
        }
        Ok(Self {
            sigma,
            f,
            g,
            phi: Arc::new(phi),
            grid,
            rho_tail: rho,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn with_nonlinearity(&self, f: Nonlinearity) -> Self {
        Self { f, ..self.clone() }
    }

    pub fn with_forcing(&self, g: Forcing) -> Self {
        Self { g, ..self.clone() }
    }

    /// The same problem on the grid with spacing `h / 2`.
    pub fn refined(&self) -> Self {
        Self {
            grid: self.grid.refined(),
            ..self.clone()
        }
    }

    pub fn with_spacing(&self, h: f64) -> Result<Self> {
        let grid = Grid::new(self.dim(), h, self.grid.box_radius())?;
        let steps = self.rho_tail / h;
        if (steps - steps.round()).abs() > 1e-8 * steps.max(1.0) {
            return Err(Error::param(
                "tail.rho",
                format!("rho = {} is not a multiple of h = {h}", self.rho_tail),
            ));
        }
        Ok(Self {
            grid,
            ..self.clone()
        })
    }

    pub fn phi_far(&self) -> FarField {
        FarField::Datum(self.phi.clone())
    }

    /// `phi` sampled on the lattice with the closure `u = phi` outside.
    pub fn phi_grid(&self) -> GridFunction {
        let phi = self.phi.clone();
        sample_to_grid(move |x| phi.eval(x), self.grid, self.phi_far()).expect("phi is finite")
    }

    /// `u - phi` with zero closure.
    pub fn difference_from_phi(&self, u: &GridFunction) -> GridFunction {
        let phi = self.phi_grid();
        u.combine(1.0, &phi, -1.0, FarField::Zero)
    }
}
