//! Discretization of the singular measure `dy / |y|^(n+sigma)`.

mod oracle;
mod tail;
mod weights;

pub use oracle::{quadrature_oracle, OracleDomain, OracleValue};
pub use tail::{tail_integral, tail_sum, TailEstimate, TailOptions, TailPoint, TailRule};
pub use weights::{
    build_kernel_weights, build_kernel_weights_with, cell_kernel_mass, near_field_coeff,
    power_integral, KernelWeights, MidWeight,
};

use crate::model::grid::{GridFunction, Node};

/// `u(x+y) + u(x-y) - 2u(x)` on lattice points, with the closure of `u`
/// outside the box.
#[inline]
pub fn symmetric_difference(u: &GridFunction, x: Node, y: Node) -> f64 {
    let plus = [x[0] + y[0], x[1] + y[1]];
    let minus = [x[0] - y[0], x[1] - y[1]];
    u.at(plus) + u.at(minus) - 2.0 * u.at(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::grid::{sample_to_grid, FarField, Grid};

    #[test]
    fn symmetric_differences_of_simple_functions() {
        let grid = Grid::new(1, 0.1, 5.0).unwrap();
        let c = sample_to_grid(|_| 3.0, grid, FarField::analytic("3", |_| 3.0)).unwrap();
        let q = sample_to_grid(
            |x| x[0] * x[0],
            grid,
            FarField::analytic("x^2", |x| x[0] * x[0]),
        )
        .unwrap();
        let a = sample_to_grid(
            |x| x[0].abs(),
            grid,
            FarField::analytic("|x|", |x| x[0].abs()),
        )
        .unwrap();
        for x in [-20, 0, 7] {
            for y in [1, 5, 40, 60] {
                assert_eq!(symmetric_difference(&c, [x, 0], [y, 0]), 0.0);
                let yy = y as f64 * 0.1;
                assert!((symmetric_difference(&q, [x, 0], [y, 0]) - 2.0 * yy * yy).abs() < 1e-12);
            }
        }
        for y in [1, 13, 70] {
            assert!(
                (symmetric_difference(&a, [0, 0], [y, 0]) - 2.0 * y as f64 * 0.1).abs() < 1e-12
            );
        }
    }
}
