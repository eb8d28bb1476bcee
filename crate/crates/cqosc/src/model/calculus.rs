//! Discrete calculus on uniform grids: second-derivative stencils and
//! trapezoidal quadrature. Everything here is second-order accurate so the
//! O(dt^2) convergence claims elsewhere hold uniformly.

use crate::error::{Error, Result};
use crate::model::{Path, TimeGrid};

/// Second derivative with the central three-point stencil in the interior
/// and one-sided second-order four-point stencils at the two boundary nodes.
/// Exact for polynomials up to degree two everywhere.
pub fn second_derivative(p: &Path) -> Result<Path> {
    let n = p.grid().n();
    if n < 4 {
        return Err(Error::GridTooSmall { n, min: 4 });
    }
    let v = p.values();
    let inv_dt2 = 1.0 / (p.grid().dt() * p.grid().dt());
    let mut out = vec![0.0; n];
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) * inv_dt2;
    for k in 1..n - 1 {
        out[k] = (v[k - 1] - 2.0 * v[k] + v[k + 1]) * inv_dt2;
    }
    out[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) * inv_dt2;
    Path::new(p.grid(), out)
}

/// Fourth derivative obtained by applying the second-derivative stencil
/// twice. Only interior nodes (index 2 .. n-3) carry trustworthy values.
pub fn fourth_derivative(p: &Path) -> Result<Path> {
    second_derivative(&second_derivative(p)?)
}

/// Trapezoid weights: dt/2 at the two ends, dt inside.
pub fn trapezoid_weights(grid: TimeGrid) -> Vec<f64> {
    let dt = grid.dt();
    let n = grid.n();
    let mut w = vec![dt; n];
    w[0] = 0.5 * dt;
    w[n - 1] = 0.5 * dt;
    w
}

/// Trapezoidal quadrature of sampled values over the grid.
pub fn trapezoid(grid: TimeGrid, values: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), grid.n());
    let dt = grid.dt();
    let n = grid.n();
    let mut acc = 0.5 * (values[0] + values[n - 1]);
    for v in &values[1..n - 1] {
        acc += v;
    }
    acc * dt
}

/// Running integral `C_k = integral_{t_i}^{t_k} f ds` by cumulative
/// trapezoid; `C_0 = 0`.
pub fn cumulative_trapezoid(grid: TimeGrid, values: &[f64]) -> Vec<f64> {
    debug_assert_eq!(values.len(), grid.n());
    let dt = grid.dt();
    let mut out = vec![0.0; values.len()];
    for k in 1..values.len() {
        out[k] = out[k - 1] + 0.5 * dt * (values[k - 1] + values[k]);
    }
    out
}
