//! Evaluation of the hybrid action on sampled trajectories.
//!
//! Kinetic terms are evaluated in integrated-by-parts form, `Q'^2/2 ->
//! -Q Q''/2`, with the endpoint contributions dropped; the lattice module
//! assembles exactly the same discrete quadratic form, so the two agree to
//! rounding on arbitrary paths.

use crate::error::{Error, Result};
use crate::model::{
    second_derivative, trapezoid_weights, ActionConvention, ComplexWeight, HybridPaths,
    OscillatorConfig, Path, TimeGrid,
};
use crate::parallel;

/// Action of a trajectory triple under the convention selected in `cfg`.
pub fn evaluate_action(paths: &HybridPaths, cfg: &OscillatorConfig) -> Result<ComplexWeight> {
    cfg.validate()?;
    let grid = paths.grid();
    let w = trapezoid_weights(grid);
    let q = paths.q.values();
    let qp = paths.q_plus.values();
    let qm = paths.q_minus.values();
    let ddq = second_derivative(&paths.q)?;
    let ddqp = second_derivative(&paths.q_plus)?;
    let ddqm = second_derivative(&paths.q_minus)?;

    let wq2 = cfg.omega_q * cfg.omega_q;
    let wc2 = cfg.omega_c * cfg.omega_c;
    let a = cfg.alpha;

    let mut phase = 0.0;
    let mut log_mag = 0.0;
    for k in 0..grid.n() {
        let lag_plus = -0.5 * qp[k] * ddqp.get(k) - 0.5 * wq2 * qp[k] * qp[k] - a * q[k] * qp[k];
        let lag_minus = -0.5 * qm[k] * ddqm.get(k) - 0.5 * wq2 * qm[k] * qm[k] - a * q[k] * qm[k];
        phase += w[k] * (lag_plus - lag_minus);

        let eom = ddq.get(k) + wc2 * q[k];
        let sum_q = qp[k] + qm[k];
        let real_term = match cfg.convention {
            ActionConvention::DecoherenceDiffusion => {
                let delta_q = qp[k] - qm[k];
                let shifted = eom + 0.5 * a * sum_q;
                -0.5 * cfg.d0() * a * a * delta_q * delta_q - 0.5 / cfg.d2 * shifted * shifted
            }
            ActionConvention::Saturated => {
                -0.5 / cfg.d2
                    * (eom * eom
                        + a * eom * sum_q
                        + 0.25 * a * a * (qp[k] * qp[k] + qm[k] * qm[k]))
            }
        };
        log_mag += w[k] * real_term;
    }

    Ok(ComplexWeight {
        log_magnitude: log_mag,
        phase,
    })
}

/// Decoherence weight of a branch-difference trajectory:
/// `-(a^2 / 8 D2) integral (dQ)^2 dt`, using `D0 = 1/(4 D2)`. Always <= 0.
pub fn decoherence_weight(delta_q: &Path, cfg: &OscillatorConfig) -> Result<f64> {
    cfg.validate()?;
    let w = trapezoid_weights(delta_q.grid());
    let mut acc = 0.0;
    for (k, v) in delta_q.values().iter().enumerate() {
        acc += w[k] * v * v;
    }
    Ok(-cfg.alpha * cfg.alpha / (8.0 * cfg.d2) * acc)
}

/// One sample of the decoherence surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub dq_i: f64,
    pub dq_f: f64,
    /// `exp(decoherence_weight)` of the boundary-pinned interpolant.
    pub weight_exp: f64,
}

/// Scan `exp(decoherence_weight)` of the free boundary-pinned interpolant
/// over a square `(dQ_i, dQ_f)` grid. `n_scan` must be odd so the origin is
/// sampled exactly; rows are emitted in row-major order.
pub fn decoherence_surface(
    cfg: &OscillatorConfig,
    grid: TimeGrid,
    dq_max: f64,
    n_scan: usize,
) -> Result<Vec<SurfacePoint>> {
    cfg.validate()?;
    if n_scan < 3 || n_scan % 2 == 0 {
        return Err(Error::InvalidConfig {
            reason: format!("n_scan must be odd and >= 3, got {n_scan}"),
        });
    }
    if !(dq_max.is_finite() && dq_max > 0.0) {
        return Err(Error::InvalidConfig {
            reason: "dq_max must be positive".into(),
        });
    }
    let sin_total = (cfg.omega_q * grid.span()).sin();
    if sin_total.abs() < crate::mpp::BVP_SIN_TOLERANCE {
        return Err(Error::DegenerateBvp {
            value: sin_total.abs(),
        });
    }

    let step = 2.0 * dq_max / (n_scan - 1) as f64;
    let coord = |idx: usize| -dq_max + idx as f64 * step;
    let cfg = *cfg;
    let rows = parallel::par_map(n_scan, move |i| {
        let dq_i = coord(i);
        (0..n_scan)
            .map(|j| {
                let dq_f = coord(j);
                let interp = Path::from_fn(grid, |t| {
                    (dq_i * (cfg.omega_q * (grid.t_f() - t)).sin()
                        + dq_f * (cfg.omega_q * (t - grid.t_i())).sin())
                        / sin_total
                })
                .expect("interpolant is finite");
                let weight = decoherence_weight(&interp, &cfg).expect("validated config");
                SurfacePoint {
                    dq_i,
                    dq_f,
                    weight_exp: weight.exp(),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(rows.into_iter().flatten().collect())
}
