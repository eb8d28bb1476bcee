//! Saddle-point and most-probable-path solvers.
//!
//! The quantum branches extremize the oscillatory part of the action and
//! satisfy the forced oscillator equation `Q'' + wq^2 Q + a q = 0` with both
//! endpoints pinned; the solution is the boundary interpolant plus Green
//! convolution integrals. The classical most probable path extremizes the
//! diffusive part: to zeroth order in the coupling it solves
//! `(d^2/dt^2 + wc^2)^2 q = 0`, and the first-order correction is driven by
//! the branch-average endpoint data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    cumulative_trapezoid, fourth_derivative, second_derivative, trapezoid, trapezoid_weights,
    BoundaryConditions, ClassicalBc, ComplexWeight, HybridPaths, MppCoefficients,
    OscillatorConfig, Path, TimeGrid,
};

/// Below this |sin(wq (t_f - t_i))| the pinned boundary-value problem is
/// treated as degenerate (the csc prefactor blows up).
pub const BVP_SIN_TOLERANCE: f64 = 1e-9;

/// Relative tolerance on |wc - wq| under which the first-order correction is
/// refused; at resonance the classical path is unaffected by the coupling
/// and the printed prefactor is undefined.
pub const RESONANCE_REL_TOLERANCE: f64 = 1e-9;

/// Asymptotic regime selecting how the coupled pair is solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Large diffusion, weak coupling: first-order classical path, quantum
    /// branches forced by it.
    WeakCouplingLargeD2,
    /// Heavy classical oscillator: zeroth-order classical path, quantum
    /// branches forced by it.
    HeavyClassical,
    /// Heavy quantum oscillator: free pinned branches independent of the
    /// classical path, which follows the first-order solution.
    HeavyQuantum,
}

/// A solved classical most probable path with its coefficient form.
#[derive(Clone, Debug)]
pub struct MppSolution {
    /// Perturbative order in the coupling (0 or 1).
    pub order: u8,
    pub q: Path,
    /// Coefficients of the zeroth-order part; at order 1 the sampled path is
    /// this form plus the endpoint-driven correction.
    pub coefficients: MppCoefficients,
    pub regime: Option<Regime>,
    pub config: OscillatorConfig,
}

impl MppSolution {
    /// JSON description: coefficients, order, regime, and config echo, with a
    /// reference to the externally written path CSV.
    pub fn to_json(&self, path_csv: &str) -> serde_json::Value {
        serde_json::json!({
            "order": self.order,
            "coefficients": self.coefficients,
            "regime": self.regime,
            "config": self.config,
            "path_csv": path_csv,
        })
    }
}

fn check_bvp_sine(omega_q: f64, grid: TimeGrid) -> Result<f64> {
    let sin_total = (omega_q * grid.span()).sin();
    if sin_total.abs() < BVP_SIN_TOLERANCE {
        return Err(Error::DegenerateBvp {
            value: sin_total.abs(),
        });
    }
    Ok(sin_total)
}

/// Boundary-pinned free oscillator interpolant
/// `[y_i sin(w (t_f - t)) + y_f sin(w (t - t_i))] / sin(w (t_f - t_i))`.
/// Endpoint nodes are pinned to the data exactly.
pub fn pinned_interpolant(grid: TimeGrid, omega: f64, y_i: f64, y_f: f64) -> Result<Path> {
    let sin_total = check_bvp_sine(omega, grid)?;
    let n = grid.n();
    let mut vals: Vec<f64> = (0..n)
        .map(|k| {
            let t = grid.node(k);
            (y_i * (omega * (grid.t_f() - t)).sin() + y_f * (omega * (t - grid.t_i())).sin())
                / sin_total
        })
        .collect();
    vals[0] = y_i;
    vals[n - 1] = y_f;
    Path::new(grid, vals)
}

/// Solve the pinned forced-oscillator problem for both branches:
/// `Q'' + wq^2 Q + a q = 0`, `Q(t_i) = Q_i`, `Q(t_f) = Q_f`. The forcing
/// convolutions are evaluated by trapezoidal quadrature on the grid, so any
/// sampled `q` is accepted; the residual is O(dt^2) and the endpoints match
/// the data exactly.
pub fn solve_forced_quantum(
    q: &Path,
    bc: &BoundaryConditions,
    cfg: &OscillatorConfig,
) -> Result<(Path, Path)> {
    cfg.validate()?;
    let grid = q.grid();
    let w = cfg.omega_q;
    let sin_total = check_bvp_sine(w, grid)?;
    let n = grid.n();

    // C(t_k) = int_{t_i}^{t_k} sin(w (t_k - s)) q(s) ds, expanded over the
    // angle difference so one cumulative pass suffices.
    let cos_q: Vec<f64> = (0..n)
        .map(|k| (w * grid.node(k)).cos() * q.get(k))
        .collect();
    let sin_q: Vec<f64> = (0..n)
        .map(|k| (w * grid.node(k)).sin() * q.get(k))
        .collect();
    let cum_cos = cumulative_trapezoid(grid, &cos_q);
    let cum_sin = cumulative_trapezoid(grid, &sin_q);
    let conv: Vec<f64> = (0..n)
        .map(|k| {
            let wt = w * grid.node(k);
            wt.sin() * cum_cos[k] - wt.cos() * cum_sin[k]
        })
        .collect();
    let conv_full = conv[n - 1];

    // Particular part shared by both branches. The overall sign makes the
    // branches satisfy Q'' + wq^2 Q = -a q.
    let particular: Vec<f64> = (0..n)
        .map(|k| {
            let t = grid.node(k);
            -(cfg.alpha / w)
                * (conv[k] + (w * (grid.t_i() - t)).sin() / sin_total * conv_full)
        })
        .collect();

    let build = |y_i: f64, y_f: f64| -> Result<Path> {
        let interp = pinned_interpolant(grid, w, y_i, y_f)?;
        let mut vals: Vec<f64> = (0..n).map(|k| interp.get(k) + particular[k]).collect();
        vals[0] = y_i;
        vals[n - 1] = y_f;
        Path::new(grid, vals)
    };
    let qb = bc.quantum;
    Ok((build(qb.plus_i, qb.plus_f)?, build(qb.minus_i, qb.minus_f)?))
}

/// Gaussian elimination with partial pivoting on a 4x4 system.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Result<[f64; 4]> {
    let scale = a
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..4 {
        let pivot_row = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-12 * scale {
            return Err(Error::SingularBoundarySystem);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut acc = b[row];
        for k in row + 1..4 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

fn zeroth_basis(omega: f64, t: f64) -> [f64; 4] {
    let (s, c) = (omega * t).sin_cos();
    [s, c, t * s, t * c]
}

fn zeroth_basis_d1(omega: f64, t: f64) -> [f64; 4] {
    let (s, c) = (omega * t).sin_cos();
    [omega * c, -omega * s, s + omega * t * c, c - omega * t * s]
}

fn zeroth_basis_d2(omega: f64, t: f64) -> [f64; 4] {
    let (s, c) = (omega * t).sin_cos();
    let w2 = omega * omega;
    [
        -w2 * s,
        -w2 * c,
        2.0 * omega * c - w2 * t * s,
        -2.0 * omega * s - w2 * t * c,
    ]
}

fn zeroth_coefficients(
    bc: &BoundaryConditions,
    cfg: &OscillatorConfig,
    grid: TimeGrid,
) -> Result<MppCoefficients> {
    match bc.classical {
        ClassicalBc::Coefficients(c) => Ok(c),
        ClassicalBc::Endpoint {
            q_i,
            qdot_i,
            qddot_i,
            q_f,
        } => {
            let w = cfg.omega_c;
            let a = [
                zeroth_basis(w, grid.t_i()),
                zeroth_basis_d1(w, grid.t_i()),
                zeroth_basis_d2(w, grid.t_i()),
                zeroth_basis(w, grid.t_f()),
            ];
            let x = solve4(a, [q_i, qdot_i, qddot_i, q_f])?;
            Ok(MppCoefficients {
                a1: x[0],
                a2: x[1],
                b1: x[2],
                b2: x[3],
            })
        }
    }
}

fn sample_zeroth(coeff: &MppCoefficients, cfg: &OscillatorConfig, grid: TimeGrid) -> Result<Path> {
    Path::from_fn(grid, |t| {
        let b = zeroth_basis(cfg.omega_c, t);
        coeff.a1 * b[0] + coeff.a2 * b[1] + coeff.b1 * b[2] + coeff.b2 * b[3]
    })
}

/// Zeroth-order most probable path: the kernel of `(d^2/dt^2 + wc^2)^2`
/// pinned by the classical boundary data.
pub fn mpp_zeroth(
    bc: &BoundaryConditions,
    cfg: &OscillatorConfig,
    grid: TimeGrid,
) -> Result<MppSolution> {
    cfg.validate()?;
    let coefficients = zeroth_coefficients(bc, cfg, grid)?;
    Ok(MppSolution {
        order: 0,
        q: sample_zeroth(&coefficients, cfg, grid)?,
        coefficients,
        regime: None,
        config: *cfg,
    })
}

/// First-order most probable path: the zeroth-order solution plus the
/// coupling correction driven by the branch-average endpoint data,
/// `a / (wq^2 - wc^2) * [Qbar_i sin(wq (t_f - t)) + Qbar_f sin(wq (t - t_i))]
/// / sin(wq (t_f - t_i))`.
pub fn mpp_first(
    bc: &BoundaryConditions,
    cfg: &OscillatorConfig,
    grid: TimeGrid,
) -> Result<MppSolution> {
    cfg.validate()?;
    if (cfg.omega_c - cfg.omega_q).abs() < RESONANCE_REL_TOLERANCE * cfg.omega_c.max(cfg.omega_q) {
        return Err(Error::Resonance);
    }
    let zeroth = mpp_zeroth(bc, cfg, grid)?;
    let sin_total = check_bvp_sine(cfg.omega_q, grid)?;
    let qbar_i = bc.quantum.qbar_i();
    let qbar_f = bc.quantum.qbar_f();
    let pref = cfg.alpha / ((cfg.omega_q * cfg.omega_q - cfg.omega_c * cfg.omega_c) * sin_total);
    let vals: Vec<f64> = (0..grid.n())
        .map(|k| {
            let t = grid.node(k);
            zeroth.q.get(k)
                + pref
                    * (qbar_i * (cfg.omega_q * (grid.t_f() - t)).sin()
                        + qbar_f * (cfg.omega_q * (t - grid.t_i())).sin())
        })
        .collect();
    Ok(MppSolution {
        order: 1,
        q: Path::new(grid, vals)?,
        coefficients: zeroth.coefficients,
        regime: None,
        config: *cfg,
    })
}

/// Left-hand side of the full integro-differential most-probable-path
/// equation evaluated at each node:
///
/// ```text
/// q'''' + 2 wc^2 q'' + wc^4 q + a Qbar (wc^2 - wq^2)
///   - a^2 [ q - (q'' + wc^2 q + a/2 Qbar) / wq *
///           ( sin(wq (t_i - t)) / sin(wq (t_f - t_i)) * I_f + I(t) ) ]
/// ```
///
/// with `I(t) = int_{t_i}^t sin(wq (t - s)) ds` and
/// `I_f = int_{t_i}^{t_f} sin(wq (t_f - s)) ds`, both by trapezoid. `Qbar`
/// is the branch average of [`solve_forced_quantum`] applied to `q`. The
/// first and last two nodes are excluded (set to zero) because the fourth
/// derivative is not trustworthy there.
pub fn eom_residual(
    q: &Path,
    bc: &BoundaryConditions,
    cfg: &OscillatorConfig,
) -> Result<Path> {
    cfg.validate()?;
    let grid = q.grid();
    let n = grid.n();
    if n < 8 {
        return Err(Error::GridTooSmall { n, min: 8 });
    }
    let (qp, qm) = solve_forced_quantum(q, bc, cfg)?;
    let qbar: Vec<f64> = (0..n).map(|k| 0.5 * (qp.get(k) + qm.get(k))).collect();

    let d2q = second_derivative(q)?;
    let d4q = fourth_derivative(q)?;

    let w = cfg.omega_q;
    let sin_total = check_bvp_sine(w, grid)?;
    // I(t_k) expanded over the angle difference, one cumulative pass.
    let cos_s: Vec<f64> = (0..n).map(|k| (w * grid.node(k)).cos()).collect();
    let sin_s: Vec<f64> = (0..n).map(|k| (w * grid.node(k)).sin()).collect();
    let cum_cos = cumulative_trapezoid(grid, &cos_s);
    let cum_sin = cumulative_trapezoid(grid, &sin_s);
    let kernel_f: Vec<f64> = (0..n)
        .map(|k| (w * (grid.t_f() - grid.node(k))).sin())
        .collect();
    let integral_f = trapezoid(grid, &kernel_f);

    let wc2 = cfg.omega_c * cfg.omega_c;
    let wq2 = w * w;
    let a = cfg.alpha;
    let mut vals = vec![0.0; n];
    for k in 2..n - 2 {
        let t = grid.node(k);
        let wt = w * t;
        let integral_t = wt.sin() * cum_cos[k] - wt.cos() * cum_sin[k];
        let windows = (w * (grid.t_i() - t)).sin() / sin_total * integral_f + integral_t;
        let eom0 = d4q.get(k) + 2.0 * wc2 * d2q.get(k) + wc2 * wc2 * q.get(k)
            + a * qbar[k] * (wc2 - wq2);
        let bracket =
            q.get(k) - (d2q.get(k) + wc2 * q.get(k) + 0.5 * a * qbar[k]) / w * windows;
        vals[k] = eom0 - a * a * bracket;
    }
    Path::new(grid, vals)
}

/// Solve the coupled pair in one of the asymptotic regimes.
pub fn solve_regime(
    regime: Regime,
    bc: &BoundaryConditions,
    cfg: &OscillatorConfig,
    grid: TimeGrid,
) -> Result<HybridPaths> {
    let (q, q_plus, q_minus) = match regime {
        Regime::WeakCouplingLargeD2 => {
            let q = mpp_first(bc, cfg, grid)?.q;
            let (qp, qm) = solve_forced_quantum(&q, bc, cfg)?;
            (q, qp, qm)
        }
        Regime::HeavyClassical => {
            let q = mpp_zeroth(bc, cfg, grid)?.q;
            let (qp, qm) = solve_forced_quantum(&q, bc, cfg)?;
            (q, qp, qm)
        }
        Regime::HeavyQuantum => {
            let qb = bc.quantum;
            let qp = pinned_interpolant(grid, cfg.omega_q, qb.plus_i, qb.plus_f)?;
            let qm = pinned_interpolant(grid, cfg.omega_q, qb.minus_i, qb.minus_f)?;
            let q = mpp_first(bc, cfg, grid)?.q;
            (q, qp, qm)
        }
    };
    HybridPaths::new(q, q_plus, q_minus)
}

/// Exponent of the on-shell propagator (fluctuation prefactor excluded):
///
/// ```text
/// phase   = int [ dQ'. Qbar'/2 - wq^2 dQ Qbar / 2 - a q dQ ]
/// log|K|  = -(1/2 D2) int [ (q''+wc^2 q)^2 + 2 a (q''+wc^2 q) Qbar
///                           + a^2/4 (Q+^2 + Q-^2) ]
/// ```
///
/// Kinetic phase terms are integrated by parts like everywhere else. The
/// lattice module evaluates the same integrand through its quadratic-form
/// machinery, which serves as the independent cross-check.
pub fn onshell_propagator(paths: &HybridPaths, cfg: &OscillatorConfig) -> Result<ComplexWeight> {
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
        let delta = qp[k] - qm[k];
        let qbar = 0.5 * (qp[k] + qm[k]);
        // dQ'. Qbar'/2 = (Q+'^2 - Q-'^2)/4 -> -(Q+ Q+'' - Q- Q-'')/4.
        let kinetic = -0.25 * (qp[k] * ddqp.get(k) - qm[k] * ddqm.get(k));
        phase += w[k] * (kinetic - 0.5 * wq2 * delta * qbar - a * q[k] * delta);

        let eom = ddq.get(k) + wc2 * q[k];
        log_mag += w[k]
            * (-0.5 / cfg.d2)
            * (eom * eom
                + 2.0 * a * eom * qbar
                + 0.25 * a * a * (qp[k] * qp[k] + qm[k] * qm[k]));
    }
    Ok(ComplexWeight {
        log_magnitude: log_mag,
        phase,
    })
}
