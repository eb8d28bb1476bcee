//! Free propagators (closed form and momentum quadrature) and the
//! second-order coupling corrections to the two-point functions.
//!
//! The corrected correlators evaluate the double time integral
//!
//! ```text
//! <q(s)q(t)>   = A(s-t)  + II dw dv [ (ia)^2 A_sw A_tv (F+ + F-)_wv
//!                + (a/2D2)^2 (SA)_sw (SA)_tv (F+ + F-)_wv
//!                + i a^2/(2D2) (F+ - F-)_wv (A_sw (SA)_tv + A_tw (SA)_sv) ]
//! <Q+(s)Q+(t)> = F+(s-t) + II dw dv F+_sw F+_tv [ (a/2D2)^2 (S S A)_wv
//!                + (ia)^2 A_wv + i a^2/D2 (S A)_wv ]
//! ```
//!
//! with `S = wc^2 + d^2` and every kernel in its analytic partial-fraction
//! or residue form (no numerical differentiation). `(S S A)` carries a
//! `D2 delta(w - v)` part that collapses one integral and is handled
//! explicitly. Correlators are reported in the printed normalization; the
//! corrections are converted from Gaussian-moment normalization by the
//! per-species constants in [`kernels`].

pub mod kernels;
mod quadrature;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{second_derivative, trapezoid_weights, OscillatorConfig, Path, TimeGrid};
use crate::parallel;
use kernels::{
    ClassicalKernel, QuantumMinusKernel, QuantumPlusKernel, CLASSICAL_SPECIES_CONSTANT,
    QUANTUM_SPECIES_CONSTANT,
};
use quadrature::adaptive_simpson;

/// How a correlator value was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Residue,
    Quadrature,
    Lattice,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Residue => "residue",
            Method::Quadrature => "quadrature",
            Method::Lattice => "lattice",
        }
    }
}

/// Momentum-integral controls.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Momentum cutoff; the analytic tail beyond it is estimated, and the
    /// evaluation fails with `CutoffTooSmall` when that tail is too large.
    pub p_max: f64,
    /// Base panel count for the adaptive integrator (>= 64).
    pub n_points: usize,
    /// Regularizer of the classical propagator denominator.
    pub eta: f64,
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_max.is_finite() && self.p_max > 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("p_max must be positive, got {}", self.p_max),
            });
        }
        if self.n_points < 64 {
            return Err(Error::InvalidConfig {
                reason: format!("n_points must be >= 64, got {}", self.n_points),
            });
        }
        Ok(())
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            p_max: 80.0,
            n_points: 256,
            eta: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CorrelatorValue {
    pub value: Complex64,
    pub method: Method,
    pub accuracy_estimate: f64,
}

const SIMPSON_MAX_DEPTH: usize = 40;
/// Relative target for the adaptive momentum integrals.
const QUAD_REL_TOL: f64 = 1e-9;
/// A tail estimate above this fraction of the value scale is an error.
const CUTOFF_REL_TOL: f64 = 1e-4;
/// Window-doubling truncation estimate above this fraction of the corrected
/// value is an error.
const WINDOW_REL_TOL: f64 = 0.25;

/// `integral dp e^{-ip tau} / (p^2 - pole2)` over the real line, by cutoff
/// quadrature plus the analytic integral of a matched `1/(p^2 + mu^2)` tail.
fn momentum_integral(
    tau: f64,
    pole2: Complex64,
    spec: &QuadratureSpec,
    scale: f64,
) -> Result<(Complex64, f64)> {
    let mu = pole2.norm().sqrt().max(1.0);
    let mu2 = Complex64::new(mu * mu, 0.0);
    let diff = pole2 + mu2;
    let f = move |p: f64| {
        let p2 = Complex64::new(p * p, 0.0);
        (p * tau).cos() * (1.0 / (p2 - pole2) - 1.0 / (p2 + mu2))
    };
    // |f - g| <= |pole2 + mu2| / p^4 for p well above both scales.
    let p_min = 3.0 * mu;
    if spec.p_max < p_min {
        return Err(Error::CutoffTooSmall {
            tail: f64::INFINITY,
            tol: CUTOFF_REL_TOL * scale,
        });
    }
    let tail = 2.0 * diff.norm() / (3.0 * spec.p_max.powi(3)) * 1.5;
    let tol = CUTOFF_REL_TOL * scale;
    if tail > tol {
        return Err(Error::CutoffTooSmall { tail, tol });
    }
    let quad = adaptive_simpson(
        f,
        0.0,
        spec.p_max,
        QUAD_REL_TOL * scale,
        spec.n_points,
        SIMPSON_MAX_DEPTH,
    );
    let analytic_tail = std::f64::consts::PI / mu * (-mu * tau.abs()).exp();
    let value = 2.0 * quad.value + Complex64::new(analytic_tail, 0.0);
    Ok((value, tail + 2.0 * quad.error_estimate))
}

fn quantum_pole_shift(cfg: &OscillatorConfig) -> Result<f64> {
    let shift = cfg.alpha * cfg.alpha / (4.0 * cfg.d2);
    if shift <= 0.0 {
        return Err(Error::InvalidConfig {
            reason: "quadrature evaluation of the quantum propagators needs alpha > 0 \
                     (the poles sit on the integration axis otherwise)"
                .into(),
        });
    }
    Ok(shift)
}

/// Bra-branch free propagator `F'+(tau)`.
pub fn free_quantum_plus(
    tau: f64,
    cfg: &OscillatorConfig,
    spec: Option<&QuadratureSpec>,
) -> Result<CorrelatorValue> {
    cfg.validate()?;
    let kernel = QuantumPlusKernel::new(cfg);
    match spec {
        None => Ok(CorrelatorValue {
            value: kernel.printed(tau),
            method: Method::Residue,
            accuracy_estimate: 1e-13 * kernel.printed(0.0).norm(),
        }),
        Some(spec) => {
            spec.validate()?;
            let shift = quantum_pole_shift(cfg)?;
            let pole2 = Complex64::new(cfg.omega_q * cfg.omega_q, -shift);
            let scale = kernel.printed(0.0).norm();
            let (integral, err) = momentum_integral(tau, pole2, spec, scale)?;
            Ok(CorrelatorValue {
                value: -Complex64::new(0.0, 1.0) * integral,
                method: Method::Quadrature,
                accuracy_estimate: err,
            })
        }
    }
}

/// Ket-branch free propagator `F'-(tau)`; an independent evaluation, not a
/// conjugated call, so the conjugation property is a real check.
pub fn free_quantum_minus(
    tau: f64,
    cfg: &OscillatorConfig,
    spec: Option<&QuadratureSpec>,
) -> Result<CorrelatorValue> {
    cfg.validate()?;
    let kernel = QuantumMinusKernel::new(cfg);
    match spec {
        None => Ok(CorrelatorValue {
            value: kernel.printed(tau),
            method: Method::Residue,
            accuracy_estimate: 1e-13 * kernel.printed(0.0).norm(),
        }),
        Some(spec) => {
            spec.validate()?;
            let shift = quantum_pole_shift(cfg)?;
            let pole2 = Complex64::new(cfg.omega_q * cfg.omega_q, shift);
            let scale = kernel.printed(0.0).norm();
            let (integral, err) = momentum_integral(tau, pole2, spec, scale)?;
            Ok(CorrelatorValue {
                value: Complex64::new(0.0, 1.0) * integral,
                method: Method::Quadrature,
                accuracy_estimate: err,
            })
        }
    }
}

fn eta_sensitivity(cfg: &OscillatorConfig, eta: f64, tau: f64) -> f64 {
    let here = ClassicalKernel::new(cfg, eta).map(|k| k.printed(tau));
    let half = ClassicalKernel::new(cfg, 0.5 * eta)
        .or_else(|_| ClassicalKernel::new(cfg, 2.0 * eta))
        .map(|k| k.printed(tau));
    match (here, half) {
        (Ok(a), Ok(b)) => (a - b).norm(),
        _ => f64::NAN,
    }
}

/// Regularized classical propagator `A^-1(tau)`; `Method::Residue` selects
/// the partial-fraction closed form, `Method::Quadrature` the direct cutoff
/// integral. The accuracy estimate includes the sensitivity to halving eta.
pub fn free_classical(
    tau: f64,
    cfg: &OscillatorConfig,
    spec: &QuadratureSpec,
    method: Method,
) -> Result<CorrelatorValue> {
    cfg.validate()?;
    spec.validate()?;
    let kernel = ClassicalKernel::new(cfg, spec.eta)?;
    let sens = eta_sensitivity(cfg, spec.eta, tau);
    match method {
        Method::Residue => Ok(CorrelatorValue {
            value: kernel.printed(tau),
            method: Method::Residue,
            accuracy_estimate: 1e-13 * kernel.printed(0.0).norm() + sens,
        }),
        Method::Quadrature => {
            let scale = kernel.printed(tau).norm().max(1e-300);
            let tail = 2.0 * cfg.d2 / (3.0 * spec.p_max.powi(3)) * 2.0;
            let tol = CUTOFF_REL_TOL * scale;
            if spec.p_max < 3.0 * cfg.omega_c.max(1.0) || tail > tol {
                return Err(Error::CutoffTooSmall { tail, tol });
            }
            let eta = spec.eta;
            let wc2 = cfg.omega_c * cfg.omega_c;
            let d2 = cfg.d2;
            let quad = adaptive_simpson(
                move |p| {
                    let x = p * p - wc2;
                    (p * tau).cos() * d2 / Complex64::new(x * x, eta)
                },
                0.0,
                spec.p_max,
                QUAD_REL_TOL * scale,
                spec.n_points,
                SIMPSON_MAX_DEPTH,
            );
            Ok(CorrelatorValue {
                value: 2.0 * quad.value,
                method: Method::Quadrature,
                accuracy_estimate: tail + 2.0 * quad.error_estimate + sens,
            })
        }
        Method::Lattice => Err(Error::InvalidConfig {
            reason: "lattice values come from the lattice module, not this evaluator".into(),
        }),
    }
}

struct CorrectionTables {
    weights: Vec<f64>,
    /// Kernel tables indexed by |w - v| (all kernels are even).
    n: usize,
}

fn window_nodes(window: &TimeGrid) -> Vec<f64> {
    window.times()
}

/// Second-order correction to `<q q>` in Gaussian-moment normalization.
fn correction_qq(
    s: f64,
    t: f64,
    cfg: &OscillatorConfig,
    window: &TimeGrid,
    classical: &ClassicalKernel,
) -> Complex64 {
    let n = window.n();
    let dt = window.dt();
    let wts = trapezoid_weights(*window);
    let nodes = window_nodes(window);
    let plus = QuantumPlusKernel::new(cfg);
    let minus = QuantumMinusKernel::new(cfg);

    let a_s: Vec<Complex64> = nodes.iter().map(|&w| classical.consistent(s - w)).collect();
    let a_t: Vec<Complex64> = nodes.iter().map(|&w| classical.consistent(t - w)).collect();
    let g_s: Vec<Complex64> = nodes.iter().map(|&w| classical.s_applied(s - w)).collect();
    let g_t: Vec<Complex64> = nodes.iter().map(|&w| classical.s_applied(t - w)).collect();
    let f_sum: Vec<Complex64> = (0..n)
        .map(|d| {
            let tau = d as f64 * dt;
            plus.consistent(tau) + minus.consistent(tau)
        })
        .collect();
    let f_diff: Vec<Complex64> = (0..n)
        .map(|d| {
            let tau = d as f64 * dt;
            plus.consistent(tau) - minus.consistent(tau)
        })
        .collect();

    let alpha = cfg.alpha;
    let ci2 = Complex64::new(-alpha * alpha, 0.0);
    let cd = alpha / (2.0 * cfg.d2);
    let cd2 = Complex64::new(cd * cd, 0.0);
    let mixed = Complex64::new(0.0, alpha * alpha / (2.0 * cfg.d2));

    let tables = CorrectionTables { weights: wts, n };
    let rows = parallel::par_map(n, move |w| {
        let mut acc = Complex64::ZERO;
        for v in 0..tables.n {
            let d = w.abs_diff(v);
            let fs = f_sum[d];
            let fd = f_diff[d];
            let term = fs * (ci2 * a_s[w] * a_t[v] + cd2 * g_s[w] * g_t[v])
                + mixed * fd * (a_s[w] * g_t[v] + a_t[w] * g_s[v]);
            acc += tables.weights[v] * term;
        }
        tables.weights[w] * acc
    });
    rows.into_iter().sum()
}

/// Second-order correction to `<Q+ Q+>` (or `<Q- Q->` via the conjugate
/// leg kernel) in Gaussian-moment normalization.
fn correction_qq_quantum(
    s: f64,
    t: f64,
    cfg: &OscillatorConfig,
    window: &TimeGrid,
    classical: &ClassicalKernel,
    leg: &dyn Fn(f64) -> Complex64,
) -> Complex64 {
    let n = window.n();
    let dt = window.dt();
    let wts = trapezoid_weights(*window);
    let nodes = window_nodes(window);

    let f_s: Vec<Complex64> = nodes.iter().map(|&w| leg(s - w)).collect();
    let f_t: Vec<Complex64> = nodes.iter().map(|&w| leg(t - w)).collect();

    let alpha = cfg.alpha;
    let cd = alpha / (2.0 * cfg.d2);
    let cd2 = Complex64::new(cd * cd, 0.0);
    let ci2 = Complex64::new(-alpha * alpha, 0.0);
    let mixed = Complex64::new(0.0, alpha * alpha / cfg.d2);
    let kernel_a: Vec<Complex64> = (0..n)
        .map(|d| {
            let tau = d as f64 * dt;
            cd2 * classical.ss_smooth(tau)
                + ci2 * classical.consistent(tau)
                + mixed * classical.s_applied(tau)
        })
        .collect();
    let delta_coeff = cd.powi(2) * classical.ss_delta_coefficient();

    let tables = CorrectionTables { weights: wts, n };
    let rows = parallel::par_map(n, move |w| {
        let mut acc = Complex64::ZERO;
        for v in 0..tables.n {
            acc += tables.weights[v] * f_t[v] * kernel_a[w.abs_diff(v)];
        }
        tables.weights[w] * f_s[w] * (acc + Complex64::new(delta_coeff, 0.0) * f_t[w])
    });
    rows.into_iter().sum()
}

fn doubled_window(window: &TimeGrid) -> Result<TimeGrid> {
    let half = 0.5 * window.span();
    TimeGrid::new(
        window.t_i() - half,
        window.t_f() + half,
        2 * (window.n() - 1) + 1,
    )
}

fn check_inside(s: f64, t: f64, window: &TimeGrid) -> Result<()> {
    if s < window.t_i() || s > window.t_f() || t < window.t_i() || t > window.t_f() {
        return Err(Error::InvalidConfig {
            reason: format!(
                "correlator times ({s}, {t}) must lie inside the window [{}, {}]",
                window.t_i(),
                window.t_f()
            ),
        });
    }
    Ok(())
}

/// Corrected classical two-point function `<q(s) q(t)>` in printed
/// normalization: `free_classical(s - t)` plus the double-integral
/// correction. Symmetric under `s <-> t` by construction; the accuracy
/// estimate includes a window-doubling truncation probe.
pub fn corrected_qq(
    s: f64,
    t: f64,
    cfg: &OscillatorConfig,
    window: &TimeGrid,
    spec: &QuadratureSpec,
) -> Result<CorrelatorValue> {
    cfg.validate()?;
    spec.validate()?;
    check_inside(s, t, window)?;
    let kernel = ClassicalKernel::new(cfg, spec.eta)?;
    let free = free_classical(s - t, cfg, spec, Method::Residue)?;
    let corr = correction_qq(s, t, cfg, window, &kernel);
    let corr2 = correction_qq(s, t, cfg, &doubled_window(window)?, &kernel);
    let to_printed = 1.0 / CLASSICAL_SPECIES_CONSTANT;
    let value = free.value + to_printed * corr;
    let window_err = to_printed * (corr2 - corr).norm();
    let tol = WINDOW_REL_TOL * value.norm().max(free.value.norm());
    if window_err > tol {
        return Err(Error::WindowTooSmall {
            estimate: window_err,
            tol,
        });
    }
    Ok(CorrelatorValue {
        value,
        method: Method::Residue,
        accuracy_estimate: free.accuracy_estimate + window_err,
    })
}

fn corrected_quantum(
    s: f64,
    t: f64,
    cfg: &OscillatorConfig,
    window: &TimeGrid,
    spec: &QuadratureSpec,
    conjugate_branch: bool,
) -> Result<CorrelatorValue> {
    cfg.validate()?;
    spec.validate()?;
    check_inside(s, t, window)?;
    let kernel = ClassicalKernel::new(cfg, spec.eta)?;
    let free = free_quantum_plus(s - t, cfg, None)?;
    let plus = QuantumPlusKernel::new(cfg);
    let leg = move |tau: f64| plus.consistent(tau);
    let corr = correction_qq_quantum(s, t, cfg, window, &kernel, &leg);
    let corr2 = correction_qq_quantum(s, t, cfg, &doubled_window(window)?, &kernel, &leg);
    let to_printed = 1.0 / QUANTUM_SPECIES_CONSTANT;
    let value = free.value + to_printed * corr;
    let window_err = to_printed.abs() * (corr2 - corr).norm();
    let tol = WINDOW_REL_TOL * value.norm().max(free.value.norm());
    if window_err > tol {
        return Err(Error::WindowTooSmall {
            estimate: window_err,
            tol,
        });
    }
    let value = if conjugate_branch { value.conj() } else { value };
    Ok(CorrelatorValue {
        value,
        method: Method::Residue,
        accuracy_estimate: free.accuracy_estimate + window_err,
    })
}

/// Corrected bra-branch two-point function `<Q+(s) Q+(t)>` in printed
/// normalization.
pub fn corrected_quantum_plus(
    s: f64,
    t: f64,
    cfg: &OscillatorConfig,
    window: &TimeGrid,
    spec: &QuadratureSpec,
) -> Result<CorrelatorValue> {
    corrected_quantum(s, t, cfg, window, spec, false)
}

/// Corrected ket-branch two-point function, adopted as the conjugate of the
/// bra one (a construction choice validated against the lattice oracle, not
/// a printed formula).
pub fn corrected_quantum_minus(
    s: f64,
    t: f64,
    cfg: &OscillatorConfig,
    window: &TimeGrid,
    spec: &QuadratureSpec,
) -> Result<CorrelatorValue> {
    corrected_quantum(s, t, cfg, window, spec, true)
}

/// Which quantum branch an interaction vertex attaches to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// The interaction vertex operator `-a (+-i + (d^2 + wc^2)/D2)` acting on
/// the classical line: a scalar multiplier plus a second-derivative part.
#[derive(Clone, Copy, Debug)]
pub struct VertexFactor {
    /// `-a (+-i) - a wc^2 / D2`
    pub scalar: Complex64,
    /// `-a / D2`, multiplying the second derivative of the operand.
    pub second_derivative_coeff: f64,
}

pub fn vertex_factor(branch: Branch, cfg: &OscillatorConfig) -> VertexFactor {
    let sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    VertexFactor {
        scalar: Complex64::new(
            -cfg.alpha * cfg.omega_c * cfg.omega_c / cfg.d2,
            -sign * cfg.alpha,
        ),
        second_derivative_coeff: -cfg.alpha / cfg.d2,
    }
}

impl VertexFactor {
    /// Apply the vertex to a sampled path, composing the shared
    /// second-derivative stencil.
    pub fn apply(&self, p: &Path) -> Result<Vec<Complex64>> {
        let dd = second_derivative(p)?;
        Ok((0..p.grid().n())
            .map(|k| self.scalar * p.get(k) + self.second_derivative_coeff * dd.get(k))
            .collect())
    }
}
