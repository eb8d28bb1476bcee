//! Domain types and action evaluation for the hybrid oscillator pair.
//!
//! A classical oscillator `q` (frequency `omega_c`) diffuses with strength
//! `d2` while a quantum oscillator, doubled into bra/ket branches `Q+`, `Q-`
//! (frequency `omega_q`), decoheres; the two are coupled linearly with
//! strength `alpha`. The weight of a joint trajectory is `exp(I)` with
//!
//! ```text
//! I = integral dt [ i (L(Q+) - L(Q-))                       (unitary phase)
//!                   - D0 a^2/2 (Q+ - Q-)^2                  (decoherence)
//!                   - 1/(2 D2) (q'' + wc^2 q + a/2 (Q+ + Q-))^2  (diffusion) ]
//! ```
//!
//! where `L(Q) = Q'^2/2 - wq^2 Q^2/2 - a q Q` and the trade-off is saturated,
//! `D0 = 1/(4 D2)`. Two algebraic conventions for the real part are kept side
//! by side (see [`ActionConvention`]); they agree except for a factor of two
//! on the `Q+^2 + Q-^2` suppression term, which is surfaced rather than
//! resolved.

mod action;
mod calculus;

pub use action::{decoherence_surface, decoherence_weight, evaluate_action, SurfacePoint};
pub use calculus::{
    cumulative_trapezoid, fourth_derivative, second_derivative, trapezoid, trapezoid_weights,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Algebraic form of the real (suppression) part of the action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionConvention {
    /// Separate decoherence term `-D0 a^2/2 (Q+ - Q-)^2` plus the full
    /// squared diffusion term with the quantum average inside the square.
    DecoherenceDiffusion,
    /// Expanded three-term form in which the `Q+ Q-` cross terms have been
    /// cancelled: `-(1/2 D2) [ (q''+wc^2 q)^2 + a (q''+wc^2 q)(Q+ + Q-) +
    /// a^2/4 (Q+^2 + Q-^2) ]`. This is the convention the correlator and
    /// lattice modules are built on.
    Saturated,
}

/// Physical parameters of the coupled pair. Masses are unit, hbar = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorConfig {
    /// Angular frequency of the classical oscillator.
    pub omega_c: f64,
    /// Angular frequency of the quantum oscillator.
    pub omega_q: f64,
    /// Linear coupling strength between the two.
    pub alpha: f64,
    /// Diffusion coefficient D2 of the classical momentum (positive).
    pub d2: f64,
    pub convention: ActionConvention,
}

impl OscillatorConfig {
    pub fn new(
        omega_c: f64,
        omega_q: f64,
        alpha: f64,
        d2: f64,
        convention: ActionConvention,
    ) -> Result<Self> {
        let cfg = OscillatorConfig {
            omega_c,
            omega_q,
            alpha,
            d2,
            convention,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.omega_c, "omega_c"),
            (self.omega_q, "omega_q"),
            (self.alpha, "alpha"),
            (self.d2, "d2"),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig {
                    reason: format!("{name} is not finite"),
                });
            }
        }
        if self.d2 <= 0.0 {
            return Err(Error::InvalidConfig {
                reason: format!("d2 must be positive, got {}", self.d2),
            });
        }
        if self.omega_c < 0.0 || self.omega_q < 0.0 {
            return Err(Error::InvalidConfig {
                reason: "frequencies must be non-negative".into(),
            });
        }
        Ok(())
    }

    /// Decoherence coefficient from the saturated trade-off `4 D0 = 1/D2`.
    /// Always derived, never stored.
    pub fn d0(&self) -> f64 {
        1.0 / (4.0 * self.d2)
    }
}

/// Uniform time lattice on `[t_i, t_f]` with `n` nodes; node `k` sits at
/// `t_i + k dt` with `dt = (t_f - t_i)/(n - 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_i: f64,
    t_f: f64,
    n: usize,
}

impl TimeGrid {
    pub const MIN_NODES: usize = 4;

    pub fn new(t_i: f64, t_f: f64, n: usize) -> Result<Self> {
        if !(t_i.is_finite() && t_f.is_finite()) {
            return Err(Error::NonFinite { what: "time grid" });
        }
        if n < Self::MIN_NODES {
            return Err(Error::GridTooSmall {
                n,
                min: Self::MIN_NODES,
            });
        }
        if t_f <= t_i {
            return Err(Error::InvalidConfig {
                reason: format!("t_f = {t_f} must exceed t_i = {t_i}"),
            });
        }
        Ok(TimeGrid { t_i, t_f, n })
    }

    pub fn t_i(&self) -> f64 {
        self.t_i
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        (self.t_f - self.t_i) / (self.n - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.t_f - self.t_i
    }

    pub fn node(&self, k: usize) -> f64 {
        self.t_i + k as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }
}

/// Real-valued trajectory sampled on a [`TimeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl Path {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "path values" });
        }
        Ok(Path { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Path {
            grid,
            values: vec![0.0; grid.n()],
        }
    }

    /// Sample a closure over the grid nodes.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.n()).map(|k| f(grid.node(k))).collect();
        Path::new(grid, values)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }
}

/// The trajectory triple (classical, bra branch, ket branch), all on one grid.
#[derive(Clone, Debug)]
pub struct HybridPaths {
    pub q: Path,
    pub q_plus: Path,
    pub q_minus: Path,
}

impl HybridPaths {
    pub fn new(q: Path, q_plus: Path, q_minus: Path) -> Result<Self> {
        if q.grid() != q_plus.grid() || q.grid() != q_minus.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(HybridPaths { q, q_plus, q_minus })
    }

    pub fn grid(&self) -> TimeGrid {
        self.q.grid()
    }
}

/// Complex action value split as `I = log_magnitude + i * phase`, so the
/// trajectory weight is `exp(log_magnitude) * exp(i * phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexWeight {
    pub log_magnitude: f64,
    pub phase: f64,
}

/// Quantum endpoint data for the bra and ket branches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumBc {
    pub plus_i: f64,
    pub plus_f: f64,
    pub minus_i: f64,
    pub minus_f: f64,
}

impl QuantumBc {
    pub fn qbar_i(&self) -> f64 {
        0.5 * (self.plus_i + self.minus_i)
    }

    pub fn qbar_f(&self) -> f64 {
        0.5 * (self.plus_f + self.minus_f)
    }

    pub fn delta_i(&self) -> f64 {
        self.plus_i - self.minus_i
    }

    pub fn delta_f(&self) -> f64 {
        self.plus_f - self.minus_f
    }
}

/// Coefficients of the zeroth-order most probable path
/// `q0(t) = a1 sin(wc t) + a2 cos(wc t) + t (b1 sin(wc t) + b2 cos(wc t))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MppCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

/// Classical boundary data: either endpoint values/derivatives or the
/// coefficient set directly. Exactly one variant is active.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ClassicalBc {
    Endpoint {
        q_i: f64,
        qdot_i: f64,
        qddot_i: f64,
        q_f: f64,
    },
    Coefficients(MppCoefficients),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub quantum: QuantumBc,
    pub classical: ClassicalBc,
}
