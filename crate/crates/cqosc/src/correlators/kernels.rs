//! Closed-form propagator kernels from the pole structure of the momentum
//! integrals.
//!
//! Quantum branches: `integral dp e^{-ip tau} / (p^2 - wt^2)` with the
//! complex frequency `wt^2 = wq^2 -+ i a^2/(4 D2)`. The pole pair `+-wt` of
//! a branch is complex but NOT mutually conjugate (both poles share the
//! same imaginary part of `wt^2`), unlike an ordinary `i epsilon` shift; at
//! weak coupling the shift nevertheless plays that role. On the principal
//! branch the bra frequency has `Im wt < 0`, so closing the contour picks
//! the decaying exponential:
//!
//! ```text
//! F'+(tau) = -(pi / wt+) exp(-i wt+ |tau|)
//! F'-(tau) = -(pi / wt-) exp(+i wt- |tau|),  wt- = sqrt(wq^2 + i a^2/4D2)
//! ```
//!
//! Classical propagator: `D2 integral dp e^{-ip tau} / ((p^2-wc^2)^2 + i eta)`
//! by partial fractions over `(x - r)(x + r)`, `x = p^2 - wc^2`,
//! `r = sqrt(eta) e^{-i pi/4}`; each factor is a shifted simple propagator
//! with poles `m1 = sqrt(wc^2 + r)` (lower half plane) and `m2 =
//! sqrt(wc^2 - r)` (upper half plane):
//!
//! ```text
//! A^-1(tau) = -(i pi D2 / 2r) [ exp(-i m1 |tau|)/m1 + exp(+i m2 |tau|)/m2 ]
//! ```
//!
//! The printed integrals carry no `1/(2 pi)` Fourier factor; the Gaussian
//! moments of the action differ from them by one constant per species
//! ([`CLASSICAL_SPECIES_CONSTANT`], [`QUANTUM_SPECIES_CONSTANT`]). The
//! `consistent` accessors return the moment normalization (what the lattice
//! converges to), the `printed` accessors the bare integrals.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::OscillatorConfig;

/// Lattice (Gaussian-moment) value = constant x printed integral, classical
/// sector: `+1/(2 pi)`.
pub const CLASSICAL_SPECIES_CONSTANT: f64 = 1.0 / std::f64::consts::TAU;

/// Lattice value = constant x printed integral, both quantum sectors:
/// `-1/(2 pi)`.
pub const QUANTUM_SPECIES_CONSTANT: f64 = -1.0 / std::f64::consts::TAU;

/// Reject regularizers within two decades of machine epsilon.
pub const ETA_UNDERFLOW_FLOOR: f64 = 100.0 * f64::EPSILON;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Bra-branch (`Q+`) closed form.
#[derive(Clone, Copy, Debug)]
pub struct QuantumPlusKernel {
    omega_tilde: Complex64,
}

impl QuantumPlusKernel {
    pub fn new(cfg: &OscillatorConfig) -> Self {
        let shift = cfg.alpha * cfg.alpha / (4.0 * cfg.d2);
        let omega_tilde =
            Complex64::new(cfg.omega_q * cfg.omega_q, -shift).sqrt();
        QuantumPlusKernel { omega_tilde }
    }

    pub fn omega_tilde(&self) -> Complex64 {
        self.omega_tilde
    }

    /// Printed integral `-i * (-i pi / wt) e^{-i wt |tau|}`.
    pub fn printed(&self, tau: f64) -> Complex64 {
        let w = self.omega_tilde;
        -std::f64::consts::PI / w * (-I * w * tau.abs()).exp()
    }

    /// Gaussian moment `<Q+ Q+> = e^{-i wt |tau|} / (2 wt)`.
    pub fn consistent(&self, tau: f64) -> Complex64 {
        let w = self.omega_tilde;
        (-I * w * tau.abs()).exp() / (2.0 * w)
    }
}

/// Ket-branch (`Q-`) closed form, derived independently of the bra branch
/// (pole `-wt-` in the lower half plane) so conjugation is a real test.
#[derive(Clone, Copy, Debug)]
pub struct QuantumMinusKernel {
    omega_tilde: Complex64,
}

impl QuantumMinusKernel {
    pub fn new(cfg: &OscillatorConfig) -> Self {
        let shift = cfg.alpha * cfg.alpha / (4.0 * cfg.d2);
        let omega_tilde =
            Complex64::new(cfg.omega_q * cfg.omega_q, shift).sqrt();
        QuantumMinusKernel { omega_tilde }
    }

    pub fn omega_tilde(&self) -> Complex64 {
        self.omega_tilde
    }

    /// Printed integral `+i * (+i pi / wt) e^{+i wt |tau|}`.
    pub fn printed(&self, tau: f64) -> Complex64 {
        let w = self.omega_tilde;
        -std::f64::consts::PI / w * (I * w * tau.abs()).exp()
    }

    /// Gaussian moment `<Q- Q-> = e^{+i wt |tau|} / (2 wt)`.
    pub fn consistent(&self, tau: f64) -> Complex64 {
        let w = self.omega_tilde;
        (I * w * tau.abs()).exp() / (2.0 * w)
    }
}

/// Regularized classical propagator in partial-fraction form, with analytic
/// derivatives. All derivative accessors refer to the `consistent`
/// normalization.
#[derive(Clone, Copy, Debug)]
pub struct ClassicalKernel {
    d2: f64,
    omega_c2: f64,
    eta: f64,
    m1: Complex64,
    m2: Complex64,
    /// `-i D2 / (4 r)`, the consistent-normalization prefactor.
    k: Complex64,
    r: Complex64,
}

impl ClassicalKernel {
    pub fn new(cfg: &OscillatorConfig, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("eta must be positive, got {eta}"),
            });
        }
        if eta < ETA_UNDERFLOW_FLOOR {
            return Err(Error::EtaUnderflow { eta });
        }
        let r = eta.sqrt() * Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
        let omega_c2 = cfg.omega_c * cfg.omega_c;
        let m1 = (Complex64::new(omega_c2, 0.0) + r).sqrt();
        let m2 = (Complex64::new(omega_c2, 0.0) - r).sqrt();
        Ok(ClassicalKernel {
            d2: cfg.d2,
            omega_c2,
            eta,
            m1,
            m2,
            k: -I * cfg.d2 / (4.0 * r),
            r,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    #[inline]
    fn modes(&self, tau: f64) -> (Complex64, Complex64) {
        let at = tau.abs();
        ((-I * self.m1 * at).exp(), (I * self.m2 * at).exp())
    }

    /// Gaussian moment `<q q>(tau)`; even in `tau`.
    pub fn consistent(&self, tau: f64) -> Complex64 {
        let (e1, e2) = self.modes(tau);
        self.k * (e1 / self.m1 + e2 / self.m2)
    }

    /// Printed integral `D2 int dp e^{-ip tau} / ((p^2-wc^2)^2 + i eta)`.
    pub fn printed(&self, tau: f64) -> Complex64 {
        std::f64::consts::TAU * self.consistent(tau)
    }

    /// Second derivative of the consistent kernel (the delta contributions
    /// of the two modes cancel, so this is a plain function).
    pub fn second_derivative(&self, tau: f64) -> Complex64 {
        let (e1, e2) = self.modes(tau);
        -self.k * (self.m1 * e1 + self.m2 * e2)
    }

    /// `(wc^2 + d^2/dtau^2)` applied to the consistent kernel.
    pub fn s_applied(&self, tau: f64) -> Complex64 {
        let (e1, e2) = self.modes(tau);
        self.k * self.r * (e2 / self.m2 - e1 / self.m1)
    }

    /// Smooth part of `(wc^2 + d^2/dtau^2)^2` applied to the consistent
    /// kernel; equals `-i eta` times the kernel by the defining equation
    /// `(S^2 + i eta) A = D2 delta`.
    pub fn ss_smooth(&self, tau: f64) -> Complex64 {
        let (e1, e2) = self.modes(tau);
        self.k * self.r * self.r * (e1 / self.m1 + e2 / self.m2)
    }

    /// Coefficient of `delta(tau)` in `(wc^2 + d^2/dtau^2)^2` applied to the
    /// consistent kernel.
    pub fn ss_delta_coefficient(&self) -> f64 {
        self.d2
    }

    pub fn omega_c2(&self) -> f64 {
        self.omega_c2
    }
}
