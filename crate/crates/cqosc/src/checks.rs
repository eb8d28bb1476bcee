//! Oracle-equivalence suites: lattice moments against closed-form
//! propagators, and the perturbative order check against exact interacting
//! moments. Shared by the CLI report command and the acceptance tests.

use num_complex::Complex64;
use serde::Serialize;

use crate::correlators::kernels::{
    ClassicalKernel, QuantumMinusKernel, QuantumPlusKernel, CLASSICAL_SPECIES_CONSTANT,
    QUANTUM_SPECIES_CONSTANT,
};
use crate::error::{Error, Result};
use crate::lattice::{assemble, second_order_correction, Site, Species};
use crate::model::{OscillatorConfig, TimeGrid};

/// Parameters of one free-propagator comparison run.
#[derive(Clone, Copy, Debug)]
pub struct FreeCheckParams {
    pub species: Species,
    /// Window length; the source sits at the center node, so boundary
    /// reflections are suppressed like exp(-2 gamma span/2) with the
    /// species' pole decay rate gamma.
    pub span: f64,
    pub dt: f64,
    /// Classical-block regularizer, matched between lattice and closed form.
    pub eta: f64,
    /// Lag step in grid nodes between sampled moments.
    pub tau_step_nodes: usize,
    pub n_tau: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeCheckReport {
    pub species_label: &'static str,
    pub n_nodes: usize,
    pub span: f64,
    pub dt: f64,
    pub eta: f64,
    /// Least-squares constant `c` with lattice = c x printed integral.
    pub fitted_constant: [f64; 2],
    /// The Fourier-convention constant the fit should land on.
    pub expected_constant: f64,
    /// Max over the lag grid of |lattice - c * printed| / |c * printed|.
    pub max_rel_err: f64,
}

/// Compare interior lattice moments of a free system against the printed
/// closed-form propagator of one species, absorbing a single fitted
/// constant.
pub fn free_propagator_check(
    cfg: &OscillatorConfig,
    params: &FreeCheckParams,
) -> Result<FreeCheckReport> {
    let n = (params.span / params.dt).round() as usize + 1;
    let grid = TimeGrid::new(0.0, params.span, n)?;
    let sys = assemble(cfg, grid, false, params.eta)?;
    let center = n / 2;
    if center + params.tau_step_nodes * params.n_tau >= n {
        return Err(Error::InvalidConfig {
            reason: "lag scan runs past the window".into(),
        });
    }

    let mut rhs = vec![Complex64::ZERO; sys.dim()];
    rhs[sys.global_index((params.species, center))] = Complex64::ONE;
    let sol = sys.solve(&rhs)?;

    let theory: Box<dyn Fn(f64) -> Complex64> = match params.species {
        Species::Classical => {
            let k = ClassicalKernel::new(cfg, params.eta)?;
            Box::new(move |tau| k.printed(tau))
        }
        Species::QuantumPlus => {
            let k = QuantumPlusKernel::new(cfg);
            Box::new(move |tau| k.printed(tau))
        }
        Species::QuantumMinus => {
            let k = QuantumMinusKernel::new(cfg);
            Box::new(move |tau| k.printed(tau))
        }
    };

    let mut lattice_vals = Vec::with_capacity(params.n_tau + 1);
    let mut theory_vals = Vec::with_capacity(params.n_tau + 1);
    for j in 0..=params.n_tau {
        let node = center + j * params.tau_step_nodes;
        let tau = (j * params.tau_step_nodes) as f64 * grid.dt();
        lattice_vals.push(sol[sys.global_index((params.species, node))]);
        theory_vals.push(theory(tau));
    }

    // One global constant per species: least-squares fit of
    // lattice = c * theory.
    let mut num = Complex64::ZERO;
    let mut den = 0.0;
    for (l, t) in lattice_vals.iter().zip(&theory_vals) {
        num += l * t.conj();
        den += t.norm_sqr();
    }
    let c = num / den;
    let mut max_rel = 0.0_f64;
    for (l, t) in lattice_vals.iter().zip(&theory_vals) {
        let reference = c * t;
        max_rel = max_rel.max((l - reference).norm() / reference.norm());
    }

    let expected = match params.species {
        Species::Classical => CLASSICAL_SPECIES_CONSTANT,
        _ => QUANTUM_SPECIES_CONSTANT,
    };
    Ok(FreeCheckReport {
        species_label: params.species.label(),
        n_nodes: n,
        span: params.span,
        dt: params.dt,
        eta: params.eta,
        fitted_constant: [c.re, c.im],
        expected_constant: expected,
        max_rel_err: max_rel,
    })
}

/// Parameters of the coupling-order sweep.
#[derive(Clone, Debug)]
pub struct SweepParams {
    pub alphas: Vec<f64>,
    pub span: f64,
    pub n: usize,
    pub eta: f64,
    pub node_a: usize,
    pub node_b: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub alphas: Vec<f64>,
    pub qq_residuals: Vec<f64>,
    pub qq_rel_errors: Vec<f64>,
    pub qq_slope: f64,
    pub quantum_residuals: Vec<f64>,
    pub quantum_rel_errors: Vec<f64>,
    pub quantum_slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let xb = lx.iter().sum::<f64>() / m;
    let yb = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|v| (v - xb) * (v - xb)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(u, v)| (u - xb) * (v - yb)).sum();
    sxy / sxx
}

/// Subtract the second-order lattice correction from exact interacting
/// moments across a coupling sweep; the remainder must scale as the fourth
/// power of the coupling for both the classical and bra-branch pairs.
pub fn perturbative_sweep(base: &OscillatorConfig, params: &SweepParams) -> Result<SweepReport> {
    let grid = TimeGrid::new(0.0, params.span, params.n)?;
    let mut qq_res = Vec::new();
    let mut qq_rel = Vec::new();
    let mut quantum_res = Vec::new();
    let mut quantum_rel = Vec::new();
    for &alpha in &params.alphas {
        let cfg = OscillatorConfig::new(
            base.omega_c,
            base.omega_q,
            alpha,
            base.d2,
            base.convention,
        )?;
        let free = assemble(&cfg, grid, false, params.eta)?;
        let full = assemble(&cfg, grid, true, params.eta)?;
        for (species, res, rel) in [
            (Species::Classical, &mut qq_res, &mut qq_rel),
            (Species::QuantumPlus, &mut quantum_res, &mut quantum_rel),
        ] {
            let a: Site = (species, params.node_a);
            let b: Site = (species, params.node_b);
            let m_full = full.moment(a, b)?;
            let m_free = free.moment(a, b)?;
            let order2 = second_order_correction(&free, &full, a, b)?;
            let r = (m_full - m_free - order2).norm();
            res.push(r);
            rel.push(r / m_free.norm());
        }
    }
    Ok(SweepReport {
        alphas: params.alphas.clone(),
        qq_slope: loglog_slope(&params.alphas, &qq_res),
        quantum_slope: loglog_slope(&params.alphas, &quantum_res),
        qq_residuals: qq_res,
        qq_rel_errors: qq_rel,
        quantum_residuals: quantum_res,
        quantum_rel_errors: quantum_rel,
    })
}

/// Lattice-vs-continuum check of a corrected correlator: relative error of
/// the printed-normalization corrected value (converted to moment
/// normalization) against the exact interacting lattice moment.
pub struct CorrectedCheckParams {
    pub span: f64,
    pub dt: f64,
    pub eta: f64,
    pub node_s: usize,
    pub node_t: usize,
    pub p_max: f64,
    pub n_points: usize,
}

pub fn corrected_vs_lattice(
    cfg: &OscillatorConfig,
    species: Species,
    params: &CorrectedCheckParams,
) -> Result<f64> {
    let n = (params.span / params.dt).round() as usize + 1;
    let grid = TimeGrid::new(0.0, params.span, n)?;
    let full = assemble(cfg, grid, true, params.eta)?;
    let m_latt = full.moment((species, params.node_s), (species, params.node_t))?;

    let s = grid.node(params.node_s);
    let t = grid.node(params.node_t);
    let spec = crate::correlators::QuadratureSpec {
        p_max: params.p_max,
        n_points: params.n_points,
        eta: params.eta,
    };
    let (printed, constant) = match species {
        Species::Classical => (
            crate::correlators::corrected_qq(s, t, cfg, &grid, &spec)?,
            CLASSICAL_SPECIES_CONSTANT,
        ),
        Species::QuantumPlus => (
            crate::correlators::corrected_quantum_plus(s, t, cfg, &grid, &spec)?,
            QUANTUM_SPECIES_CONSTANT,
        ),
        Species::QuantumMinus => (
            crate::correlators::corrected_quantum_minus(s, t, cfg, &grid, &spec)?,
            QUANTUM_SPECIES_CONSTANT,
        ),
    };
    let predicted = constant * printed.value;
    Ok((m_latt - predicted).norm() / m_latt.norm())
}
