use num_complex::Complex64;

use cqosc::checks::{
    corrected_vs_lattice, free_propagator_check, perturbative_sweep, CorrectedCheckParams,
    FreeCheckParams, SweepParams,
};
use cqosc::lattice::{perturbative_vs_exact, Species};
use cqosc::model::{ActionConvention, OscillatorConfig, TimeGrid};

use crate::commands::create_out_dir;
use crate::config::load;
use crate::manifest::jnum;
use crate::{CliError, RunArgs};

const KEYS: &[&str] = &[
    "free_alpha",
    "free_d2",
    "free_omega",
    "quantum_span",
    "quantum_dt",
    "classical_span",
    "classical_dt",
    "eta",
    "quantum_tau_step",
    "classical_tau_step",
    "n_tau",
    "sweep_span",
    "sweep_n",
    "sweep_eta",
    "sweep_alphas",
    "sweep_node_a",
    "sweep_node_b",
    "corrected_checks",
];

/// Tolerances of the report, from the acceptance gates.
const TOL_FREE_REL: f64 = 1e-2;
const SLOPE_LO: f64 = 3.5;
const SLOPE_HI: f64 = 4.5;
const TOL_CORRECTED: f64 = 1e-2;
const TOL_ALPHA_ZERO: f64 = 1e-6;

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let (raw, global) = load(&args.config, args.seed)?;
    let keys = crate::config::section(&raw, "lattice_check")?;
    keys.check_known(KEYS)?;
    // The free comparisons run at pinned validation parameters (window
    // sizes are matched to the propagator decay lengths these produce);
    // overriding them may legitimately push the check out of tolerance.
    let cfg = OscillatorConfig::new(
        keys.f64_or("free_omega", 1.0)?,
        keys.f64_or("free_omega", 1.0)?,
        keys.f64_or("free_alpha", 0.2)?,
        keys.f64_or("free_d2", 5.0)?,
        ActionConvention::Saturated,
    )?;
    let eta = keys.f64_or("eta", 0.02)?;
    let n_tau = keys.usize_or("n_tau", 25)?;

    let mut passes: Vec<(String, bool, String)> = Vec::new();
    let mut free_reports = Vec::new();

    // Free-propagator equivalence for all three species.
    for (species, span_key, dt_key, step_key, span_def, dt_def, step_def) in [
        (
            Species::QuantumPlus,
            "quantum_span",
            "quantum_dt",
            "quantum_tau_step",
            5200.0,
            0.04,
            10usize,
        ),
        (
            Species::QuantumMinus,
            "quantum_span",
            "quantum_dt",
            "quantum_tau_step",
            5200.0,
            0.04,
            10,
        ),
        (
            Species::Classical,
            "classical_span",
            "classical_dt",
            "classical_tau_step",
            240.0,
            0.0125,
            32,
        ),
    ] {
        let report = free_propagator_check(
            &cfg,
            &FreeCheckParams {
                species,
                span: keys.f64_or(span_key, span_def)?,
                dt: keys.f64_or(dt_key, dt_def)?,
                eta,
                tau_step_nodes: keys.usize_or(step_key, step_def)?,
                n_tau,
            },
        )?;
        let ok = report.max_rel_err < TOL_FREE_REL;
        passes.push((
            format!("free_propagator_{}", report.species_label),
            ok,
            format!("max_rel_err {:.3e} < {TOL_FREE_REL:.0e}", report.max_rel_err),
        ));
        free_reports.push(report);
    }

    // alpha = 0: the interacting and free systems coincide, so the
    // perturbative comparison measures pure plumbing.
    {
        let zero_cfg = OscillatorConfig::new(
            cfg.omega_c,
            cfg.omega_q,
            0.0,
            cfg.d2,
            ActionConvention::Saturated,
        )?;
        let grid = TimeGrid::new(0.0, 24.0, 481)?;
        let rel = perturbative_vs_exact(
            &zero_cfg,
            grid,
            1e-3,
            (Species::Classical, 160),
            (Species::Classical, 320),
            Complex64::ZERO,
        )?;
        passes.push((
            "free_parts_alpha_zero".into(),
            rel < TOL_ALPHA_ZERO,
            format!("relative error {rel:.3e} < {TOL_ALPHA_ZERO:.0e}"),
        ));
    }

    // Coupling-order sweep: remainder after the second-order subtraction
    // scales as the fourth power.
    let sweep = perturbative_sweep(
        &OscillatorConfig::new(1.0, 2.0, 0.1, 10.0, ActionConvention::Saturated)?,
        &SweepParams {
            alphas: keys.f64_list_or("sweep_alphas", &[0.2, 0.1, 0.05])?,
            span: keys.f64_or("sweep_span", 60.0)?,
            n: keys.usize_or("sweep_n", 1201)?,
            eta: keys.f64_or("sweep_eta", 1e-3)?,
            node_a: keys.usize_or("sweep_node_a", 500)?,
            node_b: keys.usize_or("sweep_node_b", 700)?,
        },
    )?;
    for (label, slope) in [("qq", sweep.qq_slope), ("quantum_plus", sweep.quantum_slope)] {
        passes.push((
            format!("order_sweep_slope_{label}"),
            (SLOPE_LO..=SLOPE_HI).contains(&slope),
            format!("log-log slope {slope:.3} in [{SLOPE_LO}, {SLOPE_HI}]"),
        ));
    }

    // Corrected correlators against exact interacting lattice moments, at
    // pinned validation points where the window is controllable.
    let mut corrected_report = serde_json::json!({});
    if keys.string_or("corrected_checks", "true") == "true" {
        let qq_cfg = OscillatorConfig::new(1.0, 2.0, 0.05, 10.0, ActionConvention::Saturated)?;
        let qq_rel = corrected_vs_lattice(
            &qq_cfg,
            Species::Classical,
            &CorrectedCheckParams {
                span: 120.0,
                dt: 0.05,
                eta: 0.05,
                node_s: 1200,
                node_t: 1226,
                p_max: 60.0,
                n_points: 128,
            },
        )?;
        passes.push((
            "corrected_qq_vs_lattice".into(),
            qq_rel < TOL_CORRECTED,
            format!("relative error {qq_rel:.3e} < {TOL_CORRECTED:.0e}"),
        ));
        let quantum_cfg =
            OscillatorConfig::new(1.0, 0.5, 0.05, 0.05, ActionConvention::Saturated)?;
        let quantum_rel = corrected_vs_lattice(
            &quantum_cfg,
            Species::QuantumPlus,
            &CorrectedCheckParams {
                span: 700.0,
                dt: 0.1,
                eta: 5.0,
                node_s: 3500,
                node_t: 3520,
                p_max: 60.0,
                n_points: 128,
            },
        )?;
        passes.push((
            "corrected_quantum_plus_vs_lattice".into(),
            quantum_rel < TOL_CORRECTED,
            format!("relative error {quantum_rel:.3e} < {TOL_CORRECTED:.0e}"),
        ));
        corrected_report = serde_json::json!({
            "qq_rel_error": jnum(qq_rel),
            "quantum_plus_rel_error": jnum(quantum_rel),
        });
    }

    let all_ok = passes.iter().all(|(_, ok, _)| *ok);
    let report = serde_json::json!({
        "pass": all_ok,
        "checks": passes
            .iter()
            .map(|(name, ok, detail)| serde_json::json!({
                "name": name,
                "pass": ok,
                "detail": detail,
            }))
            .collect::<Vec<_>>(),
        "free_propagators": free_reports,
        "order_sweep": sweep,
        "corrected": corrected_report,
    });

    create_out_dir(&args.out)?;
    let body = serde_json::to_string_pretty(&report).map_err(|e| CliError::io(e.to_string()))?;
    std::fs::write(args.out.join("report.json"), body + "\n")?;
    crate::manifest::write(
        &args.out,
        "lattice-check",
        &raw,
        global.seed,
        &["report.json"],
        serde_json::json!({ "pass": all_ok }),
    )?;

    if all_ok {
        Ok(())
    } else {
        let failed: Vec<String> = passes
            .iter()
            .filter(|(_, ok, _)| !ok)
            .map(|(name, _, detail)| format!("{name}: {detail}"))
            .collect();
        Err(CliError::tolerance(failed.join("; ")))
    }
}
