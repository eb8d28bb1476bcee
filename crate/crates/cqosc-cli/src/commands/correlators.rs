use std::io::Write;

use cqosc::correlators::{
    corrected_qq, corrected_quantum_minus, corrected_quantum_plus, free_classical,
    free_quantum_minus, free_quantum_plus, kernels, CorrelatorValue, Method, QuadratureSpec,
};
use cqosc::io::{fmt_f64, write_scan_csv, ScanRow};
use cqosc::parallel;

use crate::commands::{create_out_dir, writer};
use crate::config::load;
use crate::manifest::jnum;
use crate::{CliError, RunArgs};

const KEYS: &[&str] = &[
    "mode",
    "method",
    "tau_max",
    "n_tau",
    "p_max",
    "n_points",
    "eta",
    "s_min",
    "s_max",
    "n_s",
    "t_min",
    "t_max",
    "n_t",
];

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| lo + k as f64 * step).collect()
}

/// Grid on `[-max, max]` whose mirrored nodes are exact negations, so
/// evenness of emitted scans is checkable bit-for-bit.
fn symmetric_linspace(max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let step = 2.0 * max / (n - 1) as f64;
    let center = (n - 1) as f64 / 2.0;
    (0..n).map(|k| (k as f64 - center) * step).collect()
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let (raw, global) = load(&args.config, args.seed)?;
    let keys = crate::config::section(&raw, "correlators")?;
    keys.check_known(KEYS)?;
    let cfg = global.oscillator;
    let spec = QuadratureSpec {
        p_max: keys.f64_or("p_max", 80.0)?,
        n_points: keys.usize_or("n_points", 256)?,
        eta: keys.f64_or("eta", 1e-4)?,
    };
    let mode = keys.string_or("mode", "free");
    create_out_dir(&args.out)?;

    match mode.as_str() {
        "free" => {
            let tau_max = keys.f64_or("tau_max", 10.0)?;
            let n_tau = keys.usize_or("n_tau", 101)?;
            let method = match keys.string_or("method", "residue").as_str() {
                "residue" => Method::Residue,
                "quadrature" => Method::Quadrature,
                other => {
                    return Err(CliError::config(format!(
                        "method must be residue | quadrature, got {other:?}"
                    )))
                }
            };
            // Symmetric lag grid so evenness and conjugation are visible in
            // the emitted files.
            let taus = symmetric_linspace(tau_max, n_tau);
            let scan = |f: &(dyn Fn(f64) -> cqosc::Result<CorrelatorValue> + Sync)| -> cqosc::Result<Vec<ScanRow>> {
                parallel::par_map(taus.len(), |k| {
                    f(taus[k]).map(|v| ScanRow {
                        tau: taus[k],
                        value: v.value,
                        method: v.method,
                        accuracy: v.accuracy_estimate,
                    })
                })
                .into_iter()
                .collect()
            };
            let quad = matches!(method, Method::Quadrature);
            let qspec = if quad { Some(&spec) } else { None };
            let plus = scan(&|tau| free_quantum_plus(tau, &cfg, qspec))?;
            let minus = scan(&|tau| free_quantum_minus(tau, &cfg, qspec))?;
            let classical = scan(&|tau| free_classical(tau, &cfg, &spec, method))?;
            write_scan_csv(&mut writer(&args.out, "free_quantum_plus.csv")?, &plus)?;
            write_scan_csv(&mut writer(&args.out, "free_quantum_minus.csv")?, &minus)?;
            write_scan_csv(&mut writer(&args.out, "free_classical.csv")?, &classical)?;
            crate::manifest::write(
                &args.out,
                "correlators",
                &raw,
                global.seed,
                &[
                    "free_quantum_plus.csv",
                    "free_quantum_minus.csv",
                    "free_classical.csv",
                ],
                serde_json::json!({
                    "mode": "free",
                    "eta": jnum(spec.eta),
                    "p_max": jnum(spec.p_max),
                    "n_points": spec.n_points,
                }),
            )
        }
        "corrected" => {
            let window = global.grid;
            let s_vals = linspace(
                keys.f64_or("s_min", window.t_i() + 0.25 * window.span())?,
                keys.f64_or("s_max", window.t_i() + 0.75 * window.span())?,
                keys.usize_or("n_s", 5)?,
            );
            let t_vals = linspace(
                keys.f64_or("t_min", window.t_i() + 0.3 * window.span())?,
                keys.f64_or("t_max", window.t_i() + 0.7 * window.span())?,
                keys.usize_or("n_t", 3)?,
            );
            let mut pairs = Vec::new();
            for &s in &s_vals {
                for &t in &t_vals {
                    pairs.push((s, t));
                }
            }
            type CorrectedFn = dyn Fn(
                f64,
                f64,
                &cqosc::model::OscillatorConfig,
                &cqosc::model::TimeGrid,
                &QuadratureSpec,
            ) -> cqosc::Result<CorrelatorValue>;
            let mut files = Vec::new();
            for (name, f) in [
                ("corrected_qq.csv", &corrected_qq as &CorrectedFn),
                ("corrected_quantum_plus.csv", &corrected_quantum_plus as _),
                ("corrected_quantum_minus.csv", &corrected_quantum_minus as _),
            ] {
                let mut out = writer(&args.out, name)?;
                writeln!(out, "s,t,re,im,method,accuracy")?;
                for &(s, t) in &pairs {
                    let v = f(s, t, &cfg, &window, &spec)?;
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        fmt_f64(s),
                        fmt_f64(t),
                        fmt_f64(v.value.re),
                        fmt_f64(v.value.im),
                        v.method.label(),
                        fmt_f64(v.accuracy_estimate)
                    )?;
                }
                files.push(name);
            }
            let sidecar = serde_json::json!({
                "window": { "t_i": jnum(window.t_i()), "t_f": jnum(window.t_f()), "n": window.n() },
                "alpha": jnum(cfg.alpha),
                "eta": jnum(spec.eta),
                "species_constants": {
                    "classical": jnum(kernels::CLASSICAL_SPECIES_CONSTANT),
                    "quantum": jnum(kernels::QUANTUM_SPECIES_CONSTANT),
                },
            });
            let body = serde_json::to_string_pretty(&sidecar)
                .map_err(|e| CliError::io(e.to_string()))?;
            std::fs::write(args.out.join("corrected_meta.json"), body + "\n")?;
            files.push("corrected_meta.json");
            crate::manifest::write(
                &args.out,
                "correlators",
                &raw,
                global.seed,
                &files,
                serde_json::json!({ "mode": "corrected" }),
            )
        }
        other => Err(CliError::config(format!(
            "mode must be free | corrected, got {other:?}"
        ))),
    }
}
