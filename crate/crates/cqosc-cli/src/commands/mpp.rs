use cqosc::model::{BoundaryConditions, ClassicalBc, MppCoefficients, QuantumBc};
use cqosc::mpp::{eom_residual, mpp_first, mpp_zeroth, solve_regime, Regime};

use crate::commands::{create_out_dir, writer};
use crate::config::{load, Keys};
use crate::{CliError, RunArgs};

const KEYS: &[&str] = &[
    "regime",
    "classical_bc",
    "q_i",
    "qdot_i",
    "qddot_i",
    "q_f",
    "a1",
    "a2",
    "b1",
    "b2",
    "qp_i",
    "qp_f",
    "qm_i",
    "qm_f",
];

pub fn parse_regime(raw: &str) -> Result<Regime, CliError> {
    match raw {
        "weak_coupling" => Ok(Regime::WeakCouplingLargeD2),
        "heavy_classical" => Ok(Regime::HeavyClassical),
        "heavy_quantum" => Ok(Regime::HeavyQuantum),
        other => Err(CliError::config(format!(
            "regime must be weak_coupling | heavy_classical | heavy_quantum, got {other:?}"
        ))),
    }
}

pub fn parse_boundary(keys: &Keys) -> Result<BoundaryConditions, CliError> {
    let quantum = QuantumBc {
        plus_i: keys.f64_or("qp_i", 0.0)?,
        plus_f: keys.f64_or("qp_f", 0.0)?,
        minus_i: keys.f64_or("qm_i", 0.0)?,
        minus_f: keys.f64_or("qm_f", 0.0)?,
    };
    let classical = match keys.string_or("classical_bc", "endpoint").as_str() {
        "endpoint" => ClassicalBc::Endpoint {
            q_i: keys.f64_or("q_i", 0.0)?,
            qdot_i: keys.f64_or("qdot_i", 0.0)?,
            qddot_i: keys.f64_or("qddot_i", 0.0)?,
            q_f: keys.f64_or("q_f", 1.0)?,
        },
        "coefficients" => ClassicalBc::Coefficients(MppCoefficients {
            a1: keys.f64_or("a1", 0.0)?,
            a2: keys.f64_or("a2", 0.0)?,
            b1: keys.f64_or("b1", 0.0)?,
            b2: keys.f64_or("b2", 0.0)?,
        }),
        other => {
            return Err(CliError::config(format!(
                "classical_bc must be endpoint | coefficients, got {other:?}"
            )))
        }
    };
    Ok(BoundaryConditions { quantum, classical })
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let (raw, global) = load(&args.config, args.seed)?;
    let keys = crate::config::section(&raw, "mpp")?;
    keys.check_known(KEYS)?;
    let regime = parse_regime(&keys.string_or("regime", "weak_coupling"))?;
    let bc = parse_boundary(&keys)?;

    let cfg = &global.oscillator;
    let grid = global.grid;
    let solution = match regime {
        Regime::HeavyClassical => mpp_zeroth(&bc, cfg, grid)?,
        Regime::WeakCouplingLargeD2 | Regime::HeavyQuantum => mpp_first(&bc, cfg, grid)?,
    };
    let paths = solve_regime(regime, &bc, cfg, grid)?;
    let residual = eom_residual(&paths.q, &bc, cfg)?;

    create_out_dir(&args.out)?;
    cqosc::io::write_path_csv(&mut writer(&args.out, "q.csv")?, &paths.q)?;
    cqosc::io::write_path_csv(&mut writer(&args.out, "q_plus.csv")?, &paths.q_plus)?;
    cqosc::io::write_path_csv(&mut writer(&args.out, "q_minus.csv")?, &paths.q_minus)?;
    cqosc::io::write_path_csv(&mut writer(&args.out, "residual.csv")?, &residual)?;

    let mut meta = solution.to_json("q.csv");
    meta["regime"] = serde_json::json!(format!("{regime:?}"));
    crate::manifest::write(
        &args.out,
        "mpp",
        &raw,
        global.seed,
        &["q.csv", "q_plus.csv", "q_minus.csv", "residual.csv"],
        meta,
    )
}
