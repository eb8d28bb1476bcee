use std::io::Write;

use cqosc::io::fmt_f64;
use cqosc::lattice::langevin::{ensemble_stats, langevin_sample_with_limit};

use crate::commands::{create_out_dir, writer};
use crate::config::load;
use crate::manifest::jnum;
use crate::{CliError, RunArgs};

const KEYS: &[&str] = &[
    "q0",
    "p0",
    "n_traj",
    "n_sample",
    "stability_limit",
    "forcing_csv",
];

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let (raw, global) = load(&args.config, args.seed)?;
    let keys = crate::config::section(&raw, "langevin")?;
    keys.check_known(KEYS)?;
    let cfg = global.oscillator;
    let grid = global.grid;
    let q0 = keys.f64_or("q0", 0.0)?;
    let p0 = keys.f64_or("p0", 0.0)?;
    let n_traj = keys.usize_or("n_traj", 10_000)?;
    let n_sample = keys.usize_or("n_sample", 10)?.min(n_traj);
    let limit = keys.f64_or("stability_limit", 0.1)?;
    let forcing = match keys.get("forcing_csv") {
        Some(path) => {
            let file = std::fs::File::open(path)
                .map_err(|e| CliError::config(format!("cannot open forcing_csv {path:?}: {e}")))?;
            Some(cqosc::io::read_path_csv(&mut std::io::BufReader::new(file))?)
        }
        None => None,
    };

    let stats = ensemble_stats(
        &cfg,
        grid,
        q0,
        p0,
        forcing.as_ref(),
        global.seed,
        n_traj,
        &[],
        limit,
    )?;
    let sample = langevin_sample_with_limit(
        &cfg,
        grid,
        q0,
        p0,
        forcing.as_ref(),
        global.seed,
        n_sample,
        limit,
    )?;

    create_out_dir(&args.out)?;
    cqosc::io::write_ensemble_csv(&mut writer(&args.out, "trajectories.csv")?, &sample)?;
    {
        let mut out = writer(&args.out, "energy.csv")?;
        writeln!(out, "t,mean_energy,mean_q,var_q")?;
        for k in 0..grid.n() {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(grid.node(k)),
                fmt_f64(stats.mean_energy[k]),
                fmt_f64(stats.mean_q[k]),
                fmt_f64(stats.var_q[k])
            )?;
        }
    }

    let (slope, slope_se) = stats.energy_slope();
    let summary = serde_json::json!({
        "n_traj": n_traj,
        "seed": global.seed,
        "energy_slope": jnum(slope),
        "energy_slope_std_error": jnum(slope_se),
        "expected_slope_d2_over_2": jnum(cfg.d2 / 2.0),
        "final_mean_energy": jnum(*stats.mean_energy.last().unwrap()),
        "final_var_q": jnum(*stats.var_q.last().unwrap()),
    });
    let body = serde_json::to_string_pretty(&summary).map_err(|e| CliError::io(e.to_string()))?;
    std::fs::write(args.out.join("summary.json"), body + "\n")?;

    crate::manifest::write(
        &args.out,
        "langevin",
        &raw,
        global.seed,
        &["trajectories.csv", "energy.csv", "summary.json"],
        serde_json::json!({
            "hint": "on UnstableStep, reduce dt (t grid spacing) or raise stability_limit",
        }),
    )
}
