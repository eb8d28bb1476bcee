use std::io::Write;

use cqosc::io::fmt_f64;
use cqosc::model::decoherence_surface;

use crate::commands::{create_out_dir, writer};
use crate::config::load;
use crate::manifest::jnum;
use crate::{CliError, RunArgs};

const KEYS: &[&str] = &["dq_max", "n_scan"];

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let (raw, global) = load(&args.config, args.seed)?;
    let keys = crate::config::section(&raw, "decoherence")?;
    keys.check_known(KEYS)?;
    let dq_max = keys.f64_or("dq_max", 2.0)?;
    let n_scan = keys.usize_or("n_scan", 41)?;

    let points = decoherence_surface(&global.oscillator, global.grid, dq_max, n_scan)?;

    create_out_dir(&args.out)?;
    {
        let mut out = writer(&args.out, "surface.csv")?;
        writeln!(out, "dq_i,dq_f,weight_exp")?;
        for p in &points {
            writeln!(
                out,
                "{},{},{}",
                fmt_f64(p.dq_i),
                fmt_f64(p.dq_f),
                fmt_f64(p.weight_exp)
            )?;
        }
    }
    crate::manifest::write(
        &args.out,
        "decoherence-scan",
        &raw,
        global.seed,
        &["surface.csv"],
        serde_json::json!({
            "dq_max": jnum(dq_max),
            "n_scan": n_scan,
        }),
    )
}
