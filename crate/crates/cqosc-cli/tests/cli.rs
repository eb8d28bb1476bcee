//! End-to-end behavior of the `cqosc` binary: exit codes, error names, and
//! the documented properties of emitted files.

mod common;

use common::{read_csv_columns, run_command, run_cqosc, write_config};

const BASE: &str = "\
omega_c = 1.0
omega_q = 2.0
alpha = 0.1
d2 = 10.0
t_i = 0.0
t_f = 3.0
n = 1000
seed = 7
";

#[test]
fn malformed_config_exits_2_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "omega_c = not-a-number\n");
    let out = run_command("mpp", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("\"error\":\"ConfigError\""), "stderr: {stderr}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.cfg",
        &format!("{BASE}\n[mpp]\nnonsense_key = 3\n"),
    );
    let out = run_command("mpp", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_command("mpp", &dir.path().join("nope.cfg"), &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_errors_surface_with_machine_readable_names() {
    // omega_q * (t_f - t_i) = pi exactly: degenerate pinned problem.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "degenerate.cfg",
        &format!(
            "omega_c = 1.0\nomega_q = {}\nalpha = 0.1\nd2 = 1.0\nt_i = 0.0\nt_f = 3.0\nn = 64\n",
            std::f64::consts::PI / 3.0
        ),
    );
    let out = run_command("mpp", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("DegenerateBVP"), "stderr: {stderr}");
}

#[test]
fn mpp_emits_free_branches_at_zero_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "free.cfg",
        "omega_c = 1.0\nomega_q = 1.0\nalpha = 0.0\nd2 = 1.0\nt_i = 0.0\nt_f = 1.5707963267948966\nn = 256\n\n[mpp]\nregime = heavy_classical\nq_i = 0.0\nqdot_i = 1.0\nqddot_i = 0.0\nq_f = 1.0\nqp_i = 0.0\nqp_f = 1.0\nqm_i = 0.0\nqm_f = 1.0\n",
    );
    let out_dir = dir.path().join("out");
    let out = run_command("mpp", &cfg, &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cols = read_csv_columns(&out_dir.join("q_plus.csv"));
    let (t, v) = (&cols["t"], &cols["value"]);
    for k in 0..t.len() {
        assert!((v[k] - t[k].sin()).abs() < 1e-10, "node {k}");
    }
}

#[test]
fn correlator_files_satisfy_conjugation_and_evenness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "corr.cfg",
        &format!("{BASE}\n[correlators]\nmode = free\ntau_max = 8.0\nn_tau = 81\neta = 1e-3\n"),
    );
    let out_dir = dir.path().join("out");
    let out = run_command("correlators", &cfg, &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let plus = read_csv_columns(&out_dir.join("free_quantum_plus.csv"));
    let minus = read_csv_columns(&out_dir.join("free_quantum_minus.csv"));
    let mut max = 0.0_f64;
    for k in 0..plus["tau"].len() {
        let dre = (minus["re"][k] - plus["re"][k]).abs();
        let dim = (minus["im"][k] + plus["im"][k]).abs();
        max = max.max(dre.max(dim));
    }
    assert!(max < 1e-10, "conjugation defect on emitted data: {max}");

    // Evenness of the emitted classical scan over its symmetric lag grid.
    let classical = read_csv_columns(&out_dir.join("free_classical.csv"));
    let n = classical["tau"].len();
    for k in 0..n {
        let mirror = n - 1 - k;
        assert!((classical["tau"][k] + classical["tau"][mirror]).abs() < 1e-12);
        assert_eq!(classical["re"][k], classical["re"][mirror], "row {k}");
        assert_eq!(classical["im"][k], classical["im"][mirror], "row {k}");
    }
}

#[test]
fn corrected_scan_at_zero_coupling_matches_free_file() {
    let dir = tempfile::tempdir().unwrap();
    let shared = "omega_c = 1.0\nomega_q = 2.0\nalpha = 0.0\nd2 = 10.0\nt_i = -20.0\nt_f = 20.0\nn = 801\n";
    let corrected_cfg = write_config(
        dir.path(),
        "corrected.cfg",
        &format!(
            "{shared}\n[correlators]\nmode = corrected\neta = 1e-2\ns_min = -4.0\ns_max = 4.0\nn_s = 5\nt_min = 0.0\nt_max = 0.0\nn_t = 1\n"
        ),
    );
    let free_cfg = write_config(
        dir.path(),
        "free.cfg",
        &format!("{shared}\n[correlators]\nmode = free\ntau_max = 4.0\nn_tau = 5\neta = 1e-2\n"),
    );
    let out_c = dir.path().join("corrected");
    let out_f = dir.path().join("free");
    assert!(run_command("correlators", &corrected_cfg, &out_c).status.success());
    assert!(run_command("correlators", &free_cfg, &out_f).status.success());

    let corrected = read_csv_columns(&out_c.join("corrected_qq.csv"));
    let free = read_csv_columns(&out_f.join("free_classical.csv"));
    // Corrected rows scan s over 0..4 at t = 0, so s - t matches the free
    // tau grid row by row.
    for k in 0..corrected["s"].len() {
        assert_eq!(corrected["re"][k], free["re"][k], "row {k}");
        assert_eq!(corrected["im"][k], free["im"][k], "row {k}");
    }
}

#[test]
fn corrected_scan_runs_with_coupling_on() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "corrected.cfg",
        "omega_c = 1.0\nomega_q = 2.0\nalpha = 0.2\nd2 = 2.0\nt_i = -25.0\nt_f = 25.0\nn = 501\n\n[correlators]\nmode = corrected\neta = 4e-2\ns_min = -1.0\ns_max = 1.0\nn_s = 2\nt_min = 0.0\nt_max = 0.0\nn_t = 1\n",
    );
    let out_dir = dir.path().join("out");
    let out = run_command("correlators", &cfg, &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "corrected_qq.csv",
        "corrected_quantum_plus.csv",
        "corrected_quantum_minus.csv",
        "corrected_meta.json",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    // The sidecar records window and coupling.
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("corrected_meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["alpha"].as_str().unwrap().parse::<f64>().unwrap(), 0.2);
    assert_eq!(meta["window"]["n"], 501);
}

#[test]
fn langevin_summary_reports_slope_near_half_d2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "lang.cfg",
        "omega_c = 1.0\nomega_q = 1.0\nalpha = 0.0\nd2 = 1.0\nt_i = 0.0\nt_f = 2.0\nn = 501\nseed = 3\n\n[langevin]\nn_traj = 20000\nn_sample = 4\n",
    );
    let out_dir = dir.path().join("out");
    let out = run_command("langevin", &cfg, &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    let slope: f64 = summary["energy_slope"].as_str().unwrap().parse().unwrap();
    assert!((slope - 0.5).abs() < 0.05 * 0.5, "slope {slope}");
}

#[test]
fn langevin_without_noise_conserves_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "nonoise.cfg",
        "omega_c = 1.0\nomega_q = 1.0\nalpha = 0.0\nd2 = 1e-30\nt_i = 0.0\nt_f = 2.0\nn = 2001\n\n[langevin]\nq0 = 1.0\nn_traj = 4\nn_sample = 1\n",
    );
    let out_dir = dir.path().join("out");
    assert!(run_command("langevin", &cfg, &out_dir).status.success());
    let cols = read_csv_columns(&out_dir.join("energy.csv"));
    let e = &cols["mean_energy"];
    let drift = (e.last().unwrap() - e[0]).abs() / e[0];
    assert!(drift < 5e-3, "energy drift {drift}");
}

#[test]
fn unstable_step_carries_remediation_hint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "unstable.cfg",
        "omega_c = 1.0\nomega_q = 1.0\nalpha = 0.0\nd2 = 1.0\nt_i = 0.0\nt_f = 50.0\nn = 64\n\n[langevin]\nn_traj = 4\n",
    );
    let out = run_command("langevin", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("UnstableStep"), "stderr: {stderr}");
}

#[test]
fn decoherence_surface_symmetry_under_sign_flip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "deco.cfg",
        &format!("{BASE}\n[decoherence]\ndq_max = 1.5\nn_scan = 21\n"),
    );
    let out_dir = dir.path().join("out");
    assert!(run_command("decoherence-scan", &cfg, &out_dir).status.success());
    let cols = read_csv_columns(&out_dir.join("surface.csv"));
    let n = 21;
    let idx = |i: usize, j: usize| i * n + j;
    let w = &cols["weight_exp"];
    for i in 0..n {
        for j in 0..n {
            let flipped = w[idx(n - 1 - i, n - 1 - j)];
            assert!((w[idx(i, j)] - flipped).abs() < 1e-14);
        }
    }
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "threads.cfg",
        &format!("{BASE}\n[langevin]\nn_traj = 3000\nn_sample = 3\n\n[decoherence]\ndq_max = 1.0\nn_scan = 21\n"),
    );
    for sub in ["langevin", "decoherence-scan"] {
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let out_dir = dir.path().join(format!("{sub}-{threads}"));
            let out = std::process::Command::new(env!("CARGO_BIN_EXE_cqosc"))
                .env("CQOSC_THREADS", threads)
                .args([
                    sub,
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    out_dir.to_str().unwrap(),
                ])
                .output()
                .expect("binary runs");
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            outputs.push(common::read_dir_files(&out_dir));
        }
        assert_eq!(outputs[0], outputs[1], "{sub} outputs depend on thread count");
    }
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "seeded.cfg",
        "omega_c = 1.0\nomega_q = 1.0\nalpha = 0.0\nd2 = 1.0\nt_i = 0.0\nt_f = 1.0\nn = 101\nseed = 1\n\n[langevin]\nn_traj = 4\nn_sample = 2\n",
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert!(run_command("langevin", &cfg, &out_a).status.success());
    let out = run_cqosc(&[
        "langevin",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let a = std::fs::read(out_a.join("trajectories.csv")).unwrap();
    let b = std::fs::read(out_b.join("trajectories.csv")).unwrap();
    assert_ne!(a, b, "different seeds must change the ensemble");
}
