use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlab")).args(args).current_dir(cwd).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn pattern_then_evaluate_then_certify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = mlab(
        &["pattern", "--model", "vkd", "--h", "1e-3", "--lambda", "0.25", "--rho", "1.5", "--m", "4", "--out", "many"],
        d,
    );
    let meta = json(&p);
    assert_eq!(meta["schema"], "mlab/1");
    assert_eq!(meta["pattern"]["regime"], "MANY");
    assert!(meta["slope_bound"].as_f64().unwrap() > 0.0);
    for c in ["rho", "theta", "z"] {
        let text = fs::read_to_string(d.join(format!("many.{c}.gfld"))).unwrap();
        assert!(text.starts_with("GFLD 1 8 "));
    }
    let built = meta["report"]["excess"].as_f64().unwrap();

    let e = json(&mlab(&["evaluate", "--input", "many"], d));
    for key in ["membrane_tt", "membrane_zz", "membrane_tz", "bending", "total", "bulk", "excess", "slope_linf"] {
        assert!(e[key].is_number(), "missing {key}");
    }
    assert!(e["admissible"].as_bool().unwrap());
    assert!(e["violations"].as_array().unwrap().is_empty());
    // fields re-read from text reproduce the energy exactly
    assert_eq!(e["excess"].as_f64().unwrap(), built);

    let c = json(&mlab(&["certify", "--input", "many"], d));
    let reps = c.as_array().unwrap();
    assert!(reps.len() >= 3);
    assert!(reps.iter().all(|r| r["passed"] == true));
}

#[test]
fn inadmissible_fields_and_empty_requests_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    json(&mlab(
        &["pattern", "--model", "nl", "--h", "1e-2", "--lambda", "0.25", "--rho", "1.2", "--m", "1", "--out", "p"],
        d,
    ));
    // dropping the radius below the mandrel makes the field inadmissible
    let path = d.join("p.rho.gfld");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[1] = lines[1].split(' ').map(|_| "1.0").collect::<Vec<_>>().join(" ");
    fs::write(&path, lines.join("\n")).unwrap();
    let out = mlab(&["certify", "--input", "p"], d);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let out = mlab(&["interp", "--family", "GN_1D", "--samples", "0"], d);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_for_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let usage = mlab(&["oracle", "--model", "vkd"], d);
    assert_eq!(usage.status.code(), Some(2));
    let range = mlab(&["oracle", "--model", "vkd", "--h", "2", "--lambda", "0.2"], d);
    assert_eq!(range.status.code(), Some(2));
    let missing = mlab(&["evaluate", "--input", "nothing-here"], d);
    assert_eq!(missing.status.code(), Some(2));
    let empty =
        mlab(&["sweep", "--model", "vkd", "--vary", "h", "--lo", "1e-3", "--hi", "1e-3", "--lambda", "0.25"], d);
    assert_eq!(empty.status.code(), Some(2));
    // an explicit grid far too coarse for the wrinkles
    let coarse = mlab(
        &["pattern", "--model", "vkd", "--h", "1e-5", "--lambda", "0.25", "--rho", "1.5", "--m", "4", "--grid", "8x16"],
        d,
    );
    assert_eq!(coarse.status.code(), Some(2));
}

#[test]
fn oracle_output_and_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let o = json(&mlab(&["oracle", "--model", "vkd", "--h", "1e-4", "--lambda", "0.25", "--rho", "2"], dir.path()));
    assert_eq!(o["model"], "VKD");
    assert_eq!(o["branch"], "ONE");
    assert!(o["hypothesis_ok"].as_bool().unwrap());
    assert!(o["active_inequalities"].is_array());
    let b = json(&mlab(&["oracle", "--model", "fs", "--h", "1e-4", "--lambda", "0.25", "--boundary"], dir.path()));
    assert!(b.as_array().unwrap().iter().all(|e| e["agree"] == true));
}

#[test]
fn sweeps_are_reproducible_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "--out-dir",
        "run",
        "--threads",
        "3",
        "sweep",
        "--model",
        "vkd",
        "--vary",
        "h",
        "--lo",
        "1e-5",
        "--hi",
        "1e-3",
        "--lambda",
        "0.25",
        "--rho",
        "1.5",
        "--m",
        "4",
        "--regime",
        "many",
    ];
    let first = mlab(&args, d);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let a = fs::read(d.join("run/sweep.csv")).unwrap();
    assert!(mlab(&args, d).status.success());
    let b = fs::read(d.join("run/sweep.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# mlab/1 sweep\n"));
    assert_eq!(text.lines().count(), 2 + 8);

    let fit = json(&mlab(&["fit", "--input", "run/sweep.csv", "--x", "h", "--y", "excess"], d));
    let k = fit["exponent"].as_f64().unwrap();
    assert!((0.60..=0.73).contains(&k), "{k}");
    assert_eq!(fit["points_used"], 8);
    assert!(fit["r_squared"].as_f64().unwrap() > 0.995);
}

#[test]
fn json_sweep_with_recorded_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlab(
        &[
            "--format",
            "json",
            "sweep",
            "--model",
            "vkd",
            "--vary",
            "h",
            "--count",
            "4",
            "--lo",
            "1e-4",
            "--hi",
            "1e-3",
            "--lambda",
            "0.25",
            "--rho",
            "1.5",
            "--regime",
            "fs_many_tilted",
            "--skip-failures",
        ],
        dir.path(),
    );
    let rows = json(&out);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().enumerate().all(|(i, r)| r["index"] == i && r["error"].is_string()));
    assert_eq!(rows[0]["m"], "inf");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.cfg"), "# thick sheet\nmodel = vkd\nh = 0.3\nlambda = 0.2\nrho = 1\n").unwrap();
    let from_file = json(&mlab(&["oracle", "--config", "run.cfg"], d));
    assert_eq!(from_file["branch"], "UNBUCKLED");
    let overridden = json(&mlab(&["--config", "run.cfg", "oracle", "--h", "1e-6"], d));
    assert_ne!(overridden["branch"], "UNBUCKLED");
    fs::write(d.join("bad.cfg"), "bogus = 1\n").unwrap();
    assert_eq!(mlab(&["oracle", "--config", "bad.cfg"], d).status.code(), Some(2));
}

#[test]
fn minimize_writes_fields_and_restarts_from_them() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = ["--model", "vkd", "--h", "0.2", "--lambda", "0.1", "--rho", "1", "--grid", "8x32"];
    let mut args = vec!["--seed", "5", "minimize", "--max-iters", "200", "--out", "thick"];
    args.extend(base);
    let r = json(&mlab(&args, d));
    let excess = r["report"]["excess"].as_f64().unwrap();
    let target = 2.0 * std::f64::consts::PI * 0.01;
    assert!((excess - target).abs() < 0.05 * target, "{excess}");
    assert!(r["energy_history"].as_array().unwrap().len() as u64 <= r["iterations"].as_u64().unwrap() + 1);

    let mut again = vec!["minimize", "--init", "file", "--input", "thick", "--max-iters", "20", "--out", "again"];
    again.extend(base);
    let r2 = json(&mlab(&again, d));
    assert!(r2["report"]["total"].as_f64().unwrap() <= r["report"]["total"].as_f64().unwrap() + 1e-12);
    let c = json(&mlab(&["certify", "--input", "again"], d));
    assert!(c.as_array().unwrap().iter().all(|r| r["passed"] == true));
}

#[test]
fn interp_csv_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlab(&["--format", "csv", "interp", "--samples", "40"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "family,samples,skipped,violations,min_ratio,max_ratio");
    assert_eq!(lines.count(), 5);
}
