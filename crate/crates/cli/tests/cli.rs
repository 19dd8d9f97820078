use std::path::Path;
use std::process::{Command, Output};

fn hom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hom"))
        .args(args)
        .current_dir(dir)
        .env_remove("HOM_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

fn table(text: &str) -> Vec<(f64, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

#[test]
fn coherence_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = hom(dir.path(), &["coherence"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("coherence_length_um  65.7397"));
    let out = hom(dir.path(), &["coherence", "--bandwidth", "30"]);
    assert!(stdout(&out).contains("coherence_length_um  21.9132"));
    let out = hom(
        dir.path(),
        &["coherence", "--wavelength", "800", "--bandwidth", "800"],
    );
    assert!(stdout(&out).contains("coherence_length_um  0.8000"));
    let out = hom(dir.path(), &["coherence", "--bandwidth", "-1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn probability_curves() {
    let dir = tempfile::tempdir().unwrap();
    let werner = table(&stdout(&hom(
        dir.path(),
        &["probability", "--mode", "werner"],
    )));
    assert_eq!(werner.len(), 101);
    assert!((werner[0].1 - 0.5).abs() < 1e-12 && werner[100].1.abs() < 1e-12);

    let dip = table(&stdout(&hom(dir.path(), &["probability", "--mode", "dip"])));
    let (x_min, p_min) = dip
        .iter()
        .cloned()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!(x_min.abs() < 1e-12 && p_min.abs() < 1e-12);

    let pol = table(&stdout(&hom(
        dir.path(),
        &["probability", "--mode", "polarization", "--theta", "-30"],
    )));
    let at = |deg: f64| pol.iter().find(|r| (r.0 - deg).abs() < 1e-9).unwrap().1;
    assert!(at(0.0).abs() < 1e-12);
    assert!((at(45.0) - 0.5).abs() < 1e-12 && (at(-45.0) - 0.5).abs() < 1e-12);

    let out = hom(
        dir.path(),
        &["probability", "--mode", "werner", "--output", "w.csv"],
    );
    assert!(out.status.success());
    assert!(dir.path().join("w.manifest.json").exists());
    let out = hom(
        dir.path(),
        &["rerun", "--manifest", "w.manifest.json", "--check"],
    );
    assert!(out.status.success());
}

#[test]
fn simulate_is_reproducible_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(hom(
        p,
        &["simulate", "--scan", "dip", "--seed", "17", "--name", "a"]
    )
    .status
    .success());
    assert!(hom(
        p,
        &["simulate", "--scan", "dip", "--seed", "17", "--name", "b"]
    )
    .status
    .success());
    assert_eq!(read(p, "a.csv"), read(p, "b.csv"));

    let csv = read(p, "a.csv");
    let json = read(p, "a.json");
    std::fs::remove_file(p.join("a.csv")).unwrap();
    std::fs::remove_file(p.join("a.json")).unwrap();
    let out = hom(p, &["rerun", "--manifest", "a.manifest.json"]);
    assert!(out.status.success());
    assert_eq!(read(p, "a.csv"), csv);
    assert_eq!(read(p, "a.json"), json);

    let manifest: serde_json::Value = serde_json::from_slice(&read(p, "a.manifest.json")).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["seed"], 17);
    assert!(manifest["timestamp"].as_u64().unwrap() > 0);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);

    std::fs::write(p.join("a.csv"), "tampered").unwrap();
    let out = hom(p, &["rerun", "--manifest", "a.manifest.json", "--check"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn default_dip_scan_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(hom(p, &["simulate", "--scan", "dip"]).status.success());
    let text = String::from_utf8(read(p, "dip_scan.csv")).unwrap();
    assert!(text.starts_with("axis_um,coincidences,singles_a,singles_b,accidentals\n"));
    let counts: Vec<u64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(counts.len(), 76);
    let wings = (counts[..5].iter().sum::<u64>() as f64) / 5.0;
    assert!((wings - 1157.0).abs() < 60.0, "{wings}");
    assert!(*counts.iter().min().unwrap() < 120);
}

#[test]
fn fit_round_trip_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(hom(p, &["simulate", "--scan", "dip", "--seed", "2"])
        .status
        .success());
    let out = hom(
        p,
        &[
            "fit",
            "--model",
            "dip",
            "--input",
            "dip_scan.csv",
            "--emit-csv",
            "copy.csv",
        ],
    );
    assert!(out.status.success());
    assert!(stdout(&out).contains("visibility"));
    assert_eq!(read(p, "copy.csv"), read(p, "dip_scan.csv"));

    let report: serde_json::Value = serde_json::from_slice(&read(p, "dip_scan.fit.json")).unwrap();
    assert_eq!(report["model"], "dip");
    let v = report["fit"]["model"]["visibility"].as_f64().unwrap();
    assert!((v - 0.93).abs() < 0.02, "{v}");
    assert_eq!(report["fit"]["residuals"].as_array().unwrap().len(), 76);
    assert!(report["fit"]["uncertainty"]["visibility"].as_f64().unwrap() > 0.0);

    let out = hom(
        p,
        &[
            "rerun",
            "--manifest",
            "dip_scan.fit.manifest.json",
            "--check",
        ],
    );
    assert!(out.status.success());

    assert!(hom(p, &["simulate", "--scan", "pol", "--seed", "2"])
        .status
        .success());
    let out = hom(p, &["fit", "--model", "cosine", "--input", "pol_scan.json"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("reduced_chi2"));

    std::fs::write(
        p.join("bad.csv"),
        "axis_um,coincidences,singles_a,singles_b,accidentals\n1,2,3,4,5\n2,3,4\n",
    )
    .unwrap();
    let out = hom(p, &["fit", "--model", "dip", "--input", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3, column 4"));

    let out = hom(p, &["fit", "--model", "dip", "--input", "missing.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hom(dir.path(), &["simulate"]).status.code(), Some(1));
    assert_eq!(hom(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        hom(
            dir.path(),
            &["simulate", "--scan", "dip", "--visibility", "2"]
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(hom(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("run.conf"),
        "# dip defaults\nscan = dip\nseed = 5\npoints = 20\n",
    )
    .unwrap();
    let out_dir = p.join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_hom"))
        .args(["--config", "run.conf", "simulate", "--seed", "6"])
        .current_dir(p)
        .env("HOM_OUTPUT_DIR", &out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("dip_scan.manifest.json")).unwrap())
            .unwrap();
    // The flag overrides the file; the file supplies the rest.
    assert_eq!(manifest["seed"], 6);
    assert_eq!(manifest["config"]["scan"]["n_points"], 20);
}
