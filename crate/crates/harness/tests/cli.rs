use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fbmpv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbmpv"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "record.json" {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

#[test]
fn sample_writes_paths_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(d, "c.toml", "H = 0.7\nn = 8\npaths = 2\nmaster_seed = 42\n");
    let o = fbmpv(d, &["--config", "c.toml", "--out", "a", "sample"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = std::fs::read_dir(d.join("a/paths")).unwrap().collect();
    assert_eq!(files.len(), 2);
    for k in 0..2 {
        let text = std::fs::read_to_string(d.join(format!("a/paths/path_{k:05}.csv"))).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 9);
        let v0: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v0, 0.0);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["paths"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["master_seed"], 42);

    let o = fbmpv(d, &["--config", "c.toml", "--out", "b", "--threads", "3", "sample"]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_dir_sorted(&d.join("a")), read_dir_sorted(&d.join("b")));

    let o = fbmpv(d, &["--out", "c", "replay", "a/record.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_dir_sorted(&d.join("a")), read_dir_sorted(&d.join("c")));

    let o = fbmpv(d, &["--config", "c.toml", "--out", "e", "--seed", "43", "sample"]);
    assert_eq!(code(&o), 0);
    assert_ne!(read_dir_sorted(&d.join("a")), read_dir_sorted(&d.join("e")));
}

#[test]
fn validation_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(d, "bad_h.toml", "H = 1.2\nn = 8\npaths = 2\n");
    let o = fbmpv(d, &["--config", "bad_h.toml", "sample"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("H:"));

    write_config(d, "typo.toml", "H = 0.7\nn = 8\npaths = 2\nmaster_sed = 1\n");
    let o = fbmpv(d, &["--config", "typo.toml", "sample"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("master_sed"));

    write_config(d, "nolevels.toml", "H = 0.7\nn = 64\npaths = 2\nlevels = []\n");
    let o = fbmpv(d, &["--config", "nolevels.toml", "pv"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("levels"));

    write_config(d, "qcov.toml", "H = 0.7\nn = 64\npaths = 2\n");
    let o = fbmpv(d, &["--config", "qcov.toml", "qcov"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("H < 1/2"));
}

fn ensemble_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn pv_reports_cross_route_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(d, "c.toml", "H = 0.7\nn = 256\npaths = 8\nlevels = [0.0, 0.3]\n");
    let o = fbmpv(d, &["--config", "c.toml", "--out", "o", "pv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = ensemble_rows(&d.join("o/ensemble.csv"));
    assert!(rows[0].contains(&"delta_mean".to_string()));
    let k = rows[0].iter().position(|c| c == "delta_mean").unwrap();
    let lt: Vec<_> = rows.iter().filter(|r| r[1] == "hilbert_of_local_time").collect();
    assert_eq!(lt.len(), 2);
    assert!(lt.iter().all(|r| r[k].parse::<f64>().is_ok()));
    let lines = std::fs::read_to_string(d.join("o/functionals.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 8 * 2 * 2);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    for key in ["H", "a", "t", "route", "value", "eps_ladder", "rungs", "seed"] {
        assert!(first.get(key).is_some(), "{key}");
    }
}

#[test]
fn far_level_routes_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(d, "c.toml", "H = 0.7\nn = 512\npaths = 1\nlevels = [1000.0]\n");
    let o = fbmpv(d, &["--config", "c.toml", "--out", "o", "pv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let vals: Vec<f64> = std::fs::read_to_string(d.join("o/functionals.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["value"].as_f64().unwrap())
        .collect();
    assert_eq!(vals.len(), 2);
    assert!(vals[0] < 0.0);
    assert!((vals[0] - vals[1]).abs() < 1e-6, "{vals:?}");
}

#[test]
fn localtime_and_qcov_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(d, "c.toml", "H = 0.3\nn = 256\npaths = 3\nlevels = [0.5]\n");
    let o = fbmpv(d, &["--config", "c.toml", "--out", "o", "localtime"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("o/localtime/field_00002.csv").exists());
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("o/localtime/field_00000.json")).unwrap()).unwrap();
    assert_eq!(side["kind"], "weighted");
    let o = fbmpv(d, &["--config", "c.toml", "--out", "q", "qcov"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = ensemble_rows(&d.join("q/qcov.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], ["path", "seed", "identity", "log_a=0.5"]);
}

#[test]
fn hilbert_round_trip_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut csv = String::from("x,value\n");
    for i in 0..=2000 {
        let x = -20.0 + 0.02 * i as f64;
        csv.push_str(&format!("{x:.16e},{:.16e}\n", (-x * x).exp()));
    }
    std::fs::write(d.join("g.csv"), csv).unwrap();
    let o = fbmpv(d, &["--out", "h", "hilbert", "--input", "g.csv", "--fft"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = fbmpv(d, &["--out", "back", "hilbert", "--input", "h/hilbert.csv", "--inverse"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = ensemble_rows(&d.join("back/hilbert.csv"));
    let sup = rows[1..]
        .iter()
        .map(|r| {
            let x: f64 = r[0].parse().unwrap();
            let v: f64 = r[1].parse().unwrap();
            (v - (-x * x).exp()).abs()
        })
        .fold(0.0, f64::max);
    assert!(sup < 5e-3, "{sup}");
    let o = fbmpv(d, &["hilbert", "--input", "missing.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(d, "c.toml", "H = 0.7\nn = 256\npaths = 4\n");
    let o = fbmpv(d, &["--config", "c.toml", "--out", "b", "verify", "bounds"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS det-lower"));

    let tight = "H = 0.7\nn = 256\npaths = 4\n[verify]\nidentity_tol = 1e-12\nensemble_paths = 50\n";
    write_config(d, "tight.toml", tight);
    let o = fbmpv(d, &["--config", "tight.toml", "--out", "t", "verify", "identities"]);
    assert_eq!(code(&o), 3);
    assert!(d.join("t/record.json").exists());

    let slow = "H = 0.7\nn = 256\npaths = 4\n[verify]\nbudget_secs = 1e-9\nensemble_paths = 50\n";
    write_config(d, "slow.toml", slow);
    let o = fbmpv(d, &["--config", "slow.toml", "--out", "s", "verify", "identities"]);
    assert_eq!(code(&o), 4);
}
