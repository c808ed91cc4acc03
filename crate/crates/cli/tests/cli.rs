use std::path::Path;
use std::process::{Command, Output};

fn iterlog(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iterlog"))
        .args(args)
        .current_dir(cwd)
        .env(iterlog_core::parallel::THREADS_ENV, "1")
        .output()
        .expect("binary runs")
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn renewal_csv_for_deterministic_law_is_binomial() {
    let dir = tempfile::tempdir().unwrap();
    let out = iterlog(&["renewal", "--law", "lattice:d=1;p=1", "--K", "3", "--N", "20", "--out", "v.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("v.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,t,V1,V2,V3"));
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let n: u64 = cells[0].parse().unwrap();
        for k in 1..=3u64 {
            let v: f64 = cells[1 + k as usize].parse().unwrap();
            assert!((v - binomial(n, k)).abs() < 1e-9, "n={n} k={k} v={v}");
        }
        rows += 1;
    }
    assert_eq!(rows, 21);
}

#[test]
fn moments_json_for_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let out = iterlog(&["moments", "--law", "exp:rate=1"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mu"], 1.0);
    assert_eq!(v["m2"], 2.0);
    assert_eq!(v["var"], 1.0);
    let a: Vec<f64> = v["a"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (got, want) in a.iter().zip([1.0, 1.7320508, 4.4721360]) {
        assert!((got - want).abs() < 1e-7, "{got} vs {want}");
    }
}

#[test]
fn moments_json_reports_lattice_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = iterlog(&["moments", "--law", "lattice:d=1;p=1", "--K", "2"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["a"][0], serde_json::Value::Null);
    assert!((v["lattice"]["D"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["lattice"]["C_corrected"][1].as_f64().unwrap() + 0.5).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["moments", "--law", "cauchy:scale=1"],
        vec!["moments", "--bogus"],
        vec!["frobnicate"],
        vec!["renewal", "--law", "exp:rate=1"],
        vec!["rrt", "--grower", "preferential"],
    ] {
        let out = iterlog(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = iterlog(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = iterlog(&["moments", "--out", "missing/dir/m.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_mirrors_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"law": "lattice:d=1;p=1", "K": 2, "N": 5, "format": "csv"}"#,
    )
    .unwrap();
    let out = iterlog(&["renewal", "--config", "cfg.json", "--N", "3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("n,t,V1,V2"));
    assert_eq!(text.lines().count(), 5);

    std::fs::write(dir.path().join("bad.json"), r#"{"lawz": "exp:rate=1"}"#).unwrap();
    assert_eq!(iterlog(&["moments", "--config", "bad.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn simulate_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--law", "exp:rate=1", "--K", "2", "--t", "30", "--replicas", "5", "--seed", "11"];
    let a = iterlog(&args, dir.path());
    let b = Command::new(env!("CARGO_BIN_EXE_iterlog"))
        .args(args)
        .env(iterlog_core::parallel::THREADS_ENV, "4")
        .output()
        .unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("replica,k,t,Y,clt_stat,lil_stat"));
    assert_eq!(text.lines().count(), 1 + 5 * 2);
}

#[test]
fn simulate_svg_draws_reference_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = iterlog(
        &[
            "simulate", "--law", "exp:rate=1", "--K", "1", "--t", "500", "--replicas", "2",
            "--grid", "geometric:base=1.5,count=10", "--format", "svg", "--out", "lil.svg",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(dir.path().join("lil.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("class=\"reference\"").count(), 2);
}

#[test]
fn rrt_json_dumps_exact_pmf() {
    let dir = tempfile::tempdir().unwrap();
    let out = iterlog(&["rrt", "--N", "2", "--K", "2", "--format", "json"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["sequences"], 2);
    assert_eq!(v["pmf"]["(2,0)"], 0.5);
    assert_eq!(v["pmf"]["(1,1)"], 0.5);
}

#[test]
fn rrt_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = iterlog(&["rrt", "--N", "100", "--K", "2", "--replicas", "3", "--grower", "discrete"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("replica,n,k,X,statistic"));
    assert_eq!(text.lines().count(), 1 + 3 * 2);
}

#[test]
fn gauss_json_reports_variance_targets() {
    let dir = tempfile::tempdir().unwrap();
    let out = iterlog(
        &["gauss", "--law", "geom:p=0.5", "--k", "2", "--t", "20", "--replicas", "200", "--format", "json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let s = &v[0];
    assert!((s["b1k_variance_target"].as_f64().unwrap() - 8000.0 / 3.0).abs() < 1e-9);
    assert!(s["b2k_variance_target"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_single_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(iterlog(&["verify", "--check", "c1"], dir.path()).status.code(), Some(0));
    assert_eq!(iterlog(&["verify", "--check", "c3"], dir.path()).status.code(), Some(1));
    assert_eq!(iterlog(&["verify", "--check", "c42"], dir.path()).status.code(), Some(2));
}
