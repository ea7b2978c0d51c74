use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quasiconj"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn catalog_lists_every_kind() {
    let o = run(&["list-catalog"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for kind in ["linear", "skew_product", "perturbed", "suspension_time1"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{kind}:"))), "{kind} missing:\n{text}");
    }

    let o = run(&["list-catalog", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let kinds: Vec<&str> = v.as_array().unwrap().iter().map(|d| d["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["linear", "skew_product", "perturbed", "suspension_time1"]);
}

#[test]
fn unknown_subcommand_prints_usage() {
    let o = run(&["bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn negative_epsilon_is_a_config_error() {
    let path = config("negative_epsilon.toml");
    let o = run(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("negative_epsilon.toml:14: "), "{err}");
    assert!(err.contains("epsilon"), "{err}");
}

#[test]
fn malformed_configs_report_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("experiment = \"solve-A\"\n[system]\nkind = \"linear\"\nmatrix = [[2, 1], [1, 1]\n", 4),
        ("[system]\nkind = \"linear\"\nmatrix = [[2, 1], [1, 1]]\n\n[solver]\nresolution = [8, 8]\nfoo = 1\n", 7),
        ("[system]\nkind = \"linear\"\nmatrix = [[2, 1], [1, 1]]\n[entropy]\nr = 0.4\n", 5),
        ("[system]\nkind = \"linear\"\nmatrix = [[2, 1], [1, 1]]\n[holonomy]\nbeta_list = []\n", 5),
        ("[system]\nkind = \"linear\"\nmatrix = [[2, 1], [1, 2]]\n", 3),
    ];
    for (text, line) in cases {
        let path = write_config(dir.path(), text);
        let o = run(&["solve-A", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err = stderr(&o);
        assert!(err.contains(&format!("config.toml:{line}: ")), "expected line {line}: {err}");
    }
}

#[test]
fn missing_experiment_and_perturbation_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "[system]\nkind = \"linear\"\nmatrix = [[2, 1], [1, 1]]\n");
    let p = path.to_str().unwrap();
    assert_eq!(run(&["run", p]).status.code(), Some(2));
    let o = run(&["solve-A", p, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[perturbation]"));
    let o = run(&["solve-Bprime", config("anosov_perturbation.toml").to_str().unwrap(), "--resolution", "16,16"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("center flow"));
}

#[test]
fn skew_rotation_writes_the_constant_center_section() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o = run(&["run", config("skew_rotation.toml").to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&out.join("quasiconj.json"));
    let mean: Vec<f64> = report["u_mean"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let expected = [0.0, 0.0, 0.02];
    for i in 0..3 {
        assert!((mean[i] - expected[i]).abs() < 1e-6, "{mean:?}");
        assert!((report["u_min"][i].as_f64().unwrap() - expected[i]).abs() < 1e-6);
        assert!((report["u_max"][i].as_f64().unwrap() - expected[i]).abs() < 1e-6);
    }
    assert!(report["report"]["v_sup"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["report"]["resolution"], serde_json::json!([64, 64, 64]));

    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("system,quantity,value,tolerance,pass\n"));
    assert!(summary.contains("g,verification,1.0,,true"));
    let section = section_space::read_binary(std::fs::File::open(out.join("u.bin")).unwrap()).unwrap();
    assert_eq!(section.grid().resolution(), &[64, 64, 64]);
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = config("holonomy_tilt.toml");
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(name);
        let o = run(&["run", path.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        outputs.push(
            files.iter().map(|f| (f.file_name().unwrap().to_owned(), std::fs::read(f).unwrap())).collect::<Vec<_>>(),
        );
    }
    assert_eq!(outputs[0].len(), 2);
    assert_eq!(outputs[0], outputs[1]);

    let out = dir.path().join("other_seed");
    let o = run(&["run", path.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(std::fs::read(out.join("modulus.json")).unwrap(), outputs[0][0].1);
}

#[test]
fn seed_and_resolution_overrides_reach_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let path = config("skew_rotation.toml");
    let o = run(&[
        "solve-A",
        path.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--seed",
        "7",
        "--resolution",
        "16,16,8",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&dir.path().join("quasiconj.json"));
    assert_eq!(report["report"]["params"]["seed"], 7);
    assert_eq!(report["report"]["resolution"], serde_json::json!([16, 16, 8]));
    let o = run(&["solve-A", path.to_str().unwrap(), "--resolution", "16,16"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn suspension_time_change_through_the_flow_solver() {
    let dir = tempfile::tempdir().unwrap();
    let path = config("suspension_time_change.toml");
    let o = run(&["solve-Bprime", path.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&dir.path().join("quasiconj.json"));
    for t in report["report"]["tau_tilde_min_mean_max"].as_array().unwrap() {
        assert!((t.as_f64().unwrap() - 0.02).abs() < 1e-6);
    }
    let o = run(&["solve-B", path.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&dir.path().join("quasiconj.json"));
    assert_eq!(report["report"]["variant"], "B");
}

#[test]
fn contraction_check_and_its_negative_control() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", config("contraction.toml").to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&dir.path().join("contraction.json"));
    assert!(report["contraction"]["max_ratio"].as_f64().unwrap() <= 0.5);

    let o =
        run(&["run", config("negative_contraction.toml").to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("FAIL g image_norm1")), "{stdout}");
}

#[test]
fn entropy_scan_reports_the_eigenvalue_rate() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
experiment = "entropy-scan"

[system]
kind = "linear"
matrix = [[2, 1], [1, 1]]
identity_block = 1

[perturbations.theta_002]
kind = "fiber_shift"
shift = { formula = "constant", value = 0.02 }

[entropy]
n_max = 12
chi_points = 2
bowen_budget = 131072

[outputs]
directory = "results"
formats = ["csv"]
"#;
    let path = write_config(dir.path(), text);
    let o = run(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("results");
    assert!(!out.join("entropy.json").exists());
    let mut reader = csv::Reader::from_path(out.join("entropy.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let chi = headers.iter().position(|h| h == "chi_u").unwrap();
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let log_mu = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    for r in &rows {
        let value: f64 = r[chi].parse().unwrap();
        assert!((value - log_mu).abs() < 0.01, "{value}");
    }
}
