use std::path::PathBuf;
use std::process::{Command, Output};

fn nhlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn maximize_prints_summary() {
    let o = nhlab(&["maximize", "--scenario", &scenario("standard_2x2.json")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pipeline"], "maximize");
    assert_eq!(v["kind"], "quantum");
}

#[test]
fn out_dir_gets_summary_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = nhlab(&[
        "maximize",
        "--scenario",
        &scenario("standard_2x2.json"),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(out.join("summary.json").is_file());
    let csv = std::fs::read_to_string(out.join("reality.csv")).unwrap();
    assert!(csv.starts_with("time,"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn reruns_are_byte_identical_and_seed_matters() {
    let run = |seed: &str| {
        stdout(&nhlab(&[
            "maximize",
            "--scenario",
            &scenario("random_dim6.json"),
            "--seed",
            seed,
        ]))
    };
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3"), run("4"));
}

#[test]
fn classical_and_inflaton_run() {
    let o = nhlab(&[
        "classical",
        "--scenario",
        &scenario("double_well_hilltop.json"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = nhlab(&[
        "inflaton",
        "--scenario",
        &scenario("inflaton3.json"),
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_input_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"kind\": \"quantum\", \"bogus\": 1}").unwrap();
    assert_eq!(
        nhlab(&["qmetric", "--scenario", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    // the pipeline does not match the scenario kind
    assert_eq!(
        nhlab(&["classical", "--scenario", &scenario("standard_2x2.json")])
            .status
            .code(),
        Some(2)
    );

    let jordan = dir.path().join("jordan.json");
    std::fs::write(
        &jordan,
        r#"{"kind": "quantum", "hamiltonian": {"matrix": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]}}"#,
    )
    .unwrap();
    let o = nhlab(&["qmetric", "--scenario", jordan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diagonalizing H"));

    let missing = dir.path().join("missing.json");
    assert_eq!(
        nhlab(&["qmetric", "--scenario", missing.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn selftest_single_criterion() {
    let o = nhlab(&["selftest", "--criterion", "10"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("PASS 10"));
    assert_eq!(
        nhlab(&["selftest", "--criterion", "99"]).status.code(),
        Some(2)
    );
}
