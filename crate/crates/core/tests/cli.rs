use std::process::Command;

fn openrabi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_openrabi"))
}

#[test]
fn spectrum_csv_carries_version_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spectrum.csv");
    let status = openrabi()
        .args([
            "spectrum",
            "--g-stop",
            "0.2",
            "--g-steps",
            "3",
            "--cutoff",
            "12",
            "--parity",
            "+",
        ])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# openrabi {}", openrabi::VERSION)
    );
    assert!(lines.next().unwrap().starts_with("# config: {"));
    let header = lines.next().unwrap();
    assert!(header.starts_with("g,"), "{header}");
    assert!(lines.count() > 3);
}

#[test]
fn replay_reproduces_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    let ok = openrabi()
        .args([
            "steady",
            "--g-stop",
            "0.1",
            "--g-steps",
            "2",
            "--format",
            "json",
            "--no-convergence-check",
        ])
        .arg("--out")
        .arg(&first)
        .status()
        .unwrap();
    assert!(ok.success());
    let ok = openrabi()
        .arg("replay")
        .arg(&first)
        .arg("--out")
        .arg(&second)
        .status()
        .unwrap();
    assert!(ok.success());
    let a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&second).unwrap()).unwrap();
    assert_eq!(a["data"], b["data"]);
    assert_eq!(a["config"], b["config"]);
}

#[test]
fn invalid_configuration_exits_with_2() {
    let out = openrabi()
        .args(["dynamics", "--cutoff", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let out = openrabi()
        .args(["dynamics", "--init", "12,g", "--cutoff", "9"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = openrabi()
        .args(["spectrum", "--parity", "x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_must_be_a_number() {
    let out = openrabi()
        .env("OPENRABI_THREADS", "many")
        .args(["jc", "--g-steps", "2", "--g-stop", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
