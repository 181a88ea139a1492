use std::process::Command;

fn mupir(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mupir")).args(args).output().expect("binary runs")
}

#[test]
fn example_session_succeeds() {
    let out = mupir(&["mupir", "-S", "3", "-N", "3", "-K", "3", "--demand", "2,1,3", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rate_exact"], "23/9");
    assert_eq!(v["decode_ok"], true);
    assert_eq!(v["audit_ok"], true);
    assert_eq!(v["per_db_query_counts"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("session.cfg");
    std::fs::write(
        &cfg,
        "scheme = mupir\nS = 2\nN = 3\nK = 5\nblock_bytes = 4\nseed = 7\ndemand = random-valid\n",
    )
    .unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = mupir(&["mupir", "--config", cfg.to_str().unwrap(), "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(mupir(&["mupir", "-S", "3", "-N", "3", "-K", "2"]).status.code(), Some(2));
    assert_eq!(mupir(&["pir", "-S", "3", "-N", "3", "--demand", "4"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "scheme = mupir\nS = 3\nN = three\n").unwrap();
    let out = mupir(&["mupir", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn failing_audit_exits_four() {
    // the two-file, three-user oracle finds unequal view distributions
    let out = mupir(&["audit", "-S", "2", "-N", "2", "-K", "3", "--sessions", "1", "--oracle"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn passing_audit() {
    let out = mupir(&["audit", "-S", "2", "-N", "2", "-K", "2", "--sessions", "3", "--oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["oracle"]["equal"], true);
}

#[test]
fn sweep_csv_round_trips() {
    let out = mupir(&["sweep", "--s-range", "2..3", "--n-range", "2..3", "--k-range", "3..4", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = mupir_core::harness::parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        mupir_core::harness::verify_row(r).unwrap();
        assert!(r.lemma41 && r.lemma43);
    }
}

#[test]
fn single_user_session_with_import() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("files.bin");
    // 3 files of 16 blocks of 2 bytes
    let bytes: Vec<u8> = (0..96u32).map(|v| (v * 37 % 251) as u8).collect();
    std::fs::write(&raw, &bytes).unwrap();
    let out = mupir(&[
        "pir", "-S", "4", "-N", "3", "--demand", "3", "--block-bytes", "2", "--import", raw.to_str().unwrap(), "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("21/16,true,true"), "{text}");
}
