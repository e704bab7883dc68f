use std::path::Path;
use std::process::Command;

fn recover(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_recover")).args(args).output().unwrap()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "noise_level = -1.0\n").unwrap();
    let out = recover(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "toy-bounds"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(&cfg, "this is not toml [").unwrap();
    let out = recover(&["--config", cfg.to_str().unwrap(), "toy-bounds"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn singular_regularization_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("singular.toml");
    std::fs::write(&cfg, "[masked_2d]\nlambda = 0.0\n").unwrap();
    let out = recover(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "masked-2d"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn runs_write_expected_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = recover(&["--out", out_dir, "toy-bounds"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(header(&dir.path().join("toy_bounds_w275.csv")), "t,err_iht,err_siht,bound_iht,bound_siht");
    assert!(String::from_utf8_lossy(&out.stdout).contains("toy_bounds_summary.csv"));

    let out = recover(&["--out", out_dir, "--trials", "2", "--seed", "4", "coherence-report"]);
    assert!(out.status.success());
    assert_eq!(header(&dir.path().join("coherence_values.csv")), "quantity,set_a,set_b,value");
    assert_eq!(header(&dir.path().join("coherence_gram.csv")), "j,l,value");
}
