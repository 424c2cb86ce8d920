//! Exit-code and manifest contracts of the command-line driver.

use std::path::Path;
use std::process::Command;

fn voltools(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_voltools")).current_dir(dir).args(args).output().unwrap()
}

fn fixtures() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").to_str().unwrap().to_string()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = voltools(tmp.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = voltools(tmp.path(), &["filter", "--input", "no-such.csv", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_params_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = voltools(
        tmp.path(),
        &["price", "--params", bad.to_str().unwrap(), "--strike", "0.17", "--maturity-days", "20"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_parameters_are_a_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    // c outside (0, 1) violates the subordinator's domain
    std::fs::write(
        &bad,
        r#"{"a":0.05,"b":0.85,"c":1.5,"d":0.77,"kappa":7.8,"r":[0.0,0.0,0.0,0.0]}"#,
    )
    .unwrap();
    let out = voltools(
        tmp.path(),
        &["price", "--params", bad.to_str().unwrap(), "--strike", "0.17", "--maturity-days", "20"],
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn manifest_echoes_resolved_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let out = voltools(
        tmp.path(),
        &[
            "price", "--params", &format!("{fx}/table6.json"), "--strike", "0.17",
            "--maturity-days", "20", "--out", "p.txt",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let man = std::fs::read_to_string(tmp.path().join("p.txt.manifest")).unwrap();
    assert!(man.starts_with("voltools-manifest v1\n"));
    for key in ["timestamp:", "threads:", "command: price", "strike: 0.17", "quadrature:"] {
        assert!(man.contains(key), "manifest missing `{key}`:\n{man}");
    }
}

#[test]
fn flags_override_config_file_values() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"truncation_l": 0.9}"#).unwrap();
    // config alone
    let out = voltools(
        tmp.path(),
        &[
            "activity", "--input", &format!("{fx}/minute_panel.csv"), "--config",
            cfg.to_str().unwrap(),
        ],
    );
    assert!(out.status.success());
    let man = std::fs::read_to_string(tmp.path().join("voltools.manifest")).unwrap();
    assert!(man.contains("truncation_l: 0.9"), "{man}");
    // flag wins over config
    let out = voltools(
        tmp.path(),
        &[
            "activity", "--input", &format!("{fx}/minute_panel.csv"), "--config",
            cfg.to_str().unwrap(), "--L", "0.4",
        ],
    );
    assert!(out.status.success());
    let man = std::fs::read_to_string(tmp.path().join("voltools.manifest")).unwrap();
    assert!(man.contains("truncation_l: 0.4"), "{man}");
}
