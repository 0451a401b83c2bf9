//! CLI-level behavior: config validation, output determinism, manifest
//! inventory, and the empty-sweep contract.

use std::path::Path;
use std::process::Command;

use antidot_cli::config::RunConfig;

const BASE: &str = r#"
[dispersion]
kind = "dirac"

[potential]
shape = "square"
side = 1.0
amplitude = [0.0, 0.0, 1.0]

[run]
alpha = 0.1
beta = 0.2
cutoff = 3
kgrid = 6

[verify]
cutoff = 3
kgrid = 6
lattice = false
"#;

fn run(cmd: &str, config: &Path, out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_antidot"))
        .args([
            cmd,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .expect("spawn antidot")
}

#[test]
fn config_rejections_name_key_and_constraint() {
    let err = RunConfig::from_str(&BASE.replace("alpha = 0.1", "alpha = 0.6")).unwrap_err();
    assert!(err.to_string().contains("alpha"), "{err}");
    assert!(err.to_string().contains("(0, 0.5]"), "{err}");

    let err = RunConfig::from_str(&BASE.replace("beta = 0.2", "beta = -1")).unwrap_err();
    assert!(err.to_string().contains("beta"), "{err}");

    let err = RunConfig::from_str(&format!("{BASE}\nnot_a_key = 3\n")).unwrap_err();
    assert!(err.to_string().contains("not_a_key") || err.to_string().contains("unknown"), "{err}");
}

#[test]
fn empty_sweep_writes_header_only_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg_path,
        format!("{BASE}\n[sweep]\nalphas = []\nbetas = [0.2]\n"),
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = run("sweep", &cfg_path, &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv, "alpha,beta,N,n_k,width,ratio,runtime_s\n");
}

#[test]
fn gap_on_free_case_reports_zero_width() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(&cfg_path, BASE.replace("beta = 0.2", "beta = 0.0")).unwrap();
    let out = dir.path().join("out");
    let res = run("gap", &cfg_path, &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("gap_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["width"].as_f64().unwrap(), 0.0);
}

#[test]
fn manifest_lists_files_with_matching_hashes() {
    use sha2::{Digest, Sha256};
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(&cfg_path, BASE).unwrap();
    let out = dir.path().join("out");
    let res = run("gap", &cfg_path, &out);
    assert!(res.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let path = out.join(f["path"].as_str().unwrap());
        let body = std::fs::read(&path).unwrap();
        let mut hasher = Sha256::new();
        hasher.update(&body);
        let digest = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        assert_eq!(digest, f["sha256"].as_str().unwrap(), "hash mismatch for {}", path.display());
        assert_eq!(body.len() as u64, f["bytes"].as_u64().unwrap());
    }
    // config echo carries the effective defaults
    assert_eq!(manifest["config"]["run"]["seed"].as_u64().unwrap(), 42);
    assert_eq!(manifest["command"], "gap");
}

#[test]
fn bands_csv_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(&cfg_path, BASE).unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    assert!(run("bands", &cfg_path, &out1).status.success());
    assert!(run("bands", &cfg_path, &out2).status.success());
    let a = std::fs::read(out1.join("bands.csv")).unwrap();
    let b = std::fs::read(out2.join("bands.csv")).unwrap();
    assert_eq!(a, b);
}
