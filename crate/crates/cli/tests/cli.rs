use std::process::{Command, Output};

use pmc_core::entropy::EntropyResult;
use pmc_core::harness::{ExperimentReport, PrivacyAudit};
use pmc_core::scheme::TranscriptRecord;

fn pmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmc"))
        .args(args)
        .env_remove("PMC_TABLE_BOUND")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn entropy_of_a_square() {
    let out = pmc(&["entropy", "--field", "3^1", "--matrix", "[[2]]"]);
    let r: EntropyResult = serde_json::from_str(&stdout(&out)).unwrap();
    // x² on GF(3) takes 0 once and 1 twice.
    let expected = -(1.0 / 3.0) * (1.0f64 / 3.0).log2() - (2.0 / 3.0) * (2.0f64 / 3.0).log2();
    assert!((r.value_bits - expected).abs() < 1e-12);
}

#[test]
fn entropy_methods_agree() {
    let run = |method| {
        let out = pmc(&[
            "entropy",
            "--field",
            "2^3",
            "--matrix",
            "[[1,2],[3,1]]",
            "--method",
            method,
        ]);
        serde_json::from_str::<EntropyResult>(&stdout(&out))
            .unwrap()
            .value_bits
    };
    assert!((run("brute-force") - run("decomposition")).abs() < 1e-9);
}

#[test]
fn linear_entropy_over_a_ring() {
    let out = pmc(&["entropy", "--modulus", "8", "--matrix", "[[2,4],[6,8]]"]);
    let r: EntropyResult = serde_json::from_str(&stdout(&out)).unwrap();
    // The image of A over Z_8 has 8 elements.
    assert!((r.value_bits - 3.0).abs() < 1e-12);
}

#[test]
fn snf_reports_invariant_factors() {
    let out = pmc(&["snf", "--matrix", "[[2,4],[6,8]]"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["invariant_factors"], serde_json::json!([2, 4]));
    assert_eq!(v["rank"], 2);
}

#[test]
fn matrix_may_come_from_a_file() {
    let path = std::env::temp_dir().join(format!("pmc-cli-{}.json", std::process::id()));
    std::fs::write(&path, "[[3, 6]]").unwrap();
    let out = pmc(&["snf", "--matrix", path.to_str().unwrap()]);
    std::fs::remove_file(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["invariant_factors"], serde_json::json!([3]));
}

#[test]
fn capacity_of_pir() {
    let out = pmc(&["capacity", "--n", "2", "--f", "2"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["c_pir"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn two_function_capacity_is_reported() {
    let out = pmc(&["capacity", "--matrix", "[[2,1],[1,2]]", "--field", "2^2"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["two_function_capacity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn scheme_run_decodes_and_is_reproducible() {
    let args = [
        "scheme-run",
        "--field",
        "7^1",
        "--matrix",
        "[[1,2],[2,1],[1,1]]",
        "--n",
        "2",
        "--v",
        "1",
        "--seed",
        "11",
    ];
    let first = stdout(&pmc(&args));
    assert_eq!(first, stdout(&pmc(&args)));
    let t: TranscriptRecord = serde_json::from_str(&first).unwrap();
    assert_eq!(t.desired, 1);
    assert_eq!(t.config.mu, 3);
    assert_eq!(t.matches_direct, Some(true));
    assert_eq!(t.storage_seed, Some(11));
}

#[test]
fn scheme_run_writes_to_a_file() {
    let path = std::env::temp_dir().join(format!("pmc-run-{}.json", std::process::id()));
    let out = pmc(&[
        "scheme-run",
        "--field",
        "5^1",
        "--matrix",
        "[[1],[2]]",
        "--n",
        "3",
        "--v",
        "0",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    let t: TranscriptRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(t.config.n, 3);
}

#[test]
fn convergence_json_and_csv() {
    let base = [
        "convergence",
        "--matrix",
        "[[1,2],[2,1]]",
        "--n",
        "2",
        "--q-grid",
        "3,4,5",
        "--trials",
        "200",
        "--seed",
        "9",
    ];
    let json = stdout(&pmc(&base));
    assert_eq!(json, stdout(&pmc(&base)));
    let reports: Vec<ExperimentReport> = serde_json::from_str(&json).unwrap();
    assert_eq!(reports.len(), 3);
    assert!(reports.iter().all(|r| r.trials == 200 && r.seed == 9));

    let csv = stdout(&pmc(&[&base[..], &["--format", "csv"]].concat()));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "q,n,mu,r,trials,avg_cost,rate,c_pir_r,failure_rate"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("3,2,2,2,200,"));
}

#[test]
fn privacy_audit_flags_the_leak() {
    let base = [
        "privacy-audit",
        "--matrix",
        "[[1,0],[0,1]]",
        "--n",
        "2",
        "--mode",
        "exhaustive",
    ];
    let audit: PrivacyAudit = serde_json::from_str(&stdout(&pmc(&base))).unwrap();
    assert!(audit.passed);
    let leaky = stdout(&pmc(&[&base[..], &["--leaky"]].concat()));
    let audit: PrivacyAudit = serde_json::from_str(&leaky).unwrap();
    assert!(!audit.passed);
}

#[test]
fn exhaustive_audit_respects_the_budget() {
    let out = pmc(&[
        "privacy-audit",
        "--matrix",
        "[[1,0],[0,1],[1,1]]",
        "--n",
        "3",
        "--mode",
        "exhaustive",
        "--budget",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn table_bound_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_pmc"))
        .args(["entropy", "--field", "2^8", "--matrix", "[[1,1],[1,2]]"])
        .env("PMC_TABLE_BOUND", "16")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let bad_field = pmc(&["entropy", "--field", "6^1", "--matrix", "[[1]]"]);
    assert_eq!(bad_field.status.code(), Some(1));
    let bad_matrix = pmc(&["snf", "--matrix", "[[1,2],[3]]"]);
    assert_eq!(bad_matrix.status.code(), Some(1));
    let bad_index = pmc(&[
        "scheme-run",
        "--field",
        "5^1",
        "--matrix",
        "[[1],[2]]",
        "--n",
        "2",
        "--v",
        "2",
    ]);
    assert_eq!(bad_index.status.code(), Some(1));
    let bad_grid = pmc(&[
        "convergence",
        "--matrix",
        "[[1]]",
        "--n",
        "2",
        "--q-grid",
        "6",
    ]);
    assert_eq!(bad_grid.status.code(), Some(1));
}

#[test]
fn unknown_flags_are_rejected() {
    let out = pmc(&["snf", "--matrix", "[[1]]", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_lists_the_flags() {
    let help = stdout(&pmc(&["scheme-run", "--help"]));
    for flag in [
        "--field",
        "--matrix",
        "--n",
        "--v",
        "--seed",
        "--storage-seed",
        "--output",
    ] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
    let top = stdout(&pmc(&["--help"]));
    for cmd in [
        "entropy",
        "snf",
        "scheme-run",
        "convergence",
        "privacy-audit",
        "capacity",
    ] {
        assert!(top.contains(cmd), "{cmd} missing from help");
    }
}
