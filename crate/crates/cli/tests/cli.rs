use std::path::PathBuf;
use std::process::Command;

fn csknn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csknn"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn calibrate_prints_zero_one_constants() {
    let out = csknn().arg("calibrate").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("kappa\t0.5\n") && text.contains("c_phi\t2\n") && text.contains("j_star\t1,2\n"), "{text}");
}

#[test]
fn calibrate_rejects_unreasonable_matrix() {
    let p = tmp("bad_cost.txt");
    std::fs::write(&p, "2\n0 1\n0 0\n").unwrap();
    let out = csknn().args(["calibrate", "--cost"]).arg(&p).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn generate_writes_a_dataset_file() {
    let p = tmp("data.txt");
    let cfg = tmp("gen.cfg");
    std::fs::write(&cfg, "manifold = sphere 1 2 7 0\n").unwrap();
    let st = csknn().args(["--seed", "3", "--config"]).arg(&cfg).arg("--out").arg(&p).args(["generate", "--n", "25"]).status().unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("25 7 2\n"));
    let data: csknn::neighbours::Dataset = text.parse().unwrap();
    assert_eq!((data.len(), data.dim()), (25, 7));
}

#[test]
fn evaluate_and_project_check_emit_csv() {
    let out = csknn().args(["--seed", "1", "evaluate", "--n", "300"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("family,gamma,d,n,k,mode,trial,excess_risk,misclass_prob,seed"));
    assert!(lines.next().unwrap().starts_with("benign,1,20,300,45,exact,0,"));

    let out = csknn().args(["project-check", "--h", "10", "--points", "120", "--train", "100"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("query_id,k,exact_radius,approx_radius,theta,omega\n"));
    assert_eq!(text.lines().count(), 21);
    for line in text.lines().skip(1) {
        let theta: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!(theta >= 1.0);
    }
}

#[test]
fn rate_writes_trials_and_summary() {
    let cfg = tmp("small.cfg");
    std::fs::write(&cfg, "n_grid = 64, 128\ntrials = 2\nm_test = 300\n").unwrap();
    let out = tmp("small.csv");
    let st = csknn().arg("--config").arg(&cfg).arg("--out").arg(&out).arg("rate").status().unwrap();
    assert!(st.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 5);
    let summary = std::fs::read_to_string(tmp("small_summary.csv")).unwrap();
    assert!(summary.starts_with("n,mean_excess,stderr,k,slope_so_far\n64,"));
}

#[test]
fn verify_fails_when_margin_constant_is_corrupted() {
    let args = ["verify", "--corrupt-c-phi", "--validator-budget", "1000", "--concentration-trials", "200"];
    let out = csknn().args(args).output().unwrap();
    assert!(!out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("check\tstatus\tslack\tdetail\n"));
    let sweep = text.lines().find(|l| l.starts_with("calibration-sweep\t")).unwrap();
    assert!(sweep.contains("\tFAIL\t"), "{sweep}");
}

#[test]
fn bad_config_is_reported() {
    let cfg = tmp("bad.cfg");
    std::fs::write(&cfg, "n_grid = 64\n").unwrap();
    let out = csknn().arg("--config").arg(&cfg).arg("rate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
