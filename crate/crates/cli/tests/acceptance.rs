//! Acceptance run: one pass/fail line per criterion, nonzero exit if any fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode, Stdio};
use std::time::Instant;

use csknn::bench::{
    backend_equivalence, bayes_risk_check, calibration_sweep, concentration_battery, geometry_battery,
    hard_validator_battery, jl_chain, majority_equivalence, run_rate, Check, ExperimentConfig, JlConfig, ModeConfig,
    RateReport,
};
use csknn::manifold_lab::EmbeddedManifold;
use csknn::projection::ProjectionKind;

struct Outcome {
    pass: bool,
    detail: String,
}

fn from_checks(checks: &[Check]) -> Outcome {
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(Check::line).collect();
    let min_slack = checks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks, min slack {min_slack:.3e}", checks.len())
        } else {
            format!("failed: {}", failed.join(" | "))
        },
    }
}

fn rate(manifold: EmbeddedManifold, mode: ModeConfig) -> RateReport {
    let mut cfg = ExperimentConfig::default();
    cfg.dist.manifold = manifold;
    cfg.mode = mode;
    run_rate(&cfg).expect("rate experiment")
}

fn describe(r: &RateReport) -> String {
    format!("slope {:.4} ± {:.4} (theory {:.4})", r.fit.slope, r.slope_stderr, r.theory)
}

fn criterion_10() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let cfg = dir.join("rate.cfg");
    std::fs::write(&cfg, "n_grid = 256, 512, 1024, 2048\ntrials = 6\nm_test = 5000\nbase_seed = 42\n").expect("config");
    let mut outputs = Vec::new();
    for (i, threads) in [1, 1, 8, 8].into_iter().enumerate() {
        let out = dir.join(format!("run{i}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_csknn"))
            .args(["--threads", &threads.to_string(), "--seed", "42", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .arg("rate")
            .stderr(Stdio::null())
            .status()
            .expect("spawn csknn");
        if !status.success() {
            return Outcome { pass: false, detail: format!("run {i} exited with {status}") };
        }
        let summary = dir.join(format!("run{i}_summary.csv"));
        outputs.push((std::fs::read(&out).expect("csv"), std::fs::read(&summary).expect("summary csv")));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    Outcome {
        pass: same,
        detail: format!("4 runs (1,1,8,8 threads), {} trial-CSV bytes, identical = {same}", outputs[0].0.len()),
    }
}

fn main() -> ExitCode {
    let mut lines: Vec<(usize, Outcome, f64)> = Vec::new();
    let mut record = |id: usize, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("criterion {id:>2}: {} ({secs:.1}s) {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        lines.push((id, o, secs));
    };

    let mut circle_run = None;
    record(1, &mut || {
        let circle = rate(EmbeddedManifold::circle(1.0, 20, 0).unwrap(), ModeConfig::Exact);
        let o = Outcome {
            pass: (-0.87..=-0.47).contains(&circle.fit.slope),
            detail: format!("circle d=20: {} band [-0.87, -0.47]", describe(&circle)),
        };
        circle_run = Some(circle);
        o
    });
    let circle = circle_run.expect("criterion 1 ran");

    record(2, &mut || {
        let sphere = rate(EmbeddedManifold::sphere(1.0, 20, 0).unwrap(), ModeConfig::Exact);
        let in_band = (-0.70..=-0.30).contains(&sphere.fit.slope);
        let ordered = circle.fit.slope < sphere.fit.slope;
        Outcome {
            pass: in_band && ordered,
            detail: format!(
                "sphere d=20: {} band [-0.70, -0.30]; circle {:.4} < sphere {:.4}: {ordered}",
                describe(&sphere),
                circle.fit.slope,
                sphere.fit.slope
            ),
        }
    });

    record(3, &mut || {
        let m = EmbeddedManifold::circle(1.0, 200, 0).unwrap();
        let exact = rate(m.clone(), ModeConfig::Exact);
        let proj = rate(m, ModeConfig::Projected { h: 20, kind: ProjectionKind::Achlioptas });
        let n_max = *ExperimentConfig::default().n_grid.last().unwrap();
        let (e, p) = (exact.mean_at(n_max).unwrap(), proj.mean_at(n_max).unwrap());
        let gap = (proj.fit.slope - exact.fit.slope).abs();
        Outcome {
            pass: gap <= 0.15 && p <= 2.0 * e,
            detail: format!(
                "d=200 exact {:.4}, projected h=20 {:.4}, |gap| {gap:.4} <= 0.15; excess at n={n_max}: {p:.3e} <= 2 x {e:.3e}",
                exact.fit.slope, proj.fit.slope
            ),
        }
    });

    record(4, &mut || {
        let rep = jl_chain(&JlConfig::default()).expect("jl chain");
        let mut o = from_checks(&rep.checks);
        let med: Vec<String> = rep.medians.iter().map(|(h, e)| format!("h={h}:{e:.3}")).collect();
        o.detail = format!("median eps {}; {}", med.join(" "), o.detail);
        o
    });

    record(5, &mut || from_checks(&[calibration_sweep(200, 0, 1.0)]));
    record(6, &mut || from_checks(&geometry_battery(0).expect("geometry battery")));
    record(7, &mut || from_checks(&hard_validator_battery(100_000, 0).expect("validators")));
    record(8, &mut || from_checks(&concentration_battery(10_000, 0).expect("concentration")));
    record(9, &mut || {
        from_checks(&[
            bayes_risk_check().expect("bayes risk"),
            majority_equivalence(1000, 0).expect("majority vote"),
            backend_equivalence(1000, 0).expect("backend"),
        ])
    });
    record(10, &mut criterion_10);

    let failed = lines.iter().filter(|l| !l.1.pass).count();
    let total: f64 = lines.iter().map(|l| l.2).sum();
    println!("acceptance: {} of {} criteria passed in {total:.0}s", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
