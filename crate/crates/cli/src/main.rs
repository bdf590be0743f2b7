use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use csknn::bench::{self, ExperimentConfig, VerifyOptions};
use csknn::classifier::{k_schedule, Schedule};
use csknn::cost_geometry::calibrate;
use csknn::neighbours::{build_index, omega_ratio, theta_ratio, Dataset};
use csknn::projection::{distortion, sample_projection, ProjectionKind, ProjectionSpec};
use csknn::rng::{derive_seed, streams};
use csknn::CostMatrix;

#[derive(Parser)]
#[command(name = "csknn", version, about = "Cost-sensitive k-NN rate experiments on synthetic manifolds")]
struct Cli {
    /// Base seed; overrides `base_seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Plain `key = value` experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labelled dataset from the configured distribution.
    Generate {
        #[arg(long)]
        n: usize,
    },
    /// Train once at size `n` and report excess risk.
    Evaluate {
        #[arg(long)]
        n: usize,
        /// Neighbour count; the configured schedule when absent.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the full rate experiment and fit the slope.
    Rate,
    /// Per-query distance and measure ratios under one projection.
    ProjectCheck {
        #[arg(long, default_value_t = 20)]
        h: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value = "achlioptas")]
        projection: ProjectionKind,
        /// Support samples; the first `train` are indexed, the rest are queries.
        #[arg(long, default_value_t = 500)]
        points: usize,
        #[arg(long, default_value_t = 300)]
        train: usize,
    },
    /// Run the invariant battery.
    Verify {
        /// Multiply the claimed margin constant by 10 (fault injection).
        #[arg(long)]
        corrupt_c_phi: bool,
        #[arg(long, default_value_t = 100_000)]
        validator_budget: usize,
        #[arg(long, default_value_t = 10_000)]
        concentration_trials: usize,
    },
    /// Print the calibration constants of a cost matrix.
    Calibrate {
        /// Cost-matrix file; the configured matrix when absent.
        #[arg(long)]
        cost: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_path(cli: &Cli, cfg: &ExperimentConfig) -> Option<PathBuf> {
    cli.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn summary_path(p: &Path) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = p.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    p.with_file_name(format!("{stem}_summary{ext}"))
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let out = out_path(cli, &cfg);
    match &cli.command {
        Command::Generate { n } => {
            let dist = cfg.dist.build()?;
            emit(out.as_deref(), &dist.sample(*n, cfg.seed).into_dataset()?.to_text())?;
        }
        Command::Evaluate { n, k } => {
            let dist = cfg.dist.build()?;
            let k = match k {
                Some(k) => *k,
                None => {
                    let gamma = cfg.gamma.unwrap_or(dist.manifold().intrinsic_dim());
                    let mut s = Schedule::new(cfg.k0, cfg.alpha.unwrap_or(dist.params().alpha), gamma)?;
                    if let Some(xi) = cfg.xi {
                        s = s.with_confidence(xi)?;
                    }
                    k_schedule(&s, *n)
                }
            };
            let rec = bench::run_trial(&cfg, &dist, *n, k, 0, cfg.seed)?;
            let mode = cfg.mode.search_mode();
            let text = format!(
                "family,gamma,d,n,k,mode,trial,excess_risk,misclass_prob,seed\n{},{},{},{},{},{},0,{},{},{}\n",
                dist.family_name(),
                dist.manifold().intrinsic_dim(),
                dist.manifold().ambient_dim(),
                rec.n,
                rec.k,
                mode,
                rec.excess_risk,
                rec.misclass_prob,
                rec.seed
            );
            emit(out.as_deref(), &text)?;
        }
        Command::Rate => {
            let rep = bench::run_rate(&cfg)?;
            emit(out.as_deref(), &rep.trials_csv())?;
            match &out {
                Some(p) => fs::write(summary_path(p), rep.summary_csv())?,
                None => eprint!("{}", rep.summary_csv()),
            }
            eprintln!(
                "slope {:.4} ± {:.4} (ols ± {:.4}), theory {:.4}{}",
                rep.fit.slope,
                rep.slope_stderr,
                rep.fit.stderr,
                rep.theory,
                if rep.clipped { ", clipped means present" } else { "" }
            );
            if let Some((lo, hi)) = cfg.slope_band {
                let inside = (lo..=hi).contains(&rep.fit.slope);
                eprintln!("slope band [{lo}, {hi}]: {}", if inside { "inside" } else { "outside" });
                if !inside {
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Command::ProjectCheck { h, k, projection, points, train } => {
            if *train == 0 || *train >= *points {
                bail!("need 0 < train < points");
            }
            let dist = cfg.dist.build()?;
            let sample = dist.sample(*points, cfg.seed);
            let d = sample.dim;
            let all: Vec<&[f64]> = (0..sample.len()).map(|i| sample.point(i)).collect();
            let spec = ProjectionSpec::new(*projection, d, *h, derive_seed(cfg.seed, streams::PROJECTION))?;
            let proj = sample_projection(&spec)?;
            let eps = distortion(&proj, &all)?.eps_hat;
            let data = Dataset::from_flat(
                sample.features[..train * d].to_vec(),
                d,
                sample.labels[..*train].to_vec(),
                sample.num_labels,
            )?;
            let idx = build_index(data, Some(proj))?;
            let mut text = String::from("query_id,k,exact_radius,approx_radius,theta,omega\n");
            for (qi, q) in all[*train..].iter().enumerate() {
                let exact = idx.query_exact(q, *k)?;
                let approx = idx.query_projected(q, *k)?;
                let theta = theta_ratio(&exact, &approx)?;
                let omega = omega_ratio(&exact, &approx, |r| dist.ball_measure(q, r).map_or(f64::NAN, |m| m.value))?;
                text.push_str(&format!("{qi},{k},{},{},{theta},{omega}\n", exact.radius, approx.radius));
            }
            emit(out.as_deref(), &text)?;
            eprintln!("eps_hat {eps:.6} over {points} points, h = {h}");
        }
        Command::Verify { corrupt_c_phi, validator_budget, concentration_trials } => {
            let opts = VerifyOptions {
                seed: cli.seed.unwrap_or(0),
                corrupt_c_phi: *corrupt_c_phi,
                validator_budget: *validator_budget,
                concentration_trials: *concentration_trials,
            };
            let checks = bench::verify_all(&opts);
            let mut text = String::from("check\tstatus\tslack\tdetail\n");
            for c in &checks {
                text.push_str(&c.line());
                text.push('\n');
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            text.push_str(&format!("# {} checks, {failed} failed\n", checks.len()));
            emit(out.as_deref(), &text)?;
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Calibrate { cost } => {
            let phi: CostMatrix = match cost {
                Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?.parse()?,
                None => cfg.cost.clone(),
            };
            let cal = calibrate(&phi)?;
            let labels = |v: &[csknn::Label]| v.iter().map(|l| l.get().to_string()).collect::<Vec<_>>().join(",");
            let text = format!(
                "kappa\t{}\nbeta_phi\t{}\nc_phi\t{}\nt_phi\t{}\nj_star\t{}\nk_star\t{}\nl_star\t{}\n",
                cal.kappa,
                cal.beta_phi,
                cal.c_phi,
                cal.t_phi,
                labels(&cal.j_star),
                labels(&cal.k_star),
                labels(&cal.l_star)
            );
            emit(out.as_deref(), &text)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
