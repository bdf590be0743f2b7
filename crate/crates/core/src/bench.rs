//! Experiment drivers: rate experiments, slope fits, concentration checks
//! and the verification battery.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;

use crate::classifier::{estimate_eta, k_schedule, majority_vote, predict, evaluate, KnnClassifier, Schedule};
use crate::cost_geometry::{calibrate, is_reasonable, margin, optimal_labels, two_point, CostMatrix, Label};
use crate::error::{invalid, Error, Result};
use crate::hard_family::{
    build_hard, hard_default_params, hard_params, key_values, DistributionSpec, SyntheticDistribution, ValidationKind,
};
use crate::manifold_lab::{
    check_intersection_bound, check_volume_bounds, covering_number, covering_ceiling, doubling_constant,
    EmbeddedManifold,
};
use crate::neighbours::{build_index, omega_ratio, theta_ratio, Backend, Dataset, NeighbourIndex, SearchMode};
use crate::numeric::{mean, pairwise_sum, sample_variance};
use crate::projection::{distortion, sample_projection, theta_from_epsilon, ProjectionKind, ProjectionSpec};
use crate::rng::{self, derive_seed, streams};

/// `-α(1+β)/(2α+γ)`.
pub fn theory_exponent(alpha: f64, beta: f64, gamma: usize) -> f64 {
    -alpha * (1.0 + beta) / (2.0 * alpha + gamma as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeConfig {
    Exact,
    Projected { h: usize, kind: ProjectionKind },
}

impl ModeConfig {
    pub fn search_mode(&self) -> SearchMode {
        match self {
            ModeConfig::Exact => SearchMode::Exact,
            ModeConfig::Projected { .. } => SearchMode::Projected,
        }
    }
}

/// A full rate experiment.
///
/// Smoothness constants left as `None` are taken from the distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dist: DistributionSpec,
    pub cost: CostMatrix,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub k0: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<usize>,
    /// Confidence level of the schedule.
    pub xi: Option<f64>,
    /// Failure probability allowed for the projection; recorded only.
    pub delta: f64,
    pub mode: ModeConfig,
    pub m_test: usize,
    pub seed: u64,
    pub slope_band: Option<(f64, f64)>,
    /// Where the CLI writes the trial CSV.
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dist: DistributionSpec {
                family: "benign".into(),
                manifold: EmbeddedManifold::circle(1.0, 20, 0).expect("valid manifold"),
                seed: 0,
                m_freq: Some(1),
                r: None,
                sigma: None,
                cost: None,
                eta: None,
                params: None,
            },
            cost: CostMatrix::zero_one(2).expect("two labels"),
            n_grid: vec![512, 1024, 2048, 4096, 8192, 16384],
            trials: 20,
            k0: 1.0,
            alpha: None,
            beta: None,
            gamma: None,
            xi: None,
            delta: 0.01,
            mode: ModeConfig::Exact,
            m_test: 20_000,
            seed: 0,
            slope_band: None,
            out: None,
        }
    }
}

const EXPERIMENT_KEYS: [&str; 18] = [
    "n_grid", "trials", "k0", "alpha", "beta", "gamma", "xi", "delta", "mode", "h", "projection", "m_test",
    "base_seed", "slope_min", "slope_max", "cost", "cost_path", "out",
];

impl ExperimentConfig {
    /// Seed of trial `trial` at grid position `n_index`.
    pub fn trial_seed(&self, n_index: usize, trial: usize) -> u64 {
        self.seed.wrapping_add(1_000_000u64.wrapping_mul(n_index as u64)).wrapping_add(trial as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.len() < 2 {
            return Err(invalid("n_grid needs at least two sizes"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] == 0 {
            return Err(invalid("n_grid must be positive and strictly increasing"));
        }
        if self.trials == 0 || self.m_test == 0 {
            return Err(invalid("trials and m_test must be positive"));
        }
        if let ModeConfig::Projected { h, .. } = self.mode {
            if h == 0 || h > self.dist.manifold.ambient_dim() {
                return Err(invalid("projected dimension must lie in 1..=d"));
            }
        }
        Ok(())
    }

    /// Parse `key = value` text. Experiment keys are `n_grid` (comma
    /// separated), `trials`, `k0`, `alpha`, `beta`, `gamma`, `xi`, `delta`,
    /// `mode` (exact or projected), `h`, `projection`, `m_test`, `base_seed`,
    /// `slope_min`, `slope_max`, `out`, `cost` (rows separated by `;`) and
    /// `cost_path` (a cost-matrix file). All other keys describe the
    /// distribution. Unset keys keep their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::parse(text, None)
    }

    /// Read a config file; `cost_path` is resolved against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let pairs = key_values(text)?;
        let mut cost_text = None;
        let mut cfg = ExperimentConfig::default();
        let mut dist_pairs: Vec<(usize, &str, &str)> = Vec::new();
        let mut h = None;
        let mut kind = ProjectionKind::Achlioptas;
        let mut projected = false;
        let (mut smin, mut smax) = (None, None);
        for &(line, key, value) in &pairs {
            let perr = |msg: String| Error::Parse { line, msg };
            let f = |v: &str| v.parse::<f64>().map_err(|e| perr(format!("{key}: {e}")));
            let u = |v: &str| v.parse::<u64>().map_err(|e| perr(format!("{key}: {e}")));
            match key {
                "n_grid" => {
                    cfg.n_grid = value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>().map_err(|e| perr(format!("n_grid: {e}"))))
                        .collect::<Result<_>>()?
                }
                "trials" => cfg.trials = u(value)? as usize,
                "k0" => cfg.k0 = f(value)?,
                "alpha" => cfg.alpha = Some(f(value)?),
                "beta" => cfg.beta = Some(f(value)?),
                "gamma" => cfg.gamma = Some(u(value)? as usize),
                "xi" => cfg.xi = Some(f(value)?),
                "delta" => cfg.delta = f(value)?,
                "mode" => match value {
                    "exact" => projected = false,
                    "projected" => projected = true,
                    other => return Err(perr(format!("unknown mode `{other}`"))),
                },
                "h" => h = Some(u(value)? as usize),
                "projection" => kind = value.parse()?,
                "m_test" => cfg.m_test = u(value)? as usize,
                "base_seed" => cfg.seed = u(value)?,
                "slope_min" => smin = Some(f(value)?),
                "slope_max" => smax = Some(f(value)?),
                "cost" => {
                    let rows: Vec<&str> = value.split(';').map(str::trim).collect();
                    cfg.cost = format!("{}\n{}\n", rows.len(), rows.join("\n")).parse()?;
                    dist_pairs.push((line, key, value));
                }
                "cost_path" => {
                    let p = base.map_or_else(|| PathBuf::from(value), |b| b.join(value));
                    let phi: CostMatrix = std::fs::read_to_string(&p)?.parse()?;
                    let rows: Vec<String> =
                        phi.rows().iter().map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")).collect();
                    cost_text = Some((line, rows.join("; ")));
                    cfg.cost = phi;
                }
                "out" => cfg.out = Some(value.to_string()),
                _ => dist_pairs.push((line, key, value)),
            }
        }
        if let Some((line, text)) = &cost_text {
            dist_pairs.push((*line, "cost", text.as_str()));
        }
        if !dist_pairs.is_empty() {
            let has = |k: &str| dist_pairs.iter().any(|p| p.1 == k);
            let default_manifold = cfg.dist.manifold.to_text();
            let mut merged = dist_pairs.clone();
            if !has("family") {
                merged.push((0, "family", "benign"));
            }
            if !has("manifold") {
                merged.push((0, "manifold", default_manifold.as_str()));
            }
            cfg.dist = DistributionSpec::from_pairs(merged)?;
            if cfg.dist.family != "hard" {
                cfg.dist.cost = None;
            }
            if cfg.dist.family == "benign" && cfg.dist.m_freq.is_none() {
                cfg.dist.m_freq = Some(1);
            }
        }
        if projected {
            cfg.mode = ModeConfig::Projected { h: h.ok_or_else(|| invalid("projected mode needs `h`"))?, kind };
        }
        cfg.slope_band = match (smin, smax) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(invalid("give both slope_min and slope_max")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = self.dist.to_text();
        if self.dist.cost.is_none() {
            let rows: Vec<String> =
                self.cost.rows().iter().map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")).collect();
            let _ = writeln!(s, "cost = {}", rows.join("; "));
        }
        let grid: Vec<String> = self.n_grid.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "n_grid = {}", grid.join(","));
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "k0 = {}", self.k0);
        for (k, v) in [("alpha", self.alpha), ("beta", self.beta), ("xi", self.xi)] {
            if let Some(v) = v {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        if let Some(g) = self.gamma {
            let _ = writeln!(s, "gamma = {g}");
        }
        let _ = writeln!(s, "delta = {}", self.delta);
        match self.mode {
            ModeConfig::Exact => {
                let _ = writeln!(s, "mode = exact");
            }
            ModeConfig::Projected { h, kind } => {
                let _ = writeln!(s, "mode = projected\nh = {h}\nprojection = {kind}");
            }
        }
        let _ = writeln!(s, "m_test = {}", self.m_test);
        let _ = writeln!(s, "base_seed = {}", self.seed);
        if let Some((a, b)) = self.slope_band {
            let _ = writeln!(s, "slope_min = {a}\nslope_max = {b}");
        }
        if let Some(o) = &self.out {
            let _ = writeln!(s, "out = {o}");
        }
        s
    }

    /// True if `key` is an experiment key rather than a distribution key.
    pub fn is_experiment_key(key: &str) -> bool {
        EXPERIMENT_KEYS.contains(&key)
    }
}

/// One `(n, trial)` outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub k: usize,
    pub trial: usize,
    pub seed: u64,
    pub excess_risk: f64,
    pub misclass_prob: f64,
}

/// Aggregate over trials at one sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub k: usize,
    pub mean_excess: f64,
    /// Standard error of `mean_excess` across trials.
    pub stderr: f64,
    pub mean_misclass: f64,
    /// Slope fitted on this and all earlier rows; NaN for the first row.
    pub slope_so_far: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual-based standard error of the slope; NaN with two points.
    pub stderr: f64,
}

/// Smallest mean used in the log fit.
pub const LOG_FLOOR: f64 = 1e-6;

/// Ordinary least squares of `ln value` on `ln n`.
pub fn fit_slope(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    if pairs.len() < 2 {
        return Err(invalid("need at least two points"));
    }
    if let Some(&(n, v)) = pairs.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(invalid(format!("sizes and values must be positive, got ({n}, {v})")));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (xm, ym) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    if sxx == 0.0 {
        return Err(invalid("sizes must not all be equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let stderr = if pairs.len() > 2 {
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (pairs.len() - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(SlopeFit { slope, intercept, stderr })
}

/// Results of [`run_rate`].
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub family: String,
    pub gamma: usize,
    pub ambient_dim: usize,
    pub mode: String,
    pub records: Vec<TrialRecord>,
    pub rows: Vec<RateRow>,
    pub fit: SlopeFit,
    /// Slope standard error propagated from the per-size standard errors;
    /// shrinks like `1/√trials`.
    pub slope_stderr: f64,
    pub theory: f64,
    /// Whether any mean was raised to [`LOG_FLOOR`] before fitting.
    pub clipped: bool,
}

impl RateReport {
    /// Aggregate per-trial records (sorted by `n` then trial).
    pub fn from_records(
        records: Vec<TrialRecord>,
        theory: f64,
        family: &str,
        gamma: usize,
        ambient_dim: usize,
        mode: &str,
    ) -> Result<Self> {
        let mut sizes: Vec<usize> = records.iter().map(|r| r.n).collect();
        sizes.dedup();
        let mut rows: Vec<RateRow> = Vec::new();
        let mut pairs = Vec::new();
        let mut clipped = false;
        for &n in &sizes {
            let at: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n).collect();
            let ex: Vec<f64> = at.iter().map(|r| r.excess_risk).collect();
            let mc: Vec<f64> = at.iter().map(|r| r.misclass_prob).collect();
            let mean_excess = mean(&ex);
            let stderr = (sample_variance(&ex) / ex.len() as f64).sqrt();
            if mean_excess < LOG_FLOOR {
                clipped = true;
            }
            pairs.push((n as f64, mean_excess.max(LOG_FLOOR)));
            let slope_so_far = if pairs.len() >= 2 { fit_slope(&pairs)?.slope } else { f64::NAN };
            rows.push(RateRow { n, k: at[0].k, mean_excess, stderr, mean_misclass: mean(&mc), slope_so_far });
        }
        let fit = fit_slope(&pairs)?;
        let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
        let xm = mean(&xs);
        let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        let var: f64 = rows
            .iter()
            .zip(&xs)
            .zip(&pairs)
            .map(|((row, x), p)| ((x - xm) / sxx).powi(2) * (row.stderr / p.1).powi(2))
            .sum();
        Ok(RateReport {
            family: family.to_string(),
            gamma,
            ambient_dim,
            mode: mode.to_string(),
            records,
            rows,
            fit,
            slope_stderr: var.sqrt(),
            theory,
            clipped,
        })
    }

    /// `family,gamma,d,n,k,mode,trial,excess_risk,misclass_prob,seed`.
    pub fn trials_csv(&self) -> String {
        let mut s = String::from("family,gamma,d,n,k,mode,trial,excess_risk,misclass_prob,seed\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                self.family, self.gamma, self.ambient_dim, r.n, r.k, self.mode, r.trial, r.excess_risk, r.misclass_prob, r.seed
            );
        }
        s
    }

    /// `n,mean_excess,stderr,k,slope_so_far`.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("n,mean_excess,stderr,k,slope_so_far\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.n, r.mean_excess, r.stderr, r.k, r.slope_so_far);
        }
        s
    }

    pub fn mean_at(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).map(|r| r.mean_excess)
    }
}

/// Train, index and evaluate once.
pub fn run_trial(
    cfg: &ExperimentConfig,
    dist: &SyntheticDistribution,
    n: usize,
    k: usize,
    trial: usize,
    seed: u64,
) -> Result<TrialRecord> {
    let train = dist.sample(n, seed).into_dataset()?;
    let proj = match cfg.mode {
        ModeConfig::Exact => None,
        ModeConfig::Projected { h, kind } => {
            let spec = ProjectionSpec::new(kind, train.dim(), h, derive_seed(seed, streams::PROJECTION))?;
            Some(sample_projection(&spec)?)
        }
    };
    let index = build_index(train, proj)?;
    let clf = KnnClassifier { index: &index, phi: &cfg.cost, k, mode: cfg.mode.search_mode() };
    let ev = evaluate(&clf, &cfg.cost, dist, cfg.m_test, derive_seed(seed, streams::TEST))?;
    Ok(TrialRecord { n, k, trial, seed, excess_risk: ev.excess_risk, misclass_prob: ev.misclass_prob })
}

/// Run every `(n, trial)` of the experiment and fit the rate.
///
/// Trials run in parallel; results are collected in grid order, so the
/// report is identical for any thread count.
pub fn run_rate(cfg: &ExperimentConfig) -> Result<RateReport> {
    cfg.validate()?;
    let dist = cfg.dist.build()?;
    if cfg.cost.num_labels() != dist.num_labels() {
        return Err(Error::DimensionMismatch { expected: dist.num_labels(), got: cfg.cost.num_labels() });
    }
    let gamma = cfg.gamma.unwrap_or(dist.manifold().intrinsic_dim());
    let alpha = cfg.alpha.unwrap_or(dist.params().alpha);
    let beta = cfg.beta.unwrap_or(dist.params().beta);
    let mut schedule = Schedule::new(cfg.k0, alpha, gamma)?;
    if let Some(xi) = cfg.xi {
        schedule = schedule.with_confidence(xi)?;
    }
    let jobs: Vec<(usize, usize, usize, u64)> = cfg
        .n_grid
        .iter()
        .enumerate()
        .flat_map(|(ni, &n)| (0..cfg.trials).map(move |t| (n, ni, t)))
        .map(|(n, ni, t)| (n, k_schedule(&schedule, n), t, cfg.trial_seed(ni, t)))
        .collect();
    let records: Vec<TrialRecord> =
        jobs.par_iter().map(|&(n, k, t, seed)| run_trial(cfg, &dist, n, k, t, seed)).collect::<Result<_>>()?;
    let mode = match cfg.mode {
        ModeConfig::Exact => "exact",
        ModeConfig::Projected { .. } => "projected",
    };
    RateReport::from_records(
        records,
        theory_exponent(alpha, beta, gamma),
        dist.family_name(),
        gamma,
        dist.manifold().ambient_dim(),
        mode,
    )
}

/// A named pass/fail check with its measured slack (nonnegative on pass).
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub slack: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, slack: f64, detail: String) -> Self {
        Check { name: name.to_string(), pass: slack >= 0.0, slack, detail }
    }

    /// Tab-separated `name status slack detail`.
    pub fn line(&self) -> String {
        format!("{}\t{}\t{:.6e}\t{}", self.name, if self.pass { "pass" } else { "FAIL" }, self.slack, self.detail)
    }
}

/// Empirical frequency of a rare event against an upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub empirical: f64,
    pub bound: f64,
    /// Binomial standard deviation at the bound.
    pub sigma: f64,
    pub trials: usize,
    pub pass: bool,
}

impl BoundCheck {
    fn from_failures(failures: usize, trials: usize, bound: f64) -> Self {
        let empirical = failures as f64 / trials as f64;
        let b = bound.min(1.0);
        let sigma = (b * (1.0 - b) / trials as f64).sqrt();
        BoundCheck { empirical, bound, sigma, trials, pass: empirical <= bound + 3.0 * sigma }
    }

    pub fn slack(&self) -> f64 {
        self.bound + 3.0 * self.sigma - self.empirical
    }
}

/// Frequency with which the k-NN radius of a fresh point exceeds the
/// `p`-quantile radius `r_p(x)`, against `exp(-kξ²/2)` with
/// `ξ = 1 - k/(np)`.
pub fn check_radius_concentration(
    dist: &SyntheticDistribution,
    n: usize,
    k: usize,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<BoundCheck> {
    if !(p > 0.0 && p <= 1.0) || k == 0 || trials == 0 {
        return Err(invalid("need p in (0, 1], k >= 1 and trials >= 1"));
    }
    let xi = 1.0 - k as f64 / (n as f64 * p);
    if xi < 0.0 {
        return Err(invalid(format!("k = {k} exceeds n·p = {}", n as f64 * p)));
    }
    let bound = (-(k as f64) * xi * xi / 2.0).exp();
    let fails: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, t as u64);
            let (x, _) = dist.sample_with_conditionals(1, derive_seed(s, streams::TEST));
            let rp = dist.quantile_radius(&x, p)?;
            let (train, _) = dist.sample_with_conditionals(n, s);
            let inside = train.chunks_exact(x.len()).filter(|y| crate::numeric::dist(y, &x) <= rp).count();
            Ok(inside < k)
        })
        .collect::<Result<_>>()?;
    Ok(BoundCheck::from_failures(fails.iter().filter(|&&f| f).count(), trials, bound))
}

/// Frequency with which the neighbour label frequencies deviate from the
/// neighbours' mean conditional by `delta` or more in sup norm, against
/// `2L exp(-2kδ²)`.
pub fn check_label_concentration(
    dist: &SyntheticDistribution,
    n: usize,
    k: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<BoundCheck> {
    if k == 0 || k > n || !(delta > 0.0) || trials == 0 {
        return Err(invalid("need 1 <= k <= n, delta > 0 and trials >= 1"));
    }
    let l = dist.num_labels();
    let bound = 2.0 * l as f64 * (-2.0 * k as f64 * delta * delta).exp();
    let fails: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, t as u64);
            let (x, _) = dist.sample_with_conditionals(1, derive_seed(s, streams::TEST));
            let sample = dist.sample(n, s);
            let (_, etas) = dist.sample_with_conditionals(n, s);
            let data = sample.into_dataset()?;
            let idx = NeighbourIndex::with_backend(data, None, Backend::BruteForce)?;
            let res = idx.query_exact(&x, k)?;
            let labels: Vec<Label> = res.indices.iter().map(|&i| idx.dataset().label(i)).collect();
            let eta_hat = estimate_eta(&labels, l)?;
            let dev = (0..l)
                .map(|c| {
                    let avg = pairwise_sum(&res.indices.iter().map(|&i| etas[i].weights()[c]).collect::<Vec<_>>()) / k as f64;
                    (eta_hat.weights()[c] - avg).abs()
                })
                .fold(0.0, f64::max);
            Ok(dev >= delta)
        })
        .collect::<Result<_>>()?;
    Ok(BoundCheck::from_failures(fails.iter().filter(|&&f| f).count(), trials, bound))
}

/// Both concentration checks with a shared `n` and `k`.
pub fn verify_concentration(
    dist: &SyntheticDistribution,
    n: usize,
    k: usize,
    p: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<(BoundCheck, BoundCheck)> {
    Ok((
        check_radius_concentration(dist, n, k, p, trials, seed)?,
        check_label_concentration(dist, n, k, delta, trials, derive_seed(seed, streams::AUX))?,
    ))
}

/// Random `L × L` cost matrix with entries in `[0, 10]` whose diagonal
/// entries sit strictly below the rest of their column.
pub fn random_reasonable_matrix(rng: &mut rng::Rng, l: usize) -> CostMatrix {
    loop {
        let mut rows = vec![vec![0.0; l]; l];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                if i != j {
                    *v = rng.gen_range(0.0..=10.0);
                }
            }
        }
        let mut ok = true;
        for j in 0..l {
            let floor = (0..l).filter(|&i| i != j).map(|i| rows[i][j]).fold(f64::INFINITY, f64::min);
            if floor <= 1e-6 {
                ok = false;
                break;
            }
            rows[j][j] = rng.gen_range(0.0..floor);
        }
        if ok {
            let phi = CostMatrix::new(rows).expect("finite nonnegative entries");
            if is_reasonable(&phi) {
                return phi;
            }
        }
    }
}

/// Margin guarantee and disjointness around the switching point for
/// `count` random matrices with `L` in `2..=5`, on a 50-point `δ` grid in
/// `(0, t_Φ)`. `c_phi_factor` scales the claimed constant (1 for the real
/// check; larger values inject a fault).
pub fn calibration_sweep(count: usize, seed: u64, c_phi_factor: f64) -> Check {
    let mut rng = rng::stream(seed, streams::AUX);
    let mut slack = f64::INFINITY;
    let mut failures = 0usize;
    let mut first_failure = String::new();
    for m in 0..count {
        let l = 2 + m % 4;
        let phi = random_reasonable_matrix(&mut rng, l);
        let result = (|| -> Result<f64> {
            let cal = calibrate(&phi)?;
            let c = cal.c_phi * c_phi_factor;
            let mut worst = f64::INFINITY;
            for i in 1..=50 {
                let d = cal.t_phi * i as f64 / 51.0;
                let up = two_point(cal.kappa + d, l)?;
                let down = two_point(cal.kappa - d, l)?;
                let mg = margin(&phi, &up)?.min(margin(&phi, &down)?);
                let a = optimal_labels(&phi, &up)?;
                let b = optimal_labels(&phi, &down)?;
                if a.iter().any(|y| b.contains(y)) {
                    return Ok(-1.0);
                }
                worst = worst.min(mg - (c * d - 1e-9));
            }
            Ok(worst)
        })();
        let s = result.unwrap_or(f64::NEG_INFINITY);
        if s < 0.0 {
            failures += 1;
            if first_failure.is_empty() {
                first_failure = format!(" first_failure=matrix#{m}(L={l})");
            }
        }
        slack = slack.min(s);
    }
    Check::new(
        "calibration-sweep",
        slack,
        format!("matrices={count} grid=50 c_phi_factor={c_phi_factor} failures={failures}{first_failure}"),
    )
}

/// Settings of [`jl_chain`].
#[derive(Debug, Clone, PartialEq)]
pub struct JlConfig {
    pub ambient_dim: usize,
    pub points: usize,
    pub train: usize,
    pub seeds: usize,
    pub h_grid: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl Default for JlConfig {
    fn default() -> Self {
        JlConfig { ambient_dim: 200, points: 500, train: 300, seeds: 20, h_grid: vec![8, 16, 32, 64], k: 10, seed: 0 }
    }
}

/// Outcome of [`jl_chain`].
#[derive(Debug, Clone, PartialEq)]
pub struct JlReport {
    /// `(h, median ε̂)` along the grid.
    pub medians: Vec<(usize, f64)>,
    /// Largest `θ̂ - θ(ε̂)` over all seeds, dimensions and queries.
    pub worst_theta_gap: f64,
    /// Largest `ω̂ - C̃ θ̂^γ`.
    pub worst_omega_gap: f64,
    pub checks: Vec<Check>,
}

/// Distortion trend and the distance/measure approximation chain on
/// support samples of the benign circle.
///
/// The index is built on the first `train` samples and queried at the rest;
/// distortion is measured on all samples, so every query/neighbour pair is
/// covered by `ε̂`.
pub fn jl_chain(cfg: &JlConfig) -> Result<JlReport> {
    let m = EmbeddedManifold::circle(1.0, cfg.ambient_dim, cfg.seed)?;
    let dist = SyntheticDistribution::benign(m, 1, cfg.seed)?;
    let sample = dist.sample(cfg.points, cfg.seed);
    let points: Vec<&[f64]> = (0..sample.len()).map(|i| sample.point(i)).collect();
    let d = cfg.ambient_dim;
    let train = Dataset::from_flat(sample.features[..cfg.train * d].to_vec(), d, sample.labels[..cfg.train].to_vec(), 2)?;
    let c_tilde = doubling_constant(dist.params(), dist.manifold())?;
    let gamma = dist.manifold().intrinsic_dim() as i32;

    let jobs: Vec<(usize, usize)> =
        cfg.h_grid.iter().flat_map(|&h| (0..cfg.seeds).map(move |s| (h, s))).collect();
    let outcomes: Vec<(f64, f64, f64)> = jobs
        .par_iter()
        .map(|&(h, s)| {
            let spec = ProjectionSpec::new(ProjectionKind::Achlioptas, d, h, derive_seed(cfg.seed, (h * 1000 + s) as u64))?;
            let proj = sample_projection(&spec)?;
            let eps = distortion(&proj, &points)?.eps_hat;
            let theta_bound = if eps < 1.0 { theta_from_epsilon(eps)? } else { f64::INFINITY };
            let idx = build_index(train.clone(), Some(proj))?;
            let mut theta_gap = f64::NEG_INFINITY;
            let mut omega_gap = f64::NEG_INFINITY;
            for q in &points[cfg.train..] {
                let exact = idx.query_exact(q, cfg.k)?;
                let approx = idx.query_projected(q, cfg.k)?;
                let theta = theta_ratio(&exact, &approx)?;
                let omega = omega_ratio(&exact, &approx, |r| dist.ball_measure(q, r).map_or(f64::NAN, |m| m.value))?;
                theta_gap = theta_gap.max(theta - theta_bound);
                omega_gap = omega_gap.max(omega - c_tilde * theta.powi(gamma));
            }
            Ok((eps, theta_gap, omega_gap))
        })
        .collect::<Result<_>>()?;

    let mut medians = Vec::new();
    for (hi, &h) in cfg.h_grid.iter().enumerate() {
        let mut e: Vec<f64> = outcomes[hi * cfg.seeds..(hi + 1) * cfg.seeds].iter().map(|o| o.0).collect();
        e.sort_by(f64::total_cmp);
        let med = if e.len() % 2 == 1 { e[e.len() / 2] } else { 0.5 * (e[e.len() / 2 - 1] + e[e.len() / 2]) };
        medians.push((h, med));
    }
    let trend = medians.windows(2).map(|w| w[0].1 - w[1].1).fold(f64::INFINITY, f64::min);
    let trend = if trend > 0.0 { trend } else { trend.min(-f64::MIN_POSITIVE) };
    let worst_theta_gap = outcomes.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
    let worst_omega_gap = outcomes.iter().map(|o| o.2).fold(f64::NEG_INFINITY, f64::max);
    let med_text: Vec<String> = medians.iter().map(|(h, e)| format!("h{h}={e:.4}")).collect();
    let checks = vec![
        Check::new("jl-median-trend", trend, format!("median_eps {}", med_text.join(" "))),
        Check::new(
            "theta-within-distortion-bound",
            1e-9 - worst_theta_gap,
            format!("seeds={} queries={} k={}", cfg.seeds, cfg.points - cfg.train, cfg.k),
        ),
        Check::new("omega-within-doubling-bound", -worst_omega_gap, format!("doubling_constant={c_tilde:.4}")),
    ];
    Ok(JlReport { medians, worst_theta_gap, worst_omega_gap, checks })
}

/// The accelerated backend against brute force on random queries over a
/// point cloud with many exact ties.
pub fn backend_equivalence(queries: usize, seed: u64) -> Result<Check> {
    let mut rng = rng::stream(seed, streams::AUX);
    let n = 3000;
    let dim = 6;
    let pts: Vec<Vec<f64>> =
        (0..n).map(|i| (0..dim).map(|_| if i % 3 == 0 { rng.gen_range(0..4) as f64 } else { rng.gen() }).collect()).collect();
    let labels = (0..n).map(|i| Label::from_index(i % 2)).collect();
    let data = Dataset::new(pts, labels, 2)?;
    let brute = NeighbourIndex::with_backend(data.clone(), None, Backend::BruteForce)?;
    let tree = NeighbourIndex::with_backend(data, None, Backend::BallTree)?;
    let mut mismatches = 0;
    for i in 0..queries {
        let q: Vec<f64> =
            (0..dim).map(|_| if i % 2 == 0 { rng.gen_range(0..4) as f64 } else { rng.gen_range(-0.5..4.5) }).collect();
        let k = rng.gen_range(1..=64);
        if brute.query_exact(&q, k)? != tree.query_exact(&q, k)? {
            mismatches += 1;
        }
    }
    Ok(Check::new("backend-equivalence", 0.0 - mismatches as f64, format!("queries={queries} mismatches={mismatches}")))
}

/// Plug-in prediction with 0-1 costs against majority vote on random
/// neighbour multisets.
pub fn majority_equivalence(multisets: usize, seed: u64) -> Result<Check> {
    let mut rng = rng::stream(seed, streams::AUX);
    let mut mismatches = 0;
    for _ in 0..multisets {
        let l = rng.gen_range(2..=5);
        let k = rng.gen_range(1..=25);
        let ys: Vec<Label> = (0..k).map(|_| Label::from_index(rng.gen_range(0..l))).collect();
        let phi = CostMatrix::zero_one(l)?;
        if predict(&phi, &estimate_eta(&ys, l)?)? != majority_vote(&ys, l)? {
            mismatches += 1;
        }
    }
    Ok(Check::new("majority-vote-equivalence", 0.0 - mismatches as f64, format!("multisets={multisets} mismatches={mismatches}")))
}

/// Quadrature Bayes risk of the benign circle against `1/2 - 1/π`.
pub fn bayes_risk_check() -> Result<Check> {
    let dist = SyntheticDistribution::benign(EmbeddedManifold::circle(1.0, 3, 0)?, 1, 0)?;
    let phi = CostMatrix::zero_one(2)?;
    let risk = dist.bayes_oracle(&phi)?.risk;
    let target = 0.5 - 1.0 / PI;
    Ok(Check::new("bayes-risk-benign-circle", 1e-3 - (risk - target).abs(), format!("quadrature={risk:.12} analytic={target:.12}")))
}

/// Volume, intersection, net-size, support-volume and covering checks.
pub fn geometry_battery(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let circle = EmbeddedManifold::circle(1.0, 5, seed)?;
    let sphere = EmbeddedManifold::sphere(1.0, 5, seed)?;

    for (name, m) in [("volume-bounds-circle", &circle), ("volume-bounds-sphere", &sphere)] {
        let top = m.reach() / 8.0;
        let grid: Vec<f64> = (1..=50).map(|i| top * i as f64 / 51.0).collect();
        let rep = check_volume_bounds(m, &grid)?;
        out.push(Check::new(name, if rep.pass() { rep.min_slack() } else { rep.min_slack().min(-f64::MIN_POSITIVE) }, "grid=50".into()));
    }

    let mut worst = f64::INFINITY;
    let mut cases = 0;
    for (r, rt) in [(0.1, 0.1), (0.1, 0.05), (0.12, 0.03), (0.05, 0.05)] {
        for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let rho = frac * (r + rt / 2.0);
            let x = circle.circle_point(0.7);
            let xt = circle.circle_point(0.7 + rho / circle.radius());
            let rep = check_intersection_bound(&circle, &x, &xt, r, rt, 0, 0)?;
            worst = worst.min(rep.estimate - rep.bound);
            cases += 1;
        }
    }
    out.push(Check::new("intersection-bound-circle", worst, format!("analytic cases={cases}")));

    let mut worst = f64::INFINITY;
    let mut detail = Vec::new();
    for (i, rho) in [0.0f64, 0.06, 0.12, 0.125].into_iter().enumerate() {
        let a = sphere.sphere_point(1.0, 0.0);
        let b = sphere.sphere_point(rho.cos(), 0.0);
        let rep = check_intersection_bound(&sphere, &a, &b, 0.1, 0.05, 100_000, derive_seed(seed, i as u64))?;
        worst = worst.min(rep.estimate + 3.0 * rep.sigma - rep.bound);
        detail.push(format!("rho{rho}={:.3e}±{:.1e}", rep.estimate, rep.sigma));
    }
    out.push(Check::new("intersection-bound-sphere", worst, format!("mc=100000 {}", detail.join(" "))));

    let phi = CostMatrix::zero_one(2)?;
    for (mname, m) in [("circle", &circle), ("sphere", &sphere)] {
        let params = hard_default_params(&phi, m)?;
        let gamma = m.intrinsic_dim();
        let mut q_slack = f64::INFINITY;
        let mut v_slack = f64::INFINITY;
        let mut detail = Vec::new();
        for div in [2.0, 4.0, 8.0] {
            let r = m.reach().min(1.0) / 16.0 / div;
            let hc = hard_params(&phi, &params, m, r, seed)?;
            let lb = hc.q_lower_bound(gamma);
            q_slack = q_slack.min(hc.q as f64 - lb);
            detail.push(format!("Q(r*/{div})={}>={lb:.3}", hc.q));
            if mname == "circle" {
                let (lo, hi) = hc.support_volume_bounds(gamma, m.v_gamma());
                let exact = hc.q as f64 * m.geodesic_ball_volume(r / 6.0)?;
                v_slack = v_slack.min(exact - lo).min(hi - exact);
            }
        }
        out.push(Check::new(&format!("net-size-bound-{mname}"), q_slack, detail.join(" ")));
        if mname == "circle" {
            out.push(Check::new("support-volume-sandwich-circle", v_slack, "exact arc lengths".into()));
        }
    }

    let pts = circle.sample_uniform(1000, seed);
    let mut slack = f64::INFINITY;
    let mut detail = Vec::new();
    for r in [0.01, 0.02, 0.05, 0.1] {
        let n = covering_number(&pts, r)?.upper as f64;
        let ceiling = covering_ceiling(1.0, circle.volume(), 1, r);
        slack = slack.min(ceiling - n);
        detail.push(format!("N({r})={n}"));
    }
    out.push(Check::new("covering-ceiling-circle", slack, detail.join(" ")));
    Ok(out)
}

/// Margin, smoothness and regularity validators on worst-case instances.
pub fn hard_validator_battery(budget: usize, seed: u64) -> Result<Vec<Check>> {
    let three = CostMatrix::new(vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![5.0, 4.0, 0.0]])?;
    let mut instances = Vec::new();
    for m in [EmbeddedManifold::circle(1.0, 8, seed)?, EmbeddedManifold::sphere(1.0, 8, seed)?] {
        for (pname, phi) in [("zero-one", CostMatrix::zero_one(2)?), ("three-label", three.clone())] {
            for div in [2.0, 4.0] {
                instances.push((m.clone(), pname, phi.clone(), div));
            }
        }
    }
    let results: Vec<Vec<Check>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, (m, pname, phi, div))| {
            let params = hard_default_params(phi, m)?;
            let r = m.reach().min(1.0) / 16.0 / div;
            let d = build_hard(m.clone(), phi, params, r, None, derive_seed(seed, i as u64))?;
            let hc = d.construction().expect("hard instance");
            let mut checks = Vec::new();
            for kind in [ValidationKind::Margin, ValidationKind::Holder, ValidationKind::Regularity] {
                let rep = d.validate(phi, kind, budget, derive_seed(seed, 100 + i as u64))?;
                checks.push(Check {
                    name: format!("hard-{kind}-{}-{pname}-r*/{div}", m.kind()),
                    pass: rep.pass,
                    slack: rep.slack,
                    detail: format!("Q={} m={} measured={:.4e} limit={:.4e} {}", hc.q, hc.m, rep.measured, rep.limit, rep.detail),
                });
            }
            Ok(checks)
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// Both concentration checks at the standard sizes on the benign circle.
pub fn concentration_battery(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let dist = SyntheticDistribution::benign(EmbeddedManifold::circle(1.0, 3, seed)?, 1, seed)?;
    let b1 = check_radius_concentration(&dist, 500, 50, 0.2, trials, seed)?;
    let b2 = check_label_concentration(&dist, 500, 100, 0.2, trials, derive_seed(seed, 1))?;
    let line = |b: &BoundCheck| format!("empirical={:.5} bound={:.5} sigma={:.5} trials={}", b.empirical, b.bound, b.sigma, b.trials);
    Ok(vec![
        Check::new("knn-radius-concentration", b1.slack(), line(&b1)),
        Check::new("label-average-concentration", b2.slack(), line(&b2)),
    ])
}

/// Options for [`verify_all`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Multiply the claimed `c_Φ` by 10 in the calibration sweep.
    pub corrupt_c_phi: bool,
    /// Monte-Carlo budget for the distribution validators.
    pub validator_budget: usize,
    pub concentration_trials: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 0, corrupt_c_phi: false, validator_budget: 100_000, concentration_trials: 10_000 }
    }
}

/// The whole invariant battery. Failures are reported, not raised.
pub fn verify_all(opts: &VerifyOptions) -> Vec<Check> {
    let seed = opts.seed;
    let mut checks = Vec::new();
    let mut push = |name: &str, r: Result<Vec<Check>>| match r {
        Ok(c) => checks.extend(c),
        Err(e) => checks.push(Check { name: name.into(), pass: false, slack: f64::NEG_INFINITY, detail: format!("error: {e}") }),
    };
    push("calibration-sweep", Ok(vec![calibration_sweep(200, seed, if opts.corrupt_c_phi { 10.0 } else { 1.0 })]));
    push("jl-chain", jl_chain(&JlConfig { seed, ..JlConfig::default() }).map(|r| r.checks));
    push("backend-equivalence", backend_equivalence(1000, seed).map(|c| vec![c]));
    push("geometry", geometry_battery(seed));
    push("hard-validators", hard_validator_battery(opts.validator_budget, seed));
    push("concentration", concentration_battery(opts.concentration_trials, seed));
    push("oracles", bayes_risk_check().and_then(|b| Ok(vec![b, majority_equivalence(1000, seed)?])));
    checks
}
