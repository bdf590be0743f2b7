//! Synthetic joint laws `P = (μ, η)` on embedded circles and spheres.
//!
//! Three families are provided.
//!
//! * **Benign**: uniform marginal, binary labels, and a sinusoidal
//!   conditional `η₁ = 1/2 + sin(m·a)/2` where `a` is the angle on a circle or
//!   the latitude on a sphere.
//! * **Hard**: the worst-case construction. The marginal is uniform on a union
//!   of small geodesic balls around an `r`-separated set of centres; on the
//!   first `m` balls the conditional is pushed to either side of the switching
//!   point `κ` of the cost matrix by `δ`.
//! * **Constant**: uniform marginal and a fixed conditional.
//!
//! Each family offers sampling, the conditional, a Bayes oracle, a
//! ball-measure oracle and Monte-Carlo validators for the regularity,
//! smoothness and margin conditions.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng as _;

use crate::cost_geometry::{calibrate, is_reasonable, margin, two_point, CostCalibration, CostMatrix, Label, ProbVector};
use crate::error::{invalid, Error, Result};
use crate::manifold_lab::{separated_net, EmbeddedManifold, ManifoldKind, RegularityParams};
use crate::neighbours::Dataset;
use crate::numeric::{adaptive_simpson, bisect_monotone, dist, sq_dist};
use crate::rng::{self, derive_seed, streams, Rng};

/// Number of uniform candidates scanned when building the centre net.
pub const CENTER_CANDIDATES: usize = 100_000;

/// Monte-Carlo draws per cell for sphere ball measures.
const CELL_DRAWS: usize = 4096;

/// The piecewise-linear bump profile: 1 on `[0, 1/3]`, `2 - 3t` on
/// `[1/3, 2/3]`, 0 beyond.
pub fn bump_profile(t: f64) -> f64 {
    if t <= 1.0 / 3.0 {
        1.0
    } else if t <= 2.0 / 3.0 {
        2.0 - 3.0 * t
    } else {
        0.0
    }
}

/// Geometry and derived constants of the worst-case construction at scale `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct HardConstruction {
    pub r: f64,
    /// `min(τ, 1)`.
    pub tau_tilde: f64,
    /// `τ̃ / 16`, the radius of the geodesic ball holding the centres.
    pub r_star: f64,
    /// Centre of that ball, canonical coordinates.
    pub x_star: Vec<f64>,
    /// Canonical coordinates of the `r`-separated centres.
    pub centers: Vec<Vec<f64>>,
    pub q: usize,
    pub delta: f64,
    pub m: usize,
    /// Upper bound on the mass of one cell's enclosing ball.
    pub u: f64,
    /// Lower bound on the mass of one cell.
    pub v: f64,
    /// Density of the marginal on the support.
    pub nu_star: f64,
    /// Surface measure of the support.
    pub support_volume: f64,
}

impl HardConstruction {
    /// Radius of each support cell.
    pub fn cell_radius(&self) -> f64 {
        self.r / 6.0
    }

    /// `(2^{-8} τ̃)^γ r^{-γ}`.
    pub fn q_lower_bound(&self, gamma: usize) -> f64 {
        (2f64.powi(-8) * self.tau_tilde / self.r).powi(gamma as i32)
    }

    /// `((3^{-1} 2^{-12} τ̃)^γ v_γ, v_γ (τ̃/2)^γ)`.
    pub fn support_volume_bounds(&self, gamma: usize, v_gamma: f64) -> (f64, f64) {
        let g = gamma as i32;
        ((self.tau_tilde / (3.0 * 4096.0)).powi(g) * v_gamma, v_gamma * (self.tau_tilde / 2.0).powi(g))
    }

    /// `m·u ≤ C_β (c_Φ δ)^β`.
    pub fn margin_premise_holds(&self, c_phi: f64, beta: f64, c_beta: f64) -> bool {
        self.m as f64 * self.u <= c_beta * (c_phi * self.delta).powf(beta) * (1.0 + 1e-12)
    }
}

/// Compute the construction at scale `r`. Centres come from a greedy
/// Euclidean `r`-separated scan of uniform draws in the geodesic ball of
/// radius `r*` about a fixed pole.
pub fn hard_params(
    phi: &CostMatrix,
    params: &RegularityParams,
    manifold: &EmbeddedManifold,
    r: f64,
    seed: u64,
) -> Result<HardConstruction> {
    params.validate()?;
    let cal = calibrate(phi)?;
    let tau_tilde = manifold.reach().min(1.0);
    let r_star = tau_tilde / 16.0;
    if !(r > 0.0 && r < r_star) {
        return Err(invalid(format!("r must lie in (0, {r_star}), got {r}")));
    }
    let big_r = manifold.radius();
    let x_star = match manifold.kind() {
        ManifoldKind::Circle => vec![big_r, 0.0],
        ManifoldKind::Sphere => vec![0.0, 0.0, big_r],
    };
    let mut rng = rng::stream(seed, streams::CENTERS);
    let candidates: Vec<Vec<f64>> =
        (0..CENTER_CANDIDATES).map(|_| manifold.sample_in_geodesic_ball(&x_star, r_star, &mut rng)).collect();
    let centers: Vec<Vec<f64>> = separated_net(&candidates, r).into_iter().map(|i| candidates[i].clone()).collect();
    let q = centers.len();

    let gamma = manifold.intrinsic_dim() as i32;
    let v_gamma = manifold.v_gamma();
    let support_volume = q as f64 * manifold.geodesic_ball_volume(r / 6.0)?;
    let nu_star = 1.0 / support_volume;
    let delta = (cal.t_phi / 2.0).min(params.c_alpha / 12.0 * r.powf(params.alpha));
    let v = nu_star * 4f64.powi(-gamma) * v_gamma * (r / 6.0).powi(gamma);
    let u = nu_star * 4f64.powi(gamma) * v_gamma * (r / 3.0).powi(gamma);
    let budget = (params.c_beta * (cal.c_phi * delta).powf(params.beta) / u).floor();
    let m = if budget >= q as f64 { q } else { budget.max(0.0) as usize };
    let hc = HardConstruction { r, tau_tilde, r_star, x_star, centers, q, delta, m, u, v, nu_star, support_volume };
    debug_assert!(hc.margin_premise_holds(cal.c_phi, params.beta, params.c_beta));
    Ok(hc)
}

/// Parameters under which the worst-case family is certified: `c0 = 2^{-14γ}`,
/// `r0 = min(r*, τ/8)`, density bounds from the support-volume sandwich,
/// `α = 1`, `C_α = 12`, `β = γ/2`, a large `C_β` so that cells are active,
/// and `ζ_max` half the margin at the switching point (capped when infinite).
pub fn hard_default_params(phi: &CostMatrix, manifold: &EmbeddedManifold) -> Result<RegularityParams> {
    let cal = calibrate(phi)?;
    let gamma = manifold.intrinsic_dim();
    let tau_tilde = manifold.reach().min(1.0);
    let g = gamma as i32;
    let v_gamma = manifold.v_gamma();
    let vol_lo = (tau_tilde / (3.0 * 4096.0)).powi(g) * v_gamma;
    let vol_hi = v_gamma * (tau_tilde / 2.0).powi(g);
    let z = cal.switch_margin(phi)?;
    let zeta_max = if z.is_finite() { z / 2.0 } else { 2.0 * phi.max_entry() };
    Ok(RegularityParams {
        c0: 2f64.powi(-14 * g),
        r0: (tau_tilde / 16.0).min(manifold.reach() / 8.0),
        nu_min: 1.0 / vol_hi,
        nu_max: 1.0 / vol_lo,
        zeta_max,
        alpha: 1.0,
        c_alpha: 12.0,
        beta: gamma as f64 / 2.0,
        c_beta: 2048.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
struct HardInstance {
    construction: HardConstruction,
    calibration: CostCalibration,
    phi: CostMatrix,
    /// Length `m`; cells beyond `m` carry sign 0.
    sigma: Vec<i8>,
}

impl HardInstance {
    fn sign(&self, j: usize) -> f64 {
        self.sigma.get(j).map_or(0.0, |&s| s as f64)
    }

    fn cell_eta(&self, j: usize) -> ProbVector {
        let p = self.calibration.kappa + self.construction.delta * self.sign(j);
        two_point(p, self.phi.num_labels()).expect("delta keeps p inside (0, 1)")
    }

    /// Index of the cell whose closed geodesic ball contains `c`.
    fn cell_of(&self, m: &EmbeddedManifold, c: &[f64]) -> Option<usize> {
        let rad = self.construction.cell_radius() + 1e-9;
        self.construction.centers.iter().position(|w| m.geodesic_canonical(c, w) <= rad)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    Benign { m_freq: u32 },
    Constant { eta: ProbVector },
    Hard(Box<HardInstance>),
}

/// An immutable joint law with sampler and oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDistribution {
    manifold: EmbeddedManifold,
    params: RegularityParams,
    num_labels: usize,
    seed: u64,
    family: Family,
}

/// `f*(x) = min Y*(η(x))` bound to a distribution and cost matrix.
#[derive(Debug, Clone, Copy)]
pub struct BayesOracle<'a> {
    pub risk: f64,
    /// Standard error of `risk`; zero for the quadrature and exact sums used here.
    pub sigma: f64,
    dist: &'a SyntheticDistribution,
    phi: &'a CostMatrix,
}

impl BayesOracle<'_> {
    pub fn classify(&self, x: &[f64]) -> Result<Label> {
        let eta = self.dist.conditional_eval(x)?;
        min_optimal(self.phi, &eta)
    }
}

fn min_optimal(phi: &CostMatrix, eta: &ProbVector) -> Result<Label> {
    Ok(crate::cost_geometry::optimal_labels(phi, eta)?[0])
}

fn min_cost(phi: &CostMatrix, eta: &ProbVector) -> Result<f64> {
    Ok(phi.expected_costs(eta)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Measure of a Euclidean ball, with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallMeasure {
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationKind {
    Margin,
    Holder,
    Regularity,
}

impl std::fmt::Display for ValidationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ValidationKind::Margin => "margin",
            ValidationKind::Holder => "holder",
            ValidationKind::Regularity => "regularity",
        })
    }
}

/// Outcome of a validator.
///
/// * margin: `measured` is the smallest feasible `C_β` on the grid, `limit`
///   the configured `C_β`.
/// * holder: `measured` is the largest sampled ratio, `limit` is `C_α`.
/// * regularity: `measured` is the smallest sampled volume fraction, `limit`
///   is `c0`.
///
/// `slack` is the worst-case distance to failure, including the `3σ`
/// allowance; it is nonnegative exactly when `pass` is true.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub kind: ValidationKind,
    pub pass: bool,
    pub measured: f64,
    pub limit: f64,
    pub slack: f64,
    pub detail: String,
}

/// Number of points on the margin-validator ζ grid.
pub const ZETA_GRID: usize = 50;

impl SyntheticDistribution {
    /// Benign sinusoid family on a circle or sphere.
    pub fn benign(manifold: EmbeddedManifold, m_freq: u32, seed: u64) -> Result<Self> {
        if m_freq == 0 {
            return Err(invalid("frequency must be positive"));
        }
        let big_r = manifold.radius();
        let m = m_freq as f64;
        let c_alpha = if m_freq == 1 { 1.0 / (2.0 * big_r) } else { m * PI / (4.0 * big_r) };
        let nu = 1.0 / manifold.volume();
        let params = RegularityParams {
            c0: 1.0,
            r0: manifold.reach() / 8.0,
            nu_min: nu,
            nu_max: nu,
            zeta_max: 1.0,
            alpha: 1.0,
            c_alpha,
            beta: 1.0,
            c_beta: 1.0,
        };
        Ok(SyntheticDistribution { manifold, params, num_labels: 2, seed, family: Family::Benign { m_freq } })
    }

    /// Uniform marginal with the same conditional everywhere.
    pub fn constant(manifold: EmbeddedManifold, eta: ProbVector, seed: u64) -> Result<Self> {
        if eta.len() < 2 {
            return Err(invalid("need at least two labels"));
        }
        let nu = 1.0 / manifold.volume();
        let params = RegularityParams {
            c0: 1.0,
            r0: manifold.reach() / 8.0,
            nu_min: nu,
            nu_max: nu,
            zeta_max: 1.0,
            alpha: 1.0,
            c_alpha: 1.0,
            beta: 1.0,
            c_beta: 1.0,
        };
        Ok(SyntheticDistribution { manifold, params, num_labels: eta.len(), seed, family: Family::Constant { eta } })
    }

    pub fn manifold(&self) -> &EmbeddedManifold {
        &self.manifold
    }

    pub fn params(&self) -> &RegularityParams {
        &self.params
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Benign { .. } => "benign",
            Family::Constant { .. } => "constant",
            Family::Hard(_) => "hard",
        }
    }

    /// The worst-case construction, for hard instances.
    pub fn construction(&self) -> Option<&HardConstruction> {
        match &self.family {
            Family::Hard(h) => Some(&h.construction),
            _ => None,
        }
    }

    /// Active signs, for hard instances.
    pub fn sigma(&self) -> Option<&[i8]> {
        match &self.family {
            Family::Hard(h) => Some(&h.sigma),
            _ => None,
        }
    }

    /// Conditional at canonical coordinates; `None` off the support.
    fn eta_canonical(&self, c: &[f64]) -> Option<ProbVector> {
        match &self.family {
            Family::Benign { m_freq } => {
                let a = match self.manifold.kind() {
                    ManifoldKind::Circle => c[1].atan2(c[0]),
                    ManifoldKind::Sphere => (c[2] / self.manifold.radius()).clamp(-1.0, 1.0).asin(),
                };
                let p = (0.5 + 0.5 * (*m_freq as f64 * a).sin()).clamp(0.0, 1.0);
                Some(two_point(p, 2).expect("p in [0,1]"))
            }
            Family::Constant { eta } => Some(eta.clone()),
            Family::Hard(h) => h.cell_of(&self.manifold, c).map(|j| h.cell_eta(j)),
        }
    }

    /// `η(x)` for a point on the support.
    pub fn conditional_eval(&self, x: &[f64]) -> Result<ProbVector> {
        let c = self.manifold.canonical(x)?;
        self.eta_canonical(&c).ok_or(Error::OffSupport)
    }

    /// `η(x)` extended off the support by the bump formula
    /// `n(κ + δ Σ σ_j g_j(x))` with `g_j(x) = u((2/r)|x - w_j|)`. For other
    /// families this is [`conditional_eval`](Self::conditional_eval).
    pub fn conditional_extended(&self, x: &[f64]) -> Result<ProbVector> {
        match &self.family {
            Family::Hard(h) => {
                let c = self.manifold.canonical(x)?;
                let hc = &h.construction;
                let s: f64 = hc
                    .centers
                    .iter()
                    .enumerate()
                    .map(|(j, w)| h.sign(j) * bump_profile(2.0 / hc.r * dist(&c, w)))
                    .sum();
                two_point(h.calibration.kappa + hc.delta * s, self.num_labels)
            }
            _ => self.conditional_eval(x),
        }
    }

    /// One draw from `μ` in canonical coordinates.
    fn draw_canonical(&self, rng: &mut Rng) -> Vec<f64> {
        match &self.family {
            Family::Hard(h) => {
                let hc = &h.construction;
                let j = rng.gen_range(0..hc.q);
                self.manifold.sample_in_geodesic_ball(&hc.centers[j], hc.cell_radius(), rng)
            }
            _ => self.manifold.sample_canonical(rng),
        }
    }

    /// `count` marginal draws with their conditionals. Points are returned
    /// flat, row-major in `R^d`.
    pub fn sample_with_conditionals(&self, count: usize, seed: u64) -> (Vec<f64>, Vec<ProbVector>) {
        let mut rng = rng::stream(seed, streams::TRAIN);
        let mut points = Vec::with_capacity(count * self.manifold.ambient_dim());
        let mut etas = Vec::with_capacity(count);
        for _ in 0..count {
            let c = self.draw_canonical(&mut rng);
            etas.push(self.eta_canonical(&c).expect("draws lie on the support"));
            points.extend(self.manifold.embed(&c));
        }
        (points, etas)
    }

    /// `count` labelled draws from `P`.
    pub fn sample(&self, count: usize, seed: u64) -> Sample {
        let (features, etas) = self.sample_with_conditionals(count, seed);
        let mut rng = rng::stream(seed, streams::LABELS);
        let labels = etas.iter().map(|eta| draw_label(eta, &mut rng)).collect();
        Sample { features, dim: self.manifold.ambient_dim(), labels, num_labels: self.num_labels }
    }

    /// Bayes risk for `phi`, with the Bayes classifier.
    ///
    /// The benign circle is integrated over the angle and the benign sphere
    /// over the height (the conditional depends on the height only; heights
    /// are uniform). Hard instances are summed exactly over cells.
    pub fn bayes_oracle<'a>(&'a self, phi: &'a CostMatrix) -> Result<BayesOracle<'a>> {
        if phi.num_labels() != self.num_labels {
            return Err(Error::DimensionMismatch { expected: self.num_labels, got: phi.num_labels() });
        }
        let big_r = self.manifold.radius();
        let risk = match &self.family {
            Family::Benign { m_freq } => {
                let m = *m_freq as f64;
                let integrand = |p: f64| min_cost(phi, &two_point(p, 2).unwrap()).unwrap();
                // Split at the zeros of the sinusoid so each piece is smooth
                // apart from the (few) argmin switches.
                let (pieces, total, p_of): (usize, f64, Box<dyn Fn(f64) -> f64>) = match self.manifold.kind() {
                    ManifoldKind::Circle => {
                        (4 * *m_freq as usize, 2.0 * PI, Box::new(move |a: f64| 0.5 + 0.5 * (m * a).sin()))
                    }
                    ManifoldKind::Sphere => (
                        4 * *m_freq as usize,
                        2.0 * big_r,
                        Box::new(move |z: f64| 0.5 + 0.5 * (m * (z / big_r).clamp(-1.0, 1.0).asin()).sin()),
                    ),
                };
                let (start, width) = match self.manifold.kind() {
                    ManifoldKind::Circle => (0.0, total / pieces as f64),
                    ManifoldKind::Sphere => (-big_r, total / pieces as f64),
                };
                let f = |s: f64| integrand(p_of(s).clamp(0.0, 1.0));
                let sum: f64 = (0..pieces)
                    .map(|i| {
                        let a = start + width * i as f64;
                        adaptive_simpson(&f, a, a + width, 1e-12)
                    })
                    .sum();
                sum / total
            }
            Family::Constant { eta } => min_cost(phi, eta)?,
            Family::Hard(h) => {
                let q = h.construction.q;
                let mut total = 0.0;
                for j in 0..q {
                    total += min_cost(phi, &h.cell_eta(j))?;
                }
                total / q as f64
            }
        };
        Ok(BayesOracle { risk, sigma: 0.0, dist: self, phi })
    }

    /// `μ(B_r(x))` for the closed Euclidean ball about `x`, which must lie
    /// on the manifold. Exact except on hard spheres, where each nearby cell
    /// is estimated from a fixed set of draws (so the result is monotone in
    /// `r`).
    pub fn ball_measure(&self, x: &[f64], r: f64) -> Result<BallMeasure> {
        if r < 0.0 {
            return Err(invalid("radius must be nonnegative"));
        }
        let c = self.manifold.canonical(x)?;
        let big_r = self.manifold.radius();
        let exact = |value: f64| Ok(BallMeasure { value: value.clamp(0.0, 1.0), sigma: 0.0 });
        match &self.family {
            Family::Benign { .. } | Family::Constant { .. } => match self.manifold.kind() {
                ManifoldKind::Circle => exact(if r >= 2.0 * big_r { 1.0 } else { 2.0 / PI * (r / (2.0 * big_r)).asin() }),
                ManifoldKind::Sphere => exact(r * r / (4.0 * big_r * big_r)),
            },
            Family::Hard(h) => {
                let hc = &h.construction;
                match self.manifold.kind() {
                    ManifoldKind::Circle => {
                        let half = if r >= 2.0 * big_r { PI } else { 2.0 * (r / (2.0 * big_r)).asin() };
                        let b = hc.cell_radius() / big_r;
                        let ax = c[1].atan2(c[0]);
                        let covered: f64 =
                            hc.centers.iter().map(|w| arc_overlap(ax, half, w[1].atan2(w[0]), b)).sum();
                        exact(covered / (2.0 * b * hc.q as f64))
                    }
                    ManifoldKind::Sphere => {
                        let cell_chord = 2.0 * big_r * (hc.cell_radius() / (2.0 * big_r)).sin();
                        let mut mass = 0.0;
                        let mut var = 0.0;
                        for (j, w) in hc.centers.iter().enumerate() {
                            let dc = dist(&c, w);
                            if dc > r + cell_chord {
                                continue;
                            }
                            if dc + cell_chord <= r {
                                mass += 1.0;
                                continue;
                            }
                            let mut rng = rng::stream(derive_seed(self.seed, j as u64), streams::AUX);
                            let r2 = r * r;
                            let hits = (0..CELL_DRAWS)
                                .filter(|_| {
                                    sq_dist(&c, &self.manifold.sample_in_geodesic_ball(w, hc.cell_radius(), &mut rng))
                                        <= r2
                                })
                                .count();
                            let p = hits as f64 / CELL_DRAWS as f64;
                            mass += p;
                            var += p * (1.0 - p) / CELL_DRAWS as f64;
                        }
                        let q = hc.q as f64;
                        Ok(BallMeasure { value: (mass / q).clamp(0.0, 1.0), sigma: var.sqrt() / q })
                    }
                }
            }
        }
    }

    /// `inf{r > 0 : μ(B_r(x)) ≥ p}`, by bisection to `1e-12`.
    pub fn quantile_radius(&self, x: &[f64], p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p must lie in [0, 1]"));
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        self.manifold.canonical(x)?;
        let hi = 2.0 * self.manifold.radius();
        // The surface check above is the only failure mode of `ball_measure`
        // for nonnegative radii.
        Ok(bisect_monotone(|r| self.ball_measure(x, r).map_or(true, |m| m.value >= p), 0.0, hi, 1e-12))
    }

    /// Check one of the class conditions by Monte Carlo with `budget` draws.
    pub fn validate(&self, phi: &CostMatrix, kind: ValidationKind, budget: usize, seed: u64) -> Result<ValidationReport> {
        if budget < 1000 {
            return Err(invalid("validation budget must be at least 1000"));
        }
        if phi.num_labels() != self.num_labels {
            return Err(Error::DimensionMismatch { expected: self.num_labels, got: phi.num_labels() });
        }
        match kind {
            ValidationKind::Margin => self.validate_margin(phi, budget, seed),
            ValidationKind::Holder => self.validate_holder(budget, seed),
            ValidationKind::Regularity => self.validate_regularity(budget, seed),
        }
    }

    fn validate_margin(&self, phi: &CostMatrix, budget: usize, seed: u64) -> Result<ValidationReport> {
        let p = &self.params;
        let mut rng = rng::stream(seed, streams::AUX);
        let mut margins = Vec::with_capacity(budget);
        for _ in 0..budget {
            let c = self.draw_canonical(&mut rng);
            margins.push(margin(phi, &self.eta_canonical(&c).expect("on support"))?);
        }
        margins.sort_by(f64::total_cmp);
        let n = budget as f64;
        let mut c_hat: f64 = 0.0;
        let mut slack = f64::INFINITY;
        let mut worst = 0.0;
        for i in 1..=ZETA_GRID {
            let zeta = p.zeta_max * i as f64 / ZETA_GRID as f64;
            let count = margins.partition_point(|&m| m <= zeta) as f64;
            let frac = count / n;
            let limit = p.c_beta * zeta.powf(p.beta);
            let q = limit.min(1.0);
            let allowance = limit + 3.0 * (q * (1.0 - q) / n).sqrt();
            c_hat = c_hat.max(frac / zeta.powf(p.beta));
            if allowance - frac < slack {
                slack = allowance - frac;
                worst = zeta;
            }
        }
        Ok(ValidationReport {
            kind: ValidationKind::Margin,
            pass: slack >= 0.0,
            measured: c_hat,
            limit: p.c_beta,
            slack,
            detail: format!("beta={} zeta_max={} tightest_zeta={worst}", p.beta, p.zeta_max),
        })
    }

    fn validate_holder(&self, budget: usize, seed: u64) -> Result<ValidationReport> {
        let p = &self.params;
        let mut rng = rng::stream(seed, streams::AUX);
        let mut best = 0.0;
        let mut pair = (Vec::new(), Vec::new());
        for _ in 0..budget {
            let c0 = self.draw_canonical(&mut rng);
            let c1 = self.draw_canonical(&mut rng);
            let d = dist(&c0, &c1);
            if d == 0.0 {
                continue;
            }
            let e0 = self.eta_canonical(&c0).expect("on support");
            let e1 = self.eta_canonical(&c1).expect("on support");
            let ratio = e0.sup_dist(&e1) / d.powf(p.alpha);
            if ratio > best {
                best = ratio;
                pair = (c0, c1);
            }
        }
        let slack = p.c_alpha * (1.0 + 1e-9) - best;
        Ok(ValidationReport {
            kind: ValidationKind::Holder,
            pass: slack >= 0.0,
            measured: best,
            limit: p.c_alpha,
            slack,
            detail: format!("alpha={} worst_pair_canonical={:?} {:?}", p.alpha, pair.0, pair.1),
        })
    }

    /// Fraction `V(S ∩ B_s(x)) / V(B_s(x) ∩ M)` of the surface ball about a
    /// support point that lies in the support, with its standard error.
    fn support_fraction(&self, c: &[f64], s: f64, inner: usize, rng: &mut Rng) -> (f64, f64) {
        let hc = match &self.family {
            Family::Hard(h) => &h.construction,
            _ => return (1.0, 0.0),
        };
        let m = &self.manifold;
        let big_r = m.radius();
        let geo = 2.0 * big_r * (s / (2.0 * big_r)).min(1.0).asin();
        match m.kind() {
            ManifoldKind::Circle => {
                let half = geo / big_r;
                let b = hc.cell_radius() / big_r;
                let ax = c[1].atan2(c[0]);
                let inside: f64 = hc.centers.iter().map(|w| arc_overlap(ax, half, w[1].atan2(w[0]), b)).sum();
                ((inside / (2.0 * half.min(PI))).min(1.0), 0.0)
            }
            ManifoldKind::Sphere => {
                let hits = (0..inner)
                    .filter(|_| {
                        let y = m.sample_in_geodesic_ball(c, geo, rng);
                        hc.centers.iter().any(|w| m.geodesic_canonical(&y, w) <= hc.cell_radius())
                    })
                    .count();
                let f = hits as f64 / inner as f64;
                (f, (f * (1.0 - f) / inner as f64).sqrt())
            }
        }
    }

    fn validate_regularity(&self, budget: usize, seed: u64) -> Result<ValidationReport> {
        let p = &self.params;
        let mut rng = rng::stream(seed, streams::AUX);
        let inner = 1000;
        let centers = match (&self.family, self.manifold.kind()) {
            (Family::Hard(_), ManifoldKind::Sphere) => (budget / inner).max(1),
            _ => budget,
        };
        let mut worst = (f64::INFINITY, 0.0);
        let mut worst_radius = 0.0;
        for _ in 0..centers {
            let c = self.draw_canonical(&mut rng);
            let s = rng.gen_range(0.0..p.r0).max(p.r0 * 1e-6);
            let (f, sd) = self.support_fraction(&c, s, inner, &mut rng);
            if f - 3.0 * sd < worst.0 - 3.0 * worst.1 {
                worst = (f, sd);
                worst_radius = s;
            }
        }
        let slack = worst.0 + 3.0 * worst.1 - p.c0;
        Ok(ValidationReport {
            kind: ValidationKind::Regularity,
            pass: slack >= 0.0,
            measured: worst.0,
            limit: p.c0,
            slack,
            detail: format!("r0={} sigma={} at_radius={worst_radius}", p.r0, worst.1),
        })
    }

    /// Replayable description of this distribution.
    pub fn spec(&self) -> DistributionSpec {
        let mut spec = DistributionSpec {
            family: self.family_name().to_string(),
            manifold: self.manifold.clone(),
            seed: self.seed,
            m_freq: None,
            r: None,
            sigma: None,
            cost: None,
            eta: None,
            params: None,
        };
        match &self.family {
            Family::Benign { m_freq } => spec.m_freq = Some(*m_freq),
            Family::Constant { eta } => spec.eta = Some(eta.weights().to_vec()),
            Family::Hard(h) => {
                spec.r = Some(h.construction.r);
                spec.sigma = Some(sigma_to_string(&h.sigma));
                spec.cost = Some(h.phi.clone());
                spec.params = Some(self.params);
            }
        }
        spec
    }
}

/// Worst-case instance at scale `r` with signs `sigma` on the first `m`
/// cells. `sigma` must have length `m` and entries in `{-1, 0, 1}`.
pub fn build_hard(
    manifold: EmbeddedManifold,
    phi: &CostMatrix,
    params: RegularityParams,
    r: f64,
    sigma: Option<Vec<i8>>,
    seed: u64,
) -> Result<SyntheticDistribution> {
    if !is_reasonable(phi) {
        return Err(Error::NotReasonable("hard family needs a reasonable cost matrix".into()));
    }
    let construction = hard_params(phi, &params, &manifold, r, seed)?;
    let m = construction.m;
    let sigma = sigma.unwrap_or_else(|| (0..m).map(|j| if j % 2 == 0 { 1 } else { -1 }).collect());
    if sigma.len() != m {
        return Err(invalid(format!("sigma has length {}, construction has m = {m}", sigma.len())));
    }
    if sigma.iter().any(|s| !(-1..=1).contains(s)) {
        return Err(invalid("sigma entries must be -1, 0 or 1"));
    }
    let calibration = calibrate(phi)?;
    Ok(SyntheticDistribution {
        manifold,
        params,
        num_labels: phi.num_labels(),
        seed,
        family: Family::Hard(Box::new(HardInstance { construction, calibration, phi: phi.clone(), sigma })),
    })
}

/// Overlap length (in angle) of `[a - h, a + h]` and `[w - b, w + b]` on the
/// circle.
fn arc_overlap(a: f64, h: f64, w: f64, b: f64) -> f64 {
    if h >= PI {
        return 2.0 * b.min(PI);
    }
    let d = (w - a).rem_euclid(2.0 * PI);
    [d - 2.0 * PI, d, d + 2.0 * PI]
        .iter()
        .map(|&dd| (h.min(dd + b) - (-h).max(dd - b)).max(0.0))
        .sum::<f64>()
        .min(2.0 * b)
}

fn draw_label(eta: &ProbVector, rng: &mut Rng) -> Label {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let w = eta.weights();
    for (i, p) in w.iter().enumerate() {
        acc += p;
        if u < acc {
            return Label::from_index(i);
        }
    }
    // Rounding can leave `acc` just below 1; fall back to the last label
    // with positive weight.
    Label::from_index(w.iter().rposition(|&p| p > 0.0).unwrap_or(w.len() - 1))
}

/// Labelled draws; may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub dim: usize,
    pub labels: Vec<Label>,
    pub num_labels: usize,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn into_dataset(self) -> Result<Dataset> {
        Dataset::from_flat(self.features, self.dim, self.labels, self.num_labels)
    }
}

pub fn sigma_to_string(sigma: &[i8]) -> String {
    sigma
        .iter()
        .map(|s| match s {
            1 => '+',
            -1 => '-',
            _ => '0',
        })
        .collect()
}

pub fn sigma_from_string(s: &str) -> Result<Vec<i8>> {
    s.chars()
        .map(|ch| match ch {
            '+' => Ok(1),
            '-' => Ok(-1),
            '0' => Ok(0),
            _ => Err(invalid(format!("sigma may contain only '+', '-', '0', found {ch:?}"))),
        })
        .collect()
}

/// Plain-text `key = value` description of a distribution.
///
/// Keys: `family` (benign, hard, constant), `manifold` (`kind radius gamma d
/// rotation_seed`), `seed`, `m_freq`, `r`, `sigma` (a `+-0` string),
/// `cost` (rows separated by `;`), `eta`, and the regularity parameters
/// `c0 r0 nu_min nu_max zeta_max alpha c_alpha beta c_beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    pub family: String,
    pub manifold: EmbeddedManifold,
    pub seed: u64,
    pub m_freq: Option<u32>,
    pub r: Option<f64>,
    pub sigma: Option<String>,
    pub cost: Option<CostMatrix>,
    pub eta: Option<Vec<f64>>,
    pub params: Option<RegularityParams>,
}

const PARAM_KEYS: [&str; 9] = ["c0", "r0", "nu_min", "nu_max", "zeta_max", "alpha", "c_alpha", "beta", "c_beta"];

fn params_to_array(p: &RegularityParams) -> [f64; 9] {
    [p.c0, p.r0, p.nu_min, p.nu_max, p.zeta_max, p.alpha, p.c_alpha, p.beta, p.c_beta]
}

fn params_from_array(a: [f64; 9]) -> RegularityParams {
    RegularityParams {
        c0: a[0],
        r0: a[1],
        nu_min: a[2],
        nu_max: a[3],
        zeta_max: a[4],
        alpha: a[5],
        c_alpha: a[6],
        beta: a[7],
        c_beta: a[8],
    }
}

impl DistributionSpec {
    pub fn build(&self) -> Result<SyntheticDistribution> {
        match self.family.as_str() {
            "benign" => SyntheticDistribution::benign(self.manifold.clone(), self.m_freq.unwrap_or(1), self.seed),
            "constant" => {
                let eta = self.eta.clone().ok_or_else(|| invalid("constant family needs `eta`"))?;
                SyntheticDistribution::constant(self.manifold.clone(), ProbVector::new(eta)?, self.seed)
            }
            "hard" => {
                let phi = match &self.cost {
                    Some(c) => c.clone(),
                    None => CostMatrix::zero_one(2)?,
                };
                let params = match self.params {
                    Some(p) => p,
                    None => hard_default_params(&phi, &self.manifold)?,
                };
                let r = self.r.unwrap_or(self.manifold.reach().min(1.0) / 32.0);
                let sigma = self.sigma.as_deref().map(sigma_from_string).transpose()?;
                build_hard(self.manifold.clone(), &phi, params, r, sigma, self.seed)
            }
            other => Err(invalid(format!("unknown family `{other}`"))),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "family = {}", self.family);
        let _ = writeln!(s, "manifold = {}", self.manifold.to_text());
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(m) = self.m_freq {
            let _ = writeln!(s, "m_freq = {m}");
        }
        if let Some(r) = self.r {
            let _ = writeln!(s, "r = {r}");
        }
        if let Some(sig) = &self.sigma {
            let _ = writeln!(s, "sigma = {sig}");
        }
        if let Some(c) = &self.cost {
            let rows: Vec<String> =
                c.rows().iter().map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")).collect();
            let _ = writeln!(s, "cost = {}", rows.join("; "));
        }
        if let Some(e) = &self.eta {
            let _ = writeln!(s, "eta = {}", e.iter().map(f64::to_string).collect::<Vec<_>>().join(" "));
        }
        if let Some(p) = &self.params {
            for (k, v) in PARAM_KEYS.iter().zip(params_to_array(p)) {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s
    }

    /// Read from `key = value` pairs; unknown keys are rejected.
    pub fn from_pairs<'a, I: IntoIterator<Item = (usize, &'a str, &'a str)>>(pairs: I) -> Result<Self> {
        let mut family = None;
        let mut manifold = None;
        let mut seed = 0;
        let mut m_freq = None;
        let mut r = None;
        let mut sigma = None;
        let mut cost = None;
        let mut eta = None;
        let mut params: [Option<f64>; 9] = [None; 9];
        for (line, key, value) in pairs {
            let perr = |msg: String| Error::Parse { line, msg };
            let num = |v: &str| v.parse::<f64>().map_err(|e| perr(format!("{key}: {e}")));
            match key {
                "family" => family = Some(value.to_string()),
                "manifold" => manifold = Some(value.parse::<EmbeddedManifold>().map_err(|e| perr(e.to_string()))?),
                "seed" => seed = value.parse().map_err(|e| perr(format!("seed: {e}")))?,
                "m_freq" => m_freq = Some(value.parse().map_err(|e| perr(format!("m_freq: {e}")))?),
                "r" => r = Some(num(value)?),
                "sigma" => sigma = Some(value.to_string()),
                "cost" => {
                    let rows: Vec<&str> = value.split(';').map(str::trim).collect();
                    let text = format!("{}\n{}\n", rows.len(), rows.join("\n"));
                    cost = Some(text.parse::<CostMatrix>().map_err(|e| perr(e.to_string()))?);
                }
                "eta" => {
                    eta = Some(value.split_whitespace().map(num).collect::<Result<Vec<f64>>>()?);
                }
                k => match PARAM_KEYS.iter().position(|p| *p == k) {
                    Some(i) => params[i] = Some(num(value)?),
                    None => return Err(perr(format!("unknown key `{k}`"))),
                },
            }
        }
        let params = if params.iter().all(Option::is_none) {
            None
        } else if params.iter().all(Option::is_some) {
            Some(params_from_array(params.map(Option::unwrap)))
        } else {
            return Err(invalid(format!("give all or none of {}", PARAM_KEYS.join(", "))));
        };
        Ok(DistributionSpec {
            family: family.ok_or_else(|| invalid("missing `family`"))?,
            manifold: manifold.ok_or_else(|| invalid("missing `manifold`"))?,
            seed,
            m_freq,
            r,
            sigma,
            cost,
            eta,
            params,
        })
    }
}

/// Split `key = value` lines, skipping blanks and `#` comments. Line numbers
/// are 1-based.
pub fn key_values(text: &str) -> Result<Vec<(usize, &str, &str)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::Parse { line: i + 1, msg: "expected `key = value`".into() })?;
        out.push((i + 1, k.trim(), v.trim()));
    }
    Ok(out)
}

impl FromStr for DistributionSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DistributionSpec::from_pairs(key_values(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean;
    use proptest::prelude::*;

    fn circle() -> EmbeddedManifold {
        EmbeddedManifold::circle(1.0, 6, 3).unwrap()
    }

    fn sphere() -> EmbeddedManifold {
        EmbeddedManifold::sphere(1.0, 6, 3).unwrap()
    }

    fn hard(m: EmbeddedManifold, r: f64) -> SyntheticDistribution {
        let phi = CostMatrix::zero_one(2).unwrap();
        let p = hard_default_params(&phi, &m).unwrap();
        build_hard(m, &phi, p, r, None, 5).unwrap()
    }

    #[test]
    fn bump_profile_values() {
        assert_eq!(bump_profile(0.0), 1.0);
        assert_eq!(bump_profile(1.0 / 3.0), 1.0);
        assert!((bump_profile(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(bump_profile(2.0 / 3.0), 0.0);
        assert_eq!(bump_profile(5.0), 0.0);
    }

    #[test]
    fn circle_construction_example() {
        let d = hard(circle(), 1.0 / 32.0);
        let hc = d.construction().unwrap();
        assert!((3..=5).contains(&hc.q), "Q = {}", hc.q);
        assert!(hc.q as f64 >= hc.q_lower_bound(1).ceil());
        for (i, a) in hc.centers.iter().enumerate() {
            assert!(d.manifold().geodesic_canonical(a, &hc.x_star) <= hc.r_star + 1e-12);
            for b in &hc.centers[i + 1..] {
                assert!(dist(a, b) > hc.r);
            }
        }
        let (lo, hi) = hc.support_volume_bounds(1, 2.0);
        assert!(lo <= hc.support_volume && hc.support_volume <= hi);
        assert!((hc.support_volume - hc.q as f64 * hc.r / 3.0).abs() < 1e-15);
        assert!(hc.m <= hc.q && hc.m >= 1);
    }

    #[test]
    fn hard_params_zero_one_delta() {
        let phi = CostMatrix::zero_one(2).unwrap();
        let m = circle();
        let p = RegularityParams { c_alpha: 1.0, ..hard_default_params(&phi, &m).unwrap() };
        for r in [0.06, 0.01, 1e-4] {
            let hc = hard_params(&phi, &p, &m, r, 1).unwrap();
            assert!((hc.delta - (0.25f64).min(r / 12.0)).abs() < 1e-15);
            assert!(hc.margin_premise_holds(2.0, p.beta, p.c_beta));
        }
        assert!(hard_params(&phi, &p, &m, 1.0 / 16.0, 1).is_err());
        assert!(hard_params(&phi, &p, &m, 0.0, 1).is_err());
    }

    #[test]
    fn hard_conditional_examples() {
        let d = hard(circle(), 1.0 / 64.0);
        let hc = d.construction().unwrap().clone();
        let kappa = 0.5;
        let w0 = d.manifold().embed(&hc.centers[0]);
        let e = d.conditional_eval(&w0).unwrap();
        assert!((e.weights()[1] - (kappa + hc.delta)).abs() < 1e-12);
        // Second centre has sign -1; move r/4 along the circle from it.
        let a = hc.centers[1][1].atan2(hc.centers[1][0]);
        let chord_quarter = |ang: f64| 2.0 * (ang / 2.0).sin();
        let target = hc.r / 4.0;
        let step = bisect_monotone(|s| chord_quarter(s) >= target, 0.0, 1.0, 1e-15);
        let x = d.manifold().circle_point(a + step);
        assert!(matches!(d.conditional_eval(&x), Err(Error::OffSupport)));
        let ext = d.conditional_extended(&x).unwrap();
        assert!((ext.weights()[1] - (kappa - hc.delta / 2.0)).abs() < 1e-9);

        let zero = build_hard(
            circle(),
            &CostMatrix::zero_one(2).unwrap(),
            hard_default_params(&CostMatrix::zero_one(2).unwrap(), &circle()).unwrap(),
            1.0 / 64.0,
            Some(vec![0; hc.m]),
            5,
        )
        .unwrap();
        let s = zero.sample(500, 1);
        for i in 0..s.len() {
            assert_eq!(zero.conditional_eval(s.point(i)).unwrap().weights(), &[0.5, 0.5]);
        }
        let phi = CostMatrix::zero_one(2).unwrap();
        assert!((zero.bayes_oracle(&phi).unwrap().risk - 0.5).abs() < 1e-15);
        let bad = build_hard(circle(), &phi, hard_default_params(&phi, &circle()).unwrap(), 1.0 / 64.0, Some(vec![1]), 5);
        assert!(bad.is_err() || hc.m == 1);
    }

    #[test]
    fn hard_samples_lie_on_support() {
        for d in [hard(circle(), 1.0 / 40.0), hard(sphere(), 1.0 / 40.0)] {
            let hc = d.construction().unwrap();
            let s = d.sample(2000, 9);
            for i in 0..s.len() {
                let c = d.manifold().canonical(s.point(i)).unwrap();
                let near = hc.centers.iter().map(|w| d.manifold().geodesic_canonical(&c, w)).fold(f64::INFINITY, f64::min);
                assert!(near <= hc.r / 6.0 + 1e-9);
            }
        }
        assert!(hard(circle(), 0.03).sample(0, 1).is_empty());
    }

    #[test]
    fn hard_margin_on_active_cells() {
        let phi = CostMatrix::zero_one(3).unwrap();
        let m = sphere();
        let p = hard_default_params(&phi, &m).unwrap();
        let d = build_hard(m, &phi, p, 1.0 / 48.0, None, 2).unwrap();
        let cal = calibrate(&phi).unwrap();
        let hc = d.construction().unwrap();
        let s = d.sample(3000, 4);
        for i in 0..s.len() {
            let c = d.manifold().canonical(s.point(i)).unwrap();
            let j = hc.centers.iter().position(|w| d.manifold().geodesic_canonical(&c, w) <= hc.r / 6.0 + 1e-9).unwrap();
            if j < hc.m {
                let mg = margin(&phi, &d.conditional_eval(s.point(i)).unwrap()).unwrap();
                assert!(mg >= cal.c_phi * hc.delta - 1e-9);
            }
        }
    }

    #[test]
    fn benign_values_and_label_frequencies() {
        let d = SyntheticDistribution::benign(circle(), 1, 0).unwrap();
        let x0 = d.manifold().circle_point(0.0);
        assert_eq!(d.conditional_eval(&x0).unwrap().weights(), &[0.5, 0.5]);
        let s = d.sample(1_000_000, 3);
        let twos = s.labels.iter().filter(|y| y.get() == 2).count() as f64 / 1e6;
        assert!((twos - 0.5).abs() < 3.0 * (0.25f64 / 1e6).sqrt());
    }

    #[test]
    fn labels_follow_conditionals_locally() {
        let d = hard(circle(), 1.0 / 40.0);
        let s = d.sample(40_000, 8);
        let hc = d.construction().unwrap();
        let mut per_cell = vec![(0usize, 0usize); hc.q];
        for i in 0..s.len() {
            let c = d.manifold().canonical(s.point(i)).unwrap();
            let j = hc.centers.iter().position(|w| d.manifold().geodesic_canonical(&c, w) <= hc.r / 6.0 + 1e-9).unwrap();
            per_cell[j].0 += 1;
            per_cell[j].1 += (s.labels[i].get() == 2) as usize;
        }
        for (j, (n, twos)) in per_cell.into_iter().enumerate() {
            let p = d.conditional_eval(&d.manifold().embed(&hc.centers[j])).unwrap().weights()[1];
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((twos as f64 / n as f64 - p).abs() <= 3.0 * sd + 1e-12);
        }
    }

    #[test]
    fn benign_bayes_risk() {
        let phi = CostMatrix::zero_one(2).unwrap();
        for m_freq in [1, 3] {
            let d = SyntheticDistribution::benign(circle(), m_freq, 0).unwrap();
            let r = d.bayes_oracle(&phi).unwrap().risk;
            assert!((r - (0.5 - 1.0 / PI)).abs() < 1e-9, "{r}");
        }
        // Height-uniform sphere with m = 1: E[1/2 - |z|/2] = 1/4.
        let d = SyntheticDistribution::benign(sphere(), 1, 0).unwrap();
        assert!((d.bayes_oracle(&phi).unwrap().risk - 0.25).abs() < 1e-9);
        let c = SyntheticDistribution::constant(circle(), ProbVector::new(vec![1.0, 0.0]).unwrap(), 0).unwrap();
        assert_eq!(c.bayes_oracle(&phi).unwrap().risk, 0.0);
        let oracle = d.bayes_oracle(&phi).unwrap();
        assert_eq!(oracle.classify(&d.manifold().sphere_point(0.5, 1.0)).unwrap().get(), 2);
    }

    #[test]
    fn ball_measure_examples() {
        let d = SyntheticDistribution::benign(circle(), 1, 0).unwrap();
        let x = d.manifold().circle_point(0.4);
        assert_eq!(d.ball_measure(&x, 2.0).unwrap().value, 1.0);
        assert_eq!(d.quantile_radius(&x, 0.0).unwrap(), 0.0);
        assert!((d.quantile_radius(&x, 0.5).unwrap() - 2f64.sqrt()).abs() < 1e-10);
        for r in [0.05, 0.3, 1.0, 1.7] {
            let p = d.ball_measure(&x, r).unwrap().value;
            assert!((d.quantile_radius(&x, p).unwrap() - r).abs() < 1e-8);
        }
        let s = SyntheticDistribution::benign(sphere(), 1, 0).unwrap();
        let y = s.manifold().sphere_point(0.2, 0.1);
        for r in [0.05, 0.5, 1.9] {
            let p = s.ball_measure(&y, r).unwrap().value;
            assert!((s.quantile_radius(&y, p).unwrap() - r).abs() < 1e-8);
        }
    }

    #[test]
    fn hard_ball_measure_is_monotone_and_consistent() {
        for d in [hard(circle(), 1.0 / 40.0), hard(sphere(), 1.0 / 40.0)] {
            let hc = d.construction().unwrap();
            let x = d.manifold().embed(&hc.centers[0]);
            let mut last = 0.0;
            for i in 0..40 {
                let r = 0.2 * i as f64 / 40.0;
                let m = d.ball_measure(&x, r).unwrap().value;
                assert!(m >= last);
                last = m;
            }
            assert!((d.ball_measure(&x, 2.0).unwrap().value - 1.0).abs() < 1e-12);
            let pts = d.sample(20_000, 2);
            let r = hc.r / 8.0;
            let emp = (0..pts.len()).filter(|&i| dist(pts.point(i), &x) <= r).count() as f64 / pts.len() as f64;
            let bm = d.ball_measure(&x, r).unwrap();
            let sd = (emp * (1.0 - emp) / pts.len() as f64).sqrt() + bm.sigma;
            assert!((emp - bm.value).abs() <= 4.0 * sd + 1e-3, "{emp} vs {}", bm.value);
        }
    }

    #[test]
    fn validators_on_benign_and_constant() {
        let phi = CostMatrix::zero_one(2).unwrap();
        let d = SyntheticDistribution::benign(circle(), 1, 0).unwrap();
        let mg = d.validate(&phi, ValidationKind::Margin, 100_000, 1).unwrap();
        assert!(mg.pass);
        assert!((mg.measured - 1.0).abs() < 0.02, "{}", mg.measured);
        assert!(d.validate(&phi, ValidationKind::Holder, 10_000, 1).unwrap().pass);
        let reg = d.validate(&phi, ValidationKind::Regularity, 1000, 1).unwrap();
        assert!(reg.pass && reg.measured == 1.0);
        let c = SyntheticDistribution::constant(circle(), ProbVector::new(vec![0.3, 0.7]).unwrap(), 0).unwrap();
        assert_eq!(c.validate(&phi, ValidationKind::Holder, 1000, 1).unwrap().measured, 0.0);
        assert!(d.validate(&phi, ValidationKind::Margin, 10, 1).is_err());
        let s = SyntheticDistribution::benign(sphere(), 1, 0).unwrap();
        for k in [ValidationKind::Margin, ValidationKind::Holder] {
            assert!(s.validate(&phi, k, 20_000, 2).unwrap().pass);
        }
    }

    #[test]
    fn validators_on_hard_instances() {
        for (m, phi) in [
            (circle(), CostMatrix::zero_one(2).unwrap()),
            (sphere(), CostMatrix::new(vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![5.0, 4.0, 0.0]]).unwrap()),
        ] {
            let p = hard_default_params(&phi, &m).unwrap();
            let d = build_hard(m, &phi, p, 1.0 / 40.0, None, 1).unwrap();
            for k in [ValidationKind::Margin, ValidationKind::Holder, ValidationKind::Regularity] {
                let rep = d.validate(&phi, k, 20_000, 3).unwrap();
                assert!(rep.pass, "{rep:?}");
            }
        }
    }

    #[test]
    fn spec_round_trip() {
        let d = hard(sphere(), 1.0 / 40.0);
        let text = d.spec().to_text();
        let back: DistributionSpec = text.parse().unwrap();
        assert_eq!(back.build().unwrap(), d);
        let b = SyntheticDistribution::benign(circle(), 2, 4).unwrap();
        assert_eq!(b.spec().to_text().parse::<DistributionSpec>().unwrap().build().unwrap(), b);
        assert!("family = benign\nbogus = 1\n".parse::<DistributionSpec>().is_err());
        assert_eq!(sigma_from_string("+-0").unwrap(), vec![1, -1, 0]);
        assert!(sigma_from_string("+x").is_err());
    }

    #[test]
    fn sample_is_deterministic() {
        let d = SyntheticDistribution::benign(sphere(), 2, 0).unwrap();
        assert_eq!(d.sample(100, 7), d.sample(100, 7));
        assert_ne!(d.sample(100, 7), d.sample(100, 8));
        let e = d.sample(50, 1);
        let ds = e.clone().into_dataset().unwrap();
        assert_eq!(ds.len(), 50);
        assert!(mean(&ds.labels().iter().map(|y| y.get() as f64).collect::<Vec<_>>()) > 1.0);
    }

    proptest! {
        #[test]
        fn arc_overlap_matches_brute_force(a in -7.0f64..7.0, h in 0.0f64..1.5, w in -7.0f64..7.0, b in 0.0f64..1.0) {
            let steps = 20_000;
            let inside = |t: f64, c: f64, half: f64| {
                let d = (t - c).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d) <= half
            };
            let hits = (0..steps)
                .filter(|&i| {
                    let t = 2.0 * PI * (i as f64 + 0.5) / steps as f64;
                    inside(t, a, h) && inside(t, w, b)
                })
                .count();
            let brute = 2.0 * PI * hits as f64 / steps as f64;
            prop_assert!((arc_overlap(a, h, w, b) - brute).abs() < 2.0 * 2.0 * PI / steps as f64 * 2.0);
        }
    }
}
