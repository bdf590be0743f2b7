//! Circles and spheres embedded isometrically in `R^d`.
//!
//! A manifold of intrinsic dimension `γ` lives in the span of `γ + 1`
//! orthonormal directions of `R^d`, drawn from a seeded Gaussian matrix.
//! Canonical coordinates are the coefficients along those directions.
//!
//! Besides geodesic geometry and uniform sampling, the module provides the
//! volume and covering computations used to validate the quantitative
//! regularity lemmas: volume bounds for small balls, intersection bounds,
//! greedy nets, covering numbers and the Dudley entropy integral.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::numeric::{dist, sq_dist};
use crate::rng::{self, streams, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Circle,
    Sphere,
}

impl ManifoldKind {
    pub fn intrinsic_dim(self) -> usize {
        match self {
            ManifoldKind::Circle => 1,
            ManifoldKind::Sphere => 2,
        }
    }

    /// Volume of the unit ball in `R^γ`.
    pub fn v_gamma(self) -> f64 {
        match self {
            ManifoldKind::Circle => 2.0,
            ManifoldKind::Sphere => PI,
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ManifoldKind::Circle => "circle",
            ManifoldKind::Sphere => "sphere",
        })
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(ManifoldKind::Circle),
            "sphere" => Ok(ManifoldKind::Sphere),
            _ => Err(invalid(format!("unknown manifold kind `{s}`"))),
        }
    }
}

/// Circle or sphere of radius `R` inside `R^d`, rotated by a seeded frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedManifold {
    kind: ManifoldKind,
    radius: f64,
    ambient_dim: usize,
    rotation_seed: u64,
    /// `γ + 1` orthonormal vectors of length `d`, stored one after another.
    frame: Vec<f64>,
}

impl EmbeddedManifold {
    pub fn new(kind: ManifoldKind, radius: f64, ambient_dim: usize, rotation_seed: u64) -> Result<Self> {
        let k = kind.intrinsic_dim() + 1;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius must be positive"));
        }
        if ambient_dim < k {
            return Err(invalid(format!("ambient dimension must be at least {k}")));
        }
        let frame = orthonormal_frame(ambient_dim, k, rotation_seed);
        Ok(EmbeddedManifold { kind, radius, ambient_dim, rotation_seed, frame })
    }

    pub fn circle(radius: f64, ambient_dim: usize, rotation_seed: u64) -> Result<Self> {
        Self::new(ManifoldKind::Circle, radius, ambient_dim, rotation_seed)
    }

    pub fn sphere(radius: f64, ambient_dim: usize, rotation_seed: u64) -> Result<Self> {
        Self::new(ManifoldKind::Sphere, radius, ambient_dim, rotation_seed)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn reach(&self) -> f64 {
        self.radius
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.kind.intrinsic_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rotation_seed(&self) -> u64 {
        self.rotation_seed
    }

    pub fn v_gamma(&self) -> f64 {
        self.kind.v_gamma()
    }

    /// Number of canonical coordinates, `γ + 1`.
    pub fn canonical_dim(&self) -> usize {
        self.intrinsic_dim() + 1
    }

    /// Total surface measure.
    pub fn volume(&self) -> f64 {
        match self.kind {
            ManifoldKind::Circle => 2.0 * PI * self.radius,
            ManifoldKind::Sphere => 4.0 * PI * self.radius * self.radius,
        }
    }

    /// Largest geodesic distance between two points, `πR`.
    pub fn geodesic_diameter(&self) -> f64 {
        PI * self.radius
    }

    fn axis(&self, i: usize) -> &[f64] {
        &self.frame[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    /// Map canonical coordinates in `R^{γ+1}` into `R^d`.
    pub fn embed(&self, canonical: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.ambient_dim];
        for (i, c) in canonical.iter().enumerate() {
            for (xj, aj) in x.iter_mut().zip(self.axis(i)) {
                *xj += c * aj;
            }
        }
        x
    }

    /// Coordinates of `x` along the frame, without any surface check.
    pub fn project_canonical(&self, x: &[f64]) -> Vec<f64> {
        (0..self.canonical_dim()).map(|i| self.axis(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Canonical coordinates of a surface point.
    pub fn canonical(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, got: x.len() });
        }
        let c = self.project_canonical(x);
        let off_span = dist(x, &self.embed(&c));
        let residual = (crate::numeric::norm(&c) - self.radius).abs().max(off_span);
        if residual > 1e-8 * self.radius.max(1.0) {
            return Err(Error::OffSurface { residual });
        }
        Ok(c)
    }

    /// Point on the circle at the given angle.
    pub fn circle_point(&self, angle: f64) -> Vec<f64> {
        debug_assert_eq!(self.kind, ManifoldKind::Circle);
        self.embed(&[self.radius * angle.cos(), self.radius * angle.sin()])
    }

    /// Point on the sphere with height `z` and longitude `lon`.
    pub fn sphere_point(&self, z: f64, lon: f64) -> Vec<f64> {
        debug_assert_eq!(self.kind, ManifoldKind::Sphere);
        let s = (self.radius * self.radius - z * z).max(0.0).sqrt();
        self.embed(&[s * lon.cos(), s * lon.sin(), z])
    }

    /// Geodesic distance between canonical points.
    pub fn geodesic_canonical(&self, c0: &[f64], c1: &[f64]) -> f64 {
        let chord = dist(c0, c1);
        2.0 * self.radius * (chord / (2.0 * self.radius)).min(1.0).asin()
    }

    /// `R` times the central angle between two surface points.
    pub fn geodesic_distance(&self, x0: &[f64], x1: &[f64]) -> Result<f64> {
        let c0 = self.canonical(x0)?;
        let c1 = self.canonical(x1)?;
        Ok(self.geodesic_canonical(&c0, &c1))
    }

    /// One uniform draw, in canonical coordinates.
    pub fn sample_canonical(&self, rng: &mut Rng) -> Vec<f64> {
        let r = self.radius;
        match self.kind {
            ManifoldKind::Circle => {
                let a = rng.gen_range(0.0..2.0 * PI);
                vec![r * a.cos(), r * a.sin()]
            }
            ManifoldKind::Sphere => {
                let z: f64 = rng.gen_range(-1.0..=1.0);
                let lon = rng.gen_range(0.0..2.0 * PI);
                let s = (1.0 - z * z).max(0.0).sqrt();
                vec![r * s * lon.cos(), r * s * lon.sin(), r * z]
            }
        }
    }

    /// Uniform draw from the geodesic ball of radius `r` about a canonical
    /// center, in canonical coordinates.
    pub fn sample_in_geodesic_ball(&self, center: &[f64], r: f64, rng: &mut Rng) -> Vec<f64> {
        let a_max = (r / self.radius).min(PI);
        match self.kind {
            ManifoldKind::Circle => {
                let a0 = center[1].atan2(center[0]);
                let a = a0 + rng.gen_range(-a_max..=a_max);
                vec![self.radius * a.cos(), self.radius * a.sin()]
            }
            ManifoldKind::Sphere => {
                let cos_t = rng.gen_range(a_max.cos()..=1.0);
                let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
                let lon = rng.gen_range(0.0..2.0 * PI);
                let u: Vec<f64> = center.iter().map(|c| c / self.radius).collect();
                let (e1, e2) = tangent_basis(&u);
                (0..3).map(|i| self.radius * (cos_t * u[i] + sin_t * (lon.cos() * e1[i] + lon.sin() * e2[i]))).collect()
            }
        }
    }

    /// `count` i.i.d. uniform surface points in `R^d`.
    pub fn sample_uniform(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::stream(seed, streams::TRAIN);
        (0..count).map(|_| self.embed(&self.sample_canonical(&mut rng))).collect()
    }

    /// Surface measure of a geodesic ball of radius `r`.
    pub fn geodesic_ball_volume(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(invalid("radius must be nonnegative"));
        }
        let big_r = self.radius;
        Ok(match self.kind {
            ManifoldKind::Circle => (2.0 * r).min(2.0 * PI * big_r),
            ManifoldKind::Sphere => 2.0 * PI * big_r * big_r * (1.0 - (r / big_r).min(PI).cos()),
        })
    }

    /// Surface measure of the intersection with a Euclidean ball of radius
    /// `r` centred on the surface.
    pub fn euclidean_ball_volume(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(invalid("radius must be nonnegative"));
        }
        let big_r = self.radius;
        if r >= 2.0 * big_r {
            return Ok(self.volume());
        }
        Ok(match self.kind {
            ManifoldKind::Circle => 4.0 * big_r * (r / (2.0 * big_r)).asin(),
            ManifoldKind::Sphere => PI * r * r,
        })
    }

    /// Serialise as `kind radius gamma d rotation_seed`.
    pub fn to_text(&self) -> String {
        format!("{} {} {} {} {}", self.kind, self.radius, self.intrinsic_dim(), self.ambient_dim, self.rotation_seed)
    }
}

impl FromStr for EmbeddedManifold {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let f: Vec<&str> = s.split_whitespace().collect();
        let err = |msg: String| Error::Parse { line: 1, msg };
        if f.len() != 5 {
            return Err(err("expected `kind radius gamma d rotation_seed`".into()));
        }
        let kind: ManifoldKind = f[0].parse()?;
        let radius: f64 = f[1].parse().map_err(|e| err(format!("radius: {e}")))?;
        let gamma: usize = f[2].parse().map_err(|e| err(format!("gamma: {e}")))?;
        let d: usize = f[3].parse().map_err(|e| err(format!("d: {e}")))?;
        let seed: u64 = f[4].parse().map_err(|e| err(format!("rotation_seed: {e}")))?;
        if gamma != kind.intrinsic_dim() {
            return Err(err(format!("a {kind} has intrinsic dimension {}", kind.intrinsic_dim())));
        }
        EmbeddedManifold::new(kind, radius, d, seed)
    }
}

/// `k` orthonormal vectors in `R^d` from a seeded Gaussian matrix, using
/// modified Gram–Schmidt with one reorthogonalisation pass.
fn orthonormal_frame(d: usize, k: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, streams::ROTATION);
    let mut frame: Vec<f64> = Vec::with_capacity(d * k);
    for i in 0..k {
        let mut v: Vec<f64> = loop {
            let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            for _ in 0..2 {
                for j in 0..i {
                    let q = &frame[j * d..(j + 1) * d];
                    let p: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(q).for_each(|(x, qj)| *x -= p * qj);
                }
            }
            if crate::numeric::norm(&v) > 1e-6 {
                break v;
            }
        };
        let n = crate::numeric::norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        frame.extend(v);
    }
    frame
}

/// Two unit vectors completing `u` to an orthonormal basis of `R^3`.
fn tangent_basis(u: &[f64]) -> ([f64; 3], [f64; 3]) {
    let pick = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let p: f64 = (0..3).map(|i| pick[i] * u[i]).sum();
    let mut e1 = [pick[0] - p * u[0], pick[1] - p * u[1], pick[2] - p * u[2]];
    let n = (e1.iter().map(|v| v * v).sum::<f64>()).sqrt();
    e1.iter_mut().for_each(|v| *v /= n);
    let e2 = [u[1] * e1[2] - u[2] * e1[1], u[2] * e1[0] - u[0] * e1[2], u[0] * e1[1] - u[1] * e1[0]];
    (e1, e2)
}

/// Regularity, smoothness and margin parameters of a distribution class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityParams {
    pub c0: f64,
    pub r0: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    pub zeta_max: f64,
    pub alpha: f64,
    pub c_alpha: f64,
    pub beta: f64,
    pub c_beta: f64,
}

impl RegularityParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.c0, self.r0, self.nu_min, self.nu_max, self.zeta_max, self.alpha, self.c_alpha, self.beta, self.c_beta];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("regularity parameters must be positive"));
        }
        if self.c0 > 1.0 {
            return Err(invalid("c0 must lie in (0, 1]"));
        }
        if self.alpha > 1.0 {
            return Err(invalid("alpha must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// `(λ, C_λ)` with `λ = α/γ`: the measure-smoothness constants implied by
/// Hölder smoothness on a regular support.
pub fn smoothness_constants(p: &RegularityParams, m: &EmbeddedManifold) -> Result<(f64, f64)> {
    p.validate()?;
    let gamma = m.intrinsic_dim() as f64;
    let lambda = p.alpha / gamma;
    let lead = p.c_alpha.max((m.reach() / 8.0).powf(-p.alpha)).max(p.r0.powf(-p.alpha));
    let base = p.c0 * p.nu_min * 4f64.powf(-gamma) * m.v_gamma();
    Ok((lambda, lead * base.powf(-lambda)))
}

/// Doubling constant `C̃` with `μ(B_{θr}) ≤ C̃ θ^γ μ(B_r)`.
pub fn doubling_constant(p: &RegularityParams, m: &EmbeddedManifold) -> Result<f64> {
    p.validate()?;
    let gamma = m.intrinsic_dim() as f64;
    let v = m.v_gamma();
    let lower = p.c0 * p.nu_min * 4f64.powf(-gamma) * v;
    let upper = (p.nu_max * 4f64.powf(gamma) * v).max((m.reach() / 8.0).min(p.r0).powf(-gamma));
    Ok(upper / lower)
}

/// One radius of a volume-bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeBoundRow {
    pub r: f64,
    pub lower: f64,
    pub geodesic: f64,
    pub euclidean: f64,
    pub upper: f64,
    pub pass: bool,
}

impl VolumeBoundRow {
    /// Smallest gap in the chain `lower ≤ geodesic ≤ euclidean ≤ upper`.
    pub fn slack(&self) -> f64 {
        (self.geodesic - self.lower).min(self.euclidean - self.geodesic).min(self.upper - self.euclidean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeBoundReport {
    pub rows: Vec<VolumeBoundRow>,
}

impl VolumeBoundReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn min_slack(&self) -> f64 {
        self.rows.iter().map(VolumeBoundRow::slack).fold(f64::INFINITY, f64::min)
    }
}

/// `4^{-γ} v_γ r^γ ≤ V(B^g_r) ≤ V(B_r ∩ M) ≤ 4^γ v_γ r^γ` for each `r < τ/8`.
pub fn check_volume_bounds(m: &EmbeddedManifold, r_grid: &[f64]) -> Result<VolumeBoundReport> {
    let gamma = m.intrinsic_dim() as i32;
    let v = m.v_gamma();
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        if !(0.0..m.reach() / 8.0).contains(&r) {
            return Err(invalid(format!("radius {r} must lie in [0, reach/8)")));
        }
        let lower = 4f64.powi(-gamma) * v * r.powi(gamma);
        let upper = 4f64.powi(gamma) * v * r.powi(gamma);
        let geodesic = m.geodesic_ball_volume(r)?;
        let euclidean = m.euclidean_ball_volume(r)?;
        let pass = lower <= geodesic && geodesic <= euclidean && euclidean <= upper;
        rows.push(VolumeBoundRow { r, lower, geodesic, euclidean, upper, pass });
    }
    Ok(VolumeBoundReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionReport {
    /// Measure of `B^g_r(x) ∩ B^g_{r̃}(x̃)`, exact or Monte-Carlo.
    pub estimate: f64,
    /// Monte-Carlo standard error, zero when analytic.
    pub sigma: f64,
    pub bound: f64,
    pub analytic: bool,
    pub pass: bool,
}

/// Lower bound `2^{-4γ} v_γ r̃^γ` on the overlap of two geodesic balls
/// whose centres are at most `r + r̃/2` apart.
pub fn check_intersection_bound(
    m: &EmbeddedManifold,
    x: &[f64],
    x_tilde: &[f64],
    r: f64,
    r_tilde: f64,
    mc_n: usize,
    seed: u64,
) -> Result<IntersectionReport> {
    if !(0.0 < r_tilde && r_tilde <= r && r < m.reach() / 8.0) {
        return Err(invalid("need 0 < r_tilde <= r < reach/8"));
    }
    let c = m.canonical(x)?;
    let ct = m.canonical(x_tilde)?;
    let rho = m.geodesic_canonical(&c, &ct);
    if rho > r + r_tilde / 2.0 + 1e-12 {
        return Err(invalid(format!("centres are {rho} apart, more than r + r_tilde/2")));
    }
    let gamma = m.intrinsic_dim() as i32;
    let bound = 2f64.powi(-4 * gamma) * m.v_gamma() * r_tilde.powi(gamma);
    let (estimate, sigma, analytic) = match m.kind() {
        ManifoldKind::Circle => {
            let overlap = (r.min(rho + r_tilde) - (-r).max(rho - r_tilde)).max(0.0);
            (overlap, 0.0, true)
        }
        ManifoldKind::Sphere => {
            if mc_n == 0 {
                return Err(invalid("Monte-Carlo sample size must be positive"));
            }
            let mut rng = rng::stream(seed, streams::AUX);
            let hits = (0..mc_n)
                .filter(|_| m.geodesic_canonical(&c, &m.sample_in_geodesic_ball(&ct, r_tilde, &mut rng)) <= r)
                .count();
            let p = hits as f64 / mc_n as f64;
            let vol = m.geodesic_ball_volume(r_tilde)?;
            (vol * p, vol * (p * (1.0 - p) / mc_n as f64).sqrt(), false)
        }
    };
    let pass = estimate >= bound - 3.0 * sigma;
    Ok(IntersectionReport { estimate, sigma, bound, analytic, pass })
}

/// Greedy maximal subset with pairwise Euclidean distance `> r`, scanning
/// in input order. Returns indices into `points`.
pub fn separated_net<P: AsRef<[f64]>>(points: &[P], r: f64) -> Vec<usize> {
    let r2 = r * r;
    let mut kept: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if kept.iter().all(|&j| sq_dist(p.as_ref(), points[j].as_ref()) > r2) {
            kept.push(i);
        }
    }
    kept
}

/// Sandwich for the covering number at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoveringEstimate {
    /// Size of a greedy cover by sample points; an upper bound on `N(r)`.
    pub upper: usize,
    /// Size of a greedy `2r`-separated subset; a lower bound on `N(r)`.
    pub lower: usize,
}

/// Pairwise distance matrix, row-major.
fn distance_matrix<P: AsRef<[f64]>>(points: &[P]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = dist(points[i].as_ref(), points[j].as_ref());
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Covering radius comparisons allow relative rounding of `1e-12`.
fn within(d: f64, r: f64) -> bool {
    d <= r * (1.0 + 1e-12)
}

/// Lazy greedy set cover by closed balls of radius `r` centred at points.
fn greedy_cover(dm: &[f64], n: usize, r: f64) -> usize {
    let mut covered = vec![false; n];
    let mut remaining = n;
    let mut gain: Vec<usize> = (0..n).map(|i| (0..n).filter(|&j| within(dm[i * n + j], r)).count()).collect();
    let mut count = 0;
    while remaining > 0 {
        // Lazy evaluation: gains only decrease, so refresh the best stale entry
        // until it stays on top.
        let best = loop {
            let (i, &g) = gain.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).unwrap();
            let fresh = (0..n).filter(|&j| !covered[j] && within(dm[i * n + j], r)).count();
            if fresh == g {
                break i;
            }
            gain[i] = fresh;
        };
        for j in 0..n {
            if !covered[j] && within(dm[best * n + j], r) {
                covered[j] = true;
                remaining -= 1;
            }
        }
        gain[best] = 0;
        count += 1;
    }
    count
}

fn greedy_separated(dm: &[f64], n: usize, r: f64) -> usize {
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..n {
        if kept.iter().all(|&j| dm[i * n + j] > r) {
            kept.push(i);
        }
    }
    kept.len()
}

/// Greedy estimate of the covering number `N(A, ρ, r)` for a finite sample.
pub fn covering_number<P: AsRef<[f64]>>(points: &[P], r: f64) -> Result<CoveringEstimate> {
    if !(r > 0.0) {
        return Err(invalid("covering radius must be positive"));
    }
    if points.is_empty() {
        return Ok(CoveringEstimate { upper: 0, lower: 0 });
    }
    let dm = distance_matrix(points);
    let n = points.len();
    Ok(CoveringEstimate { upper: greedy_cover(&dm, n, r), lower: greedy_separated(&dm, n, 2.0 * r) })
}

const DUDLEY_STEPS: usize = 64;

/// Dudley entropy bound `(ln 2)^{-1/2} ∫ √(ln N(r)) dr` with `N` the greedy
/// covering estimate.
///
/// Below half the minimum pairwise distance `N` equals the sample size and
/// that piece is integrated exactly. Above it a 64-step geometric grid up to
/// the diameter is summed with left endpoints; `N` is nonincreasing in `r`,
/// so this overestimates the integral.
pub fn dudley_bound<P: AsRef<[f64]>>(points: &[P]) -> f64 {
    let n = points.len();
    let dm = distance_matrix(points);
    let off_diag = || (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| dm[i * n + j]);
    let diameter = off_diag().fold(0.0, f64::max);
    let min_pos = off_diag().filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
    if diameter == 0.0 {
        return 0.0;
    }
    let distinct = {
        let mut seen = vec![true; n];
        for i in 0..n {
            if seen[i] {
                for j in i + 1..n {
                    if dm[i * n + j] == 0.0 {
                        seen[j] = false;
                    }
                }
            }
        }
        seen.iter().filter(|&&s| s).count()
    };
    let a = min_pos / 2.0;
    let mut total = a * (distinct as f64).ln().sqrt();
    let ratio = (diameter / a).powf(1.0 / DUDLEY_STEPS as f64);
    let mut lo = a;
    for step in 0..DUDLEY_STEPS {
        let hi = if step + 1 == DUDLEY_STEPS { diameter } else { lo * ratio };
        let cover = greedy_cover(&dm, n, lo);
        total += (hi - lo) * (cover as f64).ln().sqrt();
        lo = hi;
    }
    total / 2f64.ln().sqrt()
}

/// Covering-number ceiling `c0^{-1} V (γ+4)^{γ/2+2} r^{-γ}` for regular sets.
pub fn covering_ceiling(c0: f64, volume: f64, gamma: usize, r: f64) -> f64 {
    let g = gamma as f64;
    volume / c0 * (g + 4.0).powf(g / 2.0 + 2.0) * r.powf(-g)
}
