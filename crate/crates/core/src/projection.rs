//! Subgaussian random projections `x -> h^{-1/2} V x`.
//!
//! `V` is an `h x d` matrix with i.i.d. isotropic entries: standard normal
//! for [`ProjectionKind::Gaussian`], and `{-sqrt 3, 0, +sqrt 3}` with
//! probabilities `1/6, 2/3, 1/6` for [`ProjectionKind::Achlioptas`]. Both have
//! unit entry variance, so `E |h^{-1/2} V x|^2 = |x|^2`.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::numeric::{log_plus, sq_dist};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    Gaussian,
    Achlioptas,
    /// `V = I`; only valid with `h = d`. Used to test the plumbing.
    IdentityTest,
}

impl ProjectionKind {
    /// Default subgaussian norm parameter for the entry distribution.
    ///
    /// For Achlioptas entries this is the generic bound for a variable
    /// bounded by `sqrt 3`, i.e. `sqrt(3 / ln 2)`; it is not tight.
    pub fn default_psi2(self) -> f64 {
        match self {
            ProjectionKind::Gaussian | ProjectionKind::IdentityTest => 1.0,
            ProjectionKind::Achlioptas => (3.0 / std::f64::consts::LN_2).sqrt(),
        }
    }
}

impl fmt::Display for ProjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProjectionKind::Gaussian => "gaussian",
            ProjectionKind::Achlioptas => "achlioptas",
            ProjectionKind::IdentityTest => "identity-test",
        })
    }
}

impl FromStr for ProjectionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ProjectionKind::Gaussian),
            "achlioptas" => Ok(ProjectionKind::Achlioptas),
            "identity-test" | "identity" => Ok(ProjectionKind::IdentityTest),
            other => Err(invalid(format!("unknown projection kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSpec {
    pub kind: ProjectionKind,
    pub ambient_dim: usize,
    pub target_dim: usize,
    pub psi2: f64,
    pub seed: u64,
}

impl ProjectionSpec {
    /// Spec with the kind's default `psi2`.
    pub fn new(kind: ProjectionKind, ambient_dim: usize, target_dim: usize, seed: u64) -> Result<Self> {
        let spec = ProjectionSpec { kind, ambient_dim, target_dim, psi2: kind.default_psi2(), seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_dim == 0 || self.ambient_dim == 0 {
            return Err(invalid("projection dimensions must be positive"));
        }
        if self.target_dim > self.ambient_dim {
            return Err(invalid(format!(
                "projection must not increase dimension: h = {} > d = {}",
                self.target_dim, self.ambient_dim
            )));
        }
        if self.kind == ProjectionKind::IdentityTest && self.target_dim != self.ambient_dim {
            return Err(invalid("identity-test projection requires h = d"));
        }
        if !(self.psi2 > 0.0) {
            return Err(invalid("psi2 must be positive"));
        }
        Ok(())
    }
}

/// A sampled projection. `rows` is stored before the `h^{-1/2}` scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    rows: Vec<f64>,
    spec: ProjectionSpec,
}

/// Draw the matrix for `spec`. Deterministic in `spec.seed`.
pub fn sample_projection(spec: &ProjectionSpec) -> Result<ProjectionMatrix> {
    spec.validate()?;
    let (h, d) = (spec.target_dim, spec.ambient_dim);
    let mut rng = rng::stream(spec.seed, rng::streams::PROJECTION);
    let rows = match spec.kind {
        ProjectionKind::Gaussian => (0..h * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        ProjectionKind::Achlioptas => {
            let s3 = 3f64.sqrt();
            (0..h * d)
                .map(|_| match rng.gen_range(0u8..6) {
                    0 => -s3,
                    5 => s3,
                    _ => 0.0,
                })
                .collect()
        }
        ProjectionKind::IdentityTest => {
            let mut v = vec![0.0; h * d];
            for i in 0..h {
                v[i * d + i] = 1.0;
            }
            v
        }
    };
    Ok(ProjectionMatrix { rows, spec: *spec })
}

impl ProjectionMatrix {
    /// Wrap an explicit `h x d` matrix (row-major, unscaled).
    pub fn from_rows(spec: ProjectionSpec, rows: Vec<Vec<f64>>) -> Result<Self> {
        spec.validate()?;
        if rows.len() != spec.target_dim {
            return Err(Error::DimensionMismatch { expected: spec.target_dim, got: rows.len() });
        }
        let mut flat = Vec::with_capacity(spec.target_dim * spec.ambient_dim);
        for r in rows {
            if r.len() != spec.ambient_dim {
                return Err(Error::DimensionMismatch { expected: spec.ambient_dim, got: r.len() });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(invalid("projection entries must be finite"));
            }
            flat.extend(r);
        }
        Ok(ProjectionMatrix { rows: flat, spec })
    }

    pub fn spec(&self) -> &ProjectionSpec {
        &self.spec
    }

    pub fn ambient_dim(&self) -> usize {
        self.spec.ambient_dim
    }

    pub fn target_dim(&self) -> usize {
        self.spec.target_dim
    }

    /// Row `i` of the unscaled matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.spec.ambient_dim;
        &self.rows[i * d..(i + 1) * d]
    }

    pub fn entries(&self) -> &[f64] {
        &self.rows
    }

    /// `h^{-1/2} V x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.spec.ambient_dim, got: x.len() });
        }
        let mut out = vec![0.0; self.spec.target_dim];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`apply`](Self::apply) writing into `out`.
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let scale = 1.0 / (self.spec.target_dim as f64).sqrt();
        for (i, o) in out.iter_mut().enumerate() {
            let dot: f64 = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
            *o = scale * dot;
        }
    }

    /// Text form: header `kind d h seed psi2`, then `h` rows of `d` values.
    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let mut out = format!("{} {} {} {} {}\n", s.kind, s.ambient_dim, s.target_dim, s.seed, s.psi2);
        for i in 0..s.target_dim {
            let cells: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

impl FromStr for ProjectionMatrix {
    type Err = Error;
    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 4 && f.len() != 5 {
            return Err(Error::Parse { line: 1, msg: "header must be `kind d h seed [psi2]`".into() });
        }
        let perr = |m: String| Error::Parse { line: 1, msg: m };
        let kind: ProjectionKind = f[0].parse()?;
        let d: usize = f[1].parse().map_err(|e| perr(format!("{e}")))?;
        let h: usize = f[2].parse().map_err(|e| perr(format!("{e}")))?;
        let seed: u64 = f[3].parse().map_err(|e| perr(format!("{e}")))?;
        let psi2 = match f.get(4) {
            Some(v) => v.parse().map_err(|e| perr(format!("{e}")))?,
            None => kind.default_psi2(),
        };
        let spec = ProjectionSpec { kind, ambient_dim: d, target_dim: h, psi2, seed };
        let mut rows = Vec::with_capacity(h);
        for (no, line) in lines {
            let row: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            rows.push(row.map_err(|e| Error::Parse { line: no + 1, msg: format!("{e}") })?);
        }
        ProjectionMatrix::from_rows(spec, rows)
    }
}

/// Worst relative squared-distance distortion over all pairs of `points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distortion {
    pub eps_hat: f64,
    pub worst_pair: (usize, usize),
}

/// `max |‖φ(x0) − φ(x1)‖² / ‖x0 − x1‖² − 1|` over distinct pairs;
/// coincident pairs are skipped.
pub fn distortion<P: AsRef<[f64]>>(m: &ProjectionMatrix, points: &[P]) -> Result<Distortion> {
    let projected: Vec<Vec<f64>> = points.iter().map(|p| m.apply(p.as_ref())).collect::<Result<_>>()?;
    let mut best: Option<Distortion> = None;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let orig = sq_dist(points[i].as_ref(), points[j].as_ref());
            if orig == 0.0 {
                continue;
            }
            let e = (sq_dist(&projected[i], &projected[j]) / orig - 1.0).abs();
            if best.map_or(true, |b| e > b.eps_hat) {
                best = Some(Distortion { eps_hat: e, worst_pair: (i, j) });
            }
        }
    }
    best.ok_or_else(|| invalid("distortion needs at least two distinct points"))
}

/// `sqrt((1 + eps) / (1 - eps))`.
pub fn theta_from_epsilon(eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(invalid(format!("epsilon must lie in [0,1), got {eps}")));
    }
    Ok(((1.0 + eps) / (1.0 - eps)).sqrt())
}

/// `(theta^2 - 1) / (theta^2 + 1)`.
pub fn epsilon_from_theta(theta: f64) -> Result<f64> {
    if !(theta >= 1.0) || !theta.is_finite() {
        return Err(invalid(format!("theta must be finite and >= 1, got {theta}")));
    }
    let t2 = theta * theta;
    Ok((t2 - 1.0) / (t2 + 1.0))
}

/// Geometric inputs shared by both target-dimension bounds.
///
/// `k_const` is the unspecified absolute constant of the bound; the value
/// only fixes the shape of the formula. Logs are natural and
/// `log_+(x) = max{ln x, 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionBoundInputs {
    pub gamma: u32,
    pub tau: f64,
    pub r0: f64,
    pub c0: f64,
    pub nu_min: f64,
    pub delta: f64,
    pub psi2: f64,
    pub k_const: f64,
}

impl Default for DimensionBoundInputs {
    fn default() -> Self {
        DimensionBoundInputs { gamma: 1, tau: 1.0, r0: 0.1, c0: 0.1, nu_min: 0.1, delta: 0.01, psi2: 1.0, k_const: 1.0 }
    }
}

impl DimensionBoundInputs {
    fn check(&self) -> Result<()> {
        if self.gamma == 0 || !(self.tau > 0.0 && self.r0 > 0.0 && self.psi2 > 0.0 && self.k_const > 0.0) {
            return Err(invalid("gamma, tau, r0, psi2 and K must be positive"));
        }
        if !(self.c0 > 0.0 && self.c0 <= 1.0) || !(self.nu_min > 0.0) {
            return Err(invalid("c0 must lie in (0,1] and nu_min must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta must lie in (0,1)"));
        }
        Ok(())
    }

    fn geometry_term(&self) -> f64 {
        let g = self.gamma as f64;
        g * log_plus(g / (self.r0 * self.tau)) + g
    }
}

/// Projected dimension sufficient for `theta`-approximate neighbours with
/// probability `1 - delta`.
pub fn dimension_bound(theta: f64, inp: &DimensionBoundInputs) -> Result<usize> {
    inp.check()?;
    if !(theta > 1.0) {
        return Err(invalid(format!("theta must exceed 1, got {theta}")));
    }
    let t2 = theta * theta;
    let ratio = ((t2 + 1.0) / (t2 - 1.0)).powi(2);
    let inner = (inp.geometry_term() - log_plus(inp.c0 * inp.nu_min)).max(inp.delta.recip().ln());
    Ok((inp.k_const * inp.psi2.powi(4) * ratio * inner).ceil() as usize)
}

/// Projected dimension sufficient for an `eps`-isometry on a regular subset
/// of volume `support_volume`, with probability `1 - delta`. `nu_min` is
/// ignored in this form.
pub fn dimension_bound_epsilon(eps: f64, support_volume: f64, inp: &DimensionBoundInputs) -> Result<usize> {
    inp.check()?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0,1), got {eps}")));
    }
    if !(support_volume > 0.0) {
        return Err(invalid("support volume must be positive"));
    }
    let inner = (inp.geometry_term() + log_plus(support_volume / inp.c0)).max(inp.delta.recip().ln());
    Ok((inp.k_const * inp.psi2.powi(4) * inner / (eps * eps)).ceil() as usize)
}
