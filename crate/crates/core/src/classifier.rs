//! Plug-in cost-sensitive k-NN classification and Monte-Carlo risk.

use rayon::prelude::*;

use crate::cost_geometry::{optimal_labels, CostMatrix, Label, ProbVector};
use crate::error::{invalid, Error, Result};
use crate::hard_family::SyntheticDistribution;
use crate::neighbours::{NeighbourIndex, SearchMode};
use crate::numeric::pairwise_sum;

/// `k_n = ⌈k0 · n^{2α/(2α+γ)} · (1 + ln(1/ξ))^{γ/(2α+γ)}⌉`, clamped to
/// `[1, n]`. The confidence factor is 1 unless `xi` is set.
///
/// In the measure-smooth formulation with exponent `λ = α/γ` the exponent
/// `2λ/(2λ+1)` is the same number, so one schedule serves both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub k0: f64,
    pub alpha: f64,
    pub gamma: usize,
    pub xi: Option<f64>,
}

impl Schedule {
    pub fn new(k0: f64, alpha: f64, gamma: usize) -> Result<Self> {
        let s = Schedule { k0, alpha, gamma, xi: None };
        s.validate()?;
        Ok(s)
    }

    pub fn with_confidence(self, xi: f64) -> Result<Self> {
        let s = Schedule { xi: Some(xi), ..self };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if !(self.k0 > 0.0) {
            return Err(invalid("k0 must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha must lie in (0, 1]"));
        }
        if self.gamma == 0 {
            return Err(invalid("gamma must be positive"));
        }
        if let Some(xi) = self.xi {
            if !(xi > 0.0 && xi < 1.0) {
                return Err(invalid("xi must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    /// Rate exponent `2α/(2α+γ)`.
    pub fn exponent(&self) -> f64 {
        2.0 * self.alpha / (2.0 * self.alpha + self.gamma as f64)
    }
}

/// Number of neighbours for a sample of size `n`.
pub fn k_schedule(s: &Schedule, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let g = s.gamma as f64;
    let conf = s.xi.map_or(1.0, |xi| (1.0 + (1.0 / xi).ln()).powf(g / (2.0 * s.alpha + g)));
    let raw = s.k0 * (n as f64).powf(s.exponent()) * conf;
    // Shave a few ulps so exact powers such as 512^{2/3} = 64 do not round up.
    let k = (raw * (1.0 - 4.0 * f64::EPSILON)).ceil();
    (k.max(1.0) as usize).min(n)
}

/// Empirical label frequencies.
pub fn estimate_eta(labels: &[Label], num_labels: usize) -> Result<ProbVector> {
    if labels.is_empty() {
        return Err(invalid("cannot estimate from zero labels"));
    }
    let mut counts = vec![0usize; num_labels];
    for y in labels {
        if y.get() > num_labels {
            return Err(Error::LabelOutOfRange { label: y.get(), num_labels });
        }
        counts[y.index()] += 1;
    }
    let k = labels.len() as f64;
    ProbVector::new(counts.into_iter().map(|c| c as f64 / k).collect())
}

/// Smallest label minimising expected cost under `eta_hat`.
pub fn predict(phi: &CostMatrix, eta_hat: &ProbVector) -> Result<Label> {
    Ok(optimal_labels(phi, eta_hat)?[0])
}

/// Most frequent label, smallest on ties.
pub fn majority_vote(labels: &[Label], num_labels: usize) -> Result<Label> {
    if labels.is_empty() {
        return Err(invalid("cannot vote with zero labels"));
    }
    let mut counts = vec![0usize; num_labels];
    for y in labels {
        counts[y.index()] += 1;
    }
    let best = *counts.iter().max().unwrap();
    Ok(Label::from_index(counts.iter().position(|&c| c == best).unwrap()))
}

/// Neighbour search, frequency estimate and cost-sensitive prediction.
pub fn classify(idx: &NeighbourIndex, phi: &CostMatrix, x: &[f64], k: usize, mode: SearchMode) -> Result<Label> {
    let indices = idx.neighbour_indices(x, k, mode)?;
    let data = idx.dataset();
    let labels: Vec<Label> = indices.iter().map(|&i| data.label(i)).collect();
    predict(phi, &estimate_eta(&labels, data.num_labels())?)
}

/// Anything that maps a point in `R^d` to a label.
pub trait Classifier: Sync {
    fn classify(&self, x: &[f64]) -> Result<Label>;
}

/// The plug-in k-NN rule over a fixed index.
#[derive(Debug, Clone, Copy)]
pub struct KnnClassifier<'a> {
    pub index: &'a NeighbourIndex,
    pub phi: &'a CostMatrix,
    pub k: usize,
    pub mode: SearchMode,
}

impl Classifier for KnnClassifier<'_> {
    fn classify(&self, x: &[f64]) -> Result<Label> {
        classify(self.index, self.phi, x, self.k, self.mode)
    }
}

/// Always the same label.
#[derive(Debug, Clone, Copy)]
pub struct ConstantClassifier(pub Label);

impl Classifier for ConstantClassifier {
    fn classify(&self, _x: &[f64]) -> Result<Label> {
        Ok(self.0)
    }
}

/// The plug-in rule fed the true conditional, i.e. the Bayes classifier.
#[derive(Debug, Clone, Copy)]
pub struct OracleClassifier<'a> {
    pub dist: &'a SyntheticDistribution,
    pub phi: &'a CostMatrix,
}

impl Classifier for OracleClassifier<'_> {
    fn classify(&self, x: &[f64]) -> Result<Label> {
        predict(self.phi, &self.dist.conditional_eval(x)?)
    }
}

/// Monte-Carlo estimates on a fresh test sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Mean of `(e(f(X)) - e(f*(X)))' Φ η(X)`.
    pub excess_risk: f64,
    /// Frequency of `f(X) ∉ Y*(η(X))`.
    pub misclass_prob: f64,
}

const EVAL_CHUNK: usize = 256;

/// Evaluate `clf` on `m_test` draws from `dist` generated from `seed`.
///
/// Per-point terms are computed in parallel and summed pairwise in input
/// order, so the result does not depend on the thread count.
pub fn evaluate<C: Classifier + ?Sized>(
    clf: &C,
    phi: &CostMatrix,
    dist: &SyntheticDistribution,
    m_test: usize,
    seed: u64,
) -> Result<Evaluation> {
    if m_test < 1 {
        return Err(invalid("m_test must be at least 1"));
    }
    if phi.num_labels() != dist.num_labels() {
        return Err(Error::DimensionMismatch { expected: dist.num_labels(), got: phi.num_labels() });
    }
    let (points, etas) = dist.sample_with_conditionals(m_test, seed);
    let d = dist.manifold().ambient_dim();
    let terms: Vec<(f64, f64)> = points
        .par_chunks(d * EVAL_CHUNK)
        .zip(etas.par_chunks(EVAL_CHUNK))
        .map(|(xs, es)| {
            xs.chunks_exact(d)
                .zip(es)
                .map(|(x, eta)| {
                    let yhat = clf.classify(x)?;
                    let costs = phi.expected_costs(eta)?;
                    let opt = optimal_labels(phi, eta)?;
                    let excess = costs[yhat.index()] - costs[opt[0].index()];
                    Ok((excess, if opt.contains(&yhat) { 0.0 } else { 1.0 }))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<Vec<_>>>>()?
        .into_iter()
        .flatten()
        .collect();
    let excess: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let miss: Vec<f64> = terms.iter().map(|t| t.1).collect();
    Ok(Evaluation { excess_risk: pairwise_sum(&excess) / m_test as f64, misclass_prob: pairwise_sum(&miss) / m_test as f64 })
}
