//! Cost-matrix calculus: optimal label sets, margins, regret, asymmetry
//! constants and the two-point calibration used by the lower-bound family.
//!
//! Conventions: `phi[i][j]` is the cost of predicting label `i + 1` when the
//! truth is `j + 1`. Labels are 1-based at every public boundary (see
//! [`Label`]). Cost comparisons treat two values as tied when they differ by
//! at most `1e-9 * (1 + max cost)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

const TIE_REL: f64 = 1e-9;
const SIMPLEX_TOL: f64 = 1e-9;

/// A class label, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(u32);

impl Label {
    pub fn new(one_based: usize) -> Result<Self> {
        if one_based == 0 || one_based > u32::MAX as usize {
            return Err(invalid(format!("label must be >= 1, got {one_based}")));
        }
        Ok(Label(one_based as u32))
    }

    /// Label from a 0-based position.
    pub fn from_index(index: usize) -> Self {
        Label(index as u32 + 1)
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// 0-based position.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Square table of nonnegative misclassification costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Vec<f64>,
    num_labels: usize,
}

impl CostMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let l = rows.len();
        if l < 2 {
            return Err(invalid("cost matrix needs at least two labels"));
        }
        let mut entries = Vec::with_capacity(l * l);
        for row in &rows {
            if row.len() != l {
                return Err(Error::DimensionMismatch { expected: l, got: row.len() });
            }
            for &v in row {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid(format!("cost entries must be finite and >= 0, got {v}")));
                }
                entries.push(v);
            }
        }
        Ok(CostMatrix { entries, num_labels: l })
    }

    /// Zero diagonal, unit off-diagonal.
    pub fn zero_one(num_labels: usize) -> Result<Self> {
        let rows = (0..num_labels)
            .map(|i| (0..num_labels).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        Self::new(rows)
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Cost of predicting `predicted` (0-based) under truth `truth` (0-based).
    #[inline]
    pub fn at(&self, predicted: usize, truth: usize) -> f64 {
        self.entries[predicted * self.num_labels + truth]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.num_labels).map(|r| r.to_vec()).collect()
    }

    /// Largest absolute entry.
    pub fn max_entry(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.rows().into_iter().map(|r| r.into_iter().map(|v| v * factor).collect()).collect())
    }

    /// Every entry shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        Self::new(self.rows().into_iter().map(|r| r.into_iter().map(|v| v + offset).collect()).collect())
    }

    /// Expected cost of predicting each label under conditional `n`.
    pub fn expected_costs(&self, n: &ProbVector) -> Result<Vec<f64>> {
        self.check_dim(n)?;
        let w = n.weights();
        Ok((0..self.num_labels)
            .map(|i| {
                let row = &self.entries[i * self.num_labels..(i + 1) * self.num_labels];
                row.iter().zip(w).map(|(c, p)| c * p).sum()
            })
            .collect())
    }

    fn check_dim(&self, n: &ProbVector) -> Result<()> {
        if n.len() != self.num_labels {
            return Err(Error::DimensionMismatch { expected: self.num_labels, got: n.len() });
        }
        Ok(())
    }

    fn tie_tol(&self, costs: &[f64]) -> f64 {
        let max = costs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        TIE_REL * (1.0 + max)
    }

    /// Plain-text form: `L` on the first line, then `L` rows.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.num_labels);
        for row in self.entries.chunks(self.num_labels) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
        s
    }
}

impl FromStr for CostMatrix {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (first_no, first) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let l: usize = first
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line: first_no + 1, msg: format!("expected label count, got {first:?}") })?;
        let mut rows = Vec::with_capacity(l);
        for (no, line) in lines.by_ref().take(l) {
            let row: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            let row = row.map_err(|e| Error::Parse { line: no + 1, msg: format!("{e}") })?;
            if row.len() != l {
                return Err(Error::Parse { line: no + 1, msg: format!("expected {l} entries, got {}", row.len()) });
            }
            rows.push(row);
        }
        if rows.len() != l {
            return Err(Error::Parse { line: first_no + 1, msg: format!("expected {l} rows, got {}", rows.len()) });
        }
        if let Some((no, _)) = lines.next() {
            return Err(Error::Parse { line: no + 1, msg: "trailing content".into() });
        }
        CostMatrix::new(rows)
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("probability vector must be nonempty"));
        }
        if weights.iter().any(|w| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(w) || w.is_nan()) {
            return Err(invalid(format!("weights must lie in [0,1]: {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(invalid(format!("weights must sum to 1, got {total}")));
        }
        Ok(ProbVector(weights.into_iter().map(|w| w.clamp(0.0, 1.0)).collect()))
    }

    /// One-hot encoding of `y`.
    pub fn one_hot(y: Label, num_labels: usize) -> Result<Self> {
        if y.get() > num_labels {
            return Err(Error::LabelOutOfRange { label: y.get(), num_labels });
        }
        let mut w = vec![0.0; num_labels];
        w[y.index()] = 1.0;
        Ok(ProbVector(w))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sup-norm distance.
    pub fn sup_dist(&self, other: &ProbVector) -> f64 {
        self.0.iter().zip(&other.0).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `(1 - p) e(1) + p e(2)` in a simplex with `num_labels` vertices.
pub fn two_point(p: f64, num_labels: usize) -> Result<ProbVector> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("p must lie in [0,1], got {p}")));
    }
    if num_labels < 2 {
        return Err(invalid("two_point needs at least two labels"));
    }
    let mut w = vec![0.0; num_labels];
    w[0] = 1.0 - p;
    w[1] = p;
    Ok(ProbVector(w))
}

/// True iff every wrong prediction costs strictly more than the right one
/// in the same column.
pub fn is_reasonable(phi: &CostMatrix) -> bool {
    let l = phi.num_labels();
    (0..l).all(|i| (0..l).filter(|&j| j != i).all(|j| phi.at(i, i) < phi.at(j, i)))
}

fn argmin_set(costs: &[f64], tol: f64) -> Vec<Label> {
    let best = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    costs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c - best <= tol)
        .map(|(i, _)| Label::from_index(i))
        .collect()
}

/// All labels of minimal expected cost, in increasing order.
pub fn optimal_labels(phi: &CostMatrix, n: &ProbVector) -> Result<Vec<Label>> {
    let costs = phi.expected_costs(n)?;
    Ok(argmin_set(&costs, phi.tie_tol(&costs)))
}

/// Expected cost of `y` above the optimum.
pub fn regret(phi: &CostMatrix, y: Label, n: &ProbVector) -> Result<f64> {
    if y.get() > phi.num_labels() {
        return Err(Error::LabelOutOfRange { label: y.get(), num_labels: phi.num_labels() });
    }
    let costs = phi.expected_costs(n)?;
    let tol = phi.tie_tol(&costs);
    let best = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let gap = costs[y.index()] - best;
    Ok(if gap <= tol { 0.0 } else { gap })
}

/// Gap between the cheapest non-optimal label and the optimum; `+inf` when
/// every label is optimal.
pub fn margin(phi: &CostMatrix, n: &ProbVector) -> Result<f64> {
    let costs = phi.expected_costs(n)?;
    let tol = phi.tie_tol(&costs);
    let best = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(costs
        .iter()
        .filter(|&&c| c - best > tol)
        .map(|&c| c - best)
        .fold(f64::INFINITY, f64::min))
}

/// Largest spread of the off-diagonal entries within a single column.
pub fn asymmetry(phi: &CostMatrix) -> f64 {
    let l = phi.num_labels();
    (0..l)
        .map(|j| {
            let col: Vec<f64> = (0..l).filter(|&i| i != j).map(|i| phi.at(i, j)).collect();
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// `(L - 2) * asymmetry + 2 * max |phi_ij|`.
pub fn lambda_const(phi: &CostMatrix) -> f64 {
    (phi.num_labels() as f64 - 2.0) * asymmetry(phi) + 2.0 * phi.max_entry()
}

/// Constants of the two-point construction around the switching point
/// `kappa` of the segment between `e(1)` and `e(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostCalibration {
    pub kappa: f64,
    pub beta_phi: f64,
    pub c_phi: f64,
    pub t_phi: f64,
    pub j_star: Vec<Label>,
    pub k_star: Vec<Label>,
    pub l_star: Vec<Label>,
}

impl CostCalibration {
    /// `margin(n(kappa))`, the margin at the switching point itself.
    pub fn switch_margin(&self, phi: &CostMatrix) -> Result<f64> {
        margin(phi, &two_point(self.kappa, phi.num_labels())?)
    }
}

/// Compute the calibration constants for a reasonable cost matrix.
///
/// `kappa` is the first point along `p -> n(p)` where label 1 stops being
/// optimal. `j_star` is the set of labels tied with label 1 there, `k_star`
/// the members of `j_star` whose cost decreases fastest in `p`, and `l_star`
/// the fastest among the rest. `c_phi` is the smaller of `beta_phi / kappa`
/// and the slope gap between `l_star` and `k_star`. `t_phi` is found exactly
/// from the pairwise crossings of the affine maps `p -> e(y)' Phi n(p)`: it
/// is the distance from `kappa` to the first crossing on the right after
/// which either the optimal set stops being `k_star` or the cheapest
/// non-optimal label leaves `l_star`, capped at `min(kappa, 1 - kappa)`.
pub fn calibrate(phi: &CostMatrix) -> Result<CostCalibration> {
    if !is_reasonable(phi) {
        return Err(Error::NotReasonable("need phi_ii < phi_ji for all j != i".into()));
    }
    let l = phi.num_labels();
    let max_cost = phi.max_entry();
    let tol = TIE_REL * (1.0 + max_cost);

    let beta_phi = (1..l).map(|y| phi.at(y, 0) - phi.at(0, 0)).fold(f64::INFINITY, f64::min);

    let kappa = (1..l)
        .filter(|&y| phi.at(y, 1) < phi.at(0, 1))
        .map(|y| {
            let up = phi.at(y, 0) - phi.at(0, 0);
            let down = phi.at(0, 1) - phi.at(y, 1);
            up / (up + down)
        })
        .fold(f64::INFINITY, f64::min);
    if !kappa.is_finite() {
        return Err(invalid("no label undercuts label 1 on the second column"));
    }

    // cost_y(p) = phi_y1 + p * slope_y
    let intercept = |y: usize| phi.at(y, 0);
    let slope = |y: usize| phi.at(y, 1) - phi.at(y, 0);
    let cost_at = |y: usize, p: f64| intercept(y) + p * slope(y);

    let j_idx: Vec<usize> = (0..l)
        .filter(|&j| {
            let gap = (1.0 - kappa) * (phi.at(j, 0) - phi.at(0, 0)) + kappa * (phi.at(j, 1) - phi.at(0, 1));
            gap.abs() <= tol
        })
        .collect();
    let min_slope = |set: &[usize]| set.iter().map(|&j| slope(j)).fold(f64::INFINITY, f64::min);
    let k_min = min_slope(&j_idx);
    let k_idx: Vec<usize> = j_idx.iter().cloned().filter(|&j| slope(j) - k_min <= tol).collect();
    let rest: Vec<usize> = j_idx.iter().cloned().filter(|j| !k_idx.contains(j)).collect();
    if k_idx.is_empty() || rest.is_empty() {
        return Err(Error::Degenerate("switching point has no distinct fastest label".into()));
    }
    let l_min = min_slope(&rest);
    let l_idx: Vec<usize> = rest.iter().cloned().filter(|&j| slope(j) - l_min <= tol).collect();

    let slope_gap = l_min - k_min;
    let c_phi = (beta_phi / kappa).min(slope_gap);
    if !(c_phi > 0.0) {
        return Err(Error::Degenerate(format!("c_phi = {c_phi} is not positive")));
    }

    let cap = kappa.min(1.0 - kappa);
    let mut breaks: Vec<f64> = Vec::new();
    for a in 0..l {
        for b in (a + 1)..l {
            let ds = slope(a) - slope(b);
            if ds.abs() <= f64::EPSILON * (1.0 + max_cost) {
                continue;
            }
            let p = (intercept(b) - intercept(a)) / ds;
            if p > kappa * (1.0 + 1e-12) + 1e-15 && p < kappa + cap {
                breaks.push(p);
            }
        }
    }
    breaks.push(kappa + cap);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();

    let facts_hold = |p: f64| -> bool {
        let costs: Vec<f64> = (0..l).map(|y| cost_at(y, p)).collect();
        let opt: Vec<usize> = argmin_set(&costs, tol).into_iter().map(Label::index).collect();
        if opt != k_idx {
            return false;
        }
        let best_other = (0..l).filter(|y| !k_idx.contains(y)).map(|y| costs[y]).fold(f64::INFINITY, f64::min);
        let best_l = l_idx.iter().map(|&y| costs[y]).fold(f64::INFINITY, f64::min);
        best_l - best_other <= tol
    };

    let mut t_phi = cap;
    let mut left = kappa;
    for &right in &breaks {
        if !facts_hold(0.5 * (left + right)) {
            t_phi = left - kappa;
            break;
        }
        left = right;
    }
    if !(t_phi > 0.0) {
        return Err(Error::Degenerate("no admissible neighbourhood to the right of kappa".into()));
    }

    let labels = |v: &[usize]| v.iter().map(|&i| Label::from_index(i)).collect::<Vec<_>>();
    Ok(CostCalibration {
        kappa,
        beta_phi,
        c_phi,
        t_phi,
        j_star: labels(&j_idx),
        k_star: labels(&k_idx),
        l_star: labels(&l_idx),
    })
}
