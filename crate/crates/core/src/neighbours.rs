//! Exact and projected k-nearest-neighbour search.
//!
//! Brute force is the reference. A ball tree is layered on top and returns
//! exactly the same answers: candidates are ordered by `(squared distance,
//! training index)` in both backends and the squared distances are computed
//! by the same routine.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::cost_geometry::Label;
use crate::error::{invalid, Error, Result};
use crate::numeric::{sq_dist, sq_dist_bounded};
use crate::projection::ProjectionMatrix;

/// Labelled feature vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<Label>,
    dim: usize,
    num_labels: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<Label>, num_labels: usize) -> Result<Self> {
        let dim = features.first().map(Vec::len).ok_or_else(|| invalid("dataset must be nonempty"))?;
        if dim == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: labels.len() });
        }
        let mut flat = Vec::with_capacity(features.len() * dim);
        for f in features {
            if f.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: f.len() });
            }
            flat.extend(f);
        }
        Self::from_flat(flat, dim, labels, num_labels)
    }

    pub fn from_flat(features: Vec<f64>, dim: usize, labels: Vec<Label>, num_labels: usize) -> Result<Self> {
        if labels.is_empty() || dim == 0 || features.len() != labels.len() * dim {
            return Err(invalid("dataset must be nonempty with consistent dimensions"));
        }
        if let Some(bad) = labels.iter().find(|y| y.get() > num_labels) {
            return Err(Error::LabelOutOfRange { label: bad.get(), num_labels });
        }
        Ok(Dataset { features, labels, dim, num_labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Header `n d L`, then one line per point: `d` floats and the label.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.len(), self.dim, self.num_labels);
        for i in 0..self.len() {
            for v in self.point(i) {
                let _ = write!(s, "{v} ");
            }
            let _ = writeln!(s, "{}", self.labels[i]);
        }
        s
    }
}

impl FromStr for Dataset {
    type Err = Error;
    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let h: std::result::Result<Vec<usize>, _> = header.split_whitespace().map(str::parse).collect();
        let h = h.map_err(|e| Error::Parse { line: 1, msg: format!("{e}") })?;
        let [n, d, l] = h[..] else {
            return Err(Error::Parse { line: 1, msg: "header must be `n d L`".into() });
        };
        let mut feats = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for (no, line) in lines {
            let cells: Vec<&str> = line.split_whitespace().collect();
            if cells.len() != d + 1 {
                return Err(Error::Parse { line: no + 1, msg: format!("expected {} fields", d + 1) });
            }
            for c in &cells[..d] {
                feats.push(c.parse::<f64>().map_err(|e| Error::Parse { line: no + 1, msg: format!("{e}") })?);
            }
            let y: usize = cells[d].parse().map_err(|e| Error::Parse { line: no + 1, msg: format!("{e}") })?;
            labels.push(Label::new(y)?);
        }
        if labels.len() != n {
            return Err(Error::Parse { line: 1, msg: format!("header promises {n} rows, found {}", labels.len()) });
        }
        Dataset::from_flat(feats, d, labels, l)
    }
}

/// Answer to a k-NN query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// Training indices, nearest first (in whichever space was searched).
    pub indices: Vec<usize>,
    /// Largest original-space distance from the query to a returned point.
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    idx: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `k` smallest candidates by `(d2, idx)`, ascending.
fn brute_knn(points: &[f64], dim: usize, q: &[f64], k: usize) -> Vec<Candidate> {
    let mut all: Vec<Candidate> =
        points.chunks_exact(dim).enumerate().map(|(idx, p)| Candidate { d2: sq_dist(q, p), idx }).collect();
    if k < all.len() {
        all.select_nth_unstable(k - 1);
        all.truncate(k);
    }
    all.sort_unstable();
    all
}

const LEAF_SIZE: usize = 24;

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    radius: f64,
    children: Option<(usize, usize)>,
}

/// Ball tree over a flat point array. Split direction is the line between
/// two far-apart points; the split is at the median projection.
#[derive(Debug, Clone)]
struct BallTree {
    nodes: Vec<Node>,
    centers: Vec<f64>,
    perm: Vec<usize>,
    /// Points in `perm` order, so leaves are contiguous.
    sorted: Vec<f64>,
}

impl BallTree {
    fn build(points: &[f64], dim: usize) -> Self {
        let n = points.len() / dim;
        let mut tree = BallTree { nodes: Vec::new(), centers: Vec::new(), perm: (0..n).collect(), sorted: Vec::new() };
        tree.build_node(points, dim, 0, n);
        tree.sorted = tree.perm.iter().flat_map(|&i| points[i * dim..(i + 1) * dim].iter().copied()).collect();
        tree
    }

    fn build_node(&mut self, points: &[f64], dim: usize, start: usize, end: usize) -> usize {
        let p = |i: usize| &points[i * dim..(i + 1) * dim];
        let count = (end - start) as f64;
        let mut center = vec![0.0; dim];
        for &i in &self.perm[start..end] {
            for (c, v) in center.iter_mut().zip(p(i)) {
                *c += v;
            }
        }
        center.iter_mut().for_each(|c| *c /= count);
        let radius = self.perm[start..end].iter().map(|&i| sq_dist(&center, p(i))).fold(0.0, f64::max).sqrt();
        let id = self.nodes.len();
        self.nodes.push(Node { start, end, radius, children: None });
        self.centers.extend_from_slice(&center);

        if end - start <= LEAF_SIZE || radius == 0.0 {
            return id;
        }
        let far = |from: &[f64], ids: &[usize]| {
            *ids.iter().max_by(|&&a, &&b| sq_dist(from, p(a)).total_cmp(&sq_dist(from, p(b))).then(b.cmp(&a))).unwrap()
        };
        let a = far(&center, &self.perm[start..end]);
        let b = far(p(a), &self.perm[start..end]);
        let dir: Vec<f64> = p(b).iter().zip(p(a)).map(|(x, y)| x - y).collect();
        let proj = |i: usize| p(i).iter().zip(&dir).map(|(x, d)| x * d).sum::<f64>();
        let mid = (end - start) / 2;
        self.perm[start..end].select_nth_unstable_by(mid, |&x, &y| proj(x).total_cmp(&proj(y)).then(x.cmp(&y)));
        let left = self.build_node(points, dim, start, start + mid);
        let right = self.build_node(points, dim, start + mid, end);
        self.nodes[id].children = Some((left, right));
        id
    }

    fn knn(&self, dim: usize, q: &[f64], k: usize) -> Vec<Candidate> {
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.search(0, dim, q, k, &mut heap);
        let mut out = heap.into_vec();
        out.sort_unstable();
        out
    }

    fn search(&self, node: usize, dim: usize, q: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>) {
        let nd = &self.nodes[node];
        match nd.children {
            None => {
                let block = &self.sorted[nd.start * dim..nd.end * dim];
                for (p, &idx) in block.chunks_exact(dim).zip(&self.perm[nd.start..nd.end]) {
                    if heap.len() < k {
                        heap.push(Candidate { d2: sq_dist(q, p), idx });
                    } else if let Some(d2) = sq_dist_bounded(q, p, heap.peek().unwrap().d2) {
                        let c = Candidate { d2, idx };
                        if c < *heap.peek().unwrap() {
                            heap.pop();
                            heap.push(c);
                        }
                    }
                }
            }
            Some((l, r)) => {
                let dl = sq_dist(q, self.center(l, dim)).sqrt();
                let dr = sq_dist(q, self.center(r, dim)).sqrt();
                let order = if dl <= dr { [(l, dl), (r, dr)] } else { [(r, dr), (l, dl)] };
                for (child, dc) in order {
                    if heap.len() == k {
                        let worst = heap.peek().unwrap().d2.sqrt();
                        let lower = dc - self.nodes[child].radius;
                        // Rounding slack keeps the pruning conservative, so tied
                        // candidates with a lower index are never skipped.
                        if lower > worst * (1.0 + 1e-9) + 1e-12 {
                            continue;
                        }
                    }
                    self.search(child, dim, q, k, heap);
                }
            }
        }
    }

    fn center(&self, node: usize, dim: usize) -> &[f64] {
        &self.centers[node * dim..(node + 1) * dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    BruteForce,
    #[default]
    BallTree,
}

#[derive(Debug, Clone)]
struct Space {
    points: Vec<f64>,
    dim: usize,
    tree: Option<BallTree>,
}

impl Space {
    fn new(points: Vec<f64>, dim: usize, backend: Backend) -> Self {
        let tree = (backend == Backend::BallTree).then(|| BallTree::build(&points, dim));
        Space { points, dim, tree }
    }

    fn knn(&self, q: &[f64], k: usize) -> Vec<Candidate> {
        match &self.tree {
            Some(t) => t.knn(self.dim, q, k),
            None => brute_knn(&self.points, self.dim, q, k),
        }
    }
}

/// Immutable search structure over a dataset, optionally with a projected
/// copy of the features.
#[derive(Debug, Clone)]
pub struct NeighbourIndex {
    data: Dataset,
    original: Space,
    projected: Option<(ProjectionMatrix, Space)>,
}

/// Build with the default (ball tree) backend.
pub fn build_index(data: Dataset, proj: Option<ProjectionMatrix>) -> Result<NeighbourIndex> {
    NeighbourIndex::with_backend(data, proj, Backend::default())
}

impl NeighbourIndex {
    pub fn with_backend(data: Dataset, proj: Option<ProjectionMatrix>, backend: Backend) -> Result<Self> {
        let projected = match proj {
            None => None,
            Some(m) => {
                if m.ambient_dim() != data.dim() {
                    return Err(Error::DimensionMismatch { expected: data.dim(), got: m.ambient_dim() });
                }
                let h = m.target_dim();
                let mut flat = vec![0.0; data.len() * h];
                for (i, out) in flat.chunks_exact_mut(h).enumerate() {
                    m.apply_into(data.point(i), out);
                }
                Some((m, Space::new(flat, h, backend)))
            }
        };
        let original = Space::new(data.features().to_vec(), data.dim(), backend);
        Ok(NeighbourIndex { data, original, projected })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn projection(&self) -> Option<&ProjectionMatrix> {
        self.projected.as_ref().map(|(m, _)| m)
    }

    /// Projected copy of training point `i`, if a projection is attached.
    pub fn projected_point(&self, i: usize) -> Option<&[f64]> {
        self.projected.as_ref().map(|(_, s)| &s.points[i * s.dim..(i + 1) * s.dim])
    }

    fn check_query(&self, x: &[f64], k: usize) -> Result<()> {
        if x.len() != self.data.dim() {
            return Err(Error::DimensionMismatch { expected: self.data.dim(), got: x.len() });
        }
        if k == 0 || k > self.data.len() {
            return Err(invalid(format!("k must lie in 1..={}, got {k}", self.data.len())));
        }
        Ok(())
    }

    /// The `k` nearest training points; ties go to the smaller index.
    pub fn query_exact(&self, x: &[f64], k: usize) -> Result<QueryResult> {
        self.check_query(x, k)?;
        let c = self.original.knn(x, k);
        let radius = c.last().map_or(0.0, |c| c.d2.sqrt());
        Ok(QueryResult { indices: c.into_iter().map(|c| c.idx).collect(), radius })
    }

    /// The `k` nearest training points in the projected space. The reported
    /// radius is measured in the original space.
    pub fn query_projected(&self, x: &[f64], k: usize) -> Result<QueryResult> {
        let (m, space) = self.projected.as_ref().ok_or(Error::NoProjection)?;
        self.check_query(x, k)?;
        let mut px = vec![0.0; m.target_dim()];
        m.apply_into(x, &mut px);
        let c = space.knn(&px, k);
        let radius = c.iter().map(|c| sq_dist(x, self.data.point(c.idx))).fold(0.0, f64::max).sqrt();
        Ok(QueryResult { indices: c.into_iter().map(|c| c.idx).collect(), radius })
    }

    /// Neighbour indices only; skips the radius computation.
    pub fn neighbour_indices(&self, x: &[f64], k: usize, mode: SearchMode) -> Result<Vec<usize>> {
        self.check_query(x, k)?;
        let c = match mode {
            SearchMode::Exact => self.original.knn(x, k),
            SearchMode::Projected => {
                let (m, space) = self.projected.as_ref().ok_or(Error::NoProjection)?;
                let mut px = vec![0.0; m.target_dim()];
                m.apply_into(x, &mut px);
                space.knn(&px, k)
            }
        };
        Ok(c.into_iter().map(|c| c.idx).collect())
    }

    pub fn query(&self, x: &[f64], k: usize, mode: SearchMode) -> Result<QueryResult> {
        match mode {
            SearchMode::Exact => self.query_exact(x, k),
            SearchMode::Projected => self.query_projected(x, k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exact,
    Projected,
}

impl std::fmt::Display for SearchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SearchMode::Exact => "exact",
            SearchMode::Projected => "projected",
        })
    }
}

/// `approx.radius / exact.radius`, with `0/0 = 1`.
pub fn theta_ratio(exact: &QueryResult, approx: &QueryResult) -> Result<f64> {
    if exact.indices.len() != approx.indices.len() {
        return Err(invalid("query results have different k"));
    }
    if exact.radius == 0.0 {
        return if approx.radius == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::Degenerate("exact radius is zero but approximate radius is not".into()))
        };
    }
    Ok(approx.radius / exact.radius)
}

/// `mu(B_{r1}(x)) / mu(B_{r0}(x))` with `r0` the exact and `r1` the
/// approximate radius.
pub fn omega_ratio<F: Fn(f64) -> f64>(exact: &QueryResult, approx: &QueryResult, ball_measure: F) -> Result<f64> {
    if exact.radius == approx.radius {
        return Ok(1.0);
    }
    let m0 = ball_measure(exact.radius);
    if !(m0 > 0.0) {
        return Err(Error::Degenerate("ball around the exact radius has zero measure".into()));
    }
    Ok(ball_measure(approx.radius) / m0)
}

/// Max and mean of a batch of ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSummary {
    pub max: f64,
    pub mean: f64,
}

pub fn summarize_ratios(ratios: &[f64]) -> RatioSummary {
    RatioSummary { max: ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max), mean: crate::numeric::mean(ratios) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{sample_projection, ProjectionKind, ProjectionSpec};
    use proptest::prelude::*;
    use rand::Rng as _;

    fn line(points: &[f64]) -> Dataset {
        Dataset::new(
            points.iter().map(|&p| vec![p, 0.0]).collect(),
            (0..points.len()).map(|i| Label::from_index(i % 2)).collect(),
            2,
        )
        .unwrap()
    }

    #[test]
    fn exact_query_examples() {
        for backend in [Backend::BruteForce, Backend::BallTree] {
            let idx = NeighbourIndex::with_backend(line(&[0.0, 1.0, 2.0, 3.0]), None, backend).unwrap();
            let r = idx.query_exact(&[1.4, 0.0], 2).unwrap();
            assert_eq!(r.indices, vec![1, 2]);
            assert!((r.radius - 0.6).abs() < 1e-12);
            let all = idx.query_exact(&[1.4, 0.0], 4).unwrap();
            let mut s = all.indices.clone();
            s.sort();
            assert_eq!(s, vec![0, 1, 2, 3]);
            let tie = NeighbourIndex::with_backend(line(&[1.0, 2.0]), None, backend).unwrap();
            assert_eq!(tie.query_exact(&[1.5, 0.0], 1).unwrap().indices, vec![0]);
            assert!(idx.query_exact(&[0.0, 0.0], 0).is_err());
            assert!(idx.query_exact(&[0.0, 0.0], 5).is_err());
            assert!(idx.query_projected(&[0.0, 0.0], 1).is_err());
        }
    }

    #[test]
    fn projected_query_reports_original_radius() {
        let data = Dataset::new(vec![vec![1.0, 0.0], vec![0.0, 1.1]], vec![Label::from_index(0); 2], 1).unwrap();
        let spec = ProjectionSpec::new(ProjectionKind::Gaussian, 2, 1, 0).unwrap();
        let m = ProjectionMatrix::from_rows(spec, vec![vec![1.0, 0.0]]).unwrap();
        let idx = build_index(data, Some(m)).unwrap();
        let r = idx.query_projected(&[0.0, 0.0], 1).unwrap();
        assert_eq!(r.indices, vec![1]);
        assert!((r.radius - 1.1).abs() < 1e-12);
        assert_eq!(r, idx.query_projected(&[0.0, 0.0], 1).unwrap());
    }

    #[test]
    fn identity_projection_matches_exact() {
        let mut rng = crate::rng::stream(1, 0);
        let pts: Vec<Vec<f64>> = (0..300).map(|_| (0..5).map(|_| rng.gen::<f64>()).collect()).collect();
        let data = Dataset::new(pts, vec![Label::from_index(0); 300], 1).unwrap();
        let m = sample_projection(&ProjectionSpec::new(ProjectionKind::IdentityTest, 5, 5, 0).unwrap()).unwrap();
        let idx = build_index(data, Some(m)).unwrap();
        for _ in 0..50 {
            let q: Vec<f64> = (0..5).map(|_| rng.gen::<f64>()).collect();
            let a = idx.query_exact(&q, 7).unwrap();
            let b = idx.query_projected(&q, 7).unwrap();
            assert_eq!(a.indices, b.indices);
            assert_eq!(theta_ratio(&a, &b).unwrap(), 1.0);
        }
    }

    #[test]
    fn ball_tree_matches_brute_force_with_duplicates() {
        let mut rng = crate::rng::stream(2, 0);
        // Coarse grid values force many exact distance ties.
        let pts: Vec<Vec<f64>> = (0..2000).map(|_| (0..3).map(|_| rng.gen_range(0..6) as f64).collect()).collect();
        let data = Dataset::new(pts, vec![Label::from_index(0); 2000], 1).unwrap();
        let brute = NeighbourIndex::with_backend(data.clone(), None, Backend::BruteForce).unwrap();
        let tree = NeighbourIndex::with_backend(data, None, Backend::BallTree).unwrap();
        for _ in 0..300 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(0..6) as f64).collect();
            let k = rng.gen_range(1..100);
            assert_eq!(brute.query_exact(&q, k).unwrap(), tree.query_exact(&q, k).unwrap());
        }
    }

    #[test]
    fn ratio_edge_cases() {
        let a = QueryResult { indices: vec![0], radius: 1.0 };
        let b = QueryResult { indices: vec![1], radius: 1.3 };
        assert_eq!(theta_ratio(&a, &a).unwrap(), 1.0);
        assert!((theta_ratio(&a, &b).unwrap() - 1.3).abs() < 1e-15);
        let z = QueryResult { indices: vec![0], radius: 0.0 };
        assert_eq!(theta_ratio(&z, &z).unwrap(), 1.0);
        assert!(theta_ratio(&z, &b).is_err());
        assert_eq!(omega_ratio(&a, &a, |r| r).unwrap(), 1.0);
        let m = |r: f64| if r <= 1.0 { 0.10 } else { 0.15 };
        assert!((omega_ratio(&a, &b, m).unwrap() - 1.5).abs() < 1e-12);
        assert!(omega_ratio(&a, &b, |_| 0.0).is_err());
        let s = summarize_ratios(&[1.0, 1.5, 1.1]);
        assert_eq!(s.max, 1.5);
        assert!((s.mean - 3.6 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dataset_text_round_trip() {
        let d = line(&[0.5, -1.25, 3.0]);
        let back: Dataset = d.to_text().parse().unwrap();
        assert_eq!(back, d);
        assert!("2 1 2\n0.5 1\n".parse::<Dataset>().is_err());
        assert!("1 1 2\n0.5 3\n".parse::<Dataset>().is_err());
    }

    proptest! {
        #[test]
        fn theta_at_least_one_under_projection(seed in 0u64..200, k in 1usize..10) {
            let mut rng = crate::rng::stream(seed, 9);
            let pts: Vec<Vec<f64>> = (0..60).map(|_| (0..6).map(|_| rng.gen::<f64>()).collect()).collect();
            let data = Dataset::new(pts, vec![Label::from_index(0); 60], 1).unwrap();
            let m = sample_projection(&ProjectionSpec::new(ProjectionKind::Achlioptas, 6, 2, seed).unwrap()).unwrap();
            let idx = build_index(data, Some(m)).unwrap();
            let q: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
            let t = theta_ratio(&idx.query_exact(&q, k).unwrap(), &idx.query_projected(&q, k).unwrap()).unwrap();
            prop_assert!(t >= 1.0);
        }
    }
}
