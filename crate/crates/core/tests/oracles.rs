//! Worked examples checked through the public API.

use std::f64::consts::{E, PI};

use csknn::bench::{fit_slope, theory_exponent};
use csknn::classifier::{estimate_eta, evaluate, k_schedule, predict, ConstantClassifier, OracleClassifier, Schedule};
use csknn::cost_geometry::{
    asymmetry, calibrate, is_reasonable, lambda_const, margin, optimal_labels, regret, two_point, CostMatrix, Label,
    ProbVector,
};
use csknn::hard_family::{build_hard, hard_default_params, SyntheticDistribution};
use csknn::manifold_lab::{
    covering_number, doubling_constant, dudley_bound, separated_net, smoothness_constants, EmbeddedManifold,
    RegularityParams,
};
use csknn::neighbours::{build_index, theta_ratio, Dataset, QueryResult};
use csknn::projection::{
    dimension_bound, dimension_bound_epsilon, epsilon_from_theta, sample_projection, theta_from_epsilon,
    DimensionBoundInputs, ProjectionKind, ProjectionMatrix, ProjectionSpec,
};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn pv(w: &[f64]) -> ProbVector {
    ProbVector::new(w.to_vec()).unwrap()
}

fn lab(i: usize) -> Label {
    Label::new(i).unwrap()
}

fn skewed() -> CostMatrix {
    CostMatrix::new(vec![vec![0.0, 10.0], vec![1.0, 0.0]]).unwrap()
}

#[test]
fn cost_geometry_examples() {
    let zo = CostMatrix::zero_one(2).unwrap();
    assert!(is_reasonable(&zo));
    assert!(!is_reasonable(&CostMatrix::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap()));
    assert!(!is_reasonable(&CostMatrix::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap()));

    assert_eq!(optimal_labels(&zo, &pv(&[0.7, 0.3])).unwrap(), vec![lab(1)]);
    assert_eq!(optimal_labels(&zo, &pv(&[0.5, 0.5])).unwrap(), vec![lab(1), lab(2)]);
    assert_eq!(optimal_labels(&skewed(), &pv(&[2.0 / 3.0, 1.0 / 3.0])).unwrap(), vec![lab(2)]);

    assert_eq!(regret(&zo, lab(1), &pv(&[0.7, 0.3])).unwrap(), 0.0);
    assert!(close(regret(&zo, lab(2), &pv(&[0.7, 0.3])).unwrap(), 0.4, 1e-12));
    assert!(close(regret(&skewed(), lab(1), &pv(&[2.0 / 3.0, 1.0 / 3.0])).unwrap(), 8.0 / 3.0, 1e-12));

    assert!(close(margin(&zo, &pv(&[0.7, 0.3])).unwrap(), 0.4, 1e-12));
    assert_eq!(margin(&zo, &pv(&[0.5, 0.5])).unwrap(), f64::INFINITY);
    assert_eq!(margin(&zo, &pv(&[1.0, 0.0])).unwrap(), 1.0);

    assert_eq!(asymmetry(&zo), 0.0);
    let spread = CostMatrix::new(vec![vec![0.0, 2.0, 1.0], vec![1.0, 0.0, 1.0], vec![4.0, 3.0, 0.0]]).unwrap();
    assert_eq!(asymmetry(&spread), 3.0);
    assert_eq!(asymmetry(&skewed()), 0.0);

    assert_eq!(lambda_const(&zo), 2.0);
    assert_eq!(lambda_const(&skewed()), 20.0);
    assert_eq!(lambda_const(&CostMatrix::new(vec![vec![0.0; 2]; 2]).unwrap()), 0.0);

    assert_eq!(two_point(0.0, 2).unwrap().weights(), &[1.0, 0.0]);
    assert_eq!(two_point(1.0, 2).unwrap().weights(), &[0.0, 1.0]);
    assert!(two_point(0.3, 2).unwrap().sup_dist(&pv(&[0.7, 0.3])) < 1e-15);

    let cal = calibrate(&zo).unwrap();
    assert_eq!((cal.kappa, cal.beta_phi, cal.c_phi, cal.t_phi), (0.5, 1.0, 2.0, 0.5));
    assert_eq!(cal.j_star, vec![lab(1), lab(2)]);
    assert_eq!(cal.k_star, vec![lab(2)]);
    assert_eq!(cal.l_star, vec![lab(1)]);
    let cal = calibrate(&CostMatrix::new(vec![vec![0.0, 5.0], vec![1.0, 0.0]]).unwrap()).unwrap();
    assert!(close(cal.kappa, 1.0 / 6.0, 1e-15));
}

#[test]
fn projection_examples() {
    assert_eq!(theta_from_epsilon(0.0).unwrap(), 1.0);
    assert!(close(theta_from_epsilon(0.6).unwrap(), 2.0, 1e-15));
    assert!(close(epsilon_from_theta(3.0).unwrap(), 0.8, 1e-15));

    let inp = DimensionBoundInputs::default();
    assert_eq!(dimension_bound(2.0, &inp).unwrap(), 13);
    assert!(dimension_bound(2.0, &DimensionBoundInputs { delta: 1e-6, ..inp }).unwrap() >= 13);
    assert_eq!(dimension_bound_epsilon(0.5, 1.0, &inp).unwrap(), 23);

    let spec = ProjectionSpec::new(ProjectionKind::IdentityTest, 4, 4, 0).unwrap();
    let id = sample_projection(&spec).unwrap();
    assert_eq!(id.apply(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![0.5, 0.0, 0.0, 0.0]);
    assert_eq!(id.apply(&[0.0; 4]).unwrap(), vec![0.0; 4]);

    let spec = ProjectionSpec::new(ProjectionKind::Gaussian, 30, 7, 9).unwrap();
    assert_eq!(sample_projection(&spec).unwrap(), sample_projection(&spec).unwrap());
    let text = sample_projection(&spec).unwrap().to_text();
    assert_eq!(text.parse::<ProjectionMatrix>().unwrap(), sample_projection(&spec).unwrap());
}

#[test]
fn neighbour_examples() {
    let line: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 0.0]).collect();
    let data = Dataset::new(line, (0..4).map(|i| Label::from_index(i % 2)).collect(), 2).unwrap();
    let idx = build_index(data, None).unwrap();
    let r = idx.query_exact(&[1.4, 0.0], 2).unwrap();
    assert_eq!(r.indices, vec![1, 2]);
    assert!(close(r.radius, 0.6, 1e-12));
    assert_eq!(idx.query_exact(&[1.4, 0.0], 4).unwrap().indices.len(), 4);
    assert_eq!(idx.query_exact(&[1.5, 0.0], 1).unwrap().indices, vec![1]);

    let data = Dataset::new(vec![vec![1.0, 0.0], vec![0.0, 1.1]], vec![lab(1), lab(2)], 2).unwrap();
    let spec = ProjectionSpec::new(ProjectionKind::Gaussian, 2, 1, 0).unwrap();
    let proj = ProjectionMatrix::from_rows(spec, vec![vec![1.0, 0.0]]).unwrap();
    let idx = build_index(data, Some(proj)).unwrap();
    let r = idx.query_projected(&[0.0, 0.0], 1).unwrap();
    assert_eq!(r.indices, vec![1]);
    assert!(close(r.radius, 1.1, 1e-12));

    let q = |radius| QueryResult { indices: vec![0], radius };
    assert_eq!(theta_ratio(&q(1.0), &q(1.0)).unwrap(), 1.0);
    assert!(close(theta_ratio(&q(1.0), &q(1.3)).unwrap(), 1.3, 1e-15));
}

#[test]
fn classifier_examples() {
    assert_eq!(estimate_eta(&[lab(1), lab(1), lab(2)], 2).unwrap().weights(), &[2.0 / 3.0, 1.0 / 3.0]);
    assert_eq!(estimate_eta(&[lab(2)], 2).unwrap().weights(), &[0.0, 1.0]);
    assert_eq!(estimate_eta(&[lab(1), lab(2), lab(3), lab(3)], 3).unwrap().weights(), &[0.25, 0.25, 0.5]);

    let zo = CostMatrix::zero_one(2).unwrap();
    assert_eq!(predict(&zo, &pv(&[2.0 / 3.0, 1.0 / 3.0])).unwrap(), lab(1));
    assert_eq!(predict(&skewed(), &pv(&[2.0 / 3.0, 1.0 / 3.0])).unwrap(), lab(2));
    assert_eq!(predict(&zo, &pv(&[0.5, 0.5])).unwrap(), lab(1));

    let s = Schedule::new(1.0, 1.0, 1).unwrap();
    assert_eq!(k_schedule(&s, 1), 1);
    assert_eq!(k_schedule(&s, 1024), 102);

    let dist = SyntheticDistribution::benign(EmbeddedManifold::circle(1.0, 6, 3).unwrap(), 1, 3).unwrap();
    let oracle = OracleClassifier { dist: &dist, phi: &zo };
    assert_eq!(evaluate(&oracle, &zo, &dist, 2000, 1).unwrap().excess_risk, 0.0);
    let always_one = evaluate(&ConstantClassifier(lab(1)), &zo, &dist, 200_000, 2).unwrap();
    assert!(close(always_one.misclass_prob, 0.5, 0.005));
}

#[test]
fn manifold_examples() {
    let c = EmbeddedManifold::circle(1.0, 5, 1).unwrap();
    let d = c.geodesic_distance(&c.circle_point(0.0), &c.circle_point(PI / 2.0)).unwrap();
    assert!(close(d, PI / 2.0, 1e-12));
    let s = EmbeddedManifold::sphere(2.0, 5, 1).unwrap();
    let d = s.geodesic_distance(&s.sphere_point(2.0, 0.0), &s.sphere_point(-2.0, 0.0)).unwrap();
    assert!(close(d, 2.0 * PI, 1e-12));

    assert!(close(c.geodesic_ball_volume(0.1).unwrap(), 0.2, 1e-15));
    assert_eq!(c.geodesic_ball_volume(0.0).unwrap(), 0.0);
    let unit = EmbeddedManifold::sphere(1.0, 3, 0).unwrap();
    assert!(close(unit.geodesic_ball_volume(PI / 2.0).unwrap(), 2.0 * PI, 1e-12));

    let pts: Vec<Vec<f64>> = (0..720).map(|i| c.circle_point(2.0 * PI * i as f64 / 720.0)).collect();
    assert_eq!(separated_net(&pts, 1.9).len(), 2);
    assert_eq!(covering_number(&pts, 2.1).unwrap().upper, 1);
    assert_eq!(covering_number(&pts, 2f64.sqrt()).unwrap().upper, 2);
    assert_eq!(covering_number(&pts[..1], 0.3).unwrap().upper, 1);

    assert_eq!(dudley_bound(&[vec![0.0, 0.0]]), 0.0);
    assert!(close(dudley_bound(&[vec![0.0], vec![1.0]]), 1.0, 1e-12));
    let small = c.sample_uniform(200, 4);
    let big: Vec<Vec<f64>> = small.iter().map(|p| p.iter().map(|v| 2.0 * v).collect()).collect();
    assert!(close(dudley_bound(&big) / dudley_bound(&small), 2.0, 1e-9));

    let base = RegularityParams {
        c0: 1.0,
        r0: 1.0,
        nu_min: 1.0 / (2.0 * PI),
        nu_max: 1.0 / (2.0 * PI),
        zeta_max: 1.0,
        alpha: 1.0,
        c_alpha: 1.0,
        beta: 1.0,
        c_beta: 1.0,
    };
    let (lambda, c_lambda) = smoothness_constants(&base, &EmbeddedManifold::circle(8.0, 3, 0).unwrap()).unwrap();
    assert_eq!(lambda, 1.0);
    assert!(close(c_lambda, 4.0 * PI, 1e-12));
    let doubling = doubling_constant(&RegularityParams { r0: 0.1, ..base }, &EmbeddedManifold::circle(1.0, 3, 0).unwrap());
    assert!(close(doubling.unwrap(), 40.0 * PI, 1e-9));
}

#[test]
fn distribution_examples() {
    let zo = CostMatrix::zero_one(2).unwrap();
    let dist = SyntheticDistribution::benign(EmbeddedManifold::circle(1.0, 4, 2).unwrap(), 1, 5).unwrap();
    let x0 = dist.manifold().circle_point(0.0);
    assert!(dist.conditional_eval(&x0).unwrap().sup_dist(&pv(&[0.5, 0.5])) < 1e-15);
    assert!(close(dist.ball_measure(&x0, 2.0).unwrap().value, 1.0, 1e-12));
    assert_eq!(dist.quantile_radius(&x0, 0.0).unwrap(), 0.0);
    assert!(close(dist.quantile_radius(&x0, 0.5).unwrap(), 2f64.sqrt(), 1e-9));
    assert!(close(dist.bayes_oracle(&zo).unwrap().risk, 0.5 - 1.0 / PI, 1e-6));
    assert!(dist.sample(0, 1).is_empty());

    let sure = SyntheticDistribution::constant(EmbeddedManifold::circle(1.0, 4, 2).unwrap(), pv(&[1.0, 0.0]), 1).unwrap();
    assert_eq!(sure.bayes_oracle(&zo).unwrap().risk, 0.0);

    let m = EmbeddedManifold::circle(1.0, 4, 2).unwrap();
    let params = hard_default_params(&zo, &m).unwrap();
    let r = 1.0 / 64.0;
    let probe = build_hard(m.clone(), &zo, params, r, None, 7).unwrap();
    let mlen = probe.construction().unwrap().m;
    let flat = build_hard(m, &zo, params, r, Some(vec![0; mlen]), 7).unwrap();
    assert!(close(flat.bayes_oracle(&zo).unwrap().risk, 0.5, 1e-12));
}

#[test]
fn slope_examples() {
    assert!(close(fit_slope(&[(1.0, 1.0), (E, 1.0 / E)]).unwrap().slope, -1.0, 1e-15));
    let pairs: Vec<(f64, f64)> = (0..5).map(|i| 100.0 * 2f64.powi(i)).map(|n| (n, n.powf(-0.5))).collect();
    let fit = fit_slope(&pairs).unwrap();
    assert!(close(fit.slope, -0.5, 1e-12) && fit.stderr < 1e-12);
    assert!(close(theory_exponent(1.0, 1.0, 1), -2.0 / 3.0, 1e-15));
    assert!(close(theory_exponent(1.0, 1.0, 2), -0.5, 1e-15));
}
