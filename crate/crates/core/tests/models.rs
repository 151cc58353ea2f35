use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use structsparse::groups::{make_intervals, make_rectangles, make_tree_groups, GridShape, GroupStructure};
use structsparse::models::{self, PathSpec, Problem};
use structsparse::norms::NormSpec;
use structsparse::proxcheck::oracle_overlap_dual;
use structsparse::solver::{LossKind, SolverConfig};
use structsparse::synth::random_tree;

fn regression(seed: u64, n: usize, p: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_simple_fn((n, p), || rng.random_range(-1.0..1.0));
    let w: Array1<f64> = (0..p).map(|j| if j < 3 { 1.5 } else { 0.0 }).collect();
    let y = x.dot(&w) + Array1::from_shape_simple_fn(n, || 0.3 * rng.random_range(-1.0..1.0));
    (x, y)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn overlapping_lambda_max_is_the_zero_threshold() {
    let families: Vec<GroupStructure> = vec![make_intervals(8).unwrap(), make_rectangles(GridShape::new(3, 3).unwrap(), false).unwrap()];
    for (seed, s) in families.into_iter().enumerate() {
        let (x, y) = regression(seed as u64, 40, s.p());
        let pr = Problem::new(x, y, LossKind::Square, NormSpec::Group { structure: s.clone() }, 0.0).unwrap();
        let lam = models::lambda_max(&pr).unwrap();
        let z: Vec<f64> = models::gradient_at_zero(&pr).unwrap().iter().map(|v| -v).collect();
        let above = oracle_overlap_dual(&z, &s, lam * 1.001);
        let below = oracle_overlap_dual(&z, &s, lam * 0.99);
        assert!(max_abs(&above) < 1e-9, "family {seed}: prox above λ_max is {}", max_abs(&above));
        assert!(max_abs(&below) > 1e-6, "family {seed}: prox below λ_max vanished");
    }
}

#[test]
fn every_path_starts_at_the_zero_model() {
    let p = 9;
    let (x, y) = regression(7, 60, p);
    let tree = random_tree(&mut ChaCha8Rng::seed_from_u64(1), p);
    let norms = vec![
        NormSpec::L1,
        NormSpec::Group { structure: make_intervals(p).unwrap() },
        NormSpec::Group { structure: make_tree_groups(&tree).unwrap() },
        NormSpec::LatentGroup { structure: make_intervals(p).unwrap() },
    ];
    let cfg = SolverConfig { tol: 1e-8, max_iter: 20_000, ..Default::default() };
    let spec = PathSpec { n_lambdas: 6, ratio: 0.05, ..Default::default() };
    for norm in norms {
        let name = norm.name();
        let pr = Problem::new(x.clone(), y.clone(), LossKind::Square, norm, 0.0).unwrap().with_intercept(true);
        let path = models::regularization_path(&pr, &spec, &cfg).unwrap();
        let top = path.points[0].as_ref().unwrap();
        assert!(top.support.is_empty(), "{name}: {:?}", top.support);
        assert!((top.intercept - y.mean().unwrap()).abs() < 1e-8, "{name}");
        let last = path.points.last().unwrap().as_ref().unwrap();
        assert!(!last.support.is_empty(), "{name}");
        assert!(path.points.iter().all(|f| f.as_ref().is_ok_and(|f| f.diagnostics.converged)), "{name}");
    }
}

#[test]
fn lasso_path_on_orthonormal_design_is_soft_thresholding() {
    // X = √n·I stacked, so the solution is soft thresholding of Xᵀy/n
    let p = 5;
    let reps = 10;
    let n = p * reps;
    let mut x = Array2::zeros((n, p));
    for r in 0..reps {
        for j in 0..p {
            x[[r * p + j, j]] = 1.0;
        }
    }
    let y: Array1<f64> = (0..n).map(|i| [3.0, -2.0, 1.0, 0.5, -0.25][i % p] + 0.01 * (i / p) as f64).collect();
    let pr = Problem::new(x.clone(), y.clone(), LossKind::Square, NormSpec::L1, 0.0).unwrap();
    let z = x.t().dot(&y) / n as f64;
    let cfg = SolverConfig { tol: 1e-12, max_iter: 50_000, ..Default::default() };
    let path = models::regularization_path(&pr, &PathSpec { n_lambdas: 8, ratio: 0.01, ..Default::default() }, &cfg).unwrap();
    let mut prev = 0;
    for f in &path.points {
        let f = f.as_ref().unwrap();
        let scale = reps as f64 / n as f64;
        for j in 0..p {
            let want = (z[j] / scale).signum() * ((z[j].abs() - f.lambda) / scale).max(0.0);
            assert!((f.w[j] - want).abs() < 1e-8, "λ {} coordinate {j}: {} vs {want}", f.lambda, f.w[j]);
        }
        assert!(f.support.len() >= prev);
        prev = f.support.len();
    }
}

#[test]
fn cross_validation_is_seed_deterministic() {
    let (x, y) = regression(11, 80, 12);
    let pr = Problem::new(x, y, LossKind::Square, NormSpec::L1, 0.0).unwrap();
    let cfg = SolverConfig::default();
    let spec = PathSpec { n_lambdas: 10, ..Default::default() };
    let a = models::cross_validate(&pr, &spec, 5, 3, &cfg).unwrap();
    let b = models::cross_validate(&pr, &spec, 5, 3, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.table[a.best_index].mean <= a.table.iter().map(|r| r.mean).fold(f64::INFINITY, f64::min));
}
