//! Penalized estimators `min_w (1/n) Σ ℓ(y_i, x_iᵀw) + λ Ω(w)`:
//! single fits, latent-group fits through the expanded design,
//! regularization paths, cross-validation and OLS-hybrid refitting.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{GroupStructure, StructureKind};
use crate::linalg;
use crate::norms::{self, LatentDecomposition, NormSpec};
use crate::prox;
use crate::solver::{
    run_proximal, DataFit, FreeTail, LossKind, Penalty, SolverConfig, SpecPenalty, TraceRow,
};

/// Coefficients with `|w_j|` at or below this are treated as zero.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;
/// Dual sweeps per trial λ when bracketing an overlapping dual norm.
const DUAL_NORM_SWEEPS: usize = 100;
/// Trial budget for the bracket; the certified upper end is returned.
const DUAL_NORM_TRIALS: usize = 400;

#[derive(Clone, Debug)]
pub struct Problem {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub loss: LossKind,
    pub norm: NormSpec,
    pub lambda: f64,
    /// Fit an unpenalized intercept: by centering for the square loss, as an
    /// explicit free coordinate for the logistic loss.
    pub intercept: bool,
}

impl Problem {
    pub fn new(x: Array2<f64>, y: Array1<f64>, loss: LossKind, norm: NormSpec, lambda: f64) -> Result<Self> {
        let p = Self {
            x,
            y,
            loss,
            norm,
            lambda,
            intercept: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_intercept(mut self, intercept: bool) -> Self {
        self.intercept = intercept;
        self
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.nrows() != self.y.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x.nrows(),
                got: self.y.len(),
            });
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if let Some(s) = self.norm.structure() {
            if s.p() != self.x.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: self.x.ncols(),
                    got: s.p(),
                });
            }
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("design matrix has non-finite entries".into()));
        }
        self.loss.validate_targets(&self.y.to_vec())
    }

    /// Rows `idx` of the problem.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
            ..self.clone()
        }
    }

    /// Prediction for each row.
    pub fn predict(&self, x: ArrayView2<f64>, fit: &FitResult) -> Array1<f64> {
        x.dot(&ArrayView1::from(&fit.w[..])) + fit.intercept
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether `residual` is a KKT residual (else a relative objective change).
    pub kkt: bool,
    pub lipschitz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub lambda: f64,
    pub w: Vec<f64>,
    pub intercept: f64,
    pub support: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentDecomposition>,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

pub fn support_of(w: &[f64]) -> Vec<usize> {
    (0..w.len()).filter(|&j| w[j].abs() > SUPPORT_THRESHOLD).collect()
}

/// Centered copy of the design and targets with their means.
fn center(x: ArrayView2<f64>, y: ArrayView1<f64>) -> (Array2<f64>, Array1<f64>, Array1<f64>, f64) {
    let xm = x.mean_axis(Axis(0)).expect("nonempty");
    let ym = y.mean().expect("nonempty");
    (&x - &xm, &y - ym, xm, ym)
}

/// Fits the problem from zero.
pub fn fit(problem: &Problem, config: &SolverConfig) -> Result<FitResult> {
    fit_warm(problem, config, None)
}

/// Fits the problem starting from a previous solution.
pub fn fit_warm(problem: &Problem, config: &SolverConfig, warm: Option<&FitResult>) -> Result<FitResult> {
    problem.validate()?;
    if let NormSpec::LatentGroup { .. } = problem.norm {
        return fit_latent_warm(problem, config, warm);
    }
    let penalty = SpecPenalty::new(&problem.norm, config.tol / 10.0)?;
    let w0 = warm.map_or_else(|| vec![0.0; problem.p()], |f| f.w.clone());
    fit_design(problem, problem.x.view(), penalty, w0, warm.map(|f| f.intercept), config)
}

/// Solves on an arbitrary design with the problem's targets, loss and
/// intercept handling; returns coefficients for the design's columns.
fn fit_design<P: Penalty>(
    problem: &Problem,
    x: ArrayView2<f64>,
    penalty: P,
    w0: Vec<f64>,
    b0: Option<f64>,
    config: &SolverConfig,
) -> Result<FitResult> {
    let lambda = problem.lambda;
    let (w, intercept, state) = match (problem.intercept, problem.loss) {
        (true, LossKind::Square) => {
            let (xc, yc, xm, ym) = center(x, problem.y.view());
            let f = DataFit::new(xc.view(), yc.view(), problem.loss)?;
            let mut pen = penalty;
            let st = run_proximal(&f, &mut pen, lambda, &w0, config)?;
            let b = ym - xm.dot(&ArrayView1::from(&st.w[..]));
            (st.w.clone(), b, st)
        }
        (true, LossKind::Logistic) => {
            let n = x.nrows();
            let mut xa = Array2::ones((n, x.ncols() + 1));
            xa.slice_mut(s![.., ..x.ncols()]).assign(&x);
            let f = DataFit::new(xa.view(), problem.y.view(), problem.loss)?;
            let mut pen = FreeTail {
                inner: penalty,
                head: x.ncols(),
            };
            let mut start = w0;
            start.push(b0.unwrap_or(0.0));
            let st = run_proximal(&f, &mut pen, lambda, &start, config)?;
            let mut w = st.w.clone();
            let b = w.pop().expect("intercept coordinate");
            (w, b, st)
        }
        (false, _) => {
            let f = DataFit::new(x, problem.y.view(), problem.loss)?;
            let mut pen = penalty;
            let st = run_proximal(&f, &mut pen, lambda, &w0, config)?;
            (st.w.clone(), 0.0, st)
        }
    };
    Ok(FitResult {
        lambda,
        support: support_of(&w),
        w,
        intercept,
        latent: None,
        diagnostics: Diagnostics {
            objective: state.objective(),
            residual: state.residual(),
            iterations: state.k,
            converged: state.converged,
            kkt: state.kkt,
            lipschitz: state.lipschitz,
        },
        trace: state.history,
    })
}

/// Latent group Lasso through the expanded problem: every group gets its own
/// copy of its columns, the copies form a partition, and `w = Σ_g v^g`.
pub fn fit_latent(problem: &Problem, config: &SolverConfig) -> Result<FitResult> {
    fit_latent_warm(problem, config, None)
}

/// Column map of the expanded design: expanded column `k` copies column
/// `map[k]` of `X`; the partition groups are contiguous blocks.
pub fn expanded_design(x: ArrayView2<f64>, s: &GroupStructure) -> Result<(Array2<f64>, GroupStructure, Vec<usize>)> {
    let map: Vec<usize> = s.groups().iter().flatten().copied().collect();
    let xe = x.select(Axis(1), &map);
    let mut blocks = Vec::with_capacity(s.len());
    let mut offset = 0;
    for g in s.groups() {
        blocks.push((offset..offset + g.len()).collect());
        offset += g.len();
    }
    let mut expanded = GroupStructure::new(
        map.len().max(1),
        blocks,
        Some(s.weights().to_vec()),
        s.q(),
        StructureKind::Partition,
    )?;
    if let Some(cw) = s.coefficient_weights() {
        expanded = expanded.with_coefficient_weights(cw.clone())?;
    }
    Ok((xe, expanded, map))
}

fn fit_latent_warm(problem: &Problem, config: &SolverConfig, warm: Option<&FitResult>) -> Result<FitResult> {
    let s = match &problem.norm {
        NormSpec::LatentGroup { structure } | NormSpec::Group { structure } => structure,
        other => return Err(Error::Unsupported(format!("latent fit with {} norm", other.name()))),
    };
    let uncovered: Vec<usize> = s
        .multiplicity()
        .iter()
        .enumerate()
        .filter(|(_, m)| **m == 0)
        .map(|(j, _)| j)
        .collect();
    if !uncovered.is_empty() {
        return Err(Error::InvalidStructure(format!(
            "latent group fit needs a cover; coordinates {uncovered:?} are in no group"
        )));
    }
    let (xe, expanded, map) = expanded_design(problem.x.view(), s)?;
    let penalty = SpecPenalty::new(&NormSpec::Group { structure: expanded }, config.tol / 10.0)?;
    let v0 = match warm.and_then(|f| f.latent.as_ref()) {
        Some(dec) => dec.blocks.iter().flatten().copied().collect(),
        None => vec![0.0; map.len()],
    };
    let inner = fit_design(problem, xe.view(), penalty, v0, warm.map(|f| f.intercept), config)?;
    let mut dec = LatentDecomposition::zeros(s);
    let mut k = 0;
    for block in dec.blocks.iter_mut() {
        for v in block.iter_mut() {
            *v = inner.w[k];
            k += 1;
        }
    }
    let w = dec.reconstruct();
    Ok(FitResult {
        lambda: problem.lambda,
        support: support_of(&w),
        w,
        intercept: inner.intercept,
        latent: Some(dec),
        diagnostics: inner.diagnostics,
        trace: inner.trace,
    })
}

/// Gradient of the data-fit at `w = 0` (at the optimal intercept when one
/// is fitted).
pub fn gradient_at_zero(problem: &Problem) -> Result<Vec<f64>> {
    let n = problem.n() as f64;
    match (problem.intercept, problem.loss) {
        (true, LossKind::Square) => {
            let (xc, yc, _, _) = center(problem.x.view(), problem.y.view());
            Ok((xc.t().dot(&yc) / -n).to_vec())
        }
        (true, LossKind::Logistic) => {
            // optimal intercept for w = 0 is the log-odds of the positives
            let pos = problem.y.iter().filter(|&&v| v > 0.0).count() as f64;
            let b = if pos == 0.0 || pos == n { 0.0 } else { (pos / (n - pos)).ln() };
            let d: Array1<f64> = problem.y.iter().map(|&y| problem.loss.derivative(y, b) / n).collect();
            Ok(problem.x.t().dot(&d).to_vec())
        }
        (false, loss) => {
            let d: Array1<f64> = problem.y.iter().map(|&y| loss.derivative(y, 0.0) / n).collect();
            Ok(problem.x.t().dot(&d).to_vec())
        }
    }
}

/// Smallest `λ` for which `w = 0` is optimal: the dual norm of the gradient
/// at zero, in closed form where one exists and otherwise bracketed by
/// certified bounds on the overlapping dual norm. Unavailable for total
/// variation.
pub fn lambda_max(problem: &Problem) -> Result<f64> {
    let g = gradient_at_zero(problem)?;
    let z: Vec<f64> = g.iter().map(|v| -v).collect();
    match &problem.norm {
        NormSpec::L1 | NormSpec::LatentGroup { .. } => norms::dual_norm_l1_linf(&problem.norm, &z),
        NormSpec::Group { structure } if structure.is_disjoint() => norms::dual_norm_l1_linf(&problem.norm, &z),
        NormSpec::Group { structure } => overlap_dual_norm(structure, &z),
        NormSpec::Tv1d => Err(Error::Unsupported(
            "λ_max for total variation; supply the grid upper bound".into(),
        )),
    }
}

/// `Ω*(z)` for an overlapping ℓ2 family, bracketed by certificates from
/// warm-started dual sweeps at trial levels `λ`. With duals `ξ` and residual
/// `v = z − Σ ξ_g`, `⟨z, v⟩ / Ω(v)` is a lower bound, and spreading `v` over
/// the groups covering each coordinate gives an exact decomposition of `z`
/// whose largest `‖ξ_g ⊘ c_g‖ / d_g` is an upper bound. No trial needs to
/// converge; the upper end is returned, so the top of a path is zero.
fn overlap_dual_norm(s: &GroupStructure, z: &[f64]) -> Result<f64> {
    let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if zmax == 0.0 {
        return Ok(0.0);
    }
    let mult = s.multiplicity();
    let cw = s.coefficient_weights();
    let upper = |duals: &[Vec<f64>], v: &[f64]| -> f64 {
        if v.iter().zip(&mult).any(|(x, &m)| m == 0 && *x != 0.0) {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for (g, d) in duals.iter().enumerate() {
            let scaled: f64 = s
                .group(g)
                .iter()
                .zip(d)
                .enumerate()
                .map(|(k, (&j, x))| {
                    let c = cw.map_or(1.0, |c| c.0[g][k]);
                    let y = (x + v[j] / mult[j] as f64) / c;
                    y * y
                })
                .sum();
            worst = worst.max(scaled.sqrt() / s.weights()[g]);
        }
        worst
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let zero: Vec<Vec<f64>> = s.groups().iter().map(|g| vec![0.0; g.len()]).collect();
    let mut hi = upper(&zero, z);
    let mut lo = dot(z, z) / norms::group_norm(s, z);
    let mut op = prox::OverlapProx::new(s);
    op.max_sweeps = DUAL_NORM_SWEEPS;
    for _ in 0..DUAL_NORM_TRIALS {
        if hi - lo <= 1e-8 * hi {
            break;
        }
        match op.apply(z, 0.5 * (lo + hi), 1e-14 * zmax) {
            Ok(_) | Err(Error::Convergence { .. }) => {}
            Err(e) => return Err(e),
        }
        let mut v = z.to_vec();
        for (g, d) in op.duals().iter().enumerate() {
            for (&j, x) in s.group(g).iter().zip(d) {
                v[j] -= x;
            }
        }
        hi = hi.min(upper(op.duals(), &v));
        let omega = norms::group_norm(s, &v);
        if omega > 0.0 {
            lo = lo.max(dot(z, &v) / omega);
        }
    }
    Ok(hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathSpec {
    /// Explicit grid; when absent a geometric grid is built.
    pub lambdas: Option<Vec<f64>>,
    pub n_lambdas: usize,
    /// Smallest λ as a fraction of the largest.
    pub ratio: f64,
    /// Upper end of the generated grid; defaults to `λ_max` of the problem.
    pub lambda_max: Option<f64>,
    pub warm_start: bool,
}

impl Default for PathSpec {
    fn default() -> Self {
        Self {
            lambdas: None,
            n_lambdas: 50,
            ratio: 1e-3,
            lambda_max: None,
            warm_start: true,
        }
    }
}

/// `n` points geometrically spaced from `hi` down to `hi · ratio`.
pub fn geometric_grid(hi: f64, ratio: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![hi],
        _ => (0..n)
            .map(|i| hi * ratio.powf(i as f64 / (n - 1) as f64))
            .collect(),
    }
}

impl PathSpec {
    pub fn grid(&self, problem: &Problem) -> Result<Vec<f64>> {
        let grid = match &self.lambdas {
            Some(l) => l.clone(),
            None => {
                if !(self.ratio > 0.0 && self.ratio < 1.0) {
                    return Err(Error::Config(format!("ratio must lie in (0, 1), got {}", self.ratio)));
                }
                let hi = match self.lambda_max {
                    Some(h) => h,
                    None => lambda_max(problem)?,
                };
                if !(hi > 0.0) {
                    return Err(Error::Config("grid upper bound must be positive".into()));
                }
                geometric_grid(hi, self.ratio, self.n_lambdas)
            }
        };
        if grid.is_empty() {
            return Err(Error::Config("empty λ grid".into()));
        }
        if grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::Config("λ grid must be positive".into()));
        }
        if grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("λ grid must be strictly decreasing".into()));
        }
        Ok(grid)
    }
}

/// Fits along a decreasing grid; failures are recorded per point.
#[derive(Clone, Debug)]
pub struct RegPath {
    pub lambdas: Vec<f64>,
    pub points: Vec<std::result::Result<FitResult, String>>,
}

impl RegPath {
    pub fn fits(&self) -> impl Iterator<Item = &FitResult> {
        self.points.iter().filter_map(|p| p.as_ref().ok())
    }

    pub fn total_iterations(&self) -> usize {
        self.fits().map(|f| f.diagnostics.iterations).sum()
    }
}

pub fn regularization_path(problem: &Problem, path: &PathSpec, config: &SolverConfig) -> Result<RegPath> {
    let lambdas = path.grid(problem)?;
    Ok(path_on_grid(problem, &lambdas, path.warm_start, config))
}

/// The zero-coefficient model at `lambda`, valid for any norm once `lambda`
/// is at least its `λ_max`: solved as an ℓ1 fit above the ℓ1 threshold so the
/// intercept is still fitted.
fn zero_fit(problem: &Problem, lambda: f64, config: &SolverConfig) -> Result<FitResult> {
    let l1 = Problem { norm: NormSpec::L1, ..problem.clone() };
    let top = lambda_max(&l1)?;
    let mut f = fit(&l1.with_lambda(2.0 * top + 1.0), config)?;
    f.lambda = lambda;
    Ok(f)
}

fn path_on_grid(problem: &Problem, lambdas: &[f64], warm_start: bool, config: &SolverConfig) -> RegPath {
    let mut points = Vec::with_capacity(lambdas.len());
    let mut last: Option<FitResult> = None;
    // near λ_max the iterative prox sits at its threshold and converges
    // slowly, while zero is certified optimal there
    let zero_above = match problem.norm {
        NormSpec::Tv1d => None,
        _ => lambda_max(problem).ok(),
    };
    for &lam in lambdas {
        let pr = problem.with_lambda(lam);
        let warm = if warm_start { last.as_ref() } else { None };
        let result = match zero_above {
            Some(top) if lam >= top => zero_fit(problem, lam, config),
            _ => fit_warm(&pr, config, warm),
        };
        match result {
            Ok(f) => {
                last = Some(f.clone());
                points.push(Ok(f));
            }
            Err(e) => points.push(Err(e.to_string())),
        }
    }
    RegPath {
        lambdas: lambdas.to_vec(),
        points,
    }
}

/// Deterministic fold label per sample: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (i, &j) in perm.iter().enumerate() {
        fold[j] = i % k;
    }
    fold
}

/// Mean validation loss: squared error for the square loss, logistic loss
/// otherwise.
pub fn validation_loss(loss: LossKind, y: ArrayView1<f64>, yhat: ArrayView1<f64>) -> f64 {
    let n = y.len() as f64;
    match loss {
        LossKind::Square => y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n,
        LossKind::Logistic => y.iter().zip(yhat).map(|(&a, &b)| loss.value(a, b)).sum::<f64>() / n,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_lambda: f64,
    pub best_index: usize,
    pub table: Vec<CvRow>,
}

fn split_folds(problem: &Problem, folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let n = problem.n();
    if folds < 2 || n < folds {
        return Err(Error::Config(format!("need 2 ≤ K ≤ n, got K = {folds}, n = {n}")));
    }
    let make = |seed: u64| {
        let labels = fold_assignment(n, folds, seed);
        (0..folds)
            .map(|f| {
                let train: Vec<usize> = (0..n).filter(|&i| labels[i] != f).collect();
                let test: Vec<usize> = (0..n).filter(|&i| labels[i] == f).collect();
                (train, test)
            })
            .collect::<Vec<_>>()
    };
    let degenerate = |split: &[(Vec<usize>, Vec<usize>)]| {
        problem.loss == LossKind::Logistic
            && split.iter().any(|(train, _)| {
                let first = problem.y[train[0]];
                train.iter().all(|&i| problem.y[i] == first)
            })
    };
    let split = make(seed);
    if !degenerate(&split) {
        return Ok(split);
    }
    let split = make(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    if degenerate(&split) {
        return Err(Error::Data("a training fold contains a single class".into()));
    }
    Ok(split)
}

/// K-fold cross-validation over the path grid (computed on the full data).
/// Folds run in parallel; results are merged by fold index.
pub fn cross_validate(
    problem: &Problem,
    path: &PathSpec,
    folds: usize,
    seed: u64,
    config: &SolverConfig,
) -> Result<CvResult> {
    let lambdas = path.grid(problem)?;
    let split = split_folds(problem, folds, seed)?;
    let losses: Vec<Vec<f64>> = split
        .par_iter()
        .map(|(train, test)| {
            let tr = problem.subset(train);
            let te = problem.subset(test);
            let fitted = path_on_grid(&tr, &lambdas, path.warm_start, config);
            fitted
                .points
                .iter()
                .map(|pt| match pt {
                    Ok(f) => {
                        let yhat = te.predict(te.x.view(), f);
                        validation_loss(problem.loss, te.y.view(), yhat.view())
                    }
                    Err(_) => f64::INFINITY,
                })
                .collect()
        })
        .collect();
    let k = folds as f64;
    let table: Vec<CvRow> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let vals: Vec<f64> = losses.iter().map(|l| l[i]).collect();
            let mean = vals.iter().sum::<f64>() / k;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
            CvRow { lambda, mean, sd: var.sqrt() }
        })
        .collect();
    let best_index = (0..table.len())
        .min_by(|&a, &b| table[a].mean.total_cmp(&table[b].mean))
        .expect("nonempty grid");
    Ok(CvResult {
        best_lambda: table[best_index].lambda,
        best_index,
        table,
    })
}

/// Unpenalized least squares on the columns in `support` (minimum-norm when
/// rank deficient), with the problem's intercept convention. An empty
/// support gives the intercept-only model.
pub fn ols_refit(problem: &Problem, support: &[usize]) -> FitResult {
    let p = problem.p();
    let mut w = vec![0.0; p];
    let xs = problem.x.select(Axis(1), support);
    let intercept = if support.is_empty() {
        problem.y.mean().unwrap_or(0.0)
    } else if problem.intercept {
        let (xc, yc, xm, ym) = center(xs.view(), problem.y.view());
        let coef = linalg::lstsq_min_norm(xc.view(), yc.view());
        for (k, &j) in support.iter().enumerate() {
            w[j] = coef[k];
        }
        ym - xm.dot(&coef)
    } else {
        let coef = linalg::lstsq_min_norm(xs.view(), problem.y.view());
        for (k, &j) in support.iter().enumerate() {
            w[j] = coef[k];
        }
        0.0
    };
    let yhat = problem.x.dot(&ArrayView1::from(&w[..])) + intercept;
    let objective = validation_loss(LossKind::Square, problem.y.view(), yhat.view()) / 2.0;
    FitResult {
        lambda: 0.0,
        support: support.to_vec(),
        w,
        intercept,
        latent: None,
        diagnostics: Diagnostics {
            objective,
            residual: 0.0,
            iterations: 0,
            converged: true,
            kkt: false,
            lipschitz: f64::NAN,
        },
        trace: vec![],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridResult {
    pub fit: FitResult,
    /// Index into the path of the selected support.
    pub path_index: usize,
    /// CV error of the refit model at every path point (`∞` for failed points).
    pub cv_errors: Vec<f64>,
}

/// Refits every support along the path by least squares, scores each refit
/// by K-fold CV and returns the best refit model on the full data. Ties go
/// to the earlier (sparser) point.
pub fn ols_hybrid(problem: &Problem, path: &RegPath, folds: usize, seed: u64) -> Result<HybridResult> {
    if problem.loss != LossKind::Square {
        return Err(Error::Unsupported("OLS hybrid needs the square loss".into()));
    }
    let split = split_folds(problem, folds, seed)?;
    let mut cache: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut cv_errors = Vec::with_capacity(path.points.len());
    for pt in &path.points {
        let Ok(f) = pt else {
            cv_errors.push(f64::INFINITY);
            continue;
        };
        if let Some((_, e)) = cache.iter().find(|(s, _)| *s == f.support) {
            cv_errors.push(*e);
            continue;
        }
        let err = split
            .iter()
            .map(|(train, test)| {
                let tr = problem.subset(train);
                let te = problem.subset(test);
                let refit = ols_refit(&tr, &f.support);
                let yhat = te.predict(te.x.view(), &refit);
                validation_loss(LossKind::Square, te.y.view(), yhat.view())
            })
            .sum::<f64>()
            / folds as f64;
        cache.push((f.support.clone(), err));
        cv_errors.push(err);
    }
    let path_index = (0..cv_errors.len())
        .min_by(|&a, &b| cv_errors[a].total_cmp(&cv_errors[b]))
        .ok_or_else(|| Error::Config("empty path".into()))?;
    let support = match &path.points[path_index] {
        Ok(f) => f.support.clone(),
        Err(e) => return Err(Error::Internal(format!("every path point failed: {e}"))),
    };
    let mut fit = ols_refit(problem, &support);
    fit.lambda = path.lambdas[path_index];
    Ok(HybridResult {
        fit,
        path_index,
        cv_errors,
    })
}

/// Indicator of the ℓ1 ball: the "prox" is the Euclidean projection.
#[derive(Clone, Copy, Debug)]
pub struct L1Ball {
    pub radius: f64,
}

impl Penalty for L1Ball {
    fn value(&self, _w: &[f64]) -> f64 {
        0.0
    }

    fn prox(&mut self, u: &[f64], _t: f64) -> Result<Vec<f64>> {
        Ok(prox::project_l1_ball(u, self.radius))
    }

    fn kkt_residual(&self, _w: &[f64], _grad: &[f64], _lambda: f64) -> Option<f64> {
        None
    }
}

/// `min f(w)` subject to `‖w‖₁ ≤ radius`, by projected (accelerated)
/// gradient. The problem's norm and λ are ignored.
pub fn fit_constrained_l1(problem: &Problem, radius: f64, config: &SolverConfig) -> Result<FitResult> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("radius must be positive, got {radius}")));
    }
    let mut pr = problem.with_lambda(1.0);
    pr.norm = NormSpec::L1;
    fit_design(&pr, problem.x.view(), L1Ball { radius }, vec![0.0; problem.p()], None, config)
}

/// KKT residual of a fit for ℓ1 and disjoint-group penalties, recomputed
/// from the data.
pub fn kkt_residual(problem: &Problem, fit: &FitResult) -> Option<f64> {
    let pen = SpecPenalty::new(&problem.norm, 1e-12).ok()?;
    let g = data_gradient(problem, fit);
    pen.kkt_residual(&fit.w, &g, problem.lambda)
}

/// `∇f(w)` at the fitted coefficients and intercept.
pub fn data_gradient(problem: &Problem, fit: &FitResult) -> Vec<f64> {
    let n = problem.n() as f64;
    let yhat = problem.predict(problem.x.view(), fit);
    let d: Array1<f64> = problem
        .y
        .iter()
        .zip(yhat.iter())
        .map(|(&y, &f)| problem.loss.derivative(y, f) / n)
        .collect();
    problem.x.t().dot(&d).to_vec()
}

/// `f(w) + λΩ(w)` at a fit, recomputed from the data.
pub fn objective(problem: &Problem, fit: &FitResult) -> Result<f64> {
    let yhat = problem.predict(problem.x.view(), fit);
    let n = problem.n() as f64;
    let f: f64 = problem
        .y
        .iter()
        .zip(yhat.iter())
        .map(|(&y, &p)| problem.loss.value(y, p))
        .sum::<f64>()
        / n;
    let omega = match (&problem.norm, &fit.latent) {
        (NormSpec::LatentGroup { structure }, Some(dec)) => dec.cost(structure),
        (spec, _) => norms::eval_norm(spec, &fit.w)?,
    };
    Ok(f + problem.lambda * omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::make_partition;
    use ndarray::array;

    fn orthonormal(n: usize) -> Array2<f64> {
        // scaled Hadamard-like design with XᵀX = n I
        let mut x = Array2::<f64>::eye(n);
        x *= (n as f64).sqrt();
        x
    }

    #[test]
    fn orthonormal_lasso_is_soft_threshold() {
        let x = orthonormal(4);
        let y = array![3.0, -1.0, 0.2, 2.0];
        let pr = Problem::new(x.clone(), y.clone(), LossKind::Square, NormSpec::L1, 0.3).unwrap();
        let cfg = SolverConfig { tol: 1e-12, ..SolverConfig::default() };
        let f = fit(&pr, &cfg).unwrap();
        let xty = x.t().dot(&y) / 4.0;
        let expect = prox::prox_l1(xty.as_slice().unwrap(), 0.3);
        for (a, b) in f.w.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_max_gives_zero() {
        let x = array![[1.0, 2.0], [0.5, -1.0], [2.0, 0.0]];
        let y = array![1.0, 0.0, -2.0];
        let pr = Problem::new(x, y, LossKind::Square, NormSpec::L1, 0.0).unwrap();
        let lmax = lambda_max(&pr).unwrap();
        let f = fit(&pr.with_lambda(lmax), &SolverConfig::default()).unwrap();
        assert!(f.w.iter().all(|v| *v == 0.0));
        let f = fit(&pr.with_lambda(lmax * 0.9), &SolverConfig::default()).unwrap();
        assert!(!f.support.is_empty());
    }

    #[test]
    fn grid_validation() {
        let x = array![[1.0], [2.0]];
        let pr = Problem::new(x, array![1.0, 2.0], LossKind::Square, NormSpec::L1, 0.0).unwrap();
        let spec = PathSpec { lambdas: Some(vec![]), ..PathSpec::default() };
        assert!(matches!(spec.grid(&pr), Err(Error::Config(_))));
        let spec = PathSpec { lambdas: Some(vec![1.0, 2.0]), ..PathSpec::default() };
        assert!(matches!(spec.grid(&pr), Err(Error::Config(_))));
        let g = PathSpec::default().grid(&pr).unwrap();
        assert_eq!(g.len(), 50);
        assert!((g[49] / g[0] - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn ols_full_support_is_least_squares() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]];
        let y = array![1.0, 3.0, 5.0];
        let pr = Problem::new(x, y, LossKind::Square, NormSpec::L1, 0.0).unwrap();
        let f = ols_refit(&pr, &[0, 1]);
        assert!((f.w[0] - 1.0).abs() < 1e-12 && (f.w[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn latent_on_disjoint_matches_group_fit() {
        let x = array![[1.0, 0.2, -0.3], [0.1, 1.0, 0.4], [0.5, -0.5, 1.0], [1.0, 1.0, 1.0]];
        let y = array![1.0, -1.0, 0.5, 2.0];
        let s = make_partition(3, vec![vec![0, 1], vec![2]]).unwrap();
        let cfg = SolverConfig { tol: 1e-12, ..SolverConfig::default() };
        let a = fit(&Problem::new(x.clone(), y.clone(), LossKind::Square, NormSpec::Group { structure: s.clone() }, 0.1).unwrap(), &cfg).unwrap();
        let b = fit(&Problem::new(x, y, LossKind::Square, NormSpec::LatentGroup { structure: s }, 0.1).unwrap(), &cfg).unwrap();
        for (u, v) in a.w.iter().zip(&b.w) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn folds_are_balanced_and_seeded() {
        let f = fold_assignment(10, 3, 7);
        assert_eq!(f, fold_assignment(10, 3, 7));
        let counts: Vec<usize> = (0..3).map(|k| f.iter().filter(|&&x| x == k).count()).collect();
        assert_eq!(counts.iter().sum::<usize>(), 10);
        assert!(counts.iter().all(|&c| c == 3 || c == 4));
    }

    #[test]
    fn logistic_intercept_is_free() {
        let x = array![[1.0], [2.0], [-1.0], [0.5], [3.0]];
        let y = array![1.0, 1.0, -1.0, 1.0, 1.0];
        let pr = Problem::new(x, y, LossKind::Logistic, NormSpec::L1, 10.0).unwrap().with_intercept(true);
        let f = fit(&pr, &SolverConfig { tol: 1e-10, ..SolverConfig::default() }).unwrap();
        assert_eq!(f.w, vec![0.0]);
        assert!((f.intercept - 4f64.ln()).abs() < 1e-6, "{}", f.intercept);
    }
}
