//! Proximal-gradient solvers (ISTA/FISTA) for `min_w f(w) + λ Ω(w)` with a
//! smooth data-fit `f`.

use std::time::Instant;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{GroupStructure, InnerNorm};
use crate::norms::{self, NormSpec};
use crate::prox::{self, OverlapProx};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `½ (y − ŷ)²`
    Square,
    /// `log(1 + e^{−y ŷ})` with `y ∈ {−1, +1}`
    Logistic,
}

impl LossKind {
    pub fn value(self, y: f64, yhat: f64) -> f64 {
        match self {
            LossKind::Square => 0.5 * (y - yhat) * (y - yhat),
            LossKind::Logistic => log1p_exp(-y * yhat),
        }
    }

    /// `∂ℓ/∂ŷ`.
    pub fn derivative(self, y: f64, yhat: f64) -> f64 {
        match self {
            LossKind::Square => yhat - y,
            LossKind::Logistic => -y * sigmoid(-y * yhat),
        }
    }

    pub fn validate_targets(self, y: &[f64]) -> Result<()> {
        match self {
            LossKind::Square => {
                if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Data(format!("target {i} is not finite")));
                }
            }
            LossKind::Logistic => {
                if let Some(i) = y.iter().position(|&v| v != 1.0 && v != -1.0) {
                    return Err(Error::Data(format!(
                        "logistic target {i} is {}; expected -1 or +1",
                        y[i]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Upper bound on the curvature of `ℓ` in `ŷ`.
    pub fn curvature(self) -> f64 {
        match self {
            LossKind::Square => 1.0,
            LossKind::Logistic => 0.25,
        }
    }
}

fn log1p_exp(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// A differentiable objective with Lipschitz gradient.
pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&self, w: &[f64]) -> f64;
    /// Writes `∇f(w)` into `grad` and returns `f(w)`.
    fn value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64;
    /// An upper bound on the Lipschitz constant of `∇f`.
    fn lipschitz(&self) -> f64;
}

/// `f(w) = (1/n) Σ_i ℓ(y_i, x_iᵀ w)`.
#[derive(Clone, Debug)]
pub struct DataFit<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: ArrayView1<'a, f64>,
    pub loss: LossKind,
}

impl<'a> DataFit<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: ArrayView1<'a, f64>, loss: LossKind) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::Data("no samples".into()));
        }
        loss.validate_targets(y.as_slice().unwrap_or(&y.to_vec()))?;
        Ok(Self { x, y, loss })
    }

    fn predictions(&self, w: &[f64]) -> Array1<f64> {
        self.x.dot(&ArrayView1::from(w))
    }
}

impl SmoothObjective for DataFit<'_> {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let n = self.x.nrows() as f64;
        let yhat = self.predictions(w);
        self.y
            .iter()
            .zip(yhat.iter())
            .map(|(&y, &f)| self.loss.value(y, f))
            .sum::<f64>()
            / n
    }

    fn value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.x.nrows() as f64;
        let yhat = self.predictions(w);
        let mut value = 0.0;
        let deriv: Array1<f64> = self
            .y
            .iter()
            .zip(yhat.iter())
            .map(|(&y, &f)| {
                value += self.loss.value(y, f);
                self.loss.derivative(y, f) / n
            })
            .collect();
        let g = self.x.t().dot(&deriv);
        grad.copy_from_slice(g.as_slice().expect("contiguous"));
        value / n
    }

    fn lipschitz(&self) -> f64 {
        lipschitz_estimate(self.x, self.loss)
    }
}

/// `σ_max(X)² / n` for the square loss and `σ_max(X)² / (4n)` for the
/// logistic loss, by power iteration (relative tolerance `1e-9`, at most
/// 1000 iterations). Falls back to the Frobenius bound when the iteration
/// stalls or `X` is zero.
pub fn lipschitz_estimate(x: ArrayView2<f64>, loss: LossKind) -> f64 {
    let n = x.nrows().max(1) as f64;
    let frob: f64 = x.iter().map(|v| v * v).sum();
    let scale = loss.curvature() / n;
    if frob == 0.0 {
        return f64::MIN_POSITIVE;
    }
    let p = x.ncols();
    // deterministic start with no special alignment
    let mut v: Array1<f64> = (0..p)
        .map(|j| 1.0 + ((j as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let nv = v.dot(&v).sqrt();
    v /= nv;
    let mut est = 0.0;
    for _ in 0..1000 {
        let u = x.dot(&v);
        let mut next = x.t().dot(&u);
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        next /= norm;
        let converged = (norm - est).abs() <= 1e-9 * norm;
        est = norm;
        v = next;
        if converged {
            return est * scale;
        }
    }
    frob * scale
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    FixedL,
    Backtracking,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Acceleration {
    Ista,
    Fista,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// KKT residual threshold for separable penalties, relative objective
    /// stall otherwise.
    pub tol: f64,
    pub step_rule: StepRule,
    pub acceleration: Acceleration,
    /// Initial `L`; estimated from the data when absent.
    pub l_init: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-7,
            step_rule: StepRule::FixedL,
            acceleration: Acceleration::Fista,
            l_init: None,
        }
    }
}

impl SolverConfig {
    pub fn ista() -> Self {
        Self {
            acceleration: Acceleration::Ista,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if let Some(l) = self.l_init {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("l_init must be positive, got {l}")));
            }
        }
        Ok(())
    }
}

/// Number of iterations the stall criterion looks back over.
pub const STALL_WINDOW: usize = 5;

/// A nonsmooth penalty as seen by the solver.
pub trait Penalty {
    fn value(&self, w: &[f64]) -> f64;
    /// `argmin_v ½‖u − v‖² + t Ω(v)`.
    fn prox(&mut self, u: &[f64], t: f64) -> Result<Vec<f64>>;
    /// Distance of `−∇f(w)` to `λ ∂Ω(w)` when it is computable in closed form.
    fn kkt_residual(&self, w: &[f64], grad: &[f64], lambda: f64) -> Option<f64>;
}

/// A penalty built from a [`NormSpec`], with the prox routed to the exact
/// operator for the structure.
#[derive(Clone, Debug)]
pub struct SpecPenalty {
    spec: NormSpec,
    route: Route,
    inner_tol: f64,
}

#[derive(Clone, Debug)]
enum Route {
    L1,
    Disjoint,
    DisjointLinf,
    Tree,
    Overlap(Box<OverlapProx>),
    Latent,
    Tv,
}

impl SpecPenalty {
    /// `inner_tol` is handed to iterative prox operators.
    pub fn new(spec: &NormSpec, inner_tol: f64) -> Result<Self> {
        let route = match spec {
            NormSpec::L1 => Route::L1,
            NormSpec::Tv1d => Route::Tv,
            NormSpec::LatentGroup { .. } => Route::Latent,
            NormSpec::Group { structure: s } => {
                let plain = s.coefficient_weights().is_none();
                match s.q() {
                    InnerNorm::L2 if plain && s.is_disjoint() => Route::Disjoint,
                    InnerNorm::L2 if plain && s.is_laminar() => Route::Tree,
                    InnerNorm::L2 => Route::Overlap(Box::new(OverlapProx::new(s))),
                    InnerNorm::Linf if plain && s.is_disjoint() => Route::DisjointLinf,
                    InnerNorm::Linf => {
                        return Err(Error::Unsupported(
                            "overlapping or weighted ℓ∞ groups have no prox here".into(),
                        ))
                    }
                }
            }
        };
        Ok(Self {
            spec: spec.clone(),
            route,
            inner_tol,
        })
    }

    pub fn spec(&self) -> &NormSpec {
        &self.spec
    }

    fn structure(&self) -> &GroupStructure {
        self.spec.structure().expect("group route")
    }
}

impl Penalty for SpecPenalty {
    fn value(&self, w: &[f64]) -> f64 {
        match &self.spec {
            NormSpec::L1 => w.iter().map(|v| v.abs()).sum(),
            NormSpec::Tv1d => norms::tv1d(w),
            NormSpec::Group { structure } => norms::group_norm(structure, w),
            NormSpec::LatentGroup { .. } => norms::eval_norm(&self.spec, w).unwrap_or(f64::INFINITY),
        }
    }

    fn prox(&mut self, u: &[f64], t: f64) -> Result<Vec<f64>> {
        let tol = self.inner_tol;
        match &mut self.route {
            Route::L1 => Ok(prox::prox_l1(u, t)),
            Route::Tv => Ok(prox::prox_tv1d(u, t)),
            Route::Disjoint => prox::prox_group(u, self.spec.structure().unwrap(), t),
            Route::DisjointLinf => prox::prox_group_linf(u, self.spec.structure().unwrap(), t),
            Route::Tree => prox::prox_tree(u, self.spec.structure().unwrap(), t),
            Route::Overlap(op) => op.apply(u, t, tol),
            Route::Latent => prox::prox_latent(u, self.spec.structure().unwrap(), t, tol),
        }
    }

    fn kkt_residual(&self, w: &[f64], grad: &[f64], lambda: f64) -> Option<f64> {
        match &self.route {
            Route::L1 => Some(l1_kkt(w, grad, lambda)),
            Route::Disjoint | Route::DisjointLinf => Some(group_kkt(self.structure(), w, grad, lambda)),
            _ => None,
        }
    }
}

/// `max_j` violation of `−g_j ∈ λ ∂|w_j|`.
pub fn l1_kkt(w: &[f64], grad: &[f64], lambda: f64) -> f64 {
    w.iter()
        .zip(grad)
        .map(|(&wj, &gj)| {
            if wj != 0.0 {
                (gj + lambda * wj.signum()).abs()
            } else {
                (gj.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// KKT violation for disjoint groups. For a nonzero block `s ∈ ∂‖w_g‖`
/// iff `‖s‖_* ≤ 1` and `sᵀ w_g = ‖w_g‖`; coordinates outside every group
/// need a zero gradient.
pub fn group_kkt(s: &GroupStructure, w: &[f64], grad: &[f64], lambda: f64) -> f64 {
    let mut worst = 0.0f64;
    let mult = s.multiplicity();
    for j in 0..w.len() {
        if mult[j] == 0 {
            worst = worst.max(grad[j].abs());
        }
    }
    let q = s.q();
    for (g, group) in s.groups().iter().enumerate() {
        let thr = lambda * s.weights()[g];
        let wg: Vec<f64> = group.iter().map(|&j| w[j]).collect();
        let gg: Vec<f64> = group.iter().map(|&j| grad[j]).collect();
        let wnorm = q.value(&wg);
        let r = if wnorm == 0.0 {
            (q.dual_value(&gg) - thr).max(0.0)
        } else {
            match q {
                InnerNorm::L2 => wg
                    .iter()
                    .zip(&gg)
                    .map(|(wv, gv)| {
                        let e = gv + thr * wv / wnorm;
                        e * e
                    })
                    .sum::<f64>()
                    .sqrt(),
                InnerNorm::Linf => {
                    let inner: f64 = wg.iter().zip(&gg).map(|(a, b)| a * b).sum();
                    (q.dual_value(&gg) - thr).max(0.0) + (inner + thr * wnorm).abs() / wnorm
                }
            }
        };
        worst = worst.max(r);
    }
    worst
}

/// Leaves the trailing coordinates of the parameter unpenalized.
#[derive(Clone, Debug)]
pub struct FreeTail<P> {
    pub inner: P,
    pub head: usize,
}

impl<P: Penalty> Penalty for FreeTail<P> {
    fn value(&self, w: &[f64]) -> f64 {
        self.inner.value(&w[..self.head])
    }

    fn prox(&mut self, u: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut v = self.inner.prox(&u[..self.head], t)?;
        v.extend_from_slice(&u[self.head..]);
        Ok(v)
    }

    fn kkt_residual(&self, w: &[f64], grad: &[f64], lambda: f64) -> Option<f64> {
        let head = self.inner.kkt_residual(&w[..self.head], &grad[..self.head], lambda)?;
        Some(grad[self.head..].iter().fold(head, |m, g| m.max(g.abs())))
    }
}

/// One row of the solver trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub residual: f64,
    pub wall_time_ns: u128,
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub w: Vec<f64>,
    pub w_prev: Vec<f64>,
    pub momentum: f64,
    pub k: usize,
    pub lipschitz: f64,
    pub history: Vec<TraceRow>,
    pub converged: bool,
    /// Whether `residual` in the history is a KKT residual (otherwise a
    /// relative objective change).
    pub kkt: bool,
}

impl SolverState {
    pub fn objective(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn residual(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.residual)
    }
}

/// Proximal gradient on `f + λΩ` from `w0`.
///
/// Each step is `w ← prox_{(λ/L)Ω}(y − ∇f(y)/L)` with `y = w` (ISTA) or
/// `y = w_k + (k−1)/(k+2) (w_k − w_{k−1})` (FISTA). Stops when the KKT
/// residual is `≤ tol` for penalties that provide one, otherwise when the
/// objective moved by less than `tol` (relative) over the last
/// [`STALL_WINDOW`] iterations.
pub fn run_proximal<F, P>(
    f: &F,
    penalty: &mut P,
    lambda: f64,
    w0: &[f64],
    config: &SolverConfig,
) -> Result<SolverState>
where
    F: SmoothObjective + ?Sized,
    P: Penalty + ?Sized,
{
    config.validate()?;
    let p = f.dim();
    if w0.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: w0.len(),
        });
    }
    let start = Instant::now();
    let mut lip = match config.l_init {
        Some(l) => l,
        None => f.lipschitz(),
    };
    let mut w = w0.to_vec();
    let mut w_prev = w.clone();
    let mut grad_w = vec![0.0; p];
    let mut f_w = f.value_grad(&w, &mut grad_w);
    let obj0 = f_w + lambda * penalty.value(&w);
    let kkt0 = penalty.kkt_residual(&w, &grad_w, lambda);
    let uses_kkt = kkt0.is_some();
    let mut history = vec![TraceRow {
        iter: 0,
        objective: obj0,
        residual: kkt0.unwrap_or(f64::INFINITY),
        wall_time_ns: start.elapsed().as_nanos(),
    }];
    let accelerate = config.acceleration == Acceleration::Fista;
    let mut momentum = 0.0;
    let mut y = vec![0.0; p];
    let mut grad_y = vec![0.0; p];
    let mut converged = uses_kkt && kkt0.unwrap() <= config.tol;
    let mut k = 0;
    while !converged && k < config.max_iter {
        k += 1;
        let f_y = if accelerate {
            momentum = (k as f64 - 1.0) / (k as f64 + 2.0);
            for j in 0..p {
                y[j] = w[j] + momentum * (w[j] - w_prev[j]);
            }
            f.value_grad(&y, &mut grad_y)
        } else {
            y.copy_from_slice(&w);
            grad_y.copy_from_slice(&grad_w);
            f_w
        };
        let cand = loop {
            let step: Vec<f64> = y.iter().zip(&grad_y).map(|(a, g)| a - g / lip).collect();
            let cand = penalty.prox(&step, lambda / lip)?;
            if config.step_rule == StepRule::FixedL {
                break cand;
            }
            let f_c = f.value(&cand);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for j in 0..p {
                let d = cand[j] - y[j];
                lin += grad_y[j] * d;
                sq += d * d;
            }
            let bound = f_y + lin + 0.5 * lip * sq;
            if f_c <= bound + 1e-12 * bound.abs().max(1.0) {
                break cand;
            }
            lip *= 2.0;
            if lip > 1e300 {
                return Err(Error::Divergence(format!(
                    "backtracking could not find a valid step at iteration {k}"
                )));
            }
        };
        w_prev = std::mem::replace(&mut w, cand);
        f_w = f.value_grad(&w, &mut grad_w);
        let obj = f_w + lambda * penalty.value(&w);
        if !obj.is_finite() {
            return Err(Error::Divergence(format!(
                "objective became non-finite at iteration {k} with L = {lip:e}; \
                 use backtracking or a larger L"
            )));
        }
        let residual = match penalty.kkt_residual(&w, &grad_w, lambda) {
            Some(r) => {
                converged = r <= config.tol;
                r
            }
            None => {
                if history.len() > STALL_WINDOW {
                    let past = history[history.len() - STALL_WINDOW].objective;
                    let r = (past - obj).abs() / obj.abs().max(1.0);
                    converged = r <= config.tol;
                    r
                } else {
                    f64::INFINITY
                }
            }
        };
        history.push(TraceRow {
            iter: k,
            objective: obj,
            residual,
            wall_time_ns: start.elapsed().as_nanos(),
        });
    }
    Ok(SolverState {
        w,
        w_prev,
        momentum,
        k,
        lipschitz: lip,
        history,
        converged,
        kkt: uses_kkt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn lipschitz_examples() {
        let eye = Array2::<f64>::eye(4);
        assert!((lipschitz_estimate(eye.view(), LossKind::Square) - 0.25).abs() < 1e-12);
        let col = array![[3.0], [4.0]];
        assert!((lipschitz_estimate(col.view(), LossKind::Square) - 12.5).abs() < 1e-9);
        assert!((lipschitz_estimate(col.view(), LossKind::Logistic) - 12.5 / 4.0).abs() < 1e-9);
    }

    #[test]
    fn logistic_targets_checked() {
        let x = array![[1.0], [2.0]];
        let y = array![1.0, 0.0];
        assert!(DataFit::new(x.view(), y.view(), LossKind::Logistic).is_err());
    }

    #[test]
    fn zero_solution_in_one_step() {
        let x = array![[1.0, 0.5], [0.0, 1.0], [2.0, -1.0]];
        let y = array![1.0, -1.0, 0.5];
        let f = DataFit::new(x.view(), y.view(), LossKind::Square).unwrap();
        let mut g = vec![0.0; 2];
        f.value_grad(&[0.0, 0.0], &mut g);
        let lmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut pen = SpecPenalty::new(&NormSpec::L1, 1e-9).unwrap();
        let st = run_proximal(&f, &mut pen, lmax * 1.01, &[0.0, 0.0], &SolverConfig::ista()).unwrap();
        assert!(st.converged);
        assert_eq!(st.k, 0);
        assert_eq!(st.w, vec![0.0, 0.0]);
    }

    #[test]
    fn bad_fixed_step_diverges() {
        let x = array![[10.0, 0.0], [0.0, 10.0]];
        let y = array![1.0, 1.0];
        let f = DataFit::new(x.view(), y.view(), LossKind::Square).unwrap();
        let mut pen = SpecPenalty::new(&NormSpec::L1, 1e-9).unwrap();
        let cfg = SolverConfig {
            l_init: Some(1e-3),
            max_iter: 100_000,
            acceleration: Acceleration::Ista,
            ..SolverConfig::default()
        };
        let err = run_proximal(&f, &mut pen, 1e-3, &[0.0, 0.0], &cfg).unwrap_err();
        assert!(err.to_string().contains("backtracking"), "{err}");
        let cfg = SolverConfig { step_rule: StepRule::Backtracking, ..cfg };
        let st = run_proximal(&f, &mut pen, 1e-3, &[0.0, 0.0], &cfg).unwrap();
        assert!(st.converged);
    }
}
