//! Matrix factorization `X ≈ D A` by alternating minimization of
//!
//! `(1/(2nm)) ‖X − DA‖²_F + λ Σ_k Ω_D(d^k)` subject to `Ω_A(αⁱ) ≤ 1`,
//!
//! with optional sign and unit-ℓ1 constraints. Covers sparse dictionary
//! learning, (structured) sparse PCA and hierarchical topic models.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{make_tree_groups, TreeStructure};
use crate::linalg;
use crate::norms::{self, NormSpec};
use crate::prox;
use crate::solver::{run_proximal, DataFit, LossKind, Penalty, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorizationConfig {
    /// Penalty on each dictionary column; `None` leaves `D` unpenalized.
    pub omega_d: Option<NormSpec>,
    /// Constraint norm on each code column; `None` leaves codes free.
    pub omega_a: Option<NormSpec>,
    pub lambda: f64,
    pub nonneg_d: bool,
    pub nonneg_a: bool,
    /// Dictionary columns on the probability simplex (needs `nonneg_d`).
    pub unit_l1_dict: bool,
    /// Number of atoms.
    pub atoms: usize,
    pub outer_iters: usize,
    /// Stop once the relative objective change over one alternation drops
    /// below this.
    pub rel_tol: f64,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for FactorizationConfig {
    fn default() -> Self {
        Self {
            omega_d: None,
            omega_a: Some(NormSpec::L1),
            lambda: 0.0,
            nonneg_d: false,
            nonneg_a: false,
            unit_l1_dict: false,
            atoms: 1,
            outer_iters: 100,
            rel_tol: 1e-6,
            solver: SolverConfig::default(),
            seed: 0,
        }
    }
}

impl FactorizationConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.atoms == 0 {
            return Err(Error::Config("need at least one atom".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if self.unit_l1_dict && !self.nonneg_d {
            return Err(Error::Config("unit-ℓ1 dictionary columns require nonneg_d".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config("rel_tol must be positive".into()));
        }
        if let Some(spec) = &self.omega_a {
            if self.nonneg_a && matches!(spec, NormSpec::Tv1d) {
                return Err(Error::Unsupported("nonnegative codes with a total-variation ball".into()));
            }
            if let Some(s) = spec.structure() {
                if s.p() != self.atoms {
                    return Err(Error::DimensionMismatch {
                        expected: self.atoms,
                        got: s.p(),
                    });
                }
            }
        }
        if let Some(s) = self.omega_d.as_ref().and_then(|d| d.structure()) {
            if s.p() != m {
                return Err(Error::DimensionMismatch { expected: m, got: s.p() });
            }
        }
        self.solver.validate()
    }

    fn omega_d_value(&self, d: &[f64]) -> Result<f64> {
        match &self.omega_d {
            Some(spec) => norms::eval_norm(spec, d),
            None => Ok(0.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Factorization {
    /// `m × p` dictionary.
    pub d: Array2<f64>,
    /// `p × n` codes.
    pub a: Array2<f64>,
    /// Objective after initialization and after every half-step.
    pub objective_curve: Vec<f64>,
    pub outer_iterations: usize,
    pub config: FactorizationConfig,
}

impl Factorization {
    pub fn objective(&self) -> f64 {
        *self.objective_curve.last().expect("nonempty curve")
    }
}

/// `(1/(2nm)) ‖X − DA‖²_F + λ Σ_k Ω_D(d^k)`.
pub fn objective(x: ArrayView2<f64>, d: ArrayView2<f64>, a: ArrayView2<f64>, config: &FactorizationConfig) -> Result<f64> {
    let r = &x - &d.dot(&a);
    let nm = (x.nrows() * x.ncols()) as f64;
    let fit = r.iter().map(|v| v * v).sum::<f64>() / (2.0 * nm);
    let mut pen = 0.0;
    if config.lambda > 0.0 {
        for k in 0..d.ncols() {
            pen += config.omega_d_value(d.column(k).as_slice().unwrap_or(&d.column(k).to_vec()))?;
        }
    }
    Ok(fit + config.lambda * pen)
}

/// Euclidean projection of `u` onto `{v : Ω(v) ≤ radius}` (intersected with
/// the nonnegative orthant when `nonneg`). Uses `Π(u) = prox_{tΩ}(u)` for the
/// `t` at which the prox lands on the sphere, found by bisection since
/// `Ω(prox_{tΩ}(u))` decreases in `t`. The returned point always satisfies
/// the constraint.
pub fn project_norm_ball(spec: &NormSpec, u: &[f64], radius: f64, nonneg: bool, tol: f64) -> Result<Vec<f64>> {
    let base: Vec<f64> = if nonneg { u.iter().map(|v| v.max(0.0)).collect() } else { u.to_vec() };
    if norms::eval_norm(spec, &base)? <= radius {
        return Ok(base);
    }
    match spec {
        NormSpec::L1 if nonneg => return Ok(prox::project_nonneg_l1_ball(&base, radius)),
        NormSpec::L1 => return Ok(prox::project_l1_ball(&base, radius)),
        _ => {}
    }
    let value_at = |t: f64| -> Result<(f64, Vec<f64>)> {
        let v = prox::prox_spec(spec, &base, t, tol)?;
        Ok((norms::eval_norm(spec, &v)?, v))
    };
    let mut hi = 1.0;
    let (mut hi_val, mut hi_v) = value_at(hi)?;
    while hi_val > radius {
        hi *= 2.0;
        (hi_val, hi_v) = value_at(hi)?;
        if hi > 1e300 {
            return Err(Error::Internal("norm-ball projection did not bracket".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (val, v) = value_at(mid)?;
        if val > radius {
            lo = mid;
        } else {
            hi = mid;
            hi_v = v;
            if radius - val <= 1e-13 * radius {
                break;
            }
        }
    }
    Ok(hi_v)
}

/// Indicator of the code constraint set, as a solver penalty.
struct CodeBall<'a> {
    spec: Option<&'a NormSpec>,
    nonneg: bool,
    tol: f64,
}

impl CodeBall<'_> {
    fn project(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self.spec {
            Some(spec) => project_norm_ball(spec, u, 1.0, self.nonneg, self.tol),
            None if self.nonneg => Ok(u.iter().map(|v| v.max(0.0)).collect()),
            None => Ok(u.to_vec()),
        }
    }
}

impl Penalty for CodeBall<'_> {
    fn value(&self, _w: &[f64]) -> f64 {
        0.0
    }

    fn prox(&mut self, u: &[f64], _t: f64) -> Result<Vec<f64>> {
        self.project(u)
    }

    fn kkt_residual(&self, _w: &[f64], _grad: &[f64], _lambda: f64) -> Option<f64> {
        None
    }
}

fn column_fit(x: ArrayView1<f64>, d: ArrayView2<f64>, alpha: &[f64]) -> f64 {
    let r = &x - &d.dot(&ArrayView1::from(alpha));
    0.5 * r.dot(&r)
}

/// Solves `min ½‖xⁱ − Dαⁱ‖²` subject to the code constraints for every
/// column, from zero codes.
pub fn sparse_code(x: ArrayView2<f64>, d: ArrayView2<f64>, config: &FactorizationConfig) -> Result<Array2<f64>> {
    let zero = Array2::zeros((d.ncols(), x.ncols()));
    sparse_code_from(x, d, zero.view(), config)
}

/// As [`sparse_code`], warm-started at `a0`. A column's new codes are kept
/// only if they do not increase its objective, so a feasible `a0` can never
/// get worse.
pub fn sparse_code_from(
    x: ArrayView2<f64>,
    d: ArrayView2<f64>,
    a0: ArrayView2<f64>,
    config: &FactorizationConfig,
) -> Result<Array2<f64>> {
    let (m, n) = x.dim();
    let p = d.ncols();
    if d.nrows() != m {
        return Err(Error::DimensionMismatch { expected: m, got: d.nrows() });
    }
    if a0.dim() != (p, n) {
        return Err(Error::DimensionMismatch { expected: p * n, got: a0.len() });
    }
    let free = config.omega_a.is_none() && !config.nonneg_a;
    let lip = linalg::svd(d).s.first().map_or(0.0, |s| s * s);
    let solver = SolverConfig {
        // DataFit scales by 1/m; its Lipschitz constant scales with it
        l_init: Some((lip / m as f64).max(f64::MIN_POSITIVE)),
        ..config.solver.clone()
    };
    let columns: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.column(i);
            let old: Vec<f64> = a0.column(i).to_vec();
            let cand = if free {
                linalg::lstsq_min_norm(d, xi).to_vec()
            } else {
                let xi_owned = xi.to_owned();
                let f = DataFit::new(d, xi_owned.view(), LossKind::Square)?;
                let mut ball = CodeBall {
                    spec: config.omega_a.as_ref(),
                    nonneg: config.nonneg_a,
                    tol: solver.tol / 10.0,
                };
                let start = ball.project(&old)?;
                run_proximal(&f, &mut ball, 0.0, &start, &solver)?.w
            };
            Ok(if column_fit(xi, d, &cand) <= column_fit(xi, d, &old) { cand } else { old })
        })
        .collect();
    let mut a = Array2::zeros((p, n));
    for (i, col) in columns.into_iter().enumerate() {
        let col = col.map_err(|e| e.context(format!("sparse coding of column {i}")))?;
        a.column_mut(i).assign(&Array1::from(col));
    }
    Ok(a)
}

fn constrain_atom(d: Vec<f64>, config: &FactorizationConfig) -> Vec<f64> {
    if config.unit_l1_dict {
        prox::project_simplex(&d, 1.0)
    } else if config.nonneg_d {
        d.into_iter().map(|v| v.max(0.0)).collect()
    } else {
        d
    }
}

/// Block-coordinate pass over the dictionary columns. Column `k` minimizes
/// `(‖a_k‖²/(2nm)) ‖d − c_k‖² + λ Ω_D(d)` with `c_k = R_k a_kᵀ / ‖a_k‖²` and
/// `R_k` the residual without atom `k`, i.e.
/// `d^k = prox_{(λnm/‖a_k‖²) Ω_D}(c_k)` followed by the sign/simplex
/// projection. Updates that would raise the objective are rejected; unused
/// atoms are left in place.
pub fn dictionary_update(
    x: ArrayView2<f64>,
    a: ArrayView2<f64>,
    d0: ArrayView2<f64>,
    config: &FactorizationConfig,
) -> Result<Array2<f64>> {
    let (m, n) = x.dim();
    let p = a.nrows();
    if d0.dim() != (m, p) || a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: m * p, got: d0.len() });
    }
    let nm = (n * m) as f64;
    let mut d = d0.to_owned();
    let mut resid = &x - &d.dot(&a);
    let tol = config.solver.tol / 10.0;
    for k in 0..p {
        let ak = a.row(k);
        let norm2 = ak.dot(&ak);
        if norm2 == 0.0 {
            continue;
        }
        let dk = d.column(k).to_owned();
        let c: Array1<f64> = resid.dot(&ak) / norm2 + &dk;
        let t = config.lambda * nm / norm2;
        let raw = match &config.omega_d {
            Some(spec) if config.lambda > 0.0 => {
                let base: Vec<f64> = if config.nonneg_d { c.iter().map(|v| v.max(0.0)).collect() } else { c.to_vec() };
                prox::prox_spec(spec, &base, t, tol).map_err(|e| e.context(format!("dictionary column {k}")))?
            }
            _ => c.to_vec(),
        };
        let cand = constrain_atom(raw, config);
        let cost = |v: &[f64]| -> Result<f64> {
            let sq: f64 = v.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(norm2 / (2.0 * nm) * sq + config.lambda * config.omega_d_value(v)?)
        };
        if cost(&cand)? <= cost(dk.as_slice().expect("owned column"))? {
            let delta = Array1::from(cand) - &dk;
            for i in 0..m {
                for j in 0..n {
                    resid[[i, j]] -= delta[i] * ak[j];
                }
            }
            d.column_mut(k).zip_mut_with(&delta, |v, dv| *v += dv);
        }
    }
    Ok(d)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded key of a column computed from its contents only, so the sampled
/// set does not depend on column order.
fn column_key(col: ArrayView1<f64>, seed: u64) -> u64 {
    col.iter().fold(splitmix(seed), |h, v| splitmix(h ^ v.to_bits()))
}

fn normalize_atom(col: Vec<f64>, k: usize, config: &FactorizationConfig) -> Vec<f64> {
    let m = col.len();
    let mut v = if config.nonneg_d { col.into_iter().map(|x| x.max(0.0)).collect() } else { col };
    if config.unit_l1_dict {
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
        } else {
            v = vec![1.0 / m as f64; m];
        }
    } else {
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 0.0 {
            v.iter_mut().for_each(|x| *x /= nrm);
        } else {
            v = vec![0.0; m];
            v[k % m] = 1.0;
        }
    }
    v
}

/// Initial dictionary: `p` distinct data columns chosen by smallest seeded
/// content key, normalized per the constraints (unit ℓ2, or the simplex).
/// Canonical basis vectors fill in when there are too few distinct columns.
pub fn initial_dictionary(x: ArrayView2<f64>, config: &FactorizationConfig) -> Array2<f64> {
    let (m, n) = x.dim();
    let mut keyed: Vec<(u64, usize)> = (0..n).map(|i| (column_key(x.column(i), config.seed), i)).collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            let (ca, cb) = (x.column(a.1), x.column(b.1));
            ca.iter().zip(cb.iter()).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut chosen: Vec<Vec<f64>> = Vec::new();
    for (_, i) in keyed {
        if chosen.len() == config.atoms {
            break;
        }
        let col = x.column(i).to_vec();
        let atom = normalize_atom(col, chosen.len(), config);
        if atom.iter().any(|v| *v != 0.0) && !chosen.contains(&atom) {
            chosen.push(atom);
        }
    }
    let mut k = 0;
    while chosen.len() < config.atoms {
        let mut e = vec![0.0; m];
        e[k % m] = 1.0;
        let atom = normalize_atom(e, k, config);
        if !chosen.contains(&atom) || k >= m {
            chosen.push(atom);
        }
        k += 1;
    }
    let mut d = Array2::zeros((m, config.atoms));
    for (k, atom) in chosen.into_iter().enumerate() {
        d.column_mut(k).assign(&Array1::from(atom));
    }
    d
}

/// Replaces atoms with an all-zero code row by the worst-reconstructed data
/// column, when that does not raise the objective.
fn reseed_dead_atoms(
    x: ArrayView2<f64>,
    d: &mut Array2<f64>,
    a: ArrayView2<f64>,
    config: &FactorizationConfig,
) -> Result<()> {
    let dead: Vec<usize> = (0..a.nrows()).filter(|&k| a.row(k).iter().all(|v| *v == 0.0)).collect();
    if dead.is_empty() {
        return Ok(());
    }
    let resid = &x - &d.dot(&a);
    let mut order: Vec<usize> = (0..x.ncols()).collect();
    let errs: Vec<f64> = (0..x.ncols()).map(|i| resid.column(i).dot(&resid.column(i))).collect();
    order.sort_by(|&i, &j| errs[j].total_cmp(&errs[i]).then(i.cmp(&j)));
    for (slot, &k) in dead.iter().enumerate() {
        let Some(&i) = order.get(slot) else { break };
        if errs[i] == 0.0 {
            break;
        }
        let atom = normalize_atom(x.column(i).to_vec(), k, config);
        let old = d.column(k).to_vec();
        // a dead atom does not enter the data fit, only the penalty
        if config.lambda * config.omega_d_value(&atom)? <= config.lambda * config.omega_d_value(&old)? {
            d.column_mut(k).assign(&Array1::from(atom));
        }
    }
    Ok(())
}

fn check_monotone(prev: f64, next: f64, step: &str, iter: usize) -> Result<()> {
    if next > prev + 1e-9 * prev.abs().max(1.0) {
        return Err(Error::Internal(format!(
            "objective rose from {prev} to {next} after the {step} step of alternation {iter}"
        )));
    }
    Ok(())
}

/// Alternates [`sparse_code_from`] and [`dictionary_update`] from the seeded
/// initial dictionary.
pub fn fit_factorization(x: ArrayView2<f64>, config: &FactorizationConfig) -> Result<Factorization> {
    let (m, n) = x.dim();
    if m == 0 || n == 0 {
        return Err(Error::Data("empty data matrix".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("data matrix has non-finite entries".into()));
    }
    config.validate(m)?;
    let mut d = initial_dictionary(x, config);
    let mut a = Array2::zeros((config.atoms, n));
    let mut curve = vec![objective(x, d.view(), a.view(), config)?];
    let mut iters = 0;
    for it in 1..=config.outer_iters {
        iters = it;
        let start = *curve.last().unwrap();
        a = sparse_code_from(x, d.view(), a.view(), config)?;
        let after_a = objective(x, d.view(), a.view(), config)?;
        check_monotone(start, after_a, "coding", it)?;
        curve.push(after_a);
        reseed_dead_atoms(x, &mut d, a.view(), config)?;
        d = dictionary_update(x, a.view(), d.view(), config)?;
        let after_d = objective(x, d.view(), a.view(), config)?;
        check_monotone(after_a, after_d, "dictionary", it)?;
        curve.push(after_d);
        if (start - after_d).abs() <= config.rel_tol * start.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(Factorization {
        d,
        a,
        objective_curve: curve,
        outer_iterations: iters,
        config: config.clone(),
    })
}

/// Normalizes every document to unit ℓ1 (empty documents stay zero).
pub fn term_frequencies(counts: ArrayView2<f64>) -> Array2<f64> {
    let mut x = counts.to_owned();
    for mut col in x.axis_iter_mut(Axis(1)) {
        let s: f64 = col.sum();
        if s > 0.0 {
            col /= s;
        }
    }
    x
}

/// Hierarchical topics: nonnegative codes in the tree-norm ball over the
/// topic tree, nonnegative dictionary columns on the simplex.
pub fn fit_topics(counts: ArrayView2<f64>, tree: &TreeStructure, config: &FactorizationConfig) -> Result<Factorization> {
    if counts.is_empty() || counts.sum() == 0.0 {
        return Err(Error::Data("empty corpus".into()));
    }
    if counts.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::Data("counts must be finite and nonnegative".into()));
    }
    let cfg = FactorizationConfig {
        omega_a: Some(NormSpec::Group { structure: make_tree_groups(tree)? }),
        nonneg_a: true,
        nonneg_d: true,
        unit_l1_dict: true,
        atoms: tree.len(),
        ..config.clone()
    };
    fit_factorization(term_frequencies(counts).view(), &cfg)
}

/// Constraint check on a factorization, one entry per constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub max_code_norm: Option<f64>,
    pub min_code_entry: Option<f64>,
    pub min_dict_entry: Option<f64>,
    pub max_l1_deviation: Option<f64>,
    pub objective_monotone: bool,
    pub pass: bool,
}

pub fn constraint_report(f: &Factorization) -> Result<ConstraintReport> {
    let c = &f.config;
    let max_code_norm = match &c.omega_a {
        Some(spec) => {
            let mut worst = 0.0f64;
            for col in f.a.axis_iter(Axis(1)) {
                worst = worst.max(norms::eval_norm(spec, &col.to_vec())?);
            }
            Some(worst)
        }
        None => None,
    };
    let min_code_entry = c.nonneg_a.then(|| f.a.iter().fold(f64::INFINITY, |m, v| m.min(*v)));
    let min_dict_entry = c.nonneg_d.then(|| f.d.iter().fold(f64::INFINITY, |m, v| m.min(*v)));
    let max_l1_deviation = c.unit_l1_dict.then(|| {
        f.d.axis_iter(Axis(1))
            .map(|col| (col.iter().map(|v| v.abs()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    });
    let objective_monotone = f
        .objective_curve
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
    let pass = max_code_norm.is_none_or(|v| v <= 1.0 + 1e-8)
        && min_code_entry.is_none_or(|v| v >= 0.0)
        && min_dict_entry.is_none_or(|v| v >= 0.0)
        && max_l1_deviation.is_none_or(|v| v <= 1e-10)
        && objective_monotone;
    Ok(ConstraintReport {
        max_code_norm,
        min_code_entry,
        min_dict_entry,
        max_l1_deviation,
        objective_monotone,
        pass,
    })
}

/// Term-by-document counts with their vocabulary.
#[derive(Clone, Debug)]
pub struct Corpus {
    /// `m × n`, terms by documents.
    pub counts: Array2<f64>,
    pub vocab: Vec<String>,
    /// Original document ids, in column order.
    pub doc_ids: Vec<u64>,
}

/// Reads a "doc_id term_id count" triplet file and a "term_id token"
/// vocabulary. Term ids index the vocabulary; documents are columns in
/// ascending id order.
pub fn read_corpus(triplets: &Path, vocab: &Path) -> Result<Corpus> {
    let vocab_entries = read_vocab(vocab)?;
    let m = vocab_entries.iter().map(|(id, _)| id + 1).max().unwrap_or(0);
    let mut tokens = vec![String::new(); m];
    for (id, tok) in vocab_entries {
        tokens[id] = tok;
    }
    let file = std::fs::File::open(triplets).map_err(|e| Error::Data(format!("{}: {e}", triplets.display())))?;
    let mut entries: Vec<(u64, usize, f64)> = Vec::new();
    for (ln, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Data(format!("{}:{}: expected `doc_id term_id count`", triplets.display(), ln + 1));
        if f.len() != 3 {
            return Err(bad());
        }
        let doc: u64 = f[0].parse().map_err(|_| bad())?;
        let term: usize = f[1].parse().map_err(|_| bad())?;
        let count: f64 = f[2].parse().map_err(|_| bad())?;
        if term >= m {
            return Err(Error::Data(format!("{}:{}: term {term} not in vocabulary", triplets.display(), ln + 1)));
        }
        if !(count >= 0.0 && count.is_finite()) {
            return Err(bad());
        }
        entries.push((doc, term, count));
    }
    if entries.is_empty() {
        return Err(Error::Data("empty corpus".into()));
    }
    let mut doc_ids: Vec<u64> = entries.iter().map(|e| e.0).collect();
    doc_ids.sort_unstable();
    doc_ids.dedup();
    let col: HashMap<u64, usize> = doc_ids.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut counts = Array2::zeros((m, doc_ids.len()));
    for (doc, term, c) in entries {
        counts[[term, col[&doc]]] += c;
    }
    Ok(Corpus {
        counts,
        vocab: tokens,
        doc_ids,
    })
}

fn read_vocab(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, tok) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::Data(format!("{}:{}: expected `term_id token`", path.display(), ln + 1)))?;
        let id: usize = id
            .parse()
            .map_err(|_| Error::Data(format!("{}:{}: bad term id", path.display(), ln + 1)))?;
        out.push((id, tok.trim().to_string()));
    }
    Ok(out)
}

/// Writes a corpus in the triplet/vocabulary formats read by [`read_corpus`].
pub fn write_corpus(corpus: &Corpus, triplets: &Path, vocab: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut t = String::new();
    for (j, doc) in corpus.doc_ids.iter().enumerate() {
        for i in 0..corpus.counts.nrows() {
            let c = corpus.counts[[i, j]];
            if c != 0.0 {
                writeln!(t, "{doc} {i} {c}").expect("string write");
            }
        }
    }
    std::fs::write(triplets, t)?;
    let mut v = String::new();
    for (i, tok) in corpus.vocab.iter().enumerate() {
        writeln!(v, "{i} {tok}").expect("string write");
    }
    std::fs::write(vocab, v)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicNode {
    pub node: usize,
    pub parent: Option<usize>,
    pub top_tokens: Vec<String>,
    pub top_weights: Vec<f64>,
    /// Fraction of documents whose code uses this topic.
    pub usage: f64,
}

/// The `k` heaviest tokens of every topic, with the fraction of documents
/// using it (code above `1e-8`).
pub fn topic_report(f: &Factorization, tree: &TreeStructure, vocab: &[String], k: usize) -> Vec<TopicNode> {
    let n = f.a.ncols().max(1) as f64;
    (0..f.d.ncols())
        .map(|t| {
            let col = f.d.column(t);
            let mut order: Vec<usize> = (0..col.len()).collect();
            order.sort_by(|&i, &j| col[j].total_cmp(&col[i]).then(i.cmp(&j)));
            order.truncate(k);
            TopicNode {
                node: t,
                parent: tree.parent(t),
                top_tokens: order.iter().map(|&i| vocab.get(i).cloned().unwrap_or_else(|| format!("#{i}"))).collect(),
                top_weights: order.iter().map(|&i| col[i]).collect(),
                usage: f.a.row(t).iter().filter(|v| **v > 1e-8).count() as f64 / n,
            }
        })
        .collect()
}
