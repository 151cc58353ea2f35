//! Differential checks of every proximal operator against an oracle built
//! on a different algorithm: closed forms, bisection, dual projected
//! gradient, primal block descent or a multi-scale grid search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::groups::{make_intervals, make_tree_groups, CoefficientWeights, GroupStructure, InnerNorm, StructureKind};
use crate::prox;
use crate::synth::random_tree;

/// Tolerance for analytic and high-precision oracles.
pub const ANALYTIC_TOL: f64 = 1e-8;
/// Tolerance for grid-search oracles.
pub const GRID_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorReport {
    pub operator: String,
    pub oracle: String,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Input of the worst case, for reproduction.
    pub worst_input: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    pub cases: usize,
    /// Perturb every operator output (negative control).
    pub inject_fault: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 0, cases: 100, inject_fault: false }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `Σ_g d_g ‖c_g ∘ v_g‖₂`, written out independently of the norms module.
fn weighted_l2_norm(s: &GroupStructure, v: &[f64]) -> f64 {
    (0..s.len())
        .map(|g| {
            let sq: f64 = s.group(g).iter().enumerate().map(|(k, &j)| {
                let c = s.coefficient_weights().map_or(1.0, |c| c.0[g][k]);
                (c * v[j]) * (c * v[j])
            }).sum();
            s.weights()[g] * sq.sqrt()
        })
        .sum()
}

fn prox_objective(u: &[f64], v: &[f64], t: f64, omega: f64) -> f64 {
    0.5 * u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + t * omega
}

/// Root of a nondecreasing function on `[lo, hi]` by bisection (`lo` when
/// the function is already nonnegative there).
fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    if f(lo) >= 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Multi-scale grid search: a coarse grid over a box, then repeated
/// `5^p` local grids plus a fixed fan of random directions (so narrow
/// descent cones at kinks are found), halving the spacing whenever the
/// center wins.
pub fn grid_refine(f: impl Fn(&[f64]) -> f64, center: &[f64], radius: f64) -> Vec<f64> {
    let p = center.len();
    let coarse = 20usize;
    let mut best = center.to_vec();
    let mut best_val = f(&best);
    let mut idx = vec![0usize; p];
    let mut point = vec![0.0; p];
    loop {
        for j in 0..p {
            point[j] = center[j] - radius + 2.0 * radius * idx[j] as f64 / coarse as f64;
        }
        let v = f(&point);
        if v < best_val {
            best_val = v;
            best.copy_from_slice(&point);
        }
        let mut j = 0;
        while j < p {
            idx[j] += 1;
            if idx[j] <= coarse {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == p {
            break;
        }
    }
    let mut h = 2.0 * radius / coarse as f64;
    let offsets: Vec<Vec<f64>> = (0..5usize.pow(p as u32))
        .map(|mut code| {
            (0..p)
                .map(|_| {
                    let o = (code % 5) as f64 - 2.0;
                    code /= 5;
                    o * 0.5
                })
                .collect()
        })
        .chain({
            let mut rng = ChaCha8Rng::seed_from_u64(0x9e37);
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            (0..64 * p).map(move |_| {
                let d: Vec<f64> = (0..p).map(|_| normal.sample(&mut rng)).collect();
                let n = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                d.into_iter().map(|x| x / n).collect::<Vec<f64>>()
            })
        })
        .collect();
    while h > 1e-11 {
        let mut moved = false;
        let base = best.clone();
        for o in &offsets {
            for j in 0..p {
                point[j] = base[j] + h * o[j];
            }
            let v = f(&point);
            if v < best_val {
                best_val = v;
                best.copy_from_slice(&point);
                moved = true;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    best
}

/// `prox_{t‖·‖₁}` as the coordinatewise median of `(u − t, 0, u + t)`.
fn oracle_l1(u: &[f64], t: f64) -> Vec<f64> {
    u.iter()
        .map(|&x| {
            let mut m = [x - t, 0.0, x + t];
            m.sort_by(f64::total_cmp);
            m[1]
        })
        .collect()
}

/// Disjoint ℓ2 groups: the prox keeps each block's direction; its length
/// `r` minimizes `½(‖u_g‖ − r)² + t d_g r` over `r ≥ 0`, found from the
/// stationarity condition.
fn oracle_group(u: &[f64], s: &GroupStructure, t: f64) -> Vec<f64> {
    let mut v = u.to_vec();
    for g in 0..s.len() {
        let idx = s.group(g);
        let norm = idx.iter().map(|&j| u[j] * u[j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let thr = t * s.weights()[g];
        let r = bisect_root(|r| r - norm + thr, 0.0, norm);
        for &j in idx {
            v[j] = u[j] * r / norm;
        }
    }
    v
}

/// Euclidean projection onto `{‖v‖₁ ≤ r}` by bisection on the threshold.
fn oracle_project_l1(u: &[f64], r: f64) -> Vec<f64> {
    let l1: f64 = u.iter().map(|x| x.abs()).sum();
    if l1 <= r {
        return u.to_vec();
    }
    let mass = |th: f64| u.iter().map(|x| (x.abs() - th).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, u.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let th = 0.5 * (lo + hi);
    u.iter().map(|x| x.signum() * (x.abs() - th).max(0.0)).collect()
}

/// Projection onto `{v ≥ 0, Σ v = r}` by bisection on the shift.
fn oracle_simplex(u: &[f64], r: f64) -> Vec<f64> {
    let mass = |th: f64| u.iter().map(|x| (x - th).max(0.0)).sum::<f64>();
    let mx = u.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    let mn = u.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    let (mut lo, mut hi) = (mn - r, mx);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let th = 0.5 * (lo + hi);
    u.iter().map(|x| (x - th).max(0.0)).collect()
}

/// ℓ∞ groups through Moreau: `v_g = u_g − Π_{t d_g B₁}(u_g)`.
fn oracle_group_linf(u: &[f64], s: &GroupStructure, t: f64) -> Vec<f64> {
    let mut v = u.to_vec();
    for g in 0..s.len() {
        let idx = s.group(g);
        let block: Vec<f64> = idx.iter().map(|&j| u[j]).collect();
        let proj = oracle_project_l1(&block, t * s.weights()[g]);
        for (k, &j) in idx.iter().enumerate() {
            v[j] = block[k] - proj[k];
        }
    }
    v
}

fn project_ball(x: &mut [f64], r: f64) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > r {
        x.iter_mut().for_each(|v| *v *= r / n);
    }
}

/// Overlapping ℓ2 groups (no coefficient weights): accelerated projected
/// gradient with adaptive restart on the dual
/// `max_{‖ξ_g‖ ≤ t d_g} −½‖u − Σ_g ξ_g‖²`, returning `u − Σ ξ_g`.
pub fn oracle_overlap_dual(u: &[f64], s: &GroupStructure, t: f64) -> Vec<f64> {
    let p = u.len();
    let mult = s.multiplicity().into_iter().max().unwrap_or(1).max(1) as f64;
    let step = 1.0 / mult;
    let mut xi: Vec<Vec<f64>> = s.groups().iter().map(|g| vec![0.0; g.len()]).collect();
    let mut y = xi.clone();
    let mut theta = 1.0f64;
    let primal = |xi: &[Vec<f64>]| {
        let mut v = u.to_vec();
        for (g, d) in xi.iter().enumerate() {
            for (&j, x) in s.group(g).iter().zip(d) {
                v[j] -= x;
            }
        }
        v
    };
    let mut v_prev = vec![f64::INFINITY; p];
    for it in 0..400_000 {
        let v = primal(&y);
        let mut next = y.clone();
        for (g, d) in next.iter_mut().enumerate() {
            for (k, &j) in s.group(g).iter().enumerate() {
                d[k] += step * v[j];
            }
            project_ball(d, t * s.weights()[g]);
        }
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        // restart when the step opposes the momentum
        let mut dot = 0.0;
        for g in 0..xi.len() {
            for k in 0..xi[g].len() {
                dot += (y[g][k] - next[g][k]) * (next[g][k] - xi[g][k]);
            }
        }
        if dot > 0.0 {
            theta = 1.0;
            y = xi.clone();
            continue;
        }
        for g in 0..xi.len() {
            for k in 0..xi[g].len() {
                y[g][k] = next[g][k] + beta * (next[g][k] - xi[g][k]);
            }
        }
        xi = next;
        theta = theta_next;
        if it % 50 == 0 {
            let v = primal(&xi);
            if max_abs_diff(&v, &v_prev) <= 1e-15 {
                return v;
            }
            v_prev = v;
        }
    }
    primal(&xi)
}

/// 1-D total variation through its dual `min_{|z_i| ≤ t} ½‖u − Dᵀz‖²`
/// (`D` the difference operator), by accelerated projected gradient.
fn oracle_tv(u: &[f64], t: f64) -> Vec<f64> {
    let n = u.len();
    if n < 2 {
        return u.to_vec();
    }
    let dt = |z: &[f64]| {
        let mut v = u.to_vec();
        for i in 0..n - 1 {
            // (Dv)_i = v_{i+1} − v_i, so Dᵀz adds −z_i at i and z_i at i+1
            v[i] += z[i];
            v[i + 1] -= z[i];
        }
        v
    };
    let step = 0.25;
    let mut z = vec![0.0; n - 1];
    let mut y = z.clone();
    let mut theta = 1.0f64;
    let mut v_prev = vec![f64::INFINITY; n];
    for it in 0..400_000 {
        let v = dt(&y);
        let next: Vec<f64> = (0..n - 1).map(|i| (y[i] - step * (v[i] - v[i + 1])).clamp(-t, t)).collect();
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        let dot: f64 = (0..n - 1).map(|i| (y[i] - next[i]) * (next[i] - z[i])).sum();
        if dot > 0.0 {
            theta = 1.0;
            y = z.clone();
            continue;
        }
        y = (0..n - 1).map(|i| next[i] + beta * (next[i] - z[i])).collect();
        z = next;
        theta = theta_next;
        if it % 50 == 0 {
            let v = dt(&z);
            if max_abs_diff(&v, &v_prev) <= 1e-15 {
                return v;
            }
            v_prev = v;
        }
    }
    dt(&z)
}

/// Latent group prox in the duplicated space: cyclic exact block
/// minimization of `½‖u − Σ_g v^g‖² + t Σ_g d_g ‖v^g‖`, returning `Σ_g v^g`.
fn oracle_latent(u: &[f64], s: &GroupStructure, t: f64) -> Vec<f64> {
    let p = u.len();
    let mut blocks: Vec<Vec<f64>> = s.groups().iter().map(|g| vec![0.0; g.len()]).collect();
    let mut w = vec![0.0; p];
    for _ in 0..2_000_000 {
        let mut change = 0.0f64;
        for g in 0..s.len() {
            let idx = s.group(g);
            let r: Vec<f64> = idx.iter().zip(&blocks[g]).map(|(&j, b)| u[j] - w[j] + b).collect();
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            let thr = t * s.weights()[g];
            let scale = if norm <= thr { 0.0 } else { 1.0 - thr / norm };
            for (k, &j) in idx.iter().enumerate() {
                let nb = scale * r[k];
                change = change.max((nb - blocks[g][k]).abs());
                w[j] += nb - blocks[g][k];
                blocks[g][k] = nb;
            }
        }
        if change <= 1e-16 {
            break;
        }
    }
    // uncovered coordinates cannot be represented
    let cover = s.multiplicity();
    (0..p).map(|j| if cover[j] == 0 { 0.0 } else { w[j] }).collect()
}

struct Case {
    got: Vec<f64>,
    want: Vec<f64>,
    input: String,
}

struct Checker<'a> {
    rng: ChaCha8Rng,
    opts: &'a SuiteOptions,
    reports: Vec<OperatorReport>,
}

impl Checker<'_> {
    fn vector(&mut self, p: usize, scale: f64) -> Vec<f64> {
        let nd = Normal::new(0.0, scale).expect("positive scale");
        (0..p).map(|_| nd.sample(&mut self.rng)).collect()
    }

    fn step(&mut self) -> f64 {
        self.rng.random_range(0.05..1.5)
    }

    fn run(&mut self, operator: &str, oracle: &str, tol: f64, mut case: impl FnMut(&mut Self) -> Result<Case>) -> Result<()> {
        let mut worst = (0.0f64, String::new());
        for _ in 0..self.opts.cases {
            let mut c = case(self)?;
            if self.opts.inject_fault {
                if let Some(x) = c.got.first_mut() {
                    *x += 1e-3;
                }
            }
            let dev = max_abs_diff(&c.got, &c.want);
            if dev > worst.0 || worst.1.is_empty() || dev.is_nan() {
                worst = (if dev.is_nan() { f64::INFINITY } else { dev }, c.input);
            }
        }
        self.reports.push(OperatorReport {
            operator: operator.into(),
            oracle: oracle.into(),
            cases: self.opts.cases,
            max_deviation: worst.0,
            tolerance: tol,
            pass: worst.0 <= tol,
            worst_input: worst.1,
        });
        Ok(())
    }
}

fn random_partition(rng: &mut ChaCha8Rng, p: usize) -> GroupStructure {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for j in 0..p {
        if groups.is_empty() || rng.random_bool(0.5) {
            groups.push(vec![j]);
        } else {
            groups.last_mut().unwrap().push(j);
        }
    }
    GroupStructure::new(p, groups, None, InnerNorm::L2, StructureKind::Partition).expect("valid partition")
}

fn random_overlap(rng: &mut ChaCha8Rng, p: usize) -> GroupStructure {
    let ng = rng.random_range(2..=p + 2).min((1 << p) - 1);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    while groups.len() < ng {
        let mut g: Vec<usize> = (0..p).filter(|_| rng.random_bool(0.5)).collect();
        if g.is_empty() {
            g.push(rng.random_range(0..p));
        }
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    GroupStructure::new(p, groups, None, InnerNorm::L2, StructureKind::Overlap).expect("valid groups")
}

/// Runs every operator against its oracle.
pub fn run_suite(opts: &SuiteOptions) -> Result<Vec<OperatorReport>> {
    let mut ck = Checker { rng: ChaCha8Rng::seed_from_u64(opts.seed), opts, reports: Vec::new() };

    ck.run("prox_l1", "coordinatewise median", ANALYTIC_TOL, |c| {
        let p = c.rng.random_range(1..=8);
        let u = c.vector(p, 2.0);
        let t = c.step();
        Ok(Case { got: prox::prox_l1(&u, t), want: oracle_l1(&u, t), input: format!("u={u:?} t={t}") })
    })?;

    ck.run("prox_group", "radial 1-D minimization", ANALYTIC_TOL, |c| {
        let p = c.rng.random_range(1..=8);
        let s = random_partition(&mut c.rng, p);
        let u = c.vector(p, 2.0);
        let t = c.step();
        Ok(Case { got: prox::prox_group(&u, &s, t)?, want: oracle_group(&u, &s, t), input: format!("u={u:?} t={t} groups={:?}", s.groups()) })
    })?;

    ck.run("prox_group_linf", "Moreau with bisection ℓ1 projection", ANALYTIC_TOL, |c| {
        let p = c.rng.random_range(1..=8);
        let s = random_partition(&mut c.rng, p).with_q(InnerNorm::Linf);
        let u = c.vector(p, 2.0);
        let t = c.step();
        Ok(Case { got: prox::prox_group_linf(&u, &s, t)?, want: oracle_group_linf(&u, &s, t), input: format!("u={u:?} t={t} groups={:?}", s.groups()) })
    })?;

    ck.run("project_l1_ball", "bisection on the threshold", ANALYTIC_TOL, |c| {
        let p = c.rng.random_range(1..=10);
        let u = c.vector(p, 2.0);
        let r = c.rng.random_range(0.1..3.0);
        Ok(Case { got: prox::project_l1_ball(&u, r), want: oracle_project_l1(&u, r), input: format!("u={u:?} r={r}") })
    })?;

    ck.run("project_simplex", "bisection on the shift", ANALYTIC_TOL, |c| {
        let p = c.rng.random_range(1..=10);
        let u = c.vector(p, 2.0);
        let r = c.rng.random_range(0.1..3.0);
        Ok(Case { got: prox::project_simplex(&u, r), want: oracle_simplex(&u, r), input: format!("u={u:?} r={r}") })
    })?;

    ck.run("prox_tree", "dual projected gradient", ANALYTIC_TOL, |c| {
        let p = c.rng.random_range(1..=8);
        let tree = random_tree(&mut c.rng, p);
        let s = make_tree_groups(&tree)?;
        let u = c.vector(p, 2.0);
        let t = c.rng.random_range(0.02..0.6);
        Ok(Case { got: prox::prox_tree(&u, &s, t)?, want: oracle_overlap_dual(&u, &s, t), input: format!("u={u:?} t={t} parents={:?}", tree.parents()) })
    })?;

    ck.run("prox_tree", "grid search", GRID_TOL, |c| {
        let p = c.rng.random_range(1..=3);
        let tree = random_tree(&mut c.rng, p);
        let s = make_tree_groups(&tree)?;
        let u = c.vector(p, 1.0);
        let t = c.rng.random_range(0.02..0.6);
        let r = u.iter().fold(0.0f64, |m, x| m.max(x.abs())) * 1.05 + 1e-3;
        let want = grid_refine(|v| prox_objective(&u, v, t, weighted_l2_norm(&s, v)), &vec![0.0; p], r);
        Ok(Case { got: prox::prox_tree(&u, &s, t)?, want, input: format!("u={u:?} t={t} parents={:?}", tree.parents()) })
    })?;

    ck.run("prox_overlap", "dual projected gradient", ANALYTIC_TOL, |c| {
        let p = c.rng.random_range(2..=6);
        let s = random_overlap(&mut c.rng, p);
        let u = c.vector(p, 2.0);
        let t = c.rng.random_range(0.02..0.6);
        Ok(Case { got: prox::prox_overlap(&u, &s, t, 1e-14)?, want: oracle_overlap_dual(&u, &s, t), input: format!("u={u:?} t={t} groups={:?}", s.groups()) })
    })?;

    ck.run("prox_overlap[intervals]", "grid search", GRID_TOL, |c| {
        let p = c.rng.random_range(2..=3);
        let s = make_intervals(p)?;
        let u = c.vector(p, 1.0);
        let t = c.rng.random_range(0.02..0.6);
        let r = u.iter().fold(0.0f64, |m, x| m.max(x.abs())) * 1.05 + 1e-3;
        let want = grid_refine(|v| prox_objective(&u, v, t, weighted_l2_norm(&s, v)), &vec![0.0; p], r);
        Ok(Case { got: prox::prox_overlap(&u, &s, t, 1e-14)?, want, input: format!("u={u:?} t={t}") })
    })?;

    ck.run("prox_overlap[coefficient weights]", "grid search", GRID_TOL, |c| {
        let p = c.rng.random_range(2..=3);
        let base = random_overlap(&mut c.rng, p);
        let cw: Vec<Vec<f64>> = base.groups().iter().map(|g| g.iter().map(|_| c.rng.random_range(0.3..2.0)).collect()).collect();
        let s = base.with_coefficient_weights(CoefficientWeights(cw.clone()))?;
        let u = c.vector(p, 1.0);
        let t = c.rng.random_range(0.02..0.6);
        let r = u.iter().fold(0.0f64, |m, x| m.max(x.abs())) * 1.05 + 1e-3;
        let want = grid_refine(|v| prox_objective(&u, v, t, weighted_l2_norm(&s, v)), &vec![0.0; p], r);
        let input = format!("u={u:?} t={t} groups={:?} weights={:?} cw={cw:?}", s.groups(), s.weights());
        Ok(Case { got: prox::prox_overlap(&u, &s, t, 1e-14)?, want, input })
    })?;

    ck.run("prox_tv1d", "dual projected gradient", ANALYTIC_TOL, |c| {
        let n = c.rng.random_range(1..=10);
        let u = c.vector(n, 2.0);
        let t = c.step();
        Ok(Case { got: prox::prox_tv1d(&u, t), want: oracle_tv(&u, t), input: format!("u={u:?} t={t}") })
    })?;

    ck.run("prox_latent", "primal block descent", ANALYTIC_TOL, |c| {
        let p = c.rng.random_range(2..=5);
        let s = random_overlap(&mut c.rng, p);
        let u = c.vector(p, 2.0);
        let t = c.rng.random_range(0.05..1.0);
        Ok(Case { got: prox::prox_latent(&u, &s, t, 1e-14)?, want: oracle_latent(&u, &s, t), input: format!("u={u:?} t={t} groups={:?}", s.groups()) })
    })?;

    Ok(ck.reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_search_finds_2d_kink() {
        // ‖u‖ > t but |u_j| < t: coordinate search alone would stall at 0
        let u = [0.8, 0.8];
        let v = grid_refine(|v| prox_objective(&u, v, 1.0, (v[0] * v[0] + v[1] * v[1]).sqrt()), &[0.0, 0.0], 1.0);
        let scale = 1.0 - 1.0 / (0.8f64 * 2f64.sqrt());
        assert!((v[0] - 0.8 * scale).abs() < 1e-6, "{v:?}");
    }

    #[test]
    fn oracles_agree_on_closed_forms() {
        assert_eq!(oracle_l1(&[3.0, -0.5], 1.0), vec![2.0, 0.0]);
        let t = oracle_tv(&[0.0, 2.0], 1.0);
        assert!((t[0] - 1.0).abs() < 1e-12 && (t[1] - 1.0).abs() < 1e-12);
        let s = oracle_simplex(&[0.5, 0.5, 2.0], 1.0);
        assert!((s[2] - 1.0).abs() < 1e-12);
    }
}
