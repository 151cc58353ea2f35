//! Proximal operators `u ↦ argmin_v ½‖u − v‖² + t·Ω(v)` and the Euclidean
//! projections they are built from.

use crate::error::{Error, Result};
use crate::groups::{GroupStructure, InnerNorm};
use crate::norms::NormSpec;

/// Soft-thresholding: `sign(u_j) max(|u_j| − t, 0)`.
pub fn prox_l1(u: &[f64], t: f64) -> Vec<f64> {
    u.iter().map(|&x| soft(x, t)).collect()
}

#[inline]
fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Group thresholding of a single block: `u (1 − t/‖u‖₂)₊`.
pub fn shrink_l2(u: &[f64], t: f64) -> Vec<f64> {
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= t {
        vec![0.0; u.len()]
    } else {
        let scale = 1.0 - t / norm;
        u.iter().map(|v| v * scale).collect()
    }
}

/// Prox of `t‖·‖∞` on a block, by Moreau decomposition against the ℓ1 ball.
pub fn shrink_linf(u: &[f64], t: f64) -> Vec<f64> {
    let proj = project_l1_ball(u, t);
    u.iter().zip(proj).map(|(a, b)| a - b).collect()
}

/// Euclidean projection onto `{v : ‖v‖₁ ≤ radius}` by sorted thresholding.
pub fn project_l1_ball(u: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = u.iter().map(|v| v.abs()).sum();
    if l1 <= radius {
        return u.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; u.len()];
    }
    let abs: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    let theta = simplex_threshold(&abs, radius);
    u.iter().map(|&x| soft(x, theta)).collect()
}

/// Euclidean projection onto `{v ≥ 0 : Σ v = radius}`.
pub fn project_simplex(u: &[f64], radius: f64) -> Vec<f64> {
    let theta = simplex_threshold(u, radius);
    u.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Euclidean projection onto `{v ≥ 0 : Σ v ≤ radius}`.
pub fn project_nonneg_l1_ball(u: &[f64], radius: f64) -> Vec<f64> {
    let pos: Vec<f64> = u.iter().map(|v| v.max(0.0)).collect();
    if pos.iter().sum::<f64>() <= radius {
        pos
    } else {
        project_simplex(&pos, radius)
    }
}

/// The `θ` with `Σ_j max(a_j − θ, 0) = radius`.
fn simplex_threshold(a: &[f64], radius: f64) -> f64 {
    let mut sorted = a.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - radius) / (k + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    theta
}

/// Componentwise clipping onto `[−r, r]`.
pub fn project_linf_ball(u: &[f64], r: f64) -> Vec<f64> {
    u.iter().map(|v| v.clamp(-r, r)).collect()
}

/// Projection onto `{z : ‖z ⊘ c‖₂ ≤ r}`.
fn project_ellipsoid(a: &[f64], c: Option<&[f64]>, r: f64) -> Vec<f64> {
    let Some(c) = c else {
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        return if norm <= r {
            a.to_vec()
        } else {
            a.iter().map(|v| v * r / norm).collect()
        };
    };
    let scaled: f64 = a.iter().zip(c).map(|(x, ci)| (x / ci) * (x / ci)).sum();
    if scaled <= r * r {
        return a.to_vec();
    }
    if r <= 0.0 {
        return vec![0.0; a.len()];
    }
    // z_j = a_j c_j² / (c_j² + μ) with h(μ) = Σ (z_j / c_j)² = r², h decreasing;
    // Newton on the near-linear ψ(μ) = h^{-1/2} − 1/r, safeguarded by a bracket
    let h = |mu: f64| -> (f64, f64) {
        a.iter().zip(c).fold((0.0, 0.0), |(v, d), (x, ci)| {
            let den = ci * ci + mu;
            let z = x * ci / den;
            (v + z * z, d - 2.0 * z * z / den)
        })
    };
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut mu = 0.0;
    for _ in 0..100 {
        let (v, dv) = h(mu);
        if v > r * r {
            lo = mu;
        } else {
            hi = mu;
        }
        if (v - r * r).abs() <= 1e-15 * r * r || (hi.is_finite() && hi - lo <= 1e-16 * hi) {
            break;
        }
        let psi = 1.0 / v.sqrt() - 1.0 / r;
        let dpsi = -0.5 * dv / (v * v.sqrt());
        let next = mu - psi / dpsi;
        mu = if next > lo && next < hi {
            next
        } else if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            2.0 * lo.max(1.0)
        };
    }
    let mut z: Vec<f64> = a.iter().zip(c).map(|(x, ci)| x * ci * ci / (ci * ci + mu)).collect();
    let norm = z.iter().zip(c).map(|(x, ci)| (x / ci) * (x / ci)).sum::<f64>().sqrt();
    if norm > r {
        z.iter_mut().for_each(|x| *x *= r / norm);
    }
    z
}

fn require_plain(s: &GroupStructure, what: &str) -> Result<()> {
    if s.coefficient_weights().is_some() {
        return Err(Error::Unsupported(format!(
            "{what} with coefficient weights; use the overlap operator"
        )));
    }
    Ok(())
}

fn check_len(s: &GroupStructure, u: &[f64]) -> Result<()> {
    if s.p() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: s.p(),
            got: u.len(),
        });
    }
    Ok(())
}

/// Group thresholding with per-group threshold `t·d_g` over disjoint ℓ2
/// groups. Coordinates outside every group are left unchanged.
pub fn prox_group(u: &[f64], s: &GroupStructure, t: f64) -> Result<Vec<f64>> {
    check_len(s, u)?;
    require_plain(s, "group thresholding")?;
    if s.q() != InnerNorm::L2 {
        return Err(Error::Unsupported("prox_group expects q = 2".into()));
    }
    if !s.is_disjoint() {
        return Err(Error::Unsupported(
            "prox_group needs disjoint groups; use prox_tree or prox_overlap".into(),
        ));
    }
    let mut v = u.to_vec();
    for (g, group) in s.groups().iter().enumerate() {
        apply_shrink_l2(&mut v, group, t * s.weights()[g]);
    }
    Ok(v)
}

fn apply_shrink_l2(v: &mut [f64], group: &[usize], thr: f64) {
    let norm = group.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt();
    let scale = if norm <= thr { 0.0 } else { 1.0 - thr / norm };
    for &j in group {
        v[j] *= scale;
    }
}

/// Prox of `t Σ_g d_g ‖v_g‖∞` over disjoint groups: `u_g` minus its
/// projection onto the ℓ1 ball of radius `t·d_g`.
pub fn prox_group_linf(u: &[f64], s: &GroupStructure, t: f64) -> Result<Vec<f64>> {
    check_len(s, u)?;
    require_plain(s, "ℓ∞ group prox")?;
    if s.q() != InnerNorm::Linf {
        return Err(Error::Unsupported("prox_group_linf expects q = ∞".into()));
    }
    if !s.is_disjoint() {
        return Err(Error::Unsupported("prox_group_linf needs disjoint groups".into()));
    }
    let mut v = u.to_vec();
    for (g, group) in s.groups().iter().enumerate() {
        let block: Vec<f64> = group.iter().map(|&j| u[j]).collect();
        let out = shrink_linf(&block, t * s.weights()[g]);
        for (&j, x) in group.iter().zip(out) {
            v[j] = x;
        }
    }
    Ok(v)
}

/// Exact prox for a tree-structured (laminar) ℓ2 family: one pass of group
/// thresholding, each group after every group it contains.
pub fn prox_tree(u: &[f64], s: &GroupStructure, t: f64) -> Result<Vec<f64>> {
    check_len(s, u)?;
    require_plain(s, "tree prox")?;
    if s.q() != InnerNorm::L2 {
        return Err(Error::Unsupported("prox_tree expects q = 2".into()));
    }
    if !s.is_laminar() {
        return Err(Error::InvalidStructure(
            "groups are not nested along paths (family is not laminar)".into(),
        ));
    }
    Ok(tree_pass(u, s, &s.inclusion_order(), t))
}

fn tree_pass(u: &[f64], s: &GroupStructure, order: &[usize], t: f64) -> Vec<f64> {
    let mut v = u.to_vec();
    for &g in order {
        apply_shrink_l2(&mut v, s.group(g), t * s.weights()[g]);
    }
    v
}

/// Sweep cap for [`prox_overlap`].
pub const OVERLAP_MAX_SWEEPS: usize = 20_000;

/// Prox of an overlapping ℓ2 group norm by cyclic block-coordinate ascent on
/// the dual: `v = u − Σ_g ξ_g` with `ξ_g` supported on `g` and
/// `‖ξ_g ⊘ c_g‖₂ ≤ t·d_g`. Sweeps visit groups in inclusion order, so a
/// laminar family converges after one sweep. Terminates when the largest
/// dual change in a sweep is `≤ tol`, or earlier when support
/// identification certifies the iterate within `tol` of the prox (ascent
/// can be sublinear when a zero group's dual sits on its sphere).
pub fn prox_overlap(u: &[f64], s: &GroupStructure, t: f64, tol: f64) -> Result<Vec<f64>> {
    OverlapProx::new(s).apply(u, t, tol)
}

/// Stateful form of [`prox_overlap`] that keeps its dual variables between
/// calls as a warm start.
#[derive(Clone, Debug)]
pub struct OverlapProx {
    structure: GroupStructure,
    order: Vec<usize>,
    duals: Vec<Vec<f64>>,
    pub max_sweeps: usize,
    /// Sweeps used by the last call.
    pub last_sweeps: usize,
}

impl OverlapProx {
    pub fn new(s: &GroupStructure) -> Self {
        Self {
            structure: s.clone(),
            order: s.inclusion_order(),
            duals: s.groups().iter().map(|g| vec![0.0; g.len()]).collect(),
            max_sweeps: OVERLAP_MAX_SWEEPS,
            last_sweeps: 0,
        }
    }

    pub fn structure(&self) -> &GroupStructure {
        &self.structure
    }

    /// Current dual blocks, one per group, in member order.
    pub fn duals(&self) -> &[Vec<f64>] {
        &self.duals
    }

    pub fn reset(&mut self) {
        for d in &mut self.duals {
            d.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn apply(&mut self, u: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
        let s = &self.structure;
        check_len(s, u)?;
        if s.q() != InnerNorm::L2 {
            return Err(Error::Unsupported(
                "overlapping groups are supported for q = 2 only".into(),
            ));
        }
        if t <= 0.0 {
            self.reset();
            self.last_sweeps = 0;
            return Ok(u.to_vec());
        }
        let cw = s.coefficient_weights();
        // rescale warm duals onto the current balls
        for (g, d) in self.duals.iter_mut().enumerate() {
            let c = cw.map(|c| c.0[g].as_slice());
            *d = project_ellipsoid(d, c, t * s.weights()[g]);
        }
        let mut v = u.to_vec();
        for (g, d) in self.duals.iter().enumerate() {
            for (&j, x) in s.group(g).iter().zip(d) {
                v[j] -= x;
            }
        }
        let mut residual = f64::INFINITY;
        let mut inside = vec![false; s.len()];
        for sweep in 1..=self.max_sweeps {
            residual = 0.0f64;
            for &g in &self.order {
                let group = s.group(g);
                let a: Vec<f64> = group
                    .iter()
                    .zip(&self.duals[g])
                    .map(|(&j, x)| v[j] + x)
                    .collect();
                let c = cw.map(|c| c.0[g].as_slice());
                let nd = project_ellipsoid(&a, c, t * s.weights()[g]);
                for (k, &j) in group.iter().enumerate() {
                    residual = residual.max((nd[k] - self.duals[g][k]).abs());
                    v[j] = a[k] - nd[k];
                }
                inside[g] = nd == a;
                self.duals[g] = nd;
            }
            if residual > tol && sweep % POLISH_EVERY == 0 {
                let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                for delta in [1e-3, 1e-5, 1e-7] {
                    if let Some(out) = polish_overlap(u, s, t, &v, &self.duals, delta * scale, tol) {
                        self.last_sweeps = sweep;
                        return Ok(out);
                    }
                }
            }
            if residual <= tol {
                self.last_sweeps = sweep;
                // a dual strictly inside its ball certifies a zero group at
                // the optimum; later overlapping updates leave O(tol) noise there
                for g in (0..s.len()).filter(|&g| inside[g]) {
                    for &j in s.group(g) {
                        v[j] = 0.0;
                    }
                }
                return Ok(v);
            }
        }
        self.last_sweeps = self.max_sweeps;
        Err(Error::Convergence {
            iterations: self.max_sweeps,
            residual,
        })
    }
}

/// Dual sweeps between support-identification attempts in [`OverlapProx`].
const POLISH_EVERY: usize = 250;

/// Finishes a stalled overlapping prox. Groups with `‖c_g∘v_g‖ ≤ delta`
/// are taken as zero; the other coordinates solve the restricted objective,
/// smooth there, by damped Newton steps; the stationarity residual is then
/// spread over the zero groups' dual balls. Whatever is left, `ε`, makes the
/// candidate the exact prox of `u − ε`, so by nonexpansiveness it lies within
/// `‖ε‖₂` of `prox(u)`. Returns the candidate only when `‖ε‖₂ ≤ tol`.
fn polish_overlap(u: &[f64], s: &GroupStructure, t: f64, v: &[f64], duals: &[Vec<f64>], delta: f64, tol: f64) -> Option<Vec<f64>> {
    let p = u.len();
    let cw = s.coefficient_weights();
    let coef = |g: usize, k: usize| cw.map_or(1.0, |c| c.0[g][k]);
    let gnorm = |g: usize, x: &[f64]| -> f64 {
        s.group(g).iter().enumerate().map(|(k, &j)| (coef(g, k) * x[j]).powi(2)).sum::<f64>().sqrt()
    };
    let mut in_zero = vec![false; p];
    for g in 0..s.len() {
        if gnorm(g, v) <= delta {
            s.group(g).iter().for_each(|&j| in_zero[j] = true);
        }
    }
    let free: Vec<usize> = (0..p).filter(|&j| !in_zero[j]).collect();
    let (zero_groups, active): (Vec<usize>, Vec<usize>) = (0..s.len()).partition(|&g| s.group(g).iter().all(|&j| in_zero[j]));
    let mut x: Vec<f64> = (0..p).map(|j| if in_zero[j] { 0.0 } else { v[j] }).collect();
    if active.iter().any(|&g| gnorm(g, &x) == 0.0) {
        return None;
    }
    let objective = |x: &[f64]| -> f64 {
        let fit: f64 = free.iter().map(|&j| 0.5 * (x[j] - u[j]).powi(2)).sum();
        fit + t * active.iter().map(|&g| s.weights()[g] * gnorm(g, x)).sum::<f64>()
    };
    let pos: Vec<Option<usize>> = {
        let mut pos = vec![None; p];
        free.iter().enumerate().for_each(|(i, &j)| pos[j] = Some(i));
        pos
    };
    let m = free.len();
    for _ in 0..100 {
        let mut grad = nalgebra::DVector::from_fn(m, |i, _| x[free[i]] - u[free[i]]);
        let mut hess = nalgebra::DMatrix::<f64>::identity(m, m);
        for &g in &active {
            let n = gnorm(g, &x);
            let w = t * s.weights()[g];
            // (local index, c², c²x) over the free members of g
            let idx: Vec<(usize, f64, f64)> = s
                .group(g)
                .iter()
                .enumerate()
                .filter_map(|(k, &j)| pos[j].map(|i| (i, coef(g, k).powi(2), coef(g, k).powi(2) * x[j])))
                .collect();
            for &(i, c2, cx) in &idx {
                grad[i] += w * cx / n;
                hess[(i, i)] += w * c2 / n;
                for &(i2, _, cx2) in &idx {
                    hess[(i, i2)] -= w * cx * cx2 / (n * n * n);
                }
            }
        }
        if grad.amax() <= 1e-15 * (1.0 + u.iter().fold(0.0f64, |a, b| a.max(b.abs()))) {
            break;
        }
        let step = hess.cholesky()?.solve(&(-&grad));
        let f0 = objective(&x);
        let slope = grad.dot(&step);
        let mut alpha = 1.0;
        let moved = loop {
            let cand: Vec<f64> = (0..p).map(|j| pos[j].map_or(0.0, |i| x[j] + alpha * step[i])).collect();
            if active.iter().all(|&g| gnorm(g, &cand) > 0.0) && objective(&cand) <= f0 + 1e-4 * alpha * slope {
                break Some(cand);
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                break None;
            }
        };
        match moved {
            Some(cand) => x = cand,
            None => break,
        }
    }
    // residual of ũ − x ∈ t∂Ω(x) with ũ = u: active groups use their gradient
    let mut q: Vec<f64> = (0..p).map(|j| u[j] - x[j]).collect();
    for &g in &active {
        let n = gnorm(g, &x);
        if n == 0.0 {
            return None;
        }
        let w = t * s.weights()[g];
        for (k, &j) in s.group(g).iter().enumerate() {
            q[j] -= w * coef(g, k).powi(2) * x[j] / n;
        }
    }
    let mut xi: Vec<Vec<f64>> = zero_groups.iter().map(|&g| project_ellipsoid(&duals[g], cw.map(|c| c.0[g].as_slice()), t * s.weights()[g])).collect();
    for (xg, &g) in xi.iter().zip(&zero_groups) {
        for (&j, val) in s.group(g).iter().zip(xg) {
            q[j] -= val;
        }
    }
    for _ in 0..POLISH_EVERY {
        if q.iter().map(|e| e * e).sum::<f64>().sqrt() <= tol {
            return Some(x);
        }
        for (xg, &g) in xi.iter_mut().zip(&zero_groups) {
            let group = s.group(g);
            let a: Vec<f64> = group.iter().zip(xg.iter()).map(|(&j, d)| q[j] + d).collect();
            let nd = project_ellipsoid(&a, cw.map(|c| c.0[g].as_slice()), t * s.weights()[g]);
            for (k, &j) in group.iter().enumerate() {
                q[j] = a[k] - nd[k];
            }
            *xg = nd;
        }
    }
    (q.iter().map(|e| e * e).sum::<f64>().sqrt() <= tol).then_some(x)
}

/// Exact prox of `t Σ_i |v_{i+1} − v_i|` (taut-string direct algorithm).
pub fn prox_tv1d(u: &[f64], t: f64) -> Vec<f64> {
    let n = u.len();
    if n <= 1 || t <= 0.0 {
        return u.to_vec();
    }
    let lambda = t;
    let mut out = vec![0.0; n];
    let (mut k, mut k0, mut kminus, mut kplus) = (0usize, 0usize, 0usize, 0usize);
    let mut vmin = u[0] - lambda;
    let mut vmax = u[0] + lambda;
    let mut umin = lambda;
    let mut umax = -lambda;
    let twolambda = 2.0 * lambda;
    loop {
        while k == n - 1 {
            if umin < 0.0 {
                while k0 <= kminus {
                    out[k0] = vmin;
                    k0 += 1;
                }
                k = k0;
                kminus = k0;
                vmin = u[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                while k0 <= kplus {
                    out[k0] = vmax;
                    k0 += 1;
                }
                k = k0;
                kplus = k0;
                vmax = u[k0];
                umax = -lambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                while k0 <= k {
                    out[k0] = vmin;
                    k0 += 1;
                }
                return out;
            }
        }
        umin += u[k + 1] - vmin;
        if umin < -lambda {
            while k0 <= kminus {
                out[k0] = vmin;
                k0 += 1;
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = u[k0];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        umax += u[k + 1] - vmax;
        if umax > lambda {
            while k0 <= kplus {
                out[k0] = vmax;
                k0 += 1;
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = u[k0];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = -lambda;
        } else {
            k += 1;
            if umin >= lambda {
                kminus = k;
                vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
                umin = lambda;
            }
            if umax <= -lambda {
                kplus = k;
                vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
                umax = -lambda;
            }
        }
    }
}

/// Prox of the latent group norm in the ambient space, via the Moreau
/// identity: `u − Π(u)` with `Π` the projection onto the dual ball
/// `∩_g {z : ‖z_g‖_{q*} ≤ t·d_g}`, computed by Dykstra's alternating
/// projections.
pub fn prox_latent(u: &[f64], s: &GroupStructure, t: f64, tol: f64) -> Result<Vec<f64>> {
    check_len(s, u)?;
    require_plain(s, "latent prox")?;
    let mult = s.multiplicity();
    let mut z = u.to_vec();
    // uncovered coordinates have an unbounded dual: Π leaves them as is, so
    // the prox output is zero there (the latent norm is +∞ off the span)
    let mut corr: Vec<Vec<f64>> = s.groups().iter().map(|g| vec![0.0; g.len()]).collect();
    let max_iter = 200_000;
    for _ in 0..max_iter {
        let mut change = 0.0f64;
        for (g, group) in s.groups().iter().enumerate() {
            let a: Vec<f64> = group.iter().zip(&corr[g]).map(|(&j, c)| z[j] + c).collect();
            let r = t * s.weights()[g];
            let pz = match s.q() {
                InnerNorm::L2 => project_ellipsoid(&a, None, r),
                InnerNorm::Linf => project_l1_ball(&a, r),
            };
            for (k, &j) in group.iter().enumerate() {
                change = change.max((pz[k] - z[j]).abs());
                corr[g][k] = a[k] - pz[k];
                z[j] = pz[k];
            }
        }
        if change <= tol {
            return Ok((0..u.len())
                .map(|j| if mult[j] == 0 { 0.0 } else { u[j] - z[j] })
                .collect());
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Stateless prox dispatch for any penalty: routes each structure to the
/// exact operator when one exists.
pub fn prox_spec(spec: &NormSpec, u: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    match spec {
        NormSpec::L1 => Ok(prox_l1(u, t)),
        NormSpec::Tv1d => Ok(prox_tv1d(u, t)),
        NormSpec::Group { structure: s } => {
            let plain = s.coefficient_weights().is_none();
            match s.q() {
                InnerNorm::L2 if plain && s.is_disjoint() => prox_group(u, s, t),
                InnerNorm::L2 if plain && s.is_laminar() => prox_tree(u, s, t),
                InnerNorm::L2 => prox_overlap(u, s, t, tol),
                InnerNorm::Linf if s.is_disjoint() => prox_group_linf(u, s, t),
                InnerNorm::Linf => Err(Error::Unsupported(
                    "overlapping ℓ∞ groups have no prox here".into(),
                )),
            }
        }
        NormSpec::LatentGroup { structure } => prox_latent(u, structure, t, tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{make_partition, make_tree_groups, StructureKind, TreeStructure};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn l1_examples() {
        assert_eq!(prox_l1(&[3.0, -1.0, 0.5], 1.0), vec![2.0, 0.0, 0.0]);
        assert_eq!(prox_l1(&[3.0, -1.0, 0.5], 0.0), vec![3.0, -1.0, 0.5]);
    }

    #[test]
    fn group_examples() {
        let s = make_partition(2, vec![vec![0, 1]]).unwrap().with_weights(vec![1.0]).unwrap();
        let v = prox_group(&[3.0, 4.0], &s, 2.0).unwrap();
        assert!(close(&v, &[1.8, 2.4], 1e-15));
        assert_eq!(prox_group(&[3.0, 4.0], &s, 5.0).unwrap(), vec![0.0, 0.0]);
        let singles = make_partition(3, vec![vec![0], vec![1], vec![2]]).unwrap();
        let u = [1.5, -0.2, -3.0];
        assert!(close(&prox_group(&u, &singles, 0.7).unwrap(), &prox_l1(&u, 0.7), 1e-15));
        let o = GroupStructure::new(2, vec![vec![0, 1], vec![1]], None, InnerNorm::L2, StructureKind::Overlap).unwrap();
        assert!(matches!(prox_group(&u[..2], &o, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn group_linf_examples() {
        let s = make_partition(2, vec![vec![0, 1]]).unwrap().with_q(InnerNorm::Linf).with_weights(vec![1.0]).unwrap();
        let v = prox_group_linf(&[3.0, 1.0], &s, 2.0).unwrap();
        assert!(close(&v, &[1.0, 1.0], 1e-15));
        assert_eq!(prox_group_linf(&[3.0, 1.0], &s, 0.0).unwrap(), vec![3.0, 1.0]);
        assert_eq!(prox_group_linf(&[3.0, -1.0], &s, 4.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn l1_ball_examples() {
        assert_eq!(project_l1_ball(&[0.5, -0.2], 1.0), vec![0.5, -0.2]);
        assert!(close(&project_l1_ball(&[3.0, 1.0], 2.0), &[2.0, 0.0], 1e-15));
        assert!(close(&project_l1_ball(&[1.0, 1.0], 1.0), &[0.5, 0.5], 1e-15));
        let s = project_simplex(&[0.2, 0.9, -1.0], 1.0);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15 && s[2] == 0.0);
    }

    #[test]
    fn tree_examples() {
        let tree = TreeStructure::chain(2).unwrap();
        let s = make_tree_groups(&tree).unwrap();
        let u = [2.0, -1.5];
        assert_eq!(prox_tree(&u, &s, 0.0).unwrap(), u.to_vec());
        let a = prox_tree(&u, &s, 0.6).unwrap();
        let b = prox_overlap(&u, &s, 0.6, 1e-14).unwrap();
        assert!(close(&a, &b, 1e-10), "{a:?} vs {b:?}");
        let forest = TreeStructure::new(vec![None, None, None]).unwrap();
        let s = make_tree_groups(&forest).unwrap();
        assert_eq!(prox_tree(&[1.0, -2.0, 0.1], &s, 0.5).unwrap(), prox_l1(&[1.0, -2.0, 0.1], 0.5));
    }

    #[test]
    fn tree_rejects_crossing_groups() {
        let s = GroupStructure::new(3, vec![vec![0, 1], vec![1, 2]], None, InnerNorm::L2, StructureKind::Overlap).unwrap();
        assert!(matches!(prox_tree(&[1.0; 3], &s, 0.1), Err(Error::InvalidStructure(_))));
    }

    #[test]
    fn overlap_disjoint_matches_group() {
        let s = make_partition(5, vec![vec![0, 3], vec![1, 2], vec![4]]).unwrap();
        let u = [1.0, -2.0, 0.3, 0.8, -0.1];
        let a = prox_group(&u, &s, 0.4).unwrap();
        let b = prox_overlap(&u, &s, 0.4, 1e-14).unwrap();
        assert!(close(&a, &b, 1e-10));
    }

    #[test]
    fn overlap_reports_non_convergence() {
        let s = GroupStructure::new(3, vec![vec![0, 1], vec![1, 2]], None, InnerNorm::L2, StructureKind::Overlap).unwrap();
        let mut op = OverlapProx::new(&s);
        op.max_sweeps = 1;
        let e = op.apply(&[1.0, 2.0, 3.0], 0.5, 0.0).unwrap_err();
        assert!(matches!(e, Error::Convergence { iterations: 1, .. }));
    }

    #[test]
    fn tv_examples() {
        assert_eq!(prox_tv1d(&[2.0; 4], 0.7), vec![2.0; 4]);
        assert!(close(&prox_tv1d(&[0.0, 2.0], 1.0), &[1.0, 1.0], 1e-15));
        assert!(close(&prox_tv1d(&[0.0, 2.0], 0.5), &[0.5, 1.5], 1e-15));
        assert_eq!(prox_tv1d(&[3.0], 1.0), vec![3.0]);
    }

    #[test]
    fn ellipsoid_projection_is_feasible() {
        let c = [0.5, 2.0, 1.0];
        let z = project_ellipsoid(&[3.0, -1.0, 2.0], Some(&c), 1.0);
        let val: f64 = z.iter().zip(&c).map(|(x, ci)| (x / ci) * (x / ci)).sum();
        assert!((val - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ellipsoid_projection_is_normal_to_the_boundary() {
        // a − z = μ z ⊘ c² with one μ ≥ 0 for every coordinate
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = rng.random_range(1..8);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..20.0)).collect();
            let r = rng.random_range(0.01..2.0);
            let z = project_ellipsoid(&a, Some(&c), r);
            let val: f64 = z.iter().zip(&c).map(|(x, ci)| (x / ci) * (x / ci)).sum::<f64>().sqrt();
            assert!(val <= r * (1.0 + 1e-14));
            if val < r * (1.0 - 1e-12) {
                assert_eq!(z, a);
                continue;
            }
            let mus: Vec<f64> = (0..n).filter(|&j| z[j].abs() > 1e-9).map(|j| (a[j] - z[j]) * c[j] * c[j] / z[j]).collect();
            let hi = mus.iter().cloned().fold(f64::MIN, f64::max);
            let lo = mus.iter().cloned().fold(f64::MAX, f64::min);
            assert!(lo >= -1e-9 && hi - lo <= 1e-7 * (1.0 + hi), "{a:?} {c:?} {r}: {mus:?}");
        }
    }
}
