//! Penalty evaluation: ℓ1, mixed ℓ1/ℓq over (possibly overlapping) groups,
//! the latent group norm, 1-D total variation and the block-coding penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{GroupStructure, InnerNorm};
use crate::prox;

/// Which penalty `Ω` is applied to the coefficient vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum NormSpec {
    L1,
    /// `Σ_g d_g ‖w_g‖_q`, overlap allowed.
    Group { structure: GroupStructure },
    /// `min { Σ_g d_g ‖v^g‖_q : Σ_g v^g = w, supp(v^g) ⊆ g }`.
    LatentGroup { structure: GroupStructure },
    Tv1d,
}

impl NormSpec {
    pub fn structure(&self) -> Option<&GroupStructure> {
        match self {
            NormSpec::Group { structure } | NormSpec::LatentGroup { structure } => Some(structure),
            NormSpec::L1 | NormSpec::Tv1d => None,
        }
    }

    /// The plain Euclidean norm over `p` coordinates, as a single unit-weight group.
    pub fn l2(p: usize) -> Result<Self> {
        let structure = GroupStructure::new(
            p,
            vec![(0..p).collect()],
            Some(vec![1.0]),
            InnerNorm::L2,
            crate::groups::StructureKind::Partition,
        )?;
        Ok(NormSpec::Group { structure })
    }

    pub fn name(&self) -> &'static str {
        match self {
            NormSpec::L1 => "l1",
            NormSpec::Group { .. } => "group",
            NormSpec::LatentGroup { .. } => "latent-group",
            NormSpec::Tv1d => "tv1d",
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `d_g ‖c_g ∘ w_g‖_q` for one group.
pub fn group_term(s: &GroupStructure, g: usize, w: &[f64]) -> f64 {
    let vals: Vec<f64> = s
        .group(g)
        .iter()
        .enumerate()
        .map(|(k, &j)| s.coefficient_weight(g, k) * w[j])
        .collect();
    s.weights()[g] * s.q().value(&vals)
}

/// `Σ_g d_g ‖w_g‖_q` with each group contributing on its own slice.
pub fn group_norm(s: &GroupStructure, w: &[f64]) -> f64 {
    (0..s.len()).map(|g| group_term(s, g, w)).sum()
}

pub fn tv1d(w: &[f64]) -> f64 {
    w.windows(2).map(|p| (p[1] - p[0]).abs()).sum()
}

/// Value of the penalty at `w`. The latent variant is minimized
/// numerically to `1e-9` accuracy.
pub fn eval_norm(spec: &NormSpec, w: &[f64]) -> Result<f64> {
    match spec {
        NormSpec::L1 => Ok(w.iter().map(|v| v.abs()).sum()),
        NormSpec::Tv1d => Ok(tv1d(w)),
        NormSpec::Group { structure } => {
            check_dim(structure.p(), w.len())?;
            Ok(group_norm(structure, w))
        }
        NormSpec::LatentGroup { .. } => Ok(eval_latent_norm(spec, w, 1e-9)?.0),
    }
}

/// Per-group latent blocks `v^g`, stored on the members of each group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentDecomposition {
    pub p: usize,
    pub groups: Vec<Vec<usize>>,
    pub blocks: Vec<Vec<f64>>,
}

impl LatentDecomposition {
    pub fn zeros(s: &GroupStructure) -> Self {
        Self {
            p: s.p(),
            groups: s.groups().to_vec(),
            blocks: s.groups().iter().map(|g| vec![0.0; g.len()]).collect(),
        }
    }

    /// `Σ_g v^g` in the ambient dimension.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.p];
        for (g, block) in self.groups.iter().zip(&self.blocks) {
            for (&j, v) in g.iter().zip(block) {
                w[j] += v;
            }
        }
        w
    }

    pub fn dense_block(&self, g: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.p];
        for (&j, x) in self.groups[g].iter().zip(&self.blocks[g]) {
            v[j] = *x;
        }
        v
    }

    pub fn cost(&self, s: &GroupStructure) -> f64 {
        self.blocks
            .iter()
            .enumerate()
            .map(|(g, b)| s.weights()[g] * s.q().value(b))
            .sum()
    }
}

/// Minimal latent cost of `w` and an attaining decomposition.
///
/// Solved by an augmented Lagrangian on the constraint `Σ v^g = w`, each
/// subproblem by accelerated proximal steps on the blocks. Termination is
/// certified by a duality gap `≤ tol`: the returned decomposition is exactly
/// feasible and its cost exceeds the optimum by at most `tol`.
pub fn eval_latent_norm(spec: &NormSpec, w: &[f64], tol: f64) -> Result<(f64, LatentDecomposition)> {
    let s = match spec {
        NormSpec::LatentGroup { structure } | NormSpec::Group { structure } => structure,
        _ => return Err(Error::Unsupported(format!("latent evaluation of {}", spec.name()))),
    };
    check_dim(s.p(), w.len())?;
    if s.coefficient_weights().is_some() {
        return Err(Error::Unsupported(
            "coefficient weights with the latent norm".into(),
        ));
    }
    let mult = s.multiplicity();
    if let Some(j) = (0..s.p()).find(|&j| mult[j] == 0 && w[j] != 0.0) {
        return Err(Error::Infeasible(format!(
            "coordinate {j} is nonzero but covered by no group"
        )));
    }
    let mut dec = LatentDecomposition::zeros(s);
    if w.iter().all(|v| *v == 0.0) {
        return Ok((0.0, dec));
    }
    if s.is_disjoint() {
        for (g, group) in s.groups().iter().enumerate() {
            dec.blocks[g] = group.iter().map(|&j| w[j]).collect();
        }
        return Ok((dec.cost(s), dec));
    }

    let q = s.q();
    let d = s.weights();
    let wnorm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dmean = d.iter().sum::<f64>() / d.len() as f64;
    let rho = dmean / wnorm;
    let lip = rho * (*mult.iter().max().unwrap() as f64);
    let mut z = vec![0.0; s.p()];
    let mut best_gap = f64::INFINITY;
    let max_outer = 2000;
    for _outer in 0..max_outer {
        // inner: min_v Σ d_g‖v^g‖ + ρ/2 ‖w − Av + z/ρ‖²
        let target: Vec<f64> = w.iter().zip(&z).map(|(wi, zi)| wi + zi / rho).collect();
        let mut x = dec.clone();
        let mut y = dec.clone();
        let mut x_prev = dec.clone();
        for k in 1..=500 {
            let av = y.reconstruct();
            let resid: Vec<f64> = target.iter().zip(&av).map(|(t, a)| t - a).collect();
            let mut change = 0.0f64;
            for (g, group) in s.groups().iter().enumerate() {
                let step: Vec<f64> = group
                    .iter()
                    .zip(&y.blocks[g])
                    .map(|(&j, v)| v + rho * resid[j] / lip)
                    .collect();
                let nb = shrink_block(q, &step, d[g] / lip);
                for (a, b) in nb.iter().zip(&x.blocks[g]) {
                    change = change.max((a - b).abs());
                }
                x_prev.blocks[g] = std::mem::replace(&mut x.blocks[g], nb);
            }
            let beta = (k as f64 - 1.0) / (k as f64 + 2.0);
            for g in 0..s.len() {
                for ((yv, xv), pv) in y.blocks[g]
                    .iter_mut()
                    .zip(&x.blocks[g])
                    .zip(&x_prev.blocks[g])
                {
                    *yv = xv + beta * (xv - pv);
                }
            }
            if change <= 1e-14 * wnorm.max(1.0) {
                break;
            }
        }
        dec = x;
        let av = dec.reconstruct();
        for j in 0..s.p() {
            z[j] += rho * (w[j] - av[j]);
        }
        let (primal, feasible) = feasible_cost(s, &dec, w);
        let scale = (0..s.len())
            .map(|g| {
                let zg: Vec<f64> = s.group(g).iter().map(|&j| z[j]).collect();
                q.dual_value(&zg) / d[g]
            })
            .fold(0.0f64, f64::max)
            .max(1.0);
        let lower: f64 = z.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / scale;
        let gap = primal - lower;
        best_gap = best_gap.min(gap);
        if gap <= tol {
            return Ok((primal, feasible));
        }
    }
    Err(Error::Convergence {
        iterations: max_outer,
        residual: best_gap,
    })
}

/// Pushes the constraint residual onto the first group covering each
/// coordinate so that `Σ v^g = w` holds exactly; returns the resulting cost.
fn feasible_cost(s: &GroupStructure, dec: &LatentDecomposition, w: &[f64]) -> (f64, LatentDecomposition) {
    let av = dec.reconstruct();
    let mut fixed = dec.clone();
    let mut done = vec![false; s.p()];
    for (g, group) in s.groups().iter().enumerate() {
        for (k, &j) in group.iter().enumerate() {
            if !done[j] {
                fixed.blocks[g][k] += w[j] - av[j];
                done[j] = true;
            }
        }
    }
    (fixed.cost(s), fixed)
}

fn shrink_block(q: InnerNorm, u: &[f64], t: f64) -> Vec<f64> {
    match q {
        InnerNorm::L2 => prox::shrink_l2(u, t),
        InnerNorm::Linf => prox::shrink_linf(u, t),
    }
}

/// Positive per-group costs for the block-coding penalty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodingWeights(pub Vec<f64>);

/// Largest group count accepted by [`eval_block_coding`].
pub const MAX_CODING_GROUPS: usize = 24;

/// Cheapest total weight of a subfamily of groups covering `supp(w)`,
/// by depth-first branch and bound.
pub fn eval_block_coding(weights: &CodingWeights, s: &GroupStructure, w: &[f64]) -> Result<f64> {
    check_dim(s.p(), w.len())?;
    check_dim(s.len(), weights.0.len())?;
    if s.len() > MAX_CODING_GROUPS {
        return Err(Error::Capacity(format!(
            "block coding limited to {MAX_CODING_GROUPS} groups, got {}",
            s.len()
        )));
    }
    if weights.0.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidStructure("coding weights must be positive".into()));
    }
    let support: Vec<usize> = (0..s.p()).filter(|&j| w[j] != 0.0).collect();
    let mult = s.multiplicity();
    if let Some(&j) = support.iter().find(|&&j| mult[j] == 0) {
        return Err(Error::Infeasible(format!("coordinate {j} is covered by no group")));
    }
    // groups containing each coordinate, cheapest first
    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); s.p()];
    for (g, group) in s.groups().iter().enumerate() {
        for &j in group {
            containing[j].push(g);
        }
    }
    for c in &mut containing {
        c.sort_by(|&a, &b| weights.0[a].total_cmp(&weights.0[b]));
    }
    let mut covered = vec![0u32; s.p()];
    let mut best = f64::INFINITY;
    branch(s, &weights.0, &support, &containing, &mut covered, 0.0, &mut best);
    Ok(best)
}

fn branch(
    s: &GroupStructure,
    weights: &[f64],
    support: &[usize],
    containing: &[Vec<usize>],
    covered: &mut [u32],
    cost: f64,
    best: &mut f64,
) {
    let Some(&e) = support.iter().find(|&&j| covered[j] == 0) else {
        *best = best.min(cost);
        return;
    };
    for &g in &containing[e] {
        let c = cost + weights[g];
        if c >= *best {
            // cheapest first: the remaining candidates cost at least as much
            break;
        }
        for &j in s.group(g) {
            covered[j] += 1;
        }
        branch(s, weights, support, containing, covered, c, best);
        for &j in s.group(g) {
            covered[j] -= 1;
        }
    }
}

/// Dual norm of `z`: `max_j |z_j|` for ℓ1 and `max_g ‖z_g‖_{q*} / d_g` for
/// disjoint groups and for the latent norm (whose dual ball is the
/// intersection of the group dual balls). Coordinates outside every group
/// are unpenalized, so the dual norm is `+∞` unless `z` vanishes there.
pub fn dual_norm_l1_linf(spec: &NormSpec, z: &[f64]) -> Result<f64> {
    match spec {
        NormSpec::L1 => Ok(z.iter().fold(0.0, |m, v| m.max(v.abs()))),
        NormSpec::Group { structure } if !structure.is_disjoint() => Err(Error::Unsupported(
            "dual norm of an overlapping group norm".into(),
        )),
        NormSpec::Group { structure } | NormSpec::LatentGroup { structure } => {
            check_dim(structure.p(), z.len())?;
            let mult = structure.multiplicity();
            if (0..z.len()).any(|j| mult[j] == 0 && z[j] != 0.0) {
                return Ok(f64::INFINITY);
            }
            let q = structure.q();
            Ok((0..structure.len())
                .map(|g| {
                    let zg: Vec<f64> = structure
                        .group(g)
                        .iter()
                        .enumerate()
                        .map(|(k, &j)| z[j] / structure.coefficient_weight(g, k))
                        .collect();
                    q.dual_value(&zg) / structure.weights()[g]
                })
                .fold(0.0, f64::max))
        }
        NormSpec::Tv1d => Err(Error::Unsupported("dual norm of total variation".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{make_partition, StructureKind};

    fn overlap(p: usize, groups: Vec<Vec<usize>>) -> GroupStructure {
        let n = groups.len();
        GroupStructure::new(p, groups, Some(vec![1.0; n]), InnerNorm::L2, StructureKind::Overlap).unwrap()
    }

    #[test]
    fn basic_values() {
        assert_eq!(eval_norm(&NormSpec::L1, &[1.0, -2.0, 3.0]).unwrap(), 6.0);
        let s = make_partition(3, vec![vec![0, 1], vec![2]]).unwrap().with_weights(vec![1.0, 1.0]).unwrap();
        let v = eval_norm(&NormSpec::Group { structure: s }, &[1.0, 2.0, 3.0]).unwrap();
        assert!((v - (5f64.sqrt() + 3.0)).abs() < 1e-15);
        assert_eq!(eval_norm(&NormSpec::Tv1d, &[1.0, 1.0, 3.0]).unwrap(), 2.0);
    }

    #[test]
    fn dimension_mismatch() {
        let s = make_partition(2, vec![vec![0, 1]]).unwrap();
        let e = eval_norm(&NormSpec::Group { structure: s }, &[1.0]).unwrap_err();
        assert!(matches!(e, Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn latent_simple_cases() {
        let spec = NormSpec::LatentGroup { structure: overlap(3, vec![vec![0, 2], vec![1, 2]]) };
        let (v, dec) = eval_latent_norm(&spec, &[0.0, 0.0, 1.0], 1e-9).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
        let r = dec.reconstruct();
        assert!((r[2] - 1.0).abs() < 1e-12 && r[0].abs() < 1e-12);
        let (v, dec) = eval_latent_norm(&spec, &[1.0, 0.0, 0.0], 1e-9).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
        assert!(dec.blocks[1].iter().all(|x| x.abs() < 1e-6));
    }

    #[test]
    fn latent_uncovered_is_infeasible() {
        let spec = NormSpec::LatentGroup { structure: overlap(3, vec![vec![0, 1]]) };
        assert!(matches!(eval_latent_norm(&spec, &[0.0, 0.0, 1.0], 1e-9), Err(Error::Infeasible(_))));
    }

    #[test]
    fn latent_disjoint_is_group_norm() {
        let s = make_partition(4, vec![vec![0, 3], vec![1, 2]]).unwrap();
        let w = [0.3, -1.0, 2.0, 0.5];
        let a = eval_norm(&NormSpec::Group { structure: s.clone() }, &w).unwrap();
        let b = eval_latent_norm(&NormSpec::LatentGroup { structure: s }, &w, 1e-9).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn block_coding_examples() {
        let s = overlap(2, vec![vec![0], vec![1], vec![0, 1]]);
        let cw = CodingWeights(vec![1.0, 1.0, 1.5]);
        assert_eq!(eval_block_coding(&cw, &s, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(eval_block_coding(&cw, &s, &[1.0, -2.0]).unwrap(), 1.5);
        assert_eq!(eval_block_coding(&cw, &s, &[1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn block_coding_guards() {
        let s = overlap(2, vec![vec![0]]);
        let cw = CodingWeights(vec![1.0]);
        assert!(matches!(eval_block_coding(&cw, &s, &[0.0, 1.0]), Err(Error::Infeasible(_))));
        let s = overlap(30, (0..25).map(|j| vec![j]).collect());
        let cw = CodingWeights(vec![1.0; 25]);
        assert!(matches!(eval_block_coding(&cw, &s, &[0.0; 30]), Err(Error::Capacity(_))));
    }

    #[test]
    fn dual_norms() {
        assert_eq!(dual_norm_l1_linf(&NormSpec::L1, &[1.0, -3.0, 2.0]).unwrap(), 3.0);
        assert_eq!(dual_norm_l1_linf(&NormSpec::L1, &[0.0; 3]).unwrap(), 0.0);
        let s = make_partition(3, vec![vec![0, 1], vec![2]]).unwrap().with_weights(vec![1.0, 2.0]).unwrap();
        let v = dual_norm_l1_linf(&NormSpec::Group { structure: s }, &[3.0, 4.0, 2.0]).unwrap();
        assert!((v - 5.0).abs() < 1e-15);
        let o = overlap(3, vec![vec![0, 1], vec![1, 2]]);
        assert!(matches!(
            dual_norm_l1_linf(&NormSpec::Group { structure: o }, &[1.0; 3]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn linf_dual_is_l1() {
        let s = make_partition(2, vec![vec![0, 1]]).unwrap().with_q(InnerNorm::Linf);
        assert_eq!(s.weights(), &[2.0]);
        let v = dual_norm_l1_linf(&NormSpec::Group { structure: s }, &[3.0, -1.0]).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn spec_serde_names() {
        let s = make_partition(2, vec![vec![0], vec![1]]).unwrap();
        let j = serde_json::to_value(NormSpec::LatentGroup { structure: s }).unwrap();
        assert_eq!(j["variant"], "latent-group");
        assert_eq!(j["structure"]["q"], "l2");
        let back: NormSpec = serde_json::from_str(r#"{"variant":"tv1d"}"#).unwrap();
        assert_eq!(back, NormSpec::Tv1d);
    }
}
