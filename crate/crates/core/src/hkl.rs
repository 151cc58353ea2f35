//! Hierarchical kernel selection at desk scale: explicit finite feature
//! maps for every variable subset up to a given order, the descendant-group
//! norm over the subset DAG, and multiple-kernel (block) selection.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{make_partition, make_powerset_dag, GroupStructure, InnerNorm, PowersetDag, StructureKind};
use crate::models::{self, FitResult, Problem, SUPPORT_THRESHOLD};
use crate::norms::NormSpec;
use crate::solver::{LossKind, SolverConfig};

/// Desk guards for [`build_features`].
pub const MAX_HKL_VARIABLES: usize = 10;
pub const MAX_HKL_ORDER: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `x, x², …, x^B`.
    Polynomials,
    /// `exp(−γ (x − c_b)²)` at `B` equispaced centers over the observed range.
    GaussianBumps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub basis: Basis,
    /// Basis functions per variable.
    pub b: usize,
    /// Bump width; defaults to `1/(2·spacing²)`.
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl KernelSpec {
    pub fn polynomials(b: usize) -> Self {
        Self { basis: Basis::Polynomials, b, gamma: None }
    }

    pub fn gaussian(b: usize, gamma: Option<f64>) -> Self {
        Self { basis: Basis::GaussianBumps, b, gamma }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::Config("need at least one basis function per variable".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

/// Subset DAG with a feature block of size `B^{|J|}` per node.
#[derive(Clone, Debug)]
pub struct SubsetDag {
    pub dag: PowersetDag,
    pub b: usize,
    /// Column range of each node's block in the expanded design.
    pub offsets: Vec<usize>,
}

impl SubsetDag {
    pub fn new(p: usize, max_order: usize, b: usize) -> Result<Self> {
        if p > MAX_HKL_VARIABLES || max_order > MAX_HKL_ORDER {
            return Err(Error::Capacity(format!(
                "feature expansion limited to p ≤ {MAX_HKL_VARIABLES} and order ≤ {MAX_HKL_ORDER}, got p = {p}, order = {max_order}"
            )));
        }
        if b == 0 {
            return Err(Error::Config("need at least one basis function per variable".into()));
        }
        let dag = make_powerset_dag(p, max_order)?;
        let mut offsets = vec![0];
        for node in &dag.nodes {
            offsets.push(offsets.last().unwrap() + b.pow(node.len() as u32));
        }
        Ok(Self { dag, b, offsets })
    }

    pub fn len(&self) -> usize {
        self.dag.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dag.nodes.is_empty()
    }

    pub fn block_dim(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block<'a>(&self, w: &'a [f64], node: usize) -> &'a [f64] {
        &w[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Coefficient-level descendant groups: group `J` holds the blocks of
    /// every `H ⊇ J`. With `skip_root` the empty-set node gets no group.
    pub fn coefficient_groups(&self, weights: &[f64], skip_root: bool) -> Result<GroupStructure> {
        let first = usize::from(skip_root);
        let groups: Vec<Vec<usize>> = (first..self.len())
            .map(|j| {
                self.dag.structure.group(j).iter().flat_map(|&h| self.offsets[h]..self.offsets[h + 1]).collect()
            })
            .collect();
        GroupStructure::new(
            self.total_dim(),
            groups,
            Some(weights[first..].to_vec()),
            InnerNorm::L2,
            StructureKind::Dag,
        )
    }
}

/// Feature design: the raw map and the block-standardized design fitted on.
#[derive(Clone, Debug)]
pub struct Features {
    pub raw: Array2<f64>,
    /// Non-constant columns centered and scaled to unit variance; the empty-set
    /// block stays the constant 1.
    pub standardized: Array2<f64>,
}

fn basis_values(spec: &KernelSpec, col: ArrayView1<f64>) -> Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    match spec.basis {
        Basis::Polynomials => (1..=spec.b as i32).map(|k| Box::new(move |x: f64| x.powi(k)) as Box<dyn Fn(f64) -> f64 + Send + Sync>).collect(),
        Basis::GaussianBumps => {
            let lo = col.iter().fold(f64::INFINITY, |m, v| m.min(*v));
            let hi = col.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            let range = if hi > lo { hi - lo } else { 1.0 };
            let (centers, spacing): (Vec<f64>, f64) = if spec.b == 1 {
                (vec![0.5 * (lo + hi)], range)
            } else {
                let h = range / (spec.b - 1) as f64;
                ((0..spec.b).map(|k| lo + h * k as f64).collect(), h)
            };
            let gamma = spec.gamma.unwrap_or(1.0 / (2.0 * spacing * spacing));
            centers
                .into_iter()
                .map(|c| Box::new(move |x: f64| (-gamma * (x - c) * (x - c)).exp()) as Box<dyn Fn(f64) -> f64 + Send + Sync>)
                .collect()
        }
    }
}

/// Per-sample tensor-product features `φ_J(x) = ⊗_{j∈J} φ(x_j)` for every
/// node, concatenated in node order.
pub fn build_features(data: ArrayView2<f64>, dag: &SubsetDag, spec: &KernelSpec) -> Result<Features> {
    spec.validate()?;
    let (n, p) = data.dim();
    if p != dag.dag.p {
        return Err(Error::DimensionMismatch { expected: dag.dag.p, got: p });
    }
    if spec.b != dag.b {
        return Err(Error::Config(format!("basis size {} but DAG built for {}", spec.b, dag.b)));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("data has non-finite entries".into()));
    }
    let bases: Vec<_> = (0..p).map(|j| basis_values(spec, data.column(j))).collect();
    let total = dag.total_dim();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let per_var: Vec<Vec<f64>> = (0..p).map(|j| bases[j].iter().map(|f| f(data[[i, j]])).collect()).collect();
            let mut row = Vec::with_capacity(total);
            for node in &dag.dag.nodes {
                let mut block = vec![1.0];
                for &j in node {
                    block = block.iter().flat_map(|a| per_var[j].iter().map(move |b| a * b)).collect();
                }
                row.extend(block);
            }
            row
        })
        .collect();
    let mut raw = Array2::zeros((n, total));
    for (i, r) in rows.into_iter().enumerate() {
        raw.row_mut(i).assign(&Array1::from(r));
    }
    let mut standardized = raw.clone();
    for c in dag.offsets[1]..total {
        let mut col = standardized.column_mut(c);
        let mean = col.mean().unwrap_or(0.0);
        col -= mean;
        let sd = (col.dot(&col) / n.max(1) as f64).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
    Ok(Features { raw, standardized })
}

/// `Σ_J (Σ_{H⊇J} ‖f_H‖²)^{1/2}` over all nodes, the empty set included.
pub fn hkl_norm(blocks: &[Vec<f64>], dag: &SubsetDag) -> Result<f64> {
    if blocks.len() != dag.len() {
        return Err(Error::DimensionMismatch { expected: dag.len(), got: blocks.len() });
    }
    for (k, b) in blocks.iter().enumerate() {
        if b.len() != dag.block_dim(k) {
            return Err(Error::Data(format!("block {k} has {} entries, expected {}", b.len(), dag.block_dim(k))));
        }
    }
    let sq: Vec<f64> = blocks.iter().map(|b| b.iter().map(|v| v * v).sum()).collect();
    Ok((0..dag.len())
        .map(|j| dag.dag.structure.group(j).iter().map(|&h| sq[h]).sum::<f64>().sqrt())
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HklOptions {
    /// Per-node weights `d_J`; all 1 when absent.
    pub weights: Option<Vec<f64>>,
    /// Penalize the empty-set node. Off by default: the constant is then an
    /// unpenalized intercept and the first-order linear case is the Lasso.
    pub penalize_root: bool,
    pub loss: LossKind,
}

impl Default for HklOptions {
    fn default() -> Self {
        Self { weights: None, penalize_root: false, loss: LossKind::Square }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub subset: Vec<usize>,
    pub block_norm: f64,
    pub selected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HklReport {
    pub lambda: f64,
    pub objective: f64,
    pub nodes: Vec<NodeReport>,
    pub hull_closed: bool,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct HklFit {
    /// Coefficients over the expanded design, empty-set block first.
    pub fit: FitResult,
    pub selected: Vec<bool>,
    pub report: HklReport,
}

impl HklFit {
    pub fn selected_subsets(&self) -> Vec<Vec<usize>> {
        self.report.nodes.iter().filter(|n| n.selected).map(|n| n.subset.clone()).collect()
    }
}

/// The fitting problem on the standardized design, as used by [`fit_hkl`].
pub fn hkl_problem(
    features: &Features,
    targets: ArrayView1<f64>,
    dag: &SubsetDag,
    lambda: f64,
    options: &HklOptions,
) -> Result<Problem> {
    let weights = match &options.weights {
        Some(w) if w.len() != dag.len() => {
            return Err(Error::DimensionMismatch { expected: dag.len(), got: w.len() });
        }
        Some(w) => w.clone(),
        None => vec![1.0; dag.len()],
    };
    let (x, groups) = if options.penalize_root {
        (features.standardized.clone(), dag.coefficient_groups(&weights, false)?)
    } else {
        // centering handles the constant; groups shift by the dropped column
        let x = features.standardized.slice(s![.., 1..]).to_owned();
        let full = dag.coefficient_groups(&weights, true)?;
        let shifted: Vec<Vec<usize>> = full.groups().iter().map(|g| g.iter().map(|j| j - 1).collect()).collect();
        let gs = GroupStructure::new(x.ncols(), shifted, Some(full.weights().to_vec()), InnerNorm::L2, StructureKind::Dag)?;
        (x, gs)
    };
    Ok(Problem::new(x, targets.to_owned(), options.loss, NormSpec::Group { structure: groups }, lambda)?
        .with_intercept(!options.penalize_root))
}

/// Fits `min f + λ Ω_DAG` on the standardized features and reports the
/// selected nodes (own block norm above the support threshold).
pub fn fit_hkl(
    data: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    dag: &SubsetDag,
    spec: &KernelSpec,
    lambda: f64,
    options: &HklOptions,
    config: &SolverConfig,
) -> Result<HklFit> {
    let features = build_features(data, dag, spec)?;
    let problem = hkl_problem(&features, targets, dag, lambda, options)?;
    let fit = models::fit(&problem, config)?;
    Ok(hkl_result(fit, dag, options))
}

/// Selection report for a fit on [`hkl_problem`].
pub fn hkl_result(mut fit: FitResult, dag: &SubsetDag, options: &HklOptions) -> HklFit {
    if !options.penalize_root {
        fit.w.insert(0, fit.intercept);
        fit.intercept = 0.0;
        fit.support = models::support_of(&fit.w);
    }
    let nodes: Vec<NodeReport> = (0..dag.len())
        .map(|k| {
            let b = dag.block(&fit.w, k);
            let block_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let selected = if k == 0 && !options.penalize_root {
                true
            } else {
                b.iter().any(|v| v.abs() > SUPPORT_THRESHOLD)
            };
            NodeReport { subset: dag.dag.nodes[k].clone(), block_norm, selected }
        })
        .collect();
    let selected: Vec<bool> = nodes.iter().map(|n| n.selected).collect();
    let report = HklReport {
        lambda: fit.lambda,
        objective: fit.diagnostics.objective,
        hull_closed: dag.dag.is_subset_closed(&selected),
        converged: fit.diagnostics.converged,
        nodes,
    };
    HklFit { fit, selected, report }
}

/// Multiple kernel learning with explicit features: a group Lasso (unit
/// weights, unpenalized intercept) over the concatenated source blocks.
#[derive(Clone, Debug)]
pub struct MklFit {
    pub fit: FitResult,
    pub source_norms: Vec<f64>,
    pub selected: Vec<usize>,
}

pub fn mkl_problem(blocks: &[Array2<f64>], targets: ArrayView1<f64>, lambda: f64) -> Result<Problem> {
    if blocks.is_empty() {
        return Err(Error::Config("need at least one source".into()));
    }
    let n = targets.len();
    if let Some(b) = blocks.iter().find(|b| b.nrows() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: b.nrows() });
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let x = ndarray::concatenate(Axis(1), &views).map_err(|e| Error::Data(e.to_string()))?;
    let mut parts = Vec::new();
    let mut off = 0;
    for b in blocks {
        parts.push((off..off + b.ncols()).collect());
        off += b.ncols();
    }
    let structure = make_partition(off, parts)?.with_weights(vec![1.0; blocks.len()])?;
    Ok(Problem::new(x, targets.to_owned(), LossKind::Square, NormSpec::Group { structure }, lambda)?.with_intercept(true))
}

pub fn mkl_fit(blocks: &[Array2<f64>], targets: ArrayView1<f64>, lambda: f64, config: &SolverConfig) -> Result<MklFit> {
    let problem = mkl_problem(blocks, targets, lambda)?;
    let fit = models::fit(&problem, config)?;
    let mut source_norms = Vec::with_capacity(blocks.len());
    let mut off = 0;
    for b in blocks {
        let seg = &fit.w[off..off + b.ncols()];
        source_norms.push(seg.iter().map(|v| v * v).sum::<f64>().sqrt());
        off += b.ncols();
    }
    let selected = (0..blocks.len())
        .filter(|&k| {
            let start: usize = blocks[..k].iter().map(|b| b.ncols()).sum();
            fit.w[start..start + blocks[k].ncols()].iter().any(|v| v.abs() > SUPPORT_THRESHOLD)
        })
        .collect();
    Ok(MklFit { fit, source_norms, selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn block_dims() {
        let d = SubsetDag::new(2, 2, 2).unwrap();
        let dims: Vec<usize> = (0..d.len()).map(|k| d.block_dim(k)).collect();
        assert_eq!(dims, vec![1, 2, 2, 4]);
        assert!(matches!(SubsetDag::new(11, 1, 1), Err(Error::Capacity(_))));
        assert!(matches!(SubsetDag::new(4, 4, 1), Err(Error::Capacity(_))));
    }

    #[test]
    fn linear_first_order_is_standardized_design() {
        let x = array![[1.0, 2.0], [2.0, 0.0], [3.0, 1.0], [6.0, 5.0]];
        let d = SubsetDag::new(2, 1, 1).unwrap();
        let f = build_features(x.view(), &d, &KernelSpec::polynomials(1)).unwrap();
        assert!(f.standardized.column(0).iter().all(|v| *v == 1.0));
        for j in 0..2 {
            let c = x.column(j);
            let m = c.mean().unwrap();
            let sd = (c.mapv(|v| (v - m) * (v - m)).sum() / 4.0).sqrt();
            for i in 0..4 {
                assert!((f.standardized[[i, j + 1]] - (x[[i, j]] - m) / sd).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_entries_in_unit_interval() {
        let x = array![[0.0, 1.0], [0.5, -1.0], [1.0, 0.3]];
        let d = SubsetDag::new(2, 2, 3).unwrap();
        let f = build_features(x.view(), &d, &KernelSpec::gaussian(3, None)).unwrap();
        assert!(f.raw.iter().all(|v| *v > 0.0 && *v <= 1.0));
    }

    #[test]
    fn norm_of_one_variable() {
        let d = SubsetDag::new(1, 1, 2).unwrap();
        let v = hkl_norm(&[vec![3.0], vec![0.0, 4.0]], &d).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        assert!(hkl_norm(&[vec![3.0]], &d).is_err());
    }
}
