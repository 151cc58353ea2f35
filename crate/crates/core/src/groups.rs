//! Group structures over a coefficient vector of dimension `p`.
//!
//! A [`GroupStructure`] is the family of index sets a structured norm sums
//! over, the positive weight attached to each set and the exponent of the
//! inner norm. Generators are provided for the usual templates: partitions,
//! contiguous intervals on a sequence, half-planes on a 2-D grid, subtrees of
//! a tree and descendant sets of the power-set DAG.
//!
//! Indices are 0-based everywhere.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent of the norm applied inside each group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerNorm {
    L2,
    Linf,
}

impl InnerNorm {
    /// Exponent of the dual inner norm, as an `InnerNorm` pairing:
    /// ℓ2 is self-dual, ℓ∞ pairs with ℓ1.
    pub fn dual_value(self, z: &[f64]) -> f64 {
        match self {
            InnerNorm::L2 => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
            InnerNorm::Linf => z.iter().map(|v| v.abs()).sum(),
        }
    }

    pub fn value(self, z: &[f64]) -> f64 {
        match self {
            InnerNorm::L2 => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
            InnerNorm::Linf => z.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Partition,
    Overlap,
    Tree,
    Dag,
}

/// How default group weights are derived from group sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightScheme {
    /// `d_g = |g|^s`.
    SizePower(f64),
    Unit,
}

impl WeightScheme {
    /// `|g|^{1/2}` for ℓ2 groups and `|g|` for ℓ∞ groups.
    pub fn default_for(q: InnerNorm) -> Self {
        match q {
            InnerNorm::L2 => WeightScheme::SizePower(0.5),
            InnerNorm::Linf => WeightScheme::SizePower(1.0),
        }
    }

    pub fn weight(&self, size: usize) -> f64 {
        match *self {
            WeightScheme::SizePower(s) => (size as f64).powf(s),
            WeightScheme::Unit => 1.0,
        }
    }
}

/// A rooted forest given by parent links.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStructure {
    parent: Vec<Option<usize>>,
}

impl TreeStructure {
    /// Validates that every parent index is in range and that following
    /// parent links from any node terminates at a root.
    pub fn new(parent: Vec<Option<usize>>) -> Result<Self> {
        let p = parent.len();
        if p == 0 {
            return Err(Error::EmptyDimension);
        }
        for (i, par) in parent.iter().enumerate() {
            if let Some(j) = *par {
                if j >= p {
                    return Err(Error::InvalidStructure(format!(
                        "node {i} has parent {j} outside [0, {p})"
                    )));
                }
            }
        }
        for start in 0..p {
            let mut node = start;
            let mut steps = 0;
            while let Some(up) = parent[node] {
                node = up;
                steps += 1;
                if steps > p {
                    return Err(Error::InvalidStructure(format!(
                        "cycle detected through node {start}"
                    )));
                }
            }
        }
        Ok(Self { parent })
    }

    /// The chain `0 → 1 → … → p−1` rooted at 0.
    pub fn chain(p: usize) -> Result<Self> {
        Self::new((0..p).map(|i| i.checked_sub(1)).collect())
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parent[i].is_none()).collect()
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.parent[i] == Some(node))
            .collect()
    }

    /// `node` together with all its descendants, sorted.
    pub fn subtree(&self, node: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.is_ancestor_or_self(node, i))
            .collect()
    }

    fn is_ancestor_or_self(&self, ancestor: usize, mut node: usize) -> bool {
        loop {
            if node == ancestor {
                return true;
            }
            match self.parent[node] {
                Some(up) => node = up,
                None => return false,
            }
        }
    }

    /// True when every selected node has its parent selected, i.e. the
    /// selection is a union of rooted connected subtrees.
    pub fn is_rooted_subtree(&self, selected: &[bool]) -> bool {
        (0..self.len()).all(|i| !selected[i] || self.parent[i].is_none_or(|j| selected[j]))
    }
}

/// Shape of a 2-D grid of variables indexed row-major: `r * cols + c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyDimension);
        }
        Ok(Self { rows, cols })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }
}

/// Per-coefficient multipliers inside each group: the group term becomes
/// `d_g ‖c_g ∘ w_g‖_q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientWeights(pub Vec<Vec<f64>>);

/// A validated family of groups with weights and inner norm.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupStructure {
    p: usize,
    groups: Vec<Vec<usize>>,
    weights: Vec<f64>,
    q: InnerNorm,
    kind: StructureKind,
    tree: Option<TreeStructure>,
    coefficient_weights: Option<CoefficientWeights>,
}

impl GroupStructure {
    /// Builds and validates a structure. Groups are sorted; `weights = None`
    /// applies the default scheme for `q`. A `Tree` kind has its tree
    /// recovered from the (laminar) family.
    pub fn new(
        p: usize,
        groups: Vec<Vec<usize>>,
        weights: Option<Vec<f64>>,
        q: InnerNorm,
        kind: StructureKind,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::EmptyDimension);
        }
        let mut sorted = Vec::with_capacity(groups.len());
        for (gi, mut g) in groups.into_iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidStructure(format!("group {gi} is empty")));
            }
            g.sort_unstable();
            for w in g.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::InvalidStructure(format!(
                        "group {gi} repeats index {}",
                        w[0]
                    )));
                }
            }
            if let Some(&j) = g.last() {
                if j >= p {
                    return Err(Error::InvalidStructure(format!(
                        "group {gi} holds index {j} outside [0, {p})"
                    )));
                }
            }
            sorted.push(g);
        }
        let scheme = WeightScheme::default_for(q);
        let weights = match weights {
            Some(w) => {
                if w.len() != sorted.len() {
                    return Err(Error::DimensionMismatch {
                        expected: sorted.len(),
                        got: w.len(),
                    });
                }
                w
            }
            None => sorted.iter().map(|g| scheme.weight(g.len())).collect(),
        };
        if let Some((gi, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidStructure(format!(
                "group {gi} has non-positive weight {w}"
            )));
        }
        let mut s = Self {
            p,
            groups: sorted,
            weights,
            q,
            kind,
            tree: None,
            coefficient_weights: None,
        };
        match kind {
            StructureKind::Partition => check_partition(p, &s.groups)?,
            StructureKind::Tree => s.tree = Some(infer_tree(p, &s.groups)?),
            StructureKind::Overlap | StructureKind::Dag => {}
        }
        Ok(s)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn q(&self) -> InnerNorm {
        self.q
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub fn tree(&self) -> Option<&TreeStructure> {
        self.tree.as_ref()
    }

    pub fn coefficient_weights(&self) -> Option<&CoefficientWeights> {
        self.coefficient_weights.as_ref()
    }

    /// Multiplier of the `k`-th member of group `g` (1 when unweighted).
    pub fn coefficient_weight(&self, g: usize, k: usize) -> f64 {
        self.coefficient_weights.as_ref().map_or(1.0, |c| c.0[g][k])
    }

    /// Replaces all group weights.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.groups.len() {
            return Err(Error::DimensionMismatch {
                expected: self.groups.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidStructure("weights must be positive".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn with_scheme(mut self, scheme: WeightScheme) -> Self {
        self.weights = self.groups.iter().map(|g| scheme.weight(g.len())).collect();
        self
    }

    /// Switches the inner norm, re-deriving default weights for the new `q`.
    pub fn with_q(self, q: InnerNorm) -> Self {
        let mut s = self;
        s.q = q;
        s.with_scheme(WeightScheme::default_for(q))
    }

    pub fn with_coefficient_weights(mut self, cw: CoefficientWeights) -> Result<Self> {
        if cw.0.len() != self.groups.len() {
            return Err(Error::DimensionMismatch {
                expected: self.groups.len(),
                got: cw.0.len(),
            });
        }
        for (gi, (g, c)) in self.groups.iter().zip(&cw.0).enumerate() {
            if g.len() != c.len() {
                return Err(Error::InvalidStructure(format!(
                    "group {gi} has {} members but {} coefficient weights",
                    g.len(),
                    c.len()
                )));
            }
            if c.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidStructure(format!(
                    "group {gi} has a non-positive coefficient weight"
                )));
            }
        }
        self.coefficient_weights = Some(cw);
        Ok(self)
    }

    /// Groups are pairwise disjoint (not necessarily covering).
    pub fn is_disjoint(&self) -> bool {
        let mut seen = vec![false; self.p];
        for g in &self.groups {
            for &j in g {
                if seen[j] {
                    return false;
                }
                seen[j] = true;
            }
        }
        true
    }

    /// Any two groups are either disjoint or nested.
    pub fn is_laminar(&self) -> bool {
        let sets: Vec<HashSet<usize>> = self
            .groups
            .iter()
            .map(|g| g.iter().copied().collect())
            .collect();
        for a in 0..sets.len() {
            for b in a + 1..sets.len() {
                let inter = sets[a].intersection(&sets[b]).count();
                if inter > 0 && inter != sets[a].len() && inter != sets[b].len() {
                    return false;
                }
            }
        }
        true
    }

    /// Per coordinate, the number of groups that contain it.
    pub fn multiplicity(&self) -> Vec<usize> {
        let mut m = vec![0; self.p];
        for g in &self.groups {
            for &j in g {
                m[j] += 1;
            }
        }
        m
    }

    /// Group indices sorted so that every group comes after all groups it
    /// strictly contains: ascending size, ties by index.
    pub fn inclusion_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.groups.len()).collect();
        order.sort_by_key(|&g| (self.groups[g].len(), g));
        order
    }

    /// Membership mask of the union of the chosen groups.
    pub fn union_mask(&self, chosen: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut mask = vec![false; self.p];
        for g in chosen {
            for &j in &self.groups[g] {
                mask[j] = true;
            }
        }
        mask
    }

    /// True when the set of indices flagged `false` in `support` is a union of
    /// groups: every zero coordinate lies in some group entirely made of zeros.
    pub fn zeros_are_union_of_groups(&self, support: &[bool]) -> bool {
        let zero_groups = (0..self.groups.len())
            .filter(|&g| self.groups[g].iter().all(|&j| !support[j]));
        let covered = self.union_mask(zero_groups);
        (0..self.p).all(|j| support[j] || covered[j])
    }
}

fn check_partition(p: usize, groups: &[Vec<usize>]) -> Result<()> {
    let mut owner: Vec<Option<usize>> = vec![None; p];
    for (gi, g) in groups.iter().enumerate() {
        for &j in g {
            if let Some(prev) = owner[j] {
                return Err(Error::InvalidStructure(format!(
                    "index {j} duplicated in groups {prev} and {gi}"
                )));
            }
            owner[j] = Some(gi);
        }
    }
    if let Some(j) = owner.iter().position(Option::is_none) {
        return Err(Error::InvalidStructure(format!("index {j} missing from partition")));
    }
    Ok(())
}

/// Recovers the tree whose node-plus-descendants sets are exactly `groups`.
fn infer_tree(p: usize, groups: &[Vec<usize>]) -> Result<TreeStructure> {
    if groups.len() != p {
        return Err(Error::InvalidStructure(format!(
            "tree structure over {p} nodes needs {p} groups, got {}",
            groups.len()
        )));
    }
    let sets: Vec<BTreeSet<usize>> = groups.iter().map(|g| g.iter().copied().collect()).collect();
    // parent group = smallest strict superset
    let mut parent_group = vec![None; sets.len()];
    for a in 0..sets.len() {
        let mut best: Option<usize> = None;
        for b in 0..sets.len() {
            if a == b {
                continue;
            }
            let inter = sets[a].intersection(&sets[b]).count();
            if inter > 0 && inter != sets[a].len() && inter != sets[b].len() {
                return Err(Error::InvalidStructure(format!(
                    "groups {a} and {b} overlap without nesting"
                )));
            }
            if sets[b].len() > sets[a].len() && inter == sets[a].len() {
                if best.is_none_or(|c| sets[b].len() < sets[c].len()) {
                    best = Some(b);
                }
            } else if sets[b] == sets[a] {
                return Err(Error::InvalidStructure(format!("groups {a} and {b} are equal")));
            }
        }
        parent_group[a] = best;
    }
    let mut node_of = vec![0; sets.len()];
    let mut owner = vec![None; p];
    for a in 0..sets.len() {
        let mut own: BTreeSet<usize> = sets[a].clone();
        for b in 0..sets.len() {
            if parent_group[b] == Some(a) {
                for j in &sets[b] {
                    own.remove(j);
                }
            }
        }
        if own.len() != 1 {
            return Err(Error::InvalidStructure(format!(
                "group {a} owns {} indices; a tree group owns exactly one",
                own.len()
            )));
        }
        let node = *own.iter().next().unwrap();
        if owner[node].is_some() {
            return Err(Error::InvalidStructure(format!("index {node} owned twice")));
        }
        owner[node] = Some(a);
        node_of[a] = node;
    }
    let parent = (0..p)
        .map(|node| {
            let g = owner[node].expect("every node owned");
            parent_group[g].map(|pg| node_of[pg])
        })
        .collect();
    TreeStructure::new(parent)
}

/// A partition of `{0..p−1}` into the given blocks.
pub fn make_partition(p: usize, blocks: Vec<Vec<usize>>) -> Result<GroupStructure> {
    GroupStructure::new(p, blocks, None, InnerNorm::L2, StructureKind::Partition)
}

/// All prefixes `{0..k}` and suffixes `{k..p−1}` short of the full set.
/// Zero patterns (unions of groups) are then exactly the complements of
/// contiguous intervals. `p = 1` yields no groups.
pub fn make_intervals(p: usize) -> Result<GroupStructure> {
    if p == 0 {
        return Err(Error::EmptyDimension);
    }
    let mut groups = Vec::with_capacity(2 * p);
    for k in 0..p - 1 {
        groups.push((0..=k).collect());
    }
    for k in (1..p).rev() {
        groups.push((k..p).collect());
    }
    GroupStructure::new(p, groups, None, InnerNorm::L2, StructureKind::Overlap)
}

/// Half-plane groups on a grid: all row prefixes/suffixes and column
/// prefixes/suffixes short of the full grid, so that zero patterns are
/// complements of axis-aligned rectangles. `with_diagonals` adds the
/// half-planes cut along `r + c` and `r − c`.
pub fn make_rectangles(shape: GridShape, with_diagonals: bool) -> Result<GroupStructure> {
    let shape = GridShape::new(shape.rows, shape.cols)?;
    let cells: Vec<(usize, usize)> = (0..shape.rows)
        .flat_map(|r| (0..shape.cols).map(move |c| (r, c)))
        .collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut half_planes = |key: &dyn Fn(usize, usize) -> i64, lo: i64, hi: i64| {
        // key ≤ k for k in [lo, hi), then key ≥ k for k in (lo, hi], each
        // ordered by increasing size
        let mut push = |g: Vec<usize>| {
            if !g.is_empty() && g.len() < shape.len() && seen.insert(g.clone()) {
                groups.push(g);
            }
        };
        for k in lo..hi {
            push(cells
                .iter()
                .filter(|&&(r, c)| key(r, c) <= k)
                .map(|&(r, c)| shape.index(r, c))
                .collect());
        }
        for k in (lo + 1..=hi).rev() {
            push(cells
                .iter()
                .filter(|&&(r, c)| key(r, c) >= k)
                .map(|&(r, c)| shape.index(r, c))
                .collect());
        }
    };
    let rows = shape.rows as i64;
    let cols = shape.cols as i64;
    half_planes(&|r, _| r as i64, 0, rows - 1);
    half_planes(&|_, c| c as i64, 0, cols - 1);
    if with_diagonals {
        half_planes(&|r, c| (r + c) as i64, 0, rows + cols - 2);
        half_planes(&|r, c| r as i64 - c as i64, -(cols - 1), rows - 1);
    }
    GroupStructure::new(shape.len(), groups, None, InnerNorm::L2, StructureKind::Overlap)
}

/// One group per node: the node together with all its descendants.
pub fn make_tree_groups(tree: &TreeStructure) -> Result<GroupStructure> {
    let groups = (0..tree.len()).map(|i| tree.subtree(i)).collect();
    let mut s = GroupStructure::new(tree.len(), groups, None, InnerNorm::L2, StructureKind::Overlap)?;
    s.kind = StructureKind::Tree;
    s.tree = Some(tree.clone());
    Ok(s)
}

/// Largest variable count accepted by [`make_powerset_dag`].
pub const MAX_DAG_VARIABLES: usize = 16;

/// The DAG of variable subsets ordered by inclusion, truncated at a maximal
/// subset size. Node `i` is the subset `nodes[i]`; nodes are listed by size
/// then lexicographically, so node 0 is the empty set.
#[derive(Clone, Debug, PartialEq)]
pub struct PowersetDag {
    pub p: usize,
    pub max_order: usize,
    pub nodes: Vec<Vec<usize>>,
    /// One coordinate per node; group `i` holds every node `H ⊇ nodes[i]`.
    pub structure: GroupStructure,
}

impl PowersetDag {
    pub fn node_index(&self, subset: &[usize]) -> Option<usize> {
        self.nodes.iter().position(|n| n == subset)
    }

    /// True when every subset of a selected node is selected.
    pub fn is_subset_closed(&self, selected: &[bool]) -> bool {
        (0..self.nodes.len()).all(|a| {
            !selected[a]
                || (0..self.nodes.len())
                    .all(|b| selected[b] || !is_subset(&self.nodes[b], &self.nodes[a]))
        })
    }
}

pub(crate) fn is_subset(small: &[usize], big: &[usize]) -> bool {
    small.iter().all(|j| big.binary_search(j).is_ok())
}

/// Subsets of `{0..p−1}` up to size `max_order` with descendant groups.
/// Weights are all 1.
pub fn make_powerset_dag(p: usize, max_order: usize) -> Result<PowersetDag> {
    if p > MAX_DAG_VARIABLES {
        return Err(Error::Capacity(format!(
            "power-set DAG limited to {MAX_DAG_VARIABLES} variables, got {p}"
        )));
    }
    if max_order > p {
        return Err(Error::Capacity(format!(
            "max_order {max_order} exceeds the number of variables {p}"
        )));
    }
    let mut nodes: Vec<Vec<usize>> = (0u32..(1u32 << p))
        .filter(|m| m.count_ones() as usize <= max_order)
        .map(|m| (0..p).filter(|&j| m & (1 << j) != 0).collect())
        .collect();
    nodes.sort_by(|a: &Vec<usize>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let groups: Vec<Vec<usize>> = nodes
        .iter()
        .map(|j| {
            (0..nodes.len())
                .filter(|&h| is_subset(j, &nodes[h]))
                .collect()
        })
        .collect();
    let weights = vec![1.0; groups.len()];
    let structure = GroupStructure::new(
        nodes.len(),
        groups,
        Some(weights),
        InnerNorm::L2,
        StructureKind::Dag,
    )?;
    Ok(PowersetDag {
        p,
        max_order,
        nodes,
        structure,
    })
}

/// On-disk JSON form of a group structure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupStructureFile {
    pub p: usize,
    pub q: InnerNorm,
    pub groups: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub kind: StructureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_weights: Option<CoefficientWeights>,
}

impl TryFrom<GroupStructureFile> for GroupStructure {
    type Error = Error;

    fn try_from(f: GroupStructureFile) -> Result<Self> {
        let s = GroupStructure::new(f.p, f.groups, f.weights, f.q, f.kind)?;
        match f.coefficient_weights {
            Some(cw) => s.with_coefficient_weights(cw),
            None => Ok(s),
        }
    }
}

impl From<&GroupStructure> for GroupStructureFile {
    fn from(s: &GroupStructure) -> Self {
        Self {
            p: s.p,
            q: s.q,
            groups: s.groups.clone(),
            weights: Some(s.weights.clone()),
            kind: s.kind,
            coefficient_weights: s.coefficient_weights.clone(),
        }
    }
}

impl Serialize for GroupStructure {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        GroupStructureFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GroupStructure {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let f = GroupStructureFile::deserialize(deserializer)?;
        GroupStructure::try_from(f).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Complements of all unions of groups, as sorted index sets.
    fn zero_pattern_complements(s: &GroupStructure) -> BTreeSet<Vec<usize>> {
        let mut out = BTreeSet::new();
        for mask in 0u64..(1 << s.len()) {
            let u = s.union_mask((0..s.len()).filter(|g| mask & (1 << g) != 0));
            out.insert((0..s.p()).filter(|&j| !u[j]).collect());
        }
        out
    }

    fn intervals(p: usize) -> BTreeSet<Vec<usize>> {
        let mut out: BTreeSet<Vec<usize>> = BTreeSet::new();
        out.insert(vec![]);
        for a in 0..p {
            for b in a..p {
                out.insert((a..=b).collect());
            }
        }
        out
    }

    #[test]
    fn partition_default_weights() {
        let s = make_partition(3, vec![vec![0, 1], vec![2]]).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.weights()[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.weights()[1], 1.0);
        let s = make_partition(1, vec![vec![0]]).unwrap();
        assert_eq!(s.weights(), &[1.0]);
    }

    #[test]
    fn partition_errors_name_index() {
        let err = make_partition(4, vec![vec![0, 1], vec![1, 2, 3]]).unwrap_err();
        assert!(err.to_string().contains("index 1"), "{err}");
        let err = make_partition(3, vec![vec![0, 1]]).unwrap_err();
        assert!(err.to_string().contains("index 2"), "{err}");
    }

    #[test]
    fn interval_groups_small() {
        let s = make_intervals(3).unwrap();
        assert_eq!(s.groups(), &[vec![0], vec![0, 1], vec![2], vec![1, 2]]);
        assert!(make_intervals(1).unwrap().is_empty());
        assert_eq!(make_intervals(2).unwrap().groups(), &[vec![0], vec![1]]);
        assert!(matches!(make_intervals(0), Err(Error::EmptyDimension)));
    }

    #[test]
    fn interval_zero_patterns_are_intervals() {
        for p in 2..=8 {
            let s = make_intervals(p).unwrap();
            assert_eq!(s.len(), 2 * p - 2);
            assert_eq!(zero_pattern_complements(&s), intervals(p), "p={p}");
        }
    }

    #[test]
    fn rectangles_2x2_give_subrectangles() {
        let shape = GridShape::new(2, 2).unwrap();
        let s = make_rectangles(shape, false).unwrap();
        assert_eq!(s.len(), 4);
        let mut rects = BTreeSet::new();
        rects.insert(vec![]);
        for r0 in 0..2 {
            for r1 in r0..2 {
                for c0 in 0..2 {
                    for c1 in c0..2 {
                        let mut v: Vec<usize> = (r0..=r1)
                            .flat_map(|r| (c0..=c1).map(move |c| shape.index(r, c)))
                            .collect();
                        v.sort();
                        rects.insert(v);
                    }
                }
            }
        }
        assert_eq!(zero_pattern_complements(&s), rects);
    }

    #[test]
    fn degenerate_grid_equals_intervals() {
        for n in 1..6 {
            let r = make_rectangles(GridShape::new(1, n).unwrap(), false).unwrap();
            let i = make_intervals(n).unwrap();
            let a: BTreeSet<_> = r.groups().iter().cloned().collect();
            let b: BTreeSet<_> = i.groups().iter().cloned().collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn diagonals_reach_diamonds() {
        let shape = GridShape::new(3, 3).unwrap();
        let plain = make_rectangles(shape, false).unwrap();
        let diag = make_rectangles(shape, true).unwrap();
        assert_eq!(plain.len(), 8);
        assert_eq!(diag.len(), 8 + 16);
        let diamond: Vec<usize> = vec![1, 3, 4, 5, 7];
        assert!(!zero_pattern_complements(&plain).contains(&diamond));
        assert!(zero_pattern_complements(&diag).contains(&diamond));
    }

    #[test]
    fn tree_groups_definitions() {
        let chain = TreeStructure::chain(3).unwrap();
        let s = make_tree_groups(&chain).unwrap();
        assert_eq!(s.groups(), &[vec![0, 1, 2], vec![1, 2], vec![2]]);
        let star = TreeStructure::new(vec![None, Some(0), Some(0)]).unwrap();
        let s = make_tree_groups(&star).unwrap();
        assert_eq!(s.groups(), &[vec![0, 1, 2], vec![1], vec![2]]);
    }

    #[test]
    fn six_node_tree_pattern() {
        // 1-based figure: 1 is the root with children 2 and 3, 4 under 2,
        // 5 and 6 under 3.
        let tree = TreeStructure::new(vec![None, Some(0), Some(0), Some(1), Some(2), Some(2)]).unwrap();
        let s = make_tree_groups(&tree).unwrap();
        assert_eq!(s.group(1), &[1, 3]);
        assert_eq!(s.group(3), &[3]);
        assert_eq!(s.group(5), &[5]);
        let zero = s.union_mask([1, 3, 5]);
        let support: Vec<usize> = (0..6).filter(|&j| !zero[j]).collect();
        assert_eq!(support, vec![0, 2, 4]);
        let sel: Vec<bool> = zero.iter().map(|z| !z).collect();
        assert!(tree.is_rooted_subtree(&sel));
    }

    #[test]
    fn cycle_rejected() {
        let err = TreeStructure::new(vec![Some(1), Some(0)]).unwrap_err();
        assert!(err.to_string().contains("cycle"));
    }

    #[test]
    fn tree_kind_round_trips_through_file() {
        let tree = TreeStructure::new(vec![None, Some(0), Some(0), Some(1)]).unwrap();
        let s = make_tree_groups(&tree).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: GroupStructure = serde_json::from_str(&json).unwrap();
        assert_eq!(back.tree(), Some(&tree));
        assert_eq!(back, s);
    }

    #[test]
    fn non_tree_file_rejected() {
        let f = GroupStructureFile {
            p: 3,
            q: InnerNorm::L2,
            groups: vec![vec![0, 1], vec![1, 2], vec![2]],
            weights: None,
            kind: StructureKind::Tree,
            coefficient_weights: None,
        };
        assert!(GroupStructure::try_from(f).is_err());
    }

    #[test]
    fn powerset_dag_shapes() {
        let d = make_powerset_dag(2, 2).unwrap();
        assert_eq!(d.nodes, vec![vec![], vec![0], vec![1], vec![0, 1]]);
        let n0 = d.node_index(&[0]).unwrap();
        assert_eq!(d.structure.group(n0), &[1, 3]);
        assert_eq!(make_powerset_dag(4, 4).unwrap().nodes.len(), 16);
        let d = make_powerset_dag(3, 1).unwrap();
        assert_eq!(d.nodes.len(), 4);
        assert_eq!(d.structure.group(1), &[1]);
        assert!(matches!(make_powerset_dag(17, 1), Err(Error::Capacity(_))));
        assert!(matches!(make_powerset_dag(3, 4), Err(Error::Capacity(_))));
    }

    #[test]
    fn powerset_groups_reverse_inclusion() {
        let d = make_powerset_dag(4, 3).unwrap();
        for a in 0..d.nodes.len() {
            for b in 0..d.nodes.len() {
                let ga: BTreeSet<_> = d.structure.group(a).iter().collect();
                let gb: BTreeSet<_> = d.structure.group(b).iter().collect();
                assert_eq!(ga.is_superset(&gb), is_subset(&d.nodes[a], &d.nodes[b]));
            }
        }
    }

    #[test]
    fn coefficient_weights_validated() {
        let s = make_intervals(3).unwrap();
        let bad = CoefficientWeights(vec![vec![1.0]; 4]);
        assert!(s.clone().with_coefficient_weights(bad).is_err());
        let ok = CoefficientWeights(s.groups().iter().map(|g| vec![0.5; g.len()]).collect());
        let s = s.with_coefficient_weights(ok).unwrap();
        assert_eq!(s.coefficient_weight(1, 1), 0.5);
    }
}
