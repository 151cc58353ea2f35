//! Seeded synthetic datasets with known ground truth.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::Corpus;
use crate::groups::{make_intervals, make_partition, make_rectangles, make_tree_groups, GridShape, GroupStructure, TreeStructure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Lasso,
    Group,
    Interval,
    Rectangle,
    Tree,
    Latent,
    Dict,
    Topics,
    Hkl,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// Planted rectangle `rows r0..=r1 × cols c0..=c1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub r0: usize,
    pub r1: usize,
    pub c0: usize,
    pub c1: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub scenario: Scenario,
    /// Samples (documents for topics).
    pub n: usize,
    /// Variables (vocabulary size for topics, signal dimension for dict).
    pub p: usize,
    /// Grid shape for the rectangle scenario; `p` is ignored there.
    pub rows: usize,
    pub cols: usize,
    pub sigma: f64,
    /// Active variables (lasso, interval, tree), active groups (group,
    /// latent), atoms (dict).
    pub k: usize,
    /// Group size for the group scenario.
    pub group_size: usize,
    /// Planted rectangle; random when absent.
    pub rect: Option<Rect>,
    /// Words per document for topics.
    pub doc_length: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::Lasso,
            n: 100,
            p: 20,
            rows: 10,
            cols: 10,
            sigma: 0.1,
            k: 3,
            group_size: 4,
            rect: None,
            doc_length: 200,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        let p = self.dim();
        if p == 0 {
            return Err(Error::Config("p must be positive".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        match self.scenario {
            Scenario::Lasso | Scenario::Interval | Scenario::Tree if self.k > p => {
                Err(Error::Config(format!("k = {} exceeds p = {p}", self.k)))
            }
            Scenario::Group if self.group_size == 0 || self.k * self.group_size > p => {
                Err(Error::Config("k groups of group_size do not fit in p".into()))
            }
            Scenario::Latent if p < 2 || self.k > p - 1 => Err(Error::Config("latent needs p ≥ 2 and k ≤ p − 1 edges".into())),
            Scenario::Rectangle => match self.rect {
                Some(r) if r.r0 > r.r1 || r.c0 > r.c1 || r.r1 >= self.rows || r.c1 >= self.cols => {
                    Err(Error::Config("rectangle outside the grid".into()))
                }
                _ => Ok(()),
            },
            Scenario::Dict if self.k == 0 => Err(Error::Config("dict needs k ≥ 1 atoms".into())),
            Scenario::Topics if self.p < 6 || self.doc_length == 0 => {
                Err(Error::Config("topics needs a vocabulary of at least 6 and positive doc_length".into()))
            }
            Scenario::Hkl if !(2..=crate::hkl::MAX_HKL_VARIABLES).contains(&p) => {
                Err(Error::Config("hkl needs 2 ≤ p ≤ 10".into()))
            }
            _ => Ok(()),
        }
    }

    /// Coefficient dimension.
    pub fn dim(&self) -> usize {
        match self.scenario {
            Scenario::Rectangle => self.rows * self.cols,
            _ => self.p,
        }
    }
}

#[derive(Clone, Debug)]
pub enum SynthData {
    Regression {
        x: Array2<f64>,
        y: Array1<f64>,
        w_star: Vec<f64>,
        structure: Option<GroupStructure>,
        /// Latent scenario: indices of the planted groups.
        active_groups: Option<Vec<usize>>,
        /// Latent scenario: the group family that the planted groups index.
        latent: bool,
    },
    Dictionary {
        /// `m × n` data, columns are samples.
        x: Array2<f64>,
        d_star: Array2<f64>,
        a_star: Array2<f64>,
    },
    Topics {
        corpus: Corpus,
        tree: TreeStructure,
        /// Vocabulary ids of the shared (root) lexicon.
        root_tokens: Vec<usize>,
    },
    Hkl {
        x: Array2<f64>,
        y: Array1<f64>,
        /// Planted nodes together with all their subsets.
        true_subsets: Vec<Vec<usize>>,
    },
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || rng.sample::<f64, _>(StandardNormal))
}

fn planted_value(rng: &mut ChaCha8Rng) -> f64 {
    let mag = rng.sample(Uniform::new(1.0, 2.0).expect("valid range"));
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

fn respond(rng: &mut ChaCha8Rng, x: &Array2<f64>, w: &[f64], sigma: f64) -> Array1<f64> {
    let mut y = x.dot(&Array1::from(w.to_vec()));
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).expect("sigma is validated");
        y.iter_mut().for_each(|v| *v += noise.sample(rng));
    }
    y
}

/// Random rooted tree on `p` nodes: node `i > 0` hangs off a uniform earlier node.
pub fn random_tree(rng: &mut impl Rng, p: usize) -> TreeStructure {
    let parent = (0..p).map(|i| if i == 0 { None } else { Some(rng.random_range(0..i)) }).collect();
    TreeStructure::new(parent).expect("parents precede children")
}

/// `k` nodes forming a rooted subtree, grown from the root by random frontier picks.
pub fn random_rooted_subtree(rng: &mut impl Rng, tree: &TreeStructure, k: usize) -> Vec<usize> {
    let mut chosen = Vec::new();
    let mut frontier = tree.roots();
    frontier.truncate(1);
    while chosen.len() < k && !frontier.is_empty() {
        let i = rng.random_range(0..frontier.len());
        let node = frontier.swap_remove(i);
        chosen.push(node);
        frontier.extend(tree.children(node));
    }
    chosen.sort_unstable();
    chosen
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, p, k) = (spec.n, spec.dim(), spec.k);
    let regression = |rng: &mut ChaCha8Rng, w: Vec<f64>, structure: Option<GroupStructure>| {
        let x = gaussian_matrix(rng, n, p);
        let y = respond(rng, &x, &w, spec.sigma);
        SynthData::Regression { x, y, w_star: w, structure, active_groups: None, latent: false }
    };
    Ok(match spec.scenario {
        Scenario::Lasso => {
            let mut idx: Vec<usize> = (0..p).collect();
            idx.shuffle(&mut rng);
            let mut w = vec![0.0; p];
            for &j in &idx[..k] {
                w[j] = planted_value(&mut rng);
            }
            regression(&mut rng, w, None)
        }
        Scenario::Group => {
            let blocks: Vec<Vec<usize>> = (0..p).collect::<Vec<_>>().chunks(spec.group_size).map(|c| c.to_vec()).collect();
            let s = make_partition(p, blocks.clone())?;
            let mut order: Vec<usize> = (0..blocks.len()).collect();
            order.shuffle(&mut rng);
            let mut w = vec![0.0; p];
            for &g in &order[..k.min(blocks.len())] {
                for &j in &blocks[g] {
                    w[j] = planted_value(&mut rng);
                }
            }
            regression(&mut rng, w, Some(s))
        }
        Scenario::Interval => {
            let start = rng.random_range(0..=p - k);
            let mut w = vec![0.0; p];
            for v in &mut w[start..start + k] {
                *v = planted_value(&mut rng);
            }
            regression(&mut rng, w, Some(make_intervals(p)?))
        }
        Scenario::Rectangle => {
            let shape = GridShape::new(spec.rows, spec.cols)?;
            let r = match spec.rect {
                Some(r) => r,
                None => {
                    let (a, b) = (rng.random_range(0..spec.rows), rng.random_range(0..spec.rows));
                    let (c, d) = (rng.random_range(0..spec.cols), rng.random_range(0..spec.cols));
                    Rect { r0: a.min(b), r1: a.max(b), c0: c.min(d), c1: c.max(d) }
                }
            };
            let mut w = vec![0.0; p];
            for row in r.r0..=r.r1 {
                for col in r.c0..=r.c1 {
                    w[shape.index(row, col)] = planted_value(&mut rng);
                }
            }
            regression(&mut rng, w, Some(make_rectangles(shape, false)?))
        }
        Scenario::Tree => {
            let tree = random_tree(&mut rng, p);
            let nodes = random_rooted_subtree(&mut rng, &tree, k);
            let mut w = vec![0.0; p];
            for j in nodes {
                w[j] = planted_value(&mut rng);
            }
            regression(&mut rng, w, Some(make_tree_groups(&tree)?))
        }
        Scenario::Latent => {
            let edges: Vec<Vec<usize>> = (0..p - 1).map(|i| vec![i, i + 1]).collect();
            let s = GroupStructure::new(p, edges.clone(), None, crate::groups::InnerNorm::L2, crate::groups::StructureKind::Overlap)?;
            let mut order: Vec<usize> = (0..edges.len()).collect();
            order.shuffle(&mut rng);
            let mut active: Vec<usize> = order[..k].to_vec();
            active.sort_unstable();
            let mut w = vec![0.0; p];
            for &g in &active {
                for &j in &edges[g] {
                    if w[j] == 0.0 {
                        w[j] = planted_value(&mut rng);
                    }
                }
            }
            let x = gaussian_matrix(&mut rng, n, p);
            let y = respond(&mut rng, &x, &w, spec.sigma);
            SynthData::Regression { x, y, w_star: w, structure: Some(s), active_groups: Some(active), latent: true }
        }
        Scenario::Dict => {
            // nonnegative atoms on disjoint random supports, sparse nonnegative codes
            let m = p;
            let mut rows: Vec<usize> = (0..m).collect();
            rows.shuffle(&mut rng);
            let per = (m / k).max(1);
            let mut d = Array2::zeros((m, k));
            for a in 0..k {
                for &i in rows.iter().skip(a * per).take(per) {
                    d[[i, a]] = rng.sample(Uniform::new(0.5, 1.5).expect("valid range"));
                }
                let s: f64 = d.column(a).sum();
                if s > 0.0 {
                    d.column_mut(a).mapv_inplace(|v| v / s);
                }
            }
            let mut codes = Array2::zeros((k, n));
            for i in 0..n {
                let active = rng.random_range(0..k);
                codes[[active, i]] = rng.sample(Uniform::new(0.5, 1.0).expect("valid range"));
                if k > 1 && rng.random_bool(0.3) {
                    let other = (active + 1 + rng.random_range(0..k - 1)) % k;
                    codes[[other, i]] = rng.sample(Uniform::new(0.1, 0.4).expect("valid range"));
                }
            }
            let mut x = d.dot(&codes);
            if spec.sigma > 0.0 {
                let noise = Normal::new(0.0, spec.sigma).expect("sigma is validated");
                x.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
            }
            SynthData::Dictionary { x, d_star: d, a_star: codes }
        }
        Scenario::Topics => topics(&mut rng, spec),
        Scenario::Hkl => {
            let x = Array2::from_shape_simple_fn((n, p), || rng.sample(Uniform::new(-1.0, 1.0).expect("valid range")));
            let w = vec![0.0; p];
            let mut y = respond(&mut rng, &x, &w, spec.sigma);
            for i in 0..n {
                y[i] += 2.0 * x[[i, 0]] * x[[i, 1]];
            }
            SynthData::Hkl { x, y, true_subsets: vec![vec![], vec![0], vec![1], vec![0, 1]] }
        }
    })
}

/// Planted 3-node chain: the root topic is a shared lexicon used by every
/// document, node 1 and node 2 are specific lexicons; documents use the
/// root alone, the root and node 1, or the whole chain.
fn topics(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> SynthData {
    let m = spec.p;
    let third = m / 3;
    let lexicon: [Vec<usize>; 3] = [(0..third).collect(), (third..2 * third).collect(), (2 * third..m).collect()];
    let mut vocab: Vec<String> = Vec::with_capacity(m);
    for (t, lex) in lexicon.iter().enumerate() {
        let prefix = ["common", "alpha", "beta"][t];
        for k in 0..lex.len() {
            vocab.push(format!("{prefix}{k}"));
        }
    }
    let mut counts = Array2::zeros((m, spec.n));
    for doc in 0..spec.n {
        let depth = rng.random_range(0..3);
        let mut mix = [0.0f64; 3];
        mix[0] = 1.0;
        for t in 1..=depth {
            mix[t] = rng.sample(Uniform::new(0.4, 1.0).expect("valid range"));
        }
        let total: f64 = mix.iter().sum();
        for _ in 0..spec.doc_length {
            let mut r = rng.random::<f64>() * total;
            let mut topic = 0;
            while topic < 2 && r >= mix[topic] {
                r -= mix[topic];
                topic += 1;
            }
            let lex = &lexicon[topic];
            let word = lex[rng.random_range(0..lex.len())];
            counts[[word, doc]] += 1.0;
        }
    }
    let doc_ids = (0..spec.n as u64).collect();
    SynthData::Topics {
        corpus: Corpus { counts, vocab, doc_ids },
        tree: TreeStructure::chain(3).expect("chain"),
        root_tokens: lexicon[0].clone(),
    }
}
