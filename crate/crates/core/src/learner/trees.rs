//! Bagged, depth-limited Gini trees over categorical (and numeric) features.
//!
//! Categorical splits are one-vs-rest on a single category. A category the
//! tree never saw during fitting follows whichever child received more
//! training rows, so an ID-driven model degrades to an uninformative (but
//! well-formed) prediction under value turnover. Missing cells behave like
//! any other non-matching value when the tree saw missing cells, and like an
//! unseen value otherwise. Numeric splits are `x <= threshold`; `NaN` takes
//! the majority branch.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, LearnerError, ProbabilityMatrix};
use crate::tabular::{Column, FeatureTable, MISSING};

const MIN_GAIN: f64 = 1e-12;
const UNSEEN: u32 = u32::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Fraction of training rows drawn (without replacement) per tree.
    pub row_subsample: f64,
    /// Minimum rows on each side of a split.
    pub min_leaf: usize,
    /// Additive (Laplace) pseudo-count per class in leaf distributions.
    pub smoothing: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            n_trees: 20,
            max_depth: 24,
            row_subsample: 0.8,
            min_leaf: 5,
            smoothing: 1.0,
        }
    }
}

impl TreeConfig {
    fn validate(&self) -> Result<(), LearnerError> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_leaf == 0 {
            return Err(LearnerError::InvalidConfig(
                "n_trees, max_depth and min_leaf must be at least 1".into(),
            ));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(LearnerError::InvalidConfig("smoothing must be finite and >= 0".into()));
        }
        if !(self.row_subsample > 0.0 && self.row_subsample <= 1.0) {
            return Err(LearnerError::InvalidConfig(
                "row_subsample must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum FeatureKind {
    Categorical(Arc<Vec<String>>),
    Numeric,
}

#[derive(Debug, Clone)]
struct FeatureMeta {
    name: String,
    kind: FeatureKind,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<f64>),
    Categorical {
        feature: usize,
        category: u32,
        majority_left: bool,
        left: usize,
        right: usize,
    },
    Numeric {
        feature: usize,
        threshold: f64,
        majority_left: bool,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
    /// Per categorical feature: which codes appeared in this tree's sample.
    /// The extra trailing slot records missing cells.
    seen: Vec<Vec<bool>>,
}

enum View<'a> {
    Cat(Cow<'a, [u32]>),
    Num(&'a [f64]),
}

impl View<'_> {
    fn cat(&self) -> &[u32] {
        match self {
            View::Cat(c) => c,
            View::Num(_) => unreachable!("feature kinds fixed at fit time"),
        }
    }

    fn num(&self) -> &[f64] {
        match self {
            View::Num(v) => v,
            View::Cat(_) => unreachable!("feature kinds fixed at fit time"),
        }
    }
}

/// Averaged class distribution of an ensemble of bagged trees.
#[derive(Debug, Clone)]
pub struct BaggedTrees {
    labels: Vec<String>,
    features: Vec<FeatureMeta>,
    trees: Vec<Tree>,
}

impl BaggedTrees {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    fn views<'a>(&self, rows: &'a FeatureTable) -> Result<Vec<View<'a>>, LearnerError> {
        self.features
            .iter()
            .map(|meta| {
                let col = rows
                    .column_by_name(&meta.name)
                    .ok_or_else(|| LearnerError::MissingFeature(meta.name.clone()))?;
                match (&meta.kind, col) {
                    (FeatureKind::Numeric, Column::Numeric(v)) => Ok(View::Num(v)),
                    (FeatureKind::Categorical(levels), Column::Categorical(c)) => {
                        if Arc::ptr_eq(levels, &c.shared_levels()) || **levels == c.levels() {
                            return Ok(View::Cat(Cow::Borrowed(c.codes())));
                        }
                        let index: HashMap<&str, u32> = levels
                            .iter()
                            .enumerate()
                            .map(|(i, l)| (l.as_str(), i as u32))
                            .collect();
                        let remap: Vec<u32> = c
                            .levels()
                            .iter()
                            .map(|l| index.get(l.as_str()).copied().unwrap_or(UNSEEN))
                            .collect();
                        Ok(View::Cat(Cow::Owned(
                            c.codes()
                                .iter()
                                .map(|&x| if x == MISSING { MISSING } else { remap[x as usize] })
                                .collect(),
                        )))
                    }
                    _ => Err(LearnerError::MissingFeature(format!(
                        "{} (column type differs from training)",
                        meta.name
                    ))),
                }
            })
            .collect()
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    views: &'a [View<'a>],
    labels: &'a [u32],
    n_classes: usize,
    config: &'a TreeConfig,
    /// Per-tree feature visiting order; equal-gain ties go to the earlier
    /// feature, so redundant copies share the splits across trees.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

enum Candidate {
    Categorical(u32),
    Numeric(f64),
}

impl Builder<'_> {
    fn class_counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &r in rows {
            counts[self.labels[r] as usize] += 1;
        }
        counts
    }

    fn leaf(&mut self, counts: &[usize], n: usize) -> usize {
        let a = self.config.smoothing;
        let denom = n as f64 + a * self.n_classes as f64;
        let dist = counts.iter().map(|&c| (c as f64 + a) / denom).collect();
        self.nodes.push(Node::Leaf(dist));
        self.nodes.len() - 1
    }

    fn best_split(&self, rows: &[usize], counts: &[usize]) -> Option<(usize, Candidate, f64)> {
        let n = rows.len();
        let parent = gini(counts, n);
        let min_leaf = self.config.min_leaf;
        let mut best: Option<(usize, Candidate, f64)> = None;
        let mut consider = |feature: usize, cand: Candidate, impurity: f64| {
            let gain = parent - impurity;
            if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.2 + MIN_GAIN) {
                best = Some((feature, cand, gain));
            }
        };

        for &f in &self.order {
            match &self.views[f] {
                View::Cat(codes) => {
                    let mut by_code: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
                    for &r in rows {
                        let code = codes[r];
                        if code != MISSING {
                            by_code
                                .entry(code)
                                .or_insert_with(|| vec![0; self.n_classes])
                                [self.labels[r] as usize] += 1;
                        }
                    }
                    if by_code.len() < 2 && by_code.values().map(|v| v.iter().sum::<usize>()).sum::<usize>() == n {
                        continue;
                    }
                    let mut rest = vec![0usize; self.n_classes];
                    for (code, left) in by_code {
                        let n_left: usize = left.iter().sum();
                        let n_right = n - n_left;
                        if n_left < min_leaf || n_right < min_leaf {
                            continue;
                        }
                        for (r, (&t, &l)) in rest.iter_mut().zip(counts.iter().zip(&left)) {
                            *r = t - l;
                        }
                        let impurity = (n_left as f64 * gini(&left, n_left)
                            + n_right as f64 * gini(&rest, n_right))
                            / n as f64;
                        consider(f, Candidate::Categorical(code), impurity);
                    }
                }
                View::Num(values) => {
                    let mut pairs: Vec<(f64, u32)> = rows
                        .iter()
                        .filter(|&&r| !values[r].is_nan())
                        .map(|&r| (values[r], self.labels[r]))
                        .collect();
                    let m = pairs.len();
                    if m < 2 * min_leaf {
                        continue;
                    }
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let mut total = vec![0usize; self.n_classes];
                    for &(_, c) in &pairs {
                        total[c as usize] += 1;
                    }
                    let mut left = vec![0usize; self.n_classes];
                    let mut right = total.clone();
                    for i in 0..m - 1 {
                        let c = pairs[i].1 as usize;
                        left[c] += 1;
                        right[c] -= 1;
                        let n_left = i + 1;
                        if pairs[i].0 == pairs[i + 1].0 || n_left < min_leaf || m - n_left < min_leaf {
                            continue;
                        }
                        let impurity = (n_left as f64 * gini(&left, n_left)
                            + (m - n_left) as f64 * gini(&right, m - n_left))
                            / m as f64;
                        let threshold = 0.5 * (pairs[i].0 + pairs[i + 1].0);
                        consider(f, Candidate::Numeric(threshold), impurity);
                    }
                }
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len();
        let counts = self.class_counts(&rows);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.config.max_depth || n < 2 * self.config.min_leaf {
            return self.leaf(&counts, n);
        }
        let Some((feature, cand, _)) = self.best_split(&rows, &counts) else {
            return self.leaf(&counts, n);
        };

        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        let mut undecided = Vec::new();
        match cand {
            Candidate::Categorical(category) => {
                let codes = self.views[feature].cat();
                for &r in &rows {
                    match codes[r] {
                        x if x == category => left_rows.push(r),
                        _ => right_rows.push(r),
                    }
                }
            }
            Candidate::Numeric(threshold) => {
                let values = self.views[feature].num();
                for &r in &rows {
                    let v = values[r];
                    if v.is_nan() {
                        undecided.push(r);
                    } else if v <= threshold {
                        left_rows.push(r);
                    } else {
                        right_rows.push(r);
                    }
                }
            }
        }
        let majority_left = left_rows.len() > right_rows.len();
        if majority_left {
            left_rows.extend(undecided);
        } else {
            right_rows.extend(undecided);
        }

        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf(Vec::new()));
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[slot] = match cand {
            Candidate::Categorical(category) => Node::Categorical {
                feature,
                category,
                majority_left,
                left,
                right,
            },
            Candidate::Numeric(threshold) => Node::Numeric {
                feature,
                threshold,
                majority_left,
                left,
                right,
            },
        };
        slot
    }
}

/// Fits `config.n_trees` trees, each on a seeded row subsample.
pub fn fit_bagged_trees(
    train: &FeatureTable,
    config: &TreeConfig,
    seed: u64,
) -> Result<BaggedTrees, LearnerError> {
    config.validate()?;
    if train.is_empty() {
        return Err(LearnerError::EmptyTrain);
    }
    let labels = train.class_labels()?.to_vec();
    let classes = train.class_codes()?;

    let features: Vec<FeatureMeta> = train
        .feature_indices()
        .into_iter()
        .map(|i| FeatureMeta {
            name: train.column_names()[i].clone(),
            kind: match train.column(i) {
                Column::Categorical(c) => FeatureKind::Categorical(c.shared_levels()),
                Column::Numeric(_) => FeatureKind::Numeric,
            },
        })
        .collect();
    let views: Vec<View> = train
        .feature_indices()
        .into_iter()
        .map(|i| match train.column(i) {
            Column::Categorical(c) => View::Cat(Cow::Borrowed(c.codes())),
            Column::Numeric(v) => View::Num(v),
        })
        .collect();

    let n = train.n_rows();
    let sample_size = ((n as f64 * config.row_subsample).round() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        let mut rows = index::sample(&mut rng, n, sample_size).into_vec();
        rows.sort_unstable();
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.shuffle(&mut rng);

        let seen = features
            .iter()
            .zip(&views)
            .map(|(meta, view)| match (&meta.kind, view) {
                (FeatureKind::Categorical(levels), View::Cat(codes)) => {
                    let mut seen = vec![false; levels.len() + 1];
                    for &r in &rows {
                        match codes[r] {
                            MISSING => seen[levels.len()] = true,
                            c => seen[c as usize] = true,
                        }
                    }
                    seen
                }
                _ => Vec::new(),
            })
            .collect();

        let mut builder = Builder {
            views: &views,
            labels: classes,
            n_classes: labels.len(),
            config,
            order,
            nodes: Vec::new(),
        };
        builder.build(rows, 0);
        trees.push(Tree {
            nodes: builder.nodes,
            seen,
        });
    }
    Ok(BaggedTrees {
        labels,
        features,
        trees,
    })
}

impl Tree {
    fn leaf_for(&self, views: &[View], row: usize) -> &[f64] {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf(dist) => return dist,
                Node::Categorical {
                    feature,
                    category,
                    majority_left,
                    left,
                    right,
                } => {
                    let code = views[*feature].cat()[row];
                    let seen = &self.seen[*feature];
                    let known = match code {
                        MISSING => seen[seen.len() - 1],
                        c => (c as usize) < seen.len() - 1 && seen[c as usize],
                    };
                    node = if code == *category {
                        *left
                    } else if known {
                        *right
                    } else if *majority_left {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Numeric {
                    feature,
                    threshold,
                    majority_left,
                    left,
                    right,
                } => {
                    let v = views[*feature].num()[row];
                    node = if v.is_nan() {
                        if *majority_left {
                            *left
                        } else {
                            *right
                        }
                    } else if v <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

impl Classifier for BaggedTrees {
    fn class_labels(&self) -> &[String] {
        &self.labels
    }

    fn predict_proba(&self, rows: &FeatureTable) -> Result<ProbabilityMatrix, LearnerError> {
        let views = self.views(rows)?;
        let k = self.labels.len();
        let scale = 1.0 / self.trees.len() as f64;
        let mut values = vec![0.0; rows.n_rows() * k];
        for (row, out) in values.chunks_mut(k).enumerate() {
            for tree in &self.trees {
                for (o, p) in out.iter_mut().zip(tree.leaf_for(&views, row)) {
                    *o += p;
                }
            }
            out.iter_mut().for_each(|o| *o *= scale);
        }
        Ok(ProbabilityMatrix {
            n_classes: k,
            values,
        })
    }
}
