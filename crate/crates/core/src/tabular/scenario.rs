//! Synthetic shift scenarios.
//!
//! A generated table has an ID-like categorical column `id`, further
//! categorical columns `f1..`, a class column `label` and a period-index
//! timestamp `ts`. Rows are laid out chronologically: train periods, then
//! validation periods, then test periods. Value turnover of the ID feature
//! (and, in `SINGLE_DOMINANT` mode, of the context columns) happens at the
//! first test period.

use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CategoricalColumn, Column, FeatureTable, TableError, TemporalSplit};

/// Geometric decay of ID popularity; keeps the greedy tree ordering of ID
/// isolation stable across bootstrap samples.
const ID_WEIGHT_DECAY: f64 = 0.85;
const LABEL_NOISE: f64 = 0.05;
const LOW_ENTROPY_MAJORITY: f64 = 0.85;
const CONTEXT_CARDINALITY: usize = 6;
const STABLE_CARDINALITY: usize = 4;
/// Softmax inverse temperature of the distributed label model.
const DISTRIBUTED_SIGNAL: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConcentrationMode {
    /// Label is a function of the ID feature only.
    SingleDominant,
    /// Label depends on every stable feature with comparable weight.
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntropyLevel {
    Low,
    High,
}

/// Number of timestamp periods in each span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodLayout {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl Default for PeriodLayout {
    fn default() -> Self {
        Self {
            train: 6,
            val: 3,
            test: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftScenario {
    pub n_features: usize,
    pub n_classes: usize,
    pub id_feature_turnover: f64,
    pub concentration_mode: ConcentrationMode,
    pub entropy_level: EntropyLevel,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
    #[serde(default)]
    pub periods: PeriodLayout,
}

impl ShiftScenario {
    /// First period of the test span, where turnover takes effect.
    pub fn shift_period(&self) -> i64 {
        i64::from(self.periods.train + self.periods.val)
    }

    pub fn total_periods(&self) -> i64 {
        self.shift_period() + i64::from(self.periods.test)
    }

    /// The train / validation / test bounds matching the period layout.
    pub fn split(&self) -> TemporalSplit {
        TemporalSplit {
            train_end: i64::from(self.periods.train),
            val_end: self.shift_period(),
        }
    }

    fn validate(&self) -> Result<(), TableError> {
        let invalid = |msg: &str| Err(TableError::InvalidScenario(msg.to_string()));
        if !(0.0..=1.0).contains(&self.id_feature_turnover) {
            return invalid("id_feature_turnover must lie in [0, 1]");
        }
        if self.n_classes < 2 {
            return invalid("n_classes must be at least 2");
        }
        if self.n_features == 0 || self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return invalid("feature and row counts must be positive");
        }
        if self.concentration_mode == ConcentrationMode::Distributed && self.n_features < 4 {
            return invalid("DISTRIBUTED mode needs the ID feature plus at least 3 stable features");
        }
        let p = self.periods;
        if p.train == 0 || p.val == 0 || p.test == 0 {
            return invalid("every span needs at least one period");
        }
        Ok(())
    }
}

/// 64-bit FNV-1a; fixed across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Class assigned to an ID value before label noise.
pub fn id_class(id_value: &str, n_classes: usize) -> usize {
    (fnv1a(id_value.as_bytes()) % n_classes as u64) as usize
}

/// Value pool of one turnover-capable column: the pre-shift values and the
/// test-span values with their sampling weights.
struct ValuePool {
    levels: Arc<Vec<String>>,
    pre: WeightedIndex<f64>,
    pre_codes: Vec<u32>,
    post: WeightedIndex<f64>,
    post_codes: Vec<u32>,
}

impl ValuePool {
    /// `turnover` is the fraction of distinct test-span values unseen before
    /// the shift. For 0 < t < 1 every old value stays in play and
    /// round(m·t/(1−t)) new values join, so the old/new Jaccard is 1 − t.
    fn new(prefix: &str, size: usize, decay: f64, turnover: f64) -> Self {
        let slot_weight = |j: usize| decay.powi((j % size) as i32);
        let n_new = if turnover >= 1.0 {
            size
        } else {
            ((size as f64) * turnover / (1.0 - turnover)).round() as usize
        };
        let mut levels: Vec<String> = (0..size).map(|j| format!("{prefix}{j:04}")).collect();
        levels.extend((0..n_new).map(|j| format!("{prefix}{:04}", size + j)));

        let pre_codes: Vec<u32> = (0..size as u32).collect();
        let pre_w: Vec<f64> = (0..size).map(slot_weight).collect();
        let mut post_codes = Vec::new();
        let mut post_w = Vec::new();
        if turnover < 1.0 {
            post_codes.extend(0..size as u32);
            post_w.extend((0..size).map(slot_weight));
        }
        post_codes.extend((size..size + n_new).map(|c| c as u32));
        post_w.extend((0..n_new).map(slot_weight));

        Self {
            levels: Arc::new(levels),
            pre: WeightedIndex::new(pre_w).expect("positive weights"),
            pre_codes,
            post: WeightedIndex::new(post_w).expect("positive weights"),
            post_codes,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, post_shift: bool) -> u32 {
        if post_shift {
            self.post_codes[self.post.sample(rng)]
        } else {
            self.pre_codes[self.pre.sample(rng)]
        }
    }
}

fn span_timestamps(n: usize, start: i64, periods: u32) -> impl Iterator<Item = i64> {
    (0..n).map(move |i| start + (i * periods as usize / n) as i64)
}

fn sample_softmax<R: Rng>(rng: &mut R, logits: &[f64]) -> usize {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    WeightedIndex::new(&weights)
        .expect("finite logits")
        .sample(rng)
}

/// Generates a deterministic table for `spec` plus its matching split.
pub fn generate_scenario(spec: &ShiftScenario) -> Result<(FeatureTable, TemporalSplit), TableError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.n_classes;
    let n = spec.n_train + spec.n_val + spec.n_test;
    let p = spec.periods;

    let timestamps: Vec<i64> = span_timestamps(spec.n_train, 0, p.train)
        .chain(span_timestamps(spec.n_val, i64::from(p.train), p.val))
        .chain(span_timestamps(spec.n_test, spec.shift_period(), p.test))
        .collect();
    let post_shift = |row: usize| row >= spec.n_train + spec.n_val;

    let id_pool = ValuePool::new(
        "ID",
        (2 * k).max(8),
        ID_WEIGHT_DECAY,
        spec.id_feature_turnover,
    );
    let n_other = spec.n_features - 1;
    let other_pools: Vec<ValuePool> = (1..=n_other)
        .map(|f| match spec.concentration_mode {
            ConcentrationMode::SingleDominant => ValuePool::new(
                &format!("f{f}_"),
                CONTEXT_CARDINALITY,
                1.0,
                spec.id_feature_turnover,
            ),
            ConcentrationMode::Distributed => {
                ValuePool::new(&format!("f{f}_"), STABLE_CARDINALITY, 1.0, 0.0)
            }
        })
        .collect();
    // Per-feature, per-value additive class scores.
    let effects: Vec<Vec<Vec<f64>>> = match spec.concentration_mode {
        ConcentrationMode::SingleDominant => Vec::new(),
        ConcentrationMode::Distributed => (0..n_other)
            .map(|_| {
                (0..STABLE_CARDINALITY)
                    .map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect(),
    };

    let mut id_codes = Vec::with_capacity(n);
    let mut other_codes: Vec<Vec<u32>> = vec![Vec::with_capacity(n); n_other];
    let mut labels = Vec::with_capacity(n);
    let mut logits = vec![0.0; k];
    for row in 0..n {
        let shifted = post_shift(row);
        let id = id_pool.sample(&mut rng, shifted);
        id_codes.push(id);
        for (f, pool) in other_pools.iter().enumerate() {
            other_codes[f].push(pool.sample(&mut rng, shifted));
        }
        let mut label = match spec.concentration_mode {
            ConcentrationMode::SingleDominant => {
                let base = id_class(&id_pool.levels[id as usize], k);
                if rng.gen_bool(LABEL_NOISE) {
                    rng.gen_range(0..k)
                } else {
                    base
                }
            }
            ConcentrationMode::Distributed => {
                logits.iter_mut().for_each(|l| *l = 0.0);
                for (f, table) in effects.iter().enumerate() {
                    let v = other_codes[f][row] as usize;
                    for (c, l) in logits.iter_mut().enumerate() {
                        *l += DISTRIBUTED_SIGNAL * table[v][c];
                    }
                }
                sample_softmax(&mut rng, &logits)
            }
        };
        if spec.entropy_level == EntropyLevel::Low && rng.gen_bool(LOW_ENTROPY_MAJORITY) {
            label = 0;
        }
        labels.push(label as u32);
    }

    let class_levels = Arc::new((0..k).map(|c| format!("c{c}")).collect::<Vec<_>>());
    let mut columns = vec![(
        "id".to_string(),
        Column::Categorical(CategoricalColumn::from_parts(id_codes, Arc::clone(&id_pool.levels))?),
    )];
    for (f, (codes, pool)) in other_codes.into_iter().zip(&other_pools).enumerate() {
        columns.push((
            format!("f{}", f + 1),
            Column::Categorical(CategoricalColumn::from_parts(codes, Arc::clone(&pool.levels))?),
        ));
    }
    columns.push((
        "label".to_string(),
        Column::Categorical(CategoricalColumn::from_parts(labels, class_levels)?),
    ));
    let table = FeatureTable::new(columns, "label", "ts", timestamps)?;
    Ok((table, spec.split()))
}
