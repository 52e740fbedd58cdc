//! Corpus splitting and token-level / mention-level precision, recall,
//! and F1 with micro-averaging. Scores are percentages in [0, 100].

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AnnotatedDocument, EntityClass, MentionAnnotation};
use crate::error::{Error, Result};
use crate::tokenize::{BioLabel, TaggedSequence};

/// Holdout split sizes. When the sizes sum to the corpus size they are
/// used directly; otherwise they act as proportions resolved by
/// largest-remainder rounding.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 56,
            validation: 24,
            test: 21,
            seed: 1,
        }
    }
}

impl SplitSpec {
    /// Concrete (train, validation, test) sizes for a corpus of `n`
    /// documents. Remainder ties go to train, then validation.
    pub fn resolve(&self, n: usize) -> (usize, usize, usize) {
        let total = self.train + self.validation + self.test;
        if total == n {
            return (self.train, self.validation, self.test);
        }
        let weights = [self.train, self.validation, self.test];
        let mut sizes = [0usize; 3];
        let mut remainders = [0f64; 3];
        let mut assigned = 0usize;
        for i in 0..3 {
            let quota = n as f64 * weights[i] as f64 / total as f64;
            sizes[i] = quota.floor() as usize;
            remainders[i] = quota - quota.floor();
            assigned += sizes[i];
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| remainders[b].partial_cmp(&remainders[a]).unwrap());
        let mut leftover = n - assigned;
        for &i in &order {
            if leftover == 0 {
                break;
            }
            sizes[i] += 1;
            leftover -= 1;
        }
        (sizes[0], sizes[1], sizes[2])
    }
}

/// Seeded shuffle followed by partition into train/validation/test.
pub fn split_corpus(
    docs: &[AnnotatedDocument],
    spec: &SplitSpec,
) -> Result<(
    Vec<AnnotatedDocument>,
    Vec<AnnotatedDocument>,
    Vec<AnnotatedDocument>,
)> {
    if docs.len() < 3 {
        return Err(Error::Config(format!(
            "corpus of {} documents cannot be split three ways",
            docs.len()
        )));
    }
    let (n_train, n_val, n_test) = spec.resolve(docs.len());
    if n_train + n_val + n_test != docs.len() {
        return Err(Error::Config(format!(
            "split sizes {n_train}+{n_val}+{n_test} do not cover {} documents",
            docs.len()
        )));
    }
    let mut shuffled: Vec<AnnotatedDocument> = docs.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    shuffled.shuffle(&mut rng);
    let test = shuffled.split_off(n_train + n_val);
    let validation = shuffled.split_off(n_train);
    Ok((shuffled, validation, test))
}

/// Raw match counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrfCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl PrfCounts {
    pub fn add(&mut self, other: &PrfCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        let denom = self.tp + self.fp;
        if denom == 0 {
            0.0
        } else {
            100.0 * self.tp as f64 / denom as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let denom = self.tp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            100.0 * self.tp as f64 / denom as f64
        }
    }

    pub fn f1(&self) -> f64 {
        f1_from(self.precision(), self.recall())
    }
}

/// Harmonic mean of precision and recall (percent scale); 0 when both
/// are 0.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-class counts plus the micro-averaged pool.
#[derive(Debug, Clone, Default)]
pub struct PrfScores {
    pub per_class: BTreeMap<EntityClass, PrfCounts>,
    pub micro: PrfCounts,
}

impl PrfScores {
    pub fn from_counts(per_class: BTreeMap<EntityClass, PrfCounts>) -> PrfScores {
        let mut micro = PrfCounts::default();
        for counts in per_class.values() {
            micro.add(counts);
        }
        PrfScores { per_class, micro }
    }
}

/// Mention matching mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    WithType,
    WithoutType,
}

/// Token-level counts for one class: a token counts as positive when its
/// label is B or I of that class (the B/I distinction is ignored).
pub fn token_prf(
    gold: &[TaggedSequence],
    pred: &[TaggedSequence],
    class: EntityClass,
) -> Result<PrfCounts> {
    if gold.len() != pred.len() {
        return Err(Error::Validation(format!(
            "gold has {} sequences, pred has {}",
            gold.len(),
            pred.len()
        )));
    }
    let mut counts = PrfCounts::default();
    for (g, p) in gold.iter().zip(pred) {
        if g.tokens.len() != p.tokens.len() {
            return Err(Error::Validation(format!(
                "sequence alignment mismatch: {} vs {} tokens",
                g.tokens.len(),
                p.tokens.len()
            )));
        }
        for (gl, pl) in g.labels.iter().zip(&p.labels) {
            let g_hit = gl.class() == Some(class);
            let p_hit = pl.class() == Some(class);
            match (g_hit, p_hit) {
                (true, true) => counts.tp += 1,
                (false, true) => counts.fp += 1,
                (true, false) => counts.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(counts)
}

/// Micro token counts over label sequences, pooling all classes; used
/// for validation scores during training.
pub fn token_counts_micro(gold: &[Vec<BioLabel>], pred: &[Vec<BioLabel>]) -> PrfCounts {
    let mut counts = PrfCounts::default();
    for (g_seq, p_seq) in gold.iter().zip(pred) {
        for (g, p) in g_seq.iter().zip(p_seq) {
            match (g.class(), p.class()) {
                (Some(gc), Some(pc)) if gc == pc => counts.tp += 1,
                (Some(_), Some(_)) => {
                    counts.fp += 1;
                    counts.fn_ += 1;
                }
                (None, Some(_)) => counts.fp += 1,
                (Some(_), None) => counts.fn_ += 1,
                (None, None) => {}
            }
        }
    }
    counts
}

fn sort_key(m: &MentionAnnotation) -> (usize, usize, EntityClass) {
    (m.start(), m.end(), m.class)
}

/// Greedy one-to-one exact-span mention matching over aligned documents.
/// `WithType` also requires equal classes and reports per-class counts;
/// `WithoutType` matches on spans alone and reports only the micro pool.
pub fn mention_prf(
    docs: &[(Vec<MentionAnnotation>, Vec<MentionAnnotation>)],
    mode: MatchMode,
) -> PrfScores {
    let mut per_class: BTreeMap<EntityClass, PrfCounts> = BTreeMap::new();
    let mut micro = PrfCounts::default();

    for (gold, pred) in docs {
        let mut gold_sorted: Vec<&MentionAnnotation> = gold.iter().collect();
        gold_sorted.sort_by_key(|m| sort_key(m));
        let mut pred_sorted: Vec<&MentionAnnotation> = pred.iter().collect();
        pred_sorted.sort_by_key(|m| sort_key(m));
        let mut matched = vec![false; gold_sorted.len()];

        for p in &pred_sorted {
            let found = gold_sorted.iter().enumerate().find(|(gi, g)| {
                !matched[*gi]
                    && g.spans == p.spans
                    && (mode == MatchMode::WithoutType || g.class == p.class)
            });
            match found {
                Some((gi, g)) => {
                    matched[gi] = true;
                    micro.tp += 1;
                    if mode == MatchMode::WithType {
                        debug_assert_eq!(g.class, p.class);
                        per_class.entry(p.class).or_default().tp += 1;
                    }
                }
                None => {
                    micro.fp += 1;
                    if mode == MatchMode::WithType {
                        per_class.entry(p.class).or_default().fp += 1;
                    }
                }
            }
        }
        for (gi, g) in gold_sorted.iter().enumerate() {
            if !matched[gi] {
                micro.fn_ += 1;
                if mode == MatchMode::WithType {
                    per_class.entry(g.class).or_default().fn_ += 1;
                }
            }
        }
    }
    PrfScores { per_class, micro }
}
