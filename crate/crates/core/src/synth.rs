//! Deterministic synthetic data generators used by the self-test suites
//! and benchmarks: a separable tagging corpus, a two-topic embedding
//! corpus, and Gaussian point blobs.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::EntityClass;
use crate::embeddings::EmbeddingModel;
use crate::tokenize::BioLabel;

pub const TOPIC_A: [&str; 8] = [
    "cardiac",
    "arrhythmia",
    "tachycardia",
    "palpitation",
    "hypertension",
    "bradycardia",
    "infarction",
    "angina",
];

pub const TOPIC_B: [&str; 8] = [
    "rash",
    "pruritus",
    "urticaria",
    "eczema",
    "dermatitis",
    "erythema",
    "itching",
    "hives",
];

/// Sentences drawn from two disjoint topic vocabularies; words co-occur
/// only within their topic.
pub fn two_topic_sentences(seed: u64, n: usize) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let vocab: &[&str] = if i % 2 == 0 { &TOPIC_A } else { &TOPIC_B };
            (0..7)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
                .collect()
        })
        .collect()
}

fn cosine(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    let dot = a.dot(&b);
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Mean (intra-topic, inter-topic) cosine similarity of the trained
/// vectors over the two topic vocabularies.
pub fn topic_similarity(model: &EmbeddingModel) -> (f64, f64) {
    let vecs = |words: &[&str]| -> Vec<ndarray::ArrayView1<f64>> {
        words.iter().filter_map(|w| model.vector(w)).collect()
    };
    let a = vecs(&TOPIC_A);
    let b = vecs(&TOPIC_B);
    let mut intra = Vec::new();
    for set in [&a, &b] {
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                intra.push(cosine(set[i], set[j]));
            }
        }
    }
    let mut inter = Vec::new();
    for va in &a {
        for vb in &b {
            inter.push(cosine(*va, *vb));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    (mean(&intra), mean(&inter))
}

/// Gaussian blobs: `k` clusters of `n_per` points in `dim` dimensions,
/// centers `sep` apart on coordinate axes, noise sigma `spread`.
/// Returns the points and the true blob id per point.
pub fn gaussian_blobs(
    k: usize,
    n_per: usize,
    dim: usize,
    sep: f64,
    spread: f64,
    seed: u64,
) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = move |rng: &mut ChaCha8Rng| -> f64 {
        let u1: f64 = rng.gen::<f64>().max(1e-12);
        let u2: f64 = rng.gen::<f64>();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut points = Array2::zeros((k * n_per, dim));
    let mut truth = Vec::with_capacity(k * n_per);
    for blob in 0..k {
        let axis = blob % dim;
        let shift = sep * (1.0 + (blob / dim) as f64);
        for p in 0..n_per {
            let row = blob * n_per + p;
            for d in 0..dim {
                let center = if d == axis { shift } else { 0.0 };
                points[[row, d]] = center + spread * normal(&mut rng);
            }
            truth.push(blob);
        }
    }
    (points, truth)
}

const ADRS: [&str; 5] = ["nausea", "headache", "rash", "vomiting", "dizziness"];
const SEVERITIES: [&str; 3] = ["severe", "mild", "serious"];

/// A separable tagging corpus: every surface word maps to exactly one
/// label, cycling five sentence shapes over the AdverseReaction and
/// Severity classes. Used by the overfit sanity checks.
pub fn overfit_corpus(n: usize) -> Vec<(Vec<String>, Vec<BioLabel>)> {
    let adr = EntityClass::AdverseReaction;
    let sev = EntityClass::Severity;
    let o = BioLabel::O;
    (0..n)
        .map(|i| {
            let a = ADRS[i % ADRS.len()];
            let a2 = ADRS[(i + 2) % ADRS.len()];
            let s = SEVERITIES[i % SEVERITIES.len()];
            let (words, labels): (Vec<&str>, Vec<BioLabel>) = match i % 5 {
                0 => (
                    vec!["patients", "reported", s, a, "during", "treatment"],
                    vec![o, o, BioLabel::B(sev), BioLabel::B(adr), o, o],
                ),
                1 => (
                    vec!["cases", "of", a, "were", "common"],
                    vec![o, o, BioLabel::B(adr), o, o],
                ),
                2 => (
                    vec!["the", "study", "found", s, a],
                    vec![o, o, o, BioLabel::B(sev), BioLabel::B(adr)],
                ),
                3 => (
                    vec![a, "and", a2, "occurred"],
                    vec![BioLabel::B(adr), o, BioLabel::B(adr), o],
                ),
                _ => (
                    vec!["patients", "developed", "aplastic", "anemia"],
                    vec![o, o, BioLabel::B(adr), BioLabel::I(adr)],
                ),
            };
            (words.into_iter().map(String::from).collect(), labels)
        })
        .collect()
}

/// Lemma-window feature vectors for a plain token sequence: the token's
/// own surface plus its predecessor.
pub fn surface_features(tokens: &[String]) -> Vec<crate::features::FeatureVector> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let mut keys = std::collections::BTreeSet::new();
            keys.insert(format!("0:LEMMA={w}"));
            if i > 0 {
                keys.insert(format!("-1:LEMMA={}", tokens[i - 1]));
            }
            crate::features::FeatureVector { keys }
        })
        .collect()
}

/// The distinct surface words of [`overfit_corpus`], sorted.
pub fn overfit_vocab(corpus: &[(Vec<String>, Vec<BioLabel>)]) -> Vec<String> {
    let mut words: Vec<String> = corpus
        .iter()
        .flat_map(|(toks, _)| toks.iter().cloned())
        .collect();
    words.sort();
    words.dedup();
    words
}
