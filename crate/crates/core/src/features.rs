//! Sparse binary feature extraction for the CRF taggers: lemma,
//! part-of-speech, semantic-type, lexicon-match, and embedding-cluster
//! features over a +-5 token window, plus the ADR-in-context flag used
//! by the related-entity taggers.
//!
//! Part-of-speech and semantic-type annotation are pluggable; the
//! bundled implementations are small rule/lexicon stand-ins so the
//! pipeline runs hermetically.

use std::collections::BTreeSet;

use crate::corpus::{AnnotatedDocument, EntityClass, MentionAnnotation};
use crate::embeddings::{cluster_feature, ClusterModel, Lemmatizer, SuffixLemmatizer};
pub use crate::lexicon::Lexicon;
use crate::tokenize::Token;

/// Binary feature keys present at one token position.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureVector {
    pub keys: BTreeSet<String>,
}

impl FeatureVector {
    pub fn contains(&self, key: &str) -> bool {
        self.keys.contains(key)
    }
}

/// Per-token tagger (part-of-speech, semantic type). `None` entries are
/// degraded to `UNK` with a logged warning.
pub trait TokenAnnotator: Send + Sync {
    fn name(&self) -> &str;
    fn annotate(&self, tokens: &[Token]) -> Vec<Option<String>>;
}

/// Suffix- and word-list-based part-of-speech tagger.
#[derive(Debug, Clone, Copy, Default)]
pub struct RulePosTagger;

const WORD_TAGS: &[(&str, &[&str])] = &[
    ("DT", &["the", "a", "an", "this", "that", "these", "those", "each", "every", "some", "any", "all"]),
    ("IN", &["of", "in", "on", "at", "with", "without", "for", "to", "from", "by", "after", "before", "during", "under", "over", "within", "into", "than", "as"]),
    ("CC", &["and", "or", "but", "nor"]),
    ("PRP", &["he", "she", "it", "they", "we", "you", "i", "them", "him", "her", "us"]),
    ("MD", &["may", "might", "can", "could", "should", "must", "shall", "will", "would"]),
    ("VBZ", &["is", "has", "was", "does"]),
    ("VBP", &["are", "have", "were", "do"]),
    ("VB", &["be", "been", "being", "had", "did"]),
    ("RB", &["not", "no", "never", "also", "only", "very", "usually", "commonly", "rarely"]),
    ("WDT", &["which", "who", "whom", "whose", "when", "where"]),
];

const SUFFIX_TAGS: &[(&str, &str)] = &[
    ("ly", "RB"),
    ("ing", "VBG"),
    ("ed", "VBN"),
    ("tion", "NN"),
    ("sion", "NN"),
    ("ness", "NN"),
    ("ment", "NN"),
    ("ity", "NN"),
    ("ism", "NN"),
    ("emia", "NN"),
    ("itis", "NN"),
    ("osis", "NN"),
    ("pathy", "NN"),
    ("ous", "JJ"),
    ("ive", "JJ"),
    ("al", "JJ"),
    ("ic", "JJ"),
    ("able", "JJ"),
    ("ible", "JJ"),
    ("ful", "JJ"),
    ("ar", "JJ"),
];

fn is_numeric_token(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '%' | '-' | '/'))
        && s.chars().any(|c| c.is_ascii_digit())
}

impl TokenAnnotator for RulePosTagger {
    fn name(&self) -> &str {
        "pos"
    }

    fn annotate(&self, tokens: &[Token]) -> Vec<Option<String>> {
        tokens
            .iter()
            .map(|t| {
                let s = &t.surface;
                let lower = s.to_lowercase();
                if s.chars().count() == 1 && !s.chars().next().unwrap().is_alphanumeric() {
                    return Some("PUNCT".to_string());
                }
                if is_numeric_token(s) {
                    return Some("CD".to_string());
                }
                for (tag, words) in WORD_TAGS {
                    if words.contains(&lower.as_str()) {
                        return Some(tag.to_string());
                    }
                }
                for (suffix, tag) in SUFFIX_TAGS {
                    if lower.len() > suffix.len() + 2 && lower.ends_with(suffix) {
                        return Some(tag.to_string());
                    }
                }
                if lower.len() > 3 && lower.ends_with('s') && !lower.ends_with("ss") {
                    return Some("NNS".to_string());
                }
                Some("NN".to_string())
            })
            .collect()
    }
}

/// Lexicon-backed semantic-type mapper: the first type whose lexicon
/// covers a token wins.
pub struct SemTypeAnnotator {
    types: Vec<(String, Lexicon)>,
}

impl SemTypeAnnotator {
    pub fn new(types: Vec<(String, Lexicon)>) -> SemTypeAnnotator {
        SemTypeAnnotator { types }
    }

    /// The bundled toy mapping (symptom / disease / chemical phrases).
    pub fn bundled() -> SemTypeAnnotator {
        SemTypeAnnotator::new(vec![
            (
                "sosy".to_string(),
                Lexicon::from_text("sosy", include_str!("../resources/semtype_symptom.txt")),
            ),
            (
                "dsyn".to_string(),
                Lexicon::from_text("dsyn", include_str!("../resources/semtype_disease.txt")),
            ),
            (
                "orch".to_string(),
                Lexicon::from_text("orch", include_str!("../resources/semtype_chemical.txt")),
            ),
        ])
    }
}

impl TokenAnnotator for SemTypeAnnotator {
    fn name(&self) -> &str {
        "semtype"
    }

    fn annotate(&self, tokens: &[Token]) -> Vec<Option<String>> {
        let mut tags = vec![Some("UNK".to_string()); tokens.len()];
        for (tag, lexicon) in self.types.iter().rev() {
            let covered = lexicon.match_tokens(tokens);
            for (i, c) in covered.iter().enumerate() {
                if *c {
                    tags[i] = Some(tag.clone());
                }
            }
        }
        tags
    }
}

/// The bundled stand-in ADR lexicon.
pub fn bundled_adr_lexicon() -> Lexicon {
    Lexicon::from_text("adr", include_str!("../resources/adr_lexicon.txt"))
}

/// The bundled stand-in drug-class lexicon.
pub fn bundled_drug_class_lexicon() -> Lexicon {
    Lexicon::from_text(
        "drugclass",
        include_str!("../resources/drug_class_lexicon.txt"),
    )
}

/// Collects all gold surface forms of one class from a training corpus
/// into a lexicon (used for the severity and factor lexicons).
pub fn harvest_lexicon(docs: &[AnnotatedDocument], class: EntityClass) -> Lexicon {
    let phrases: Vec<String> = docs
        .iter()
        .flat_map(|d| d.mentions_of(class))
        .map(|m| m.surface.clone())
        .collect();
    Lexicon::new(class.name().to_lowercase(), phrases)
}

#[derive(Debug, Clone)]
pub struct FeatureConfig {
    /// Context offsets run from `-window` to `+window`.
    pub window: usize,
    pub use_pos: bool,
    pub use_semtype: bool,
    pub use_clusters: bool,
    /// Emit `ADR_IN_CONTEXT=1` when an ADR token falls inside the window.
    pub adr_context: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window: 5,
            use_pos: true,
            use_semtype: true,
            use_clusters: true,
            adr_context: false,
        }
    }
}

/// Immutable resources consulted during extraction.
pub struct FeatureResources<'a> {
    pub lexicons: &'a [Lexicon],
    pub pos: Option<&'a dyn TokenAnnotator>,
    pub semtype: Option<&'a dyn TokenAnnotator>,
    pub clusters: Option<&'a ClusterModel>,
    pub lemmatizer: &'a dyn Lemmatizer,
}

impl<'a> FeatureResources<'a> {
    /// Lexicon-only resources (tests and lightweight configurations).
    pub fn minimal(lexicons: &'a [Lexicon]) -> FeatureResources<'a> {
        static LEMMATIZER: SuffixLemmatizer = SuffixLemmatizer;
        FeatureResources {
            lexicons,
            pos: None,
            semtype: None,
            clusters: None,
            lemmatizer: &LEMMATIZER,
        }
    }
}

fn annotator_tags(
    annotator: &dyn TokenAnnotator,
    tokens: &[Token],
) -> Vec<String> {
    annotator
        .annotate(tokens)
        .into_iter()
        .enumerate()
        .map(|(i, tag)| {
            tag.unwrap_or_else(|| {
                log::warn!(
                    "annotator {} failed on token {i}; using UNK",
                    annotator.name()
                );
                "UNK".to_string()
            })
        })
        .collect()
}

/// Extracts one feature vector per token. Keys are prefixed with the
/// signed window offset of the token they describe, e.g. `-1:LEMMA=no`,
/// `0:LEX:adr=1`, `2:CLUST=CL=7`.
pub fn extract_features(
    tokens: &[Token],
    config: &FeatureConfig,
    resources: &FeatureResources<'_>,
    adr_mentions: Option<&[MentionAnnotation]>,
) -> Vec<FeatureVector> {
    let n = tokens.len();
    let lemmas: Vec<String> = tokens
        .iter()
        .map(|t| resources.lemmatizer.lemma(&t.surface))
        .collect();
    let pos_tags = if config.use_pos {
        resources.pos.map(|a| annotator_tags(a, tokens))
    } else {
        None
    };
    let sem_tags = if config.use_semtype {
        resources.semtype.map(|a| annotator_tags(a, tokens))
    } else {
        None
    };
    let lexicon_hits: Vec<(&str, Vec<bool>)> = resources
        .lexicons
        .iter()
        .map(|lex| (lex.name.as_str(), lex.match_tokens(tokens)))
        .collect();
    let cluster_keys: Vec<Option<String>> = if config.use_clusters {
        match resources.clusters {
            Some(model) => lemmas
                .iter()
                .map(|lemma| Some(cluster_feature(lemma, model, lemma)))
                .collect(),
            None => vec![None; n],
        }
    } else {
        vec![None; n]
    };

    // token indices inside any ADR mention (span-midpoint rule)
    let adr_tokens: Vec<bool> = match adr_mentions {
        Some(mentions) => tokens
            .iter()
            .map(|t| {
                mentions.iter().any(|m| {
                    if m.is_discontinuous() {
                        return false;
                    }
                    let (s, e) = m.span();
                    let mid = t.midpoint();
                    mid >= s as f64 && mid < e as f64
                })
            })
            .collect(),
        None => vec![false; n],
    };

    let w = config.window as isize;
    (0..n)
        .map(|i| {
            let mut keys = BTreeSet::new();
            for o in -w..=w {
                let j = i as isize + o;
                if j < 0 || j >= n as isize {
                    continue;
                }
                let j = j as usize;
                keys.insert(format!("{o}:LEMMA={}", lemmas[j]));
                if let Some(tags) = &pos_tags {
                    keys.insert(format!("{o}:POS={}", tags[j]));
                }
                if let Some(tags) = &sem_tags {
                    keys.insert(format!("{o}:SEM={}", tags[j]));
                }
                for (name, hits) in &lexicon_hits {
                    if hits[j] {
                        keys.insert(format!("{o}:LEX:{name}=1"));
                    }
                }
                if let Some(key) = &cluster_keys[j] {
                    keys.insert(format!("{o}:CLUST={key}"));
                }
            }
            if config.adr_context {
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window + 1).min(n);
                if adr_tokens[lo..hi].iter().any(|&b| b) {
                    keys.insert("ADR_IN_CONTEXT=1".to_string());
                }
            }
            FeatureVector { keys }
        })
        .collect()
}
