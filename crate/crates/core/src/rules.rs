//! Knowledge-driven taggers for the Negation and Animal classes. Both
//! run on sub-element units (table cells, list items).

use crate::corpus::{EntityClass, MentionAnnotation};
use crate::lexicon::Lexicon;
use crate::structure::TextUnit;
use crate::text::cp_slice;
use crate::tokenize::Token;

/// Negation cue phrases plus phrases that cancel a detection when they
/// appear inside the cue's scope.
#[derive(Debug, Clone)]
pub struct NegationResource {
    pub triggers: Lexicon,
    pub ignore_phrases: Lexicon,
}

impl NegationResource {
    pub fn bundled() -> NegationResource {
        NegationResource {
            triggers: Lexicon::from_text(
                "negation",
                include_str!("../resources/negation_triggers.txt"),
            ),
            ignore_phrases: Lexicon::from_text(
                "negation_ignore",
                include_str!("../resources/negation_ignore.txt"),
            ),
        }
    }
}

/// Laboratory animal species names, singular and plural forms.
#[derive(Debug, Clone)]
pub struct AnimalResource {
    pub species: Lexicon,
}

impl AnimalResource {
    pub fn bundled() -> AnimalResource {
        AnimalResource {
            species: Lexicon::from_text(
                "animal",
                include_str!("../resources/animal_species.txt"),
            ),
        }
    }
}

/// Tokens whose scope ends before them: sentence-final punctuation and
/// contrastive conjunctions.
fn is_scope_stop(token: &Token) -> bool {
    matches!(token.surface.as_str(), "." | ";" | ":")
        || matches!(token.surface.to_lowercase().as_str(), "but" | "however")
}

const SCOPE_MAX_TOKENS: usize = 10;

fn mention_from_tokens(
    unit: &TextUnit,
    tokens: &[Token],
    first: usize,
    last: usize,
    class: EntityClass,
    id: String,
) -> MentionAnnotation {
    let local = (tokens[first].span.0, tokens[last].span.1);
    MentionAnnotation {
        id,
        class,
        spans: vec![unit.to_doc_span(local)],
        surface: cp_slice(&unit.text, local.0, local.1)
            .unwrap_or_default()
            .to_string(),
    }
}

/// Emits a Negation mention over each trigger whose scope contains an
/// ADR token, unless an ignore phrase appears in the scope. The scope
/// runs from the trigger to the earliest of: end of unit, the next
/// sentence-final punctuation, the next contrastive conjunction, or ten
/// tokens. The emitted extent covers the trigger tokens only.
///
/// `adr_mentions` must be in unit-local coordinates.
pub fn tag_negations(
    unit: &TextUnit,
    tokens: &[Token],
    adr_mentions: &[MentionAnnotation],
    resource: &NegationResource,
) -> Vec<MentionAnnotation> {
    let adr_token: Vec<bool> = tokens
        .iter()
        .map(|t| {
            adr_mentions.iter().any(|m| {
                if m.is_discontinuous() {
                    return false;
                }
                let (s, e) = m.span();
                let mid = t.midpoint();
                mid >= s as f64 && mid < e as f64
            })
        })
        .collect();

    let mut mentions = Vec::new();
    for (ts, te) in resource.triggers.match_spans(tokens) {
        let mut scope_end = (ts + SCOPE_MAX_TOKENS).min(tokens.len());
        for (j, token) in tokens.iter().enumerate().take(scope_end).skip(te) {
            if is_scope_stop(token) {
                scope_end = j;
                break;
            }
        }
        let scope = &tokens[ts..scope_end];
        if !resource.ignore_phrases.match_spans(scope).is_empty() {
            continue;
        }
        if !adr_token[ts..scope_end].iter().any(|&b| b) {
            continue;
        }
        mentions.push(mention_from_tokens(
            unit,
            tokens,
            ts,
            te - 1,
            EntityClass::Negation,
            format!("n{}", mentions.len()),
        ));
    }
    mentions
}

/// Emits a single-token Animal mention for every token found in the
/// species lexicon.
pub fn tag_animals(
    unit: &TextUnit,
    tokens: &[Token],
    resource: &AnimalResource,
) -> Vec<MentionAnnotation> {
    let mut mentions = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        if resource.species.contains(&token.surface) {
            mentions.push(mention_from_tokens(
                unit,
                tokens,
                i,
                i,
                EntityClass::Animal,
                format!("a{}", mentions.len()),
            ));
        }
    }
    mentions
}
