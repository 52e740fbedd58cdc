//! Tokenization, BIO label encoding, and the token/mention round trip.
//!
//! Tokens are produced per text unit; annotations are aligned to tokens
//! as BIO labels for training, and predicted label sequences are merged
//! back into mention spans in document coordinates.

use std::fmt;

use crate::corpus::{EntityClass, MentionAnnotation};
use crate::error::{Error, Result};
use crate::structure::TextUnit;
use crate::text::cp_slice;

/// Punctuation detached from word edges as single-character tokens.
const DETACH: &[char] = &[
    '.', ',', ';', ':', '(', ')', '[', ']', '{', '}', '%', '"', '\'', '*', '†',
];

/// A token with its unit-local code-point span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub span: (usize, usize),
    pub index: usize,
}

impl Token {
    /// Code-point midpoint, used to resolve boundary-straddling overlaps.
    pub fn midpoint(&self) -> f64 {
        (self.span.0 + self.span.1) as f64 / 2.0
    }
}

/// BIO tag with the entity class carried by B and I.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioLabel {
    O,
    B(EntityClass),
    I(EntityClass),
}

impl BioLabel {
    pub fn class(self) -> Option<EntityClass> {
        match self {
            BioLabel::O => None,
            BioLabel::B(c) | BioLabel::I(c) => Some(c),
        }
    }

    pub fn parse(s: &str) -> Result<BioLabel> {
        if s == "O" {
            return Ok(BioLabel::O);
        }
        let (tag, class) = s
            .split_once('-')
            .ok_or_else(|| Error::Validation(format!("malformed label {s:?}")))?;
        let class = EntityClass::from_name(class)
            .ok_or_else(|| Error::Validation(format!("unknown entity class in label {s:?}")))?;
        match tag {
            "B" => Ok(BioLabel::B(class)),
            "I" => Ok(BioLabel::I(class)),
            _ => Err(Error::Validation(format!("malformed label {s:?}"))),
        }
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioLabel::O => f.write_str("O"),
            BioLabel::B(c) => write!(f, "B-{c}"),
            BioLabel::I(c) => write!(f, "I-{c}"),
        }
    }
}

/// Ordered label inventory shared by a tagger and its decoders. Index 0
/// is always O; each class contributes a B and an I label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<BioLabel>,
}

impl LabelSet {
    /// `[O, B-class, I-class]` for a single-class tagger.
    pub fn per_class(class: EntityClass) -> LabelSet {
        LabelSet {
            labels: vec![BioLabel::O, BioLabel::B(class), BioLabel::I(class)],
        }
    }

    /// O plus B/I for every class, in the given order.
    pub fn joint(classes: &[EntityClass]) -> LabelSet {
        let mut labels = vec![BioLabel::O];
        for &c in classes {
            labels.push(BioLabel::B(c));
            labels.push(BioLabel::I(c));
        }
        LabelSet { labels }
    }

    pub fn from_names(names: &[String]) -> Result<LabelSet> {
        let labels = names
            .iter()
            .map(|n| BioLabel::parse(n))
            .collect::<Result<Vec<_>>>()?;
        if labels.first() != Some(&BioLabel::O) {
            return Err(Error::Validation("label set must start with O".into()));
        }
        Ok(LabelSet { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, index: usize) -> BioLabel {
        self.labels[index]
    }

    pub fn index_of(&self, label: BioLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = BioLabel> + '_ {
        self.labels.iter().copied()
    }

    pub fn names(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.to_string()).collect()
    }

    /// Classes covered, in label order.
    pub fn classes(&self) -> Vec<EntityClass> {
        let mut out = Vec::new();
        for l in &self.labels {
            if let BioLabel::B(c) = l {
                out.push(*c);
            }
        }
        out
    }
}

/// A text unit with its tokens and one BIO label per token.
#[derive(Debug, Clone)]
pub struct TaggedSequence {
    pub unit: TextUnit,
    pub tokens: Vec<Token>,
    pub labels: Vec<BioLabel>,
}

impl TaggedSequence {
    pub fn new(unit: TextUnit, tokens: Vec<Token>, labels: Vec<BioLabel>) -> Result<TaggedSequence> {
        if tokens.len() != labels.len() {
            return Err(Error::Validation(format!(
                "label count {} does not match token count {}",
                labels.len(),
                tokens.len()
            )));
        }
        Ok(TaggedSequence {
            unit,
            tokens,
            labels,
        })
    }
}

/// Tokenizes a string: whitespace split, then leading/trailing
/// punctuation detached as single-character tokens. Spans are code-point
/// offsets into `text`.
pub fn tokenize_str(text: &str) -> Vec<Token> {
    let mut tokens: Vec<Token> = Vec::new();
    let mut run: Vec<(usize, char)> = Vec::new();

    let flush = |run: &mut Vec<(usize, char)>, tokens: &mut Vec<Token>| {
        if run.is_empty() {
            return;
        }
        let mut a = 0usize;
        let mut b = run.len();
        let mut lead = Vec::new();
        let mut trail = Vec::new();
        while b - a > 1 && DETACH.contains(&run[a].1) {
            lead.push(a);
            a += 1;
        }
        while b - a > 1 && DETACH.contains(&run[b - 1].1) {
            trail.push(b - 1);
            b -= 1;
        }
        trail.reverse();
        for &i in &lead {
            let (cp, ch) = run[i];
            tokens.push(Token {
                surface: ch.to_string(),
                span: (cp, cp + 1),
                index: 0,
            });
        }
        let core: String = run[a..b].iter().map(|&(_, c)| c).collect();
        tokens.push(Token {
            surface: core,
            span: (run[a].0, run[b - 1].0 + 1),
            index: 0,
        });
        for &i in &trail {
            let (cp, ch) = run[i];
            tokens.push(Token {
                surface: ch.to_string(),
                span: (cp, cp + 1),
                index: 0,
            });
        }
        run.clear();
    };

    for (cp, ch) in text.chars().enumerate() {
        if ch.is_whitespace() {
            flush(&mut run, &mut tokens);
        } else {
            run.push((cp, ch));
        }
    }
    flush(&mut run, &mut tokens);

    for (i, t) in tokens.iter_mut().enumerate() {
        t.index = i;
    }
    tokens
}

/// Tokenizes a unit's text (spans are unit-local).
pub fn tokenize(unit: &TextUnit) -> Vec<Token> {
    tokenize_str(&unit.text)
}

/// Aligns unit-local single-span mentions of `class` to BIO labels. A
/// token belongs to a mention when its span midpoint lies inside the
/// mention span; the first token of each covered run gets B, the rest I.
pub fn align_annotations(
    tokens: &[Token],
    mentions: &[MentionAnnotation],
    class: EntityClass,
) -> Result<Vec<BioLabel>> {
    let mut of_class: Vec<&MentionAnnotation> = mentions
        .iter()
        .filter(|m| m.class == class && !m.is_discontinuous())
        .collect();
    of_class.sort_by_key(|m| m.span());
    for w in of_class.windows(2) {
        if w[1].span().0 < w[0].span().1 {
            return Err(Error::Validation(format!(
                "overlapping {class} mentions {} and {}",
                w[0].id, w[1].id
            )));
        }
    }

    let mut labels = vec![BioLabel::O; tokens.len()];
    for m in of_class {
        let (s, e) = m.span();
        let mut first = true;
        for (i, t) in tokens.iter().enumerate() {
            let mid = t.midpoint();
            if mid >= s as f64 && mid < e as f64 {
                labels[i] = if first {
                    BioLabel::B(class)
                } else {
                    BioLabel::I(class)
                };
                first = false;
            }
        }
    }
    Ok(labels)
}

/// Merges a labeled sequence back into mentions with document-level
/// spans. An I following O, start-of-sequence, or a different class is
/// repaired to B.
pub fn decode_mentions(seq: &TaggedSequence) -> Vec<MentionAnnotation> {
    let mut mentions = Vec::new();
    let mut current: Option<(EntityClass, usize, usize)> = None; // class, first tok, last tok

    let close = |current: &mut Option<(EntityClass, usize, usize)>,
                     mentions: &mut Vec<MentionAnnotation>| {
        if let Some((class, first, last)) = current.take() {
            let local = (seq.tokens[first].span.0, seq.tokens[last].span.1);
            let doc_span = seq.unit.to_doc_span(local);
            let surface = cp_slice(&seq.unit.text, local.0, local.1)
                .unwrap_or_default()
                .to_string();
            mentions.push(MentionAnnotation {
                id: format!("m{}", mentions.len()),
                class,
                spans: vec![doc_span],
                surface,
            });
        }
    };

    for (i, label) in seq.labels.iter().enumerate() {
        match *label {
            BioLabel::O => close(&mut current, &mut mentions),
            BioLabel::B(c) => {
                close(&mut current, &mut mentions);
                current = Some((c, i, i));
            }
            BioLabel::I(c) => match current {
                Some((cur, _, ref mut last)) if cur == c => *last = i,
                _ => {
                    // orphan I: repair to B
                    close(&mut current, &mut mentions);
                    current = Some((c, i, i));
                }
            },
        }
    }
    close(&mut current, &mut mentions);
    mentions
}
