//! Corpus model: documents, entity classes, standoff mention annotations,
//! corpus statistics, and the paired `.txt`/`.ann` file format.
//!
//! Annotation offsets are Unicode code-point offsets into the document
//! string, half-open `[start, end)`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::text::{cp_len, cp_slice};
use crate::tokenize::Token;

/// The six annotated entity classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityClass {
    AdverseReaction,
    Severity,
    Factor,
    DrugClass,
    Negation,
    Animal,
}

impl EntityClass {
    pub const ALL: [EntityClass; 6] = [
        EntityClass::AdverseReaction,
        EntityClass::Severity,
        EntityClass::Factor,
        EntityClass::DrugClass,
        EntityClass::Negation,
        EntityClass::Animal,
    ];

    /// Stable canonical name used in annotation and model files.
    pub fn name(self) -> &'static str {
        match self {
            EntityClass::AdverseReaction => "AdverseReaction",
            EntityClass::Severity => "Severity",
            EntityClass::Factor => "Factor",
            EntityClass::DrugClass => "DrugClass",
            EntityClass::Negation => "Negation",
            EntityClass::Animal => "Animal",
        }
    }

    pub fn from_name(name: &str) -> Option<EntityClass> {
        EntityClass::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A standoff mention annotation: one or more character spans plus the
/// surface text they cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionAnnotation {
    pub id: String,
    pub class: EntityClass,
    /// Half-open `(start, end)` code-point spans, sorted, non-overlapping.
    pub spans: Vec<(usize, usize)>,
    pub surface: String,
}

impl MentionAnnotation {
    /// Builds a mention and recomputes its surface from `doc_text`,
    /// validating the span invariants.
    pub fn new(
        id: impl Into<String>,
        class: EntityClass,
        spans: Vec<(usize, usize)>,
        doc_text: &str,
    ) -> Result<MentionAnnotation> {
        let id = id.into();
        if spans.is_empty() {
            return Err(Error::Validation(format!(
                "annotation {id}: empty span list"
            )));
        }
        let text_len = cp_len(doc_text);
        for &(s, e) in &spans {
            if s >= e {
                return Err(Error::Validation(format!(
                    "annotation {id}: span {s} {e} has start >= end"
                )));
            }
            if e > text_len {
                return Err(Error::Validation(format!(
                    "annotation {id}: span {s} {e} outside text of length {text_len}"
                )));
            }
        }
        let mut spans = spans;
        spans.sort_unstable();
        for w in spans.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::Validation(format!(
                    "annotation {id}: spans {:?} and {:?} overlap",
                    w[0], w[1]
                )));
            }
        }
        let surface = spans
            .iter()
            .map(|&(s, e)| cp_slice(doc_text, s, e).unwrap())
            .collect::<Vec<_>>()
            .join(" ");
        Ok(MentionAnnotation {
            id,
            class,
            spans,
            surface,
        })
    }

    pub fn is_discontinuous(&self) -> bool {
        self.spans.len() > 1
    }

    /// Start of the first span.
    pub fn start(&self) -> usize {
        self.spans[0].0
    }

    /// End of the last span.
    pub fn end(&self) -> usize {
        self.spans[self.spans.len() - 1].1
    }

    /// The single span of a continuous mention.
    pub fn span(&self) -> (usize, usize) {
        debug_assert!(!self.is_discontinuous());
        self.spans[0]
    }
}

/// A document with its standoff annotations.
#[derive(Debug, Clone)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub text: String,
    pub annotations: Vec<MentionAnnotation>,
}

impl AnnotatedDocument {
    pub fn new(
        doc_id: impl Into<String>,
        text: impl Into<String>,
        annotations: Vec<MentionAnnotation>,
    ) -> Result<AnnotatedDocument> {
        let doc_id = doc_id.into();
        let mut seen = HashSet::new();
        for ann in &annotations {
            if !seen.insert(ann.id.as_str()) {
                return Err(Error::Validation(format!(
                    "document {doc_id}: duplicate annotation id {}",
                    ann.id
                )));
            }
        }
        Ok(AnnotatedDocument {
            doc_id,
            text: text.into(),
            annotations,
        })
    }

    /// Continuous mentions of one class, sorted by start offset.
    pub fn mentions_of(&self, class: EntityClass) -> Vec<&MentionAnnotation> {
        let mut v: Vec<_> = self
            .annotations
            .iter()
            .filter(|a| a.class == class && !a.is_discontinuous())
            .collect();
        v.sort_by_key(|a| (a.start(), a.end()));
        v
    }
}

/// Per-class mention/token counts over a corpus.
#[derive(Debug, Clone, Default)]
pub struct ClassStats {
    pub mention_count: usize,
    pub token_count: usize,
}

impl ClassStats {
    pub fn avg_tokens_per_mention(&self) -> f64 {
        if self.mention_count == 0 {
            0.0
        } else {
            self.token_count as f64 / self.mention_count as f64
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorpusStats {
    pub per_class: BTreeMap<EntityClass, ClassStats>,
}

impl CorpusStats {
    pub fn class(&self, class: EntityClass) -> ClassStats {
        self.per_class.get(&class).cloned().unwrap_or_default()
    }
}

/// Annotation file formats understood by [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationFormat {
    /// One annotation per line: `ID<TAB>CLASS<TAB>SPANS<TAB>SURFACE`,
    /// `SPANS = start end(;start end)*`, `#` comment lines ignored.
    Standoff,
}

impl AnnotationFormat {
    pub fn from_id(id: &str) -> Result<AnnotationFormat> {
        match id {
            "standoff" => Ok(AnnotationFormat::Standoff),
            other => Err(Error::Config(format!("unknown annotation format {other:?}"))),
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_span_field(field: &str) -> Option<Vec<(usize, usize)>> {
    let mut spans = Vec::new();
    for part in field.split(';') {
        let mut it = part.split_whitespace();
        let s = it.next()?.parse().ok()?;
        let e = it.next()?.parse().ok()?;
        if it.next().is_some() {
            return None;
        }
        spans.push((s, e));
    }
    Some(spans)
}

fn parse_ann_file(path: &Path, doc_id: &str, text: &str) -> Result<Vec<MentionAnnotation>> {
    let content = read_to_string(path)?;
    let mut annotations = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::format(
                path,
                line_no,
                format!("expected 4 tab-separated fields, got {}", fields.len()),
            ));
        }
        let class = EntityClass::from_name(fields[1]).ok_or_else(|| {
            Error::Validation(format!(
                "document {doc_id}: unknown entity class {:?} at {}:{line_no}",
                fields[1],
                path.display()
            ))
        })?;
        let spans = parse_span_field(fields[2]).ok_or_else(|| {
            Error::format(path, line_no, format!("malformed span field {:?}", fields[2]))
        })?;
        let ann = MentionAnnotation::new(fields[0], class, spans, text)
            .map_err(|e| Error::Validation(format!("document {doc_id}: {e}")))?;
        if ann.surface != fields[3] {
            log::warn!(
                "{doc_id}: annotation {} surface {:?} differs from span text {:?}",
                ann.id,
                fields[3],
                ann.surface
            );
        }
        annotations.push(ann);
    }
    Ok(annotations)
}

/// Loads every `<docid>.txt` + `<docid>.ann` pair in `dir`, sorted by
/// document id.
pub fn load_corpus(dir: &Path, format: AnnotationFormat) -> Result<Vec<AnnotatedDocument>> {
    let AnnotationFormat::Standoff = format;
    let mut doc_ids = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                doc_ids.push(stem.to_string());
            }
        }
    }
    doc_ids.sort();

    let mut docs = Vec::new();
    for doc_id in doc_ids {
        let txt_path = dir.join(format!("{doc_id}.txt"));
        let ann_path = dir.join(format!("{doc_id}.ann"));
        let text = read_to_string(&txt_path)?;
        if !ann_path.exists() {
            return Err(Error::io(
                &ann_path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "missing annotation file"),
            ));
        }
        let annotations = parse_ann_file(&ann_path, &doc_id, &text)?;
        docs.push(AnnotatedDocument::new(doc_id, text, annotations)?);
    }
    Ok(docs)
}

/// Loads `.txt` documents without annotations (tagging input).
pub fn load_unannotated(dir: &Path) -> Result<Vec<AnnotatedDocument>> {
    let mut docs = Vec::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("txt"))
        .collect();
    paths.sort();
    for path in paths {
        let doc_id = path.file_stem().and_then(|s| s.to_str()).unwrap().to_string();
        let text = read_to_string(&path)?;
        docs.push(AnnotatedDocument::new(doc_id, text, Vec::new())?);
    }
    Ok(docs)
}

fn format_ann_line(ann: &MentionAnnotation) -> String {
    let spans = ann
        .spans
        .iter()
        .map(|&(s, e)| format!("{s} {e}"))
        .collect::<Vec<_>>()
        .join(";");
    format!("{}\t{}\t{}\t{}", ann.id, ann.class, spans, ann.surface)
}

/// Writes `<docid>.txt` + `<docid>.ann` pairs into `dir`.
pub fn write_corpus(docs: &[AnnotatedDocument], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for doc in docs {
        let txt_path = dir.join(format!("{}.txt", doc.doc_id));
        fs::write(&txt_path, &doc.text).map_err(|e| Error::io(&txt_path, e))?;
        let ann_path = dir.join(format!("{}.ann", doc.doc_id));
        let mut lines: Vec<String> = doc.annotations.iter().map(format_ann_line).collect();
        lines.push(String::new());
        fs::write(&ann_path, lines.join("\n")).map_err(|e| Error::io(&ann_path, e))?;
    }
    Ok(())
}

/// Drops discontinuous (multi-span) annotations from every document.
/// Returns the filtered corpus and the number of annotations removed.
pub fn filter_discontinuous(docs: &[AnnotatedDocument]) -> (Vec<AnnotatedDocument>, usize) {
    let mut dropped = 0usize;
    let filtered = docs
        .iter()
        .map(|doc| {
            let mut doc = doc.clone();
            let before = doc.annotations.len();
            doc.annotations.retain(|a| !a.is_discontinuous());
            dropped += before - doc.annotations.len();
            doc
        })
        .collect();
    (filtered, dropped)
}

/// Per-class mention and token counts. `tokenize` supplies the token
/// spans of a document text; a token belongs to a mention when the
/// token's span midpoint falls inside the mention span.
pub fn compute_stats<F>(docs: &[AnnotatedDocument], tokenize: F) -> CorpusStats
where
    F: Fn(&str) -> Vec<Token>,
{
    let mut stats = CorpusStats::default();
    for class in EntityClass::ALL {
        stats.per_class.insert(class, ClassStats::default());
    }
    for doc in docs {
        let tokens = tokenize(&doc.text);
        for ann in &doc.annotations {
            let entry = stats.per_class.get_mut(&ann.class).unwrap();
            entry.mention_count += 1;
            let (s, e) = ann.span();
            entry.token_count += tokens
                .iter()
                .filter(|t| {
                    let mid = (t.span.0 + t.span.1) as f64 / 2.0;
                    mid >= s as f64 && mid < e as f64
                })
                .count();
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::tokenize_str;

    fn mention(
        id: &str,
        class: EntityClass,
        spans: Vec<(usize, usize)>,
        text: &str,
    ) -> MentionAnnotation {
        MentionAnnotation::new(id, class, spans, text).unwrap()
    }

    #[test]
    fn surface_recomputed_from_offsets() {
        let text = "a rather severe headache";
        let m = mention("T1", EntityClass::Severity, vec![(9, 15)], text);
        assert_eq!(m.surface, "severe");
        assert!(!m.is_discontinuous());
    }

    #[test]
    fn start_ge_end_rejected() {
        let err = MentionAnnotation::new("T1", EntityClass::Severity, vec![(5, 3)], "0123456789");
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn span_outside_text_rejected() {
        let err = MentionAnnotation::new("T1", EntityClass::Animal, vec![(2, 40)], "short");
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn overlapping_spans_rejected() {
        let err = MentionAnnotation::new(
            "T1",
            EntityClass::Factor,
            vec![(0, 4), (2, 6)],
            "0123456789",
        );
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = "nausea and rash";
        let anns = vec![
            mention("T1", EntityClass::AdverseReaction, vec![(0, 6)], text),
            mention("T1", EntityClass::AdverseReaction, vec![(11, 15)], text),
        ];
        assert!(AnnotatedDocument::new("d", text, anns).is_err());
    }

    #[test]
    fn filter_drops_multi_span_only() {
        let text = "abcd efgh ijkl";
        let anns = vec![
            mention("T1", EntityClass::AdverseReaction, vec![(0, 4)], text),
            mention("T2", EntityClass::AdverseReaction, vec![(0, 4), (10, 14)], text),
            mention("T3", EntityClass::Severity, vec![(5, 9)], text),
        ];
        let doc = AnnotatedDocument::new("d", text, anns).unwrap();
        let (filtered, dropped) = filter_discontinuous(&[doc]);
        assert_eq!(dropped, 1);
        assert_eq!(filtered[0].annotations.len(), 2);
        assert!(filtered[0].annotations.iter().all(|a| !a.is_discontinuous()));
    }

    #[test]
    fn filter_is_idempotent() {
        let text = "abcd efgh ijkl";
        let anns = vec![
            mention("T1", EntityClass::AdverseReaction, vec![(0, 4), (10, 14)], text),
            mention("T2", EntityClass::Severity, vec![(5, 9)], text),
        ];
        let doc = AnnotatedDocument::new("d", text, anns).unwrap();
        let (once, d1) = filter_discontinuous(&[doc]);
        let (twice, d2) = filter_discontinuous(&once);
        assert_eq!(d1, 1);
        assert_eq!(d2, 0);
        assert_eq!(once[0].annotations.len(), twice[0].annotations.len());
    }

    #[test]
    fn dropped_fraction_matches_multi_span_share() {
        // 1000 annotations of which 68 are multi-span: 6.8% dropped
        let text = "abcd efgh ijkl";
        let mut anns = Vec::new();
        for i in 0..1000 {
            let spans = if i < 68 {
                vec![(0, 4), (10, 14)]
            } else {
                vec![(5, 9)]
            };
            anns.push(mention(&format!("T{i}"), EntityClass::AdverseReaction, spans, text));
        }
        let doc = AnnotatedDocument::new("d", text, anns).unwrap();
        let (_, dropped) = filter_discontinuous(&[doc]);
        assert_eq!(dropped, 68);
        assert!((dropped as f64 / 1000.0 - 0.068).abs() < 1e-12);
    }

    #[test]
    fn stats_counts_tokens_inside_mentions() {
        let text = "severe aplastic anemia was reported";
        let anns = vec![
            mention("T1", EntityClass::Severity, vec![(0, 6)], text),
            mention("T2", EntityClass::AdverseReaction, vec![(7, 22)], text),
        ];
        let doc = AnnotatedDocument::new("d", text, anns).unwrap();
        let stats = compute_stats(&[doc], tokenize_str);
        assert_eq!(stats.class(EntityClass::Severity).mention_count, 1);
        assert_eq!(stats.class(EntityClass::Severity).token_count, 1);
        assert_eq!(stats.class(EntityClass::AdverseReaction).token_count, 2);
        assert_eq!(
            stats
                .class(EntityClass::AdverseReaction)
                .avg_tokens_per_mention(),
            2.0
        );
    }

    #[test]
    fn stats_empty_corpus_all_zero() {
        let stats = compute_stats(&[], tokenize_str);
        for class in EntityClass::ALL {
            assert_eq!(stats.class(class).mention_count, 0);
            assert_eq!(stats.class(class).avg_tokens_per_mention(), 0.0);
        }
    }

    #[test]
    fn stats_invariant_under_doc_order() {
        let t1 = "nausea was common";
        let t2 = "rash and fever";
        let d1 = AnnotatedDocument::new(
            "a",
            t1,
            vec![mention("T1", EntityClass::AdverseReaction, vec![(0, 6)], t1)],
        )
        .unwrap();
        let d2 = AnnotatedDocument::new(
            "b",
            t2,
            vec![
                mention("T1", EntityClass::AdverseReaction, vec![(0, 4)], t2),
                mention("T2", EntityClass::AdverseReaction, vec![(9, 14)], t2),
            ],
        )
        .unwrap();
        let s_ab = compute_stats(&[d1.clone(), d2.clone()], tokenize_str);
        let s_ba = compute_stats(&[d2, d1], tokenize_str);
        assert_eq!(
            s_ab.class(EntityClass::AdverseReaction).mention_count,
            s_ba.class(EntityClass::AdverseReaction).mention_count
        );
    }

    #[test]
    fn table_ratio_arithmetic() {
        let adr = ClassStats {
            mention_count: 12_792,
            token_count: 21_258,
        };
        assert!((adr.avg_tokens_per_mention() - 1.66).abs() < 0.005);
        let animal = ClassStats {
            mention_count: 44,
            token_count: 44,
        };
        assert_eq!(animal.avg_tokens_per_mention(), 1.0);
    }

    #[test]
    fn corpus_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let text = "no cases of anaphylaxis in rats";
        let anns = vec![
            mention("T1", EntityClass::Negation, vec![(0, 2)], text),
            mention("T2", EntityClass::AdverseReaction, vec![(12, 23)], text),
            mention("T3", EntityClass::Animal, vec![(27, 31)], text),
        ];
        let doc = AnnotatedDocument::new("doc01", text, anns).unwrap();
        write_corpus(std::slice::from_ref(&doc), dir.path()).unwrap();
        let loaded = load_corpus(dir.path(), AnnotationFormat::Standoff).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].doc_id, doc.doc_id);
        assert_eq!(loaded[0].text, doc.text);
        assert_eq!(loaded[0].annotations, doc.annotations);
    }

    #[test]
    fn load_missing_ann_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("doc01.txt"), "text").unwrap();
        let err = load_corpus(dir.path(), AnnotationFormat::Standoff);
        match err {
            Err(Error::Io { path, .. }) => {
                assert!(path.to_string_lossy().contains("doc01.ann"))
            }
            other => panic!("expected io error, got {other:?}"),
        }
    }

    #[test]
    fn load_empty_annotations() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("doc01.txt"), "plain text only").unwrap();
        fs::write(dir.path().join("doc01.ann"), "# no annotations\n").unwrap();
        let docs = load_corpus(dir.path(), AnnotationFormat::Standoff).unwrap();
        assert_eq!(docs.len(), 1);
        assert!(docs[0].annotations.is_empty());
    }

    #[test]
    fn load_fixture_line() {
        let dir = tempfile::tempdir().unwrap();
        let text = "a rather severe headache";
        fs::write(dir.path().join("d.txt"), text).unwrap();
        fs::write(dir.path().join("d.ann"), "T1\tSeverity\t9 15\tsevere\n").unwrap();
        let docs = load_corpus(dir.path(), AnnotationFormat::Standoff).unwrap();
        let ann = &docs[0].annotations[0];
        assert_eq!(ann.class, EntityClass::Severity);
        assert_eq!(ann.spans, vec![(9, 15)]);
        assert_eq!(ann.surface, "severe");
    }

    #[test]
    fn unknown_class_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("d.txt"), "text here").unwrap();
        fs::write(dir.path().join("d.ann"), "T1\tBogus\t0 4\ttext\n").unwrap();
        assert!(matches!(
            load_corpus(dir.path(), AnnotationFormat::Standoff),
            Err(Error::Validation(_))
        ));
    }
}
