//! Sequence-labeling toolkit for tagging adverse drug reactions and
//! related entities in flattened drug-label text.
//!
//! The pieces, bottom to top: [`corpus`] owns documents and standoff
//! annotations; [`structure`] recovers headings, tables, lists, and
//! paragraphs from flat text and splits them into tagging units;
//! [`tokenize`] maps between character spans and BIO label sequences;
//! [`embeddings`], [`features`], [`crf`], [`blstm`], [`rules`], and
//! [`ensemble`] implement the taggers; [`eval`] scores them; and
//! [`pipeline`] wires everything behind a [`config::RunConfig`].

pub mod blstm;
pub mod config;
pub mod corpus;
pub mod crf;
pub mod embeddings;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod lexicon;
pub mod pipeline;
pub mod rules;
pub mod structure;
pub mod synth;
pub mod text;
pub mod tokenize;

pub use corpus::{AnnotatedDocument, CorpusStats, EntityClass, MentionAnnotation};
pub use error::{Error, Result};
pub use eval::{MatchMode, PrfScores, SplitSpec};
pub use lexicon::Lexicon;
pub use structure::{SplitStrategy, StructuredDocument, TextUnit};
pub use tokenize::{BioLabel, LabelSet, TaggedSequence, Token};
