//! End-to-end pipeline: parse structure, split into units, tokenize,
//! train or load the configured taggers, tag ADR mentions first, then
//! the related entities with the ADR predictions as context, decode
//! mentions, write annotations, and evaluate.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;

use crate::blstm::{
    build_input_vectors, train_blstm, BlstmExample, BlstmModel, BlstmTrainConfig,
};
use crate::config::{RunConfig, TaggerKind};
use crate::corpus::{
    filter_discontinuous, load_corpus, write_corpus, AnnotatedDocument, AnnotationFormat,
    EntityClass, MentionAnnotation,
};
use crate::crf::{train_crf, CrfExample, CrfModel};
use crate::embeddings::{
    kmeans, train_cbow, CbowConfig, ClusterModel, EmbeddingModel, Lemmatizer, SuffixLemmatizer,
};
use crate::ensemble::{
    load_ensemble, save_ensemble, stacked_train, voting_train, EnsembleExample, StackedEnsemble,
    VotingEnsemble,
};
use crate::error::{Error, Result};
use crate::eval::{
    mention_prf, split_corpus, token_prf, MatchMode, PrfCounts, PrfScores,
};
use crate::features::{
    bundled_adr_lexicon, bundled_drug_class_lexicon, extract_features, harvest_lexicon,
    FeatureConfig, FeatureResources, FeatureVector, RulePosTagger, SemTypeAnnotator,
};
use crate::lexicon::Lexicon;
use crate::rules::{tag_animals, tag_negations, AnimalResource, NegationResource};
use crate::structure::{parse_structure, split_document, SplitStrategy, TextUnit};
use crate::text::cp_len;
use crate::tokenize::{
    align_annotations, decode_mentions, tokenize, BioLabel, LabelSet, TaggedSequence, Token,
};

/// Ordered parallel map over documents; identical output for any `jobs`.
pub fn par_map<T: Sync, R: Send>(
    jobs: usize,
    items: &[T],
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let mut out: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (chunk_items, out_chunk) in items.chunks(chunk).zip(out.chunks_mut(chunk)) {
            let f = &f;
            scope.spawn(move || {
                for (slot, item) in out_chunk.iter_mut().zip(chunk_items) {
                    *slot = Some(f(item));
                }
            });
        }
    });
    out.into_iter().map(|r| r.expect("par_map slot filled")).collect()
}

/// A tokenized text unit.
#[derive(Debug, Clone)]
pub struct UnitTokens {
    pub unit: TextUnit,
    pub tokens: Vec<Token>,
}

/// A document with its recovered structure and both unit splittings
/// (units with no tokens are dropped).
#[derive(Debug, Clone)]
pub struct PreparedDoc {
    pub doc: AnnotatedDocument,
    pub whole_units: Vec<UnitTokens>,
    pub sub_units: Vec<UnitTokens>,
}

pub fn prepare_doc(doc: &AnnotatedDocument) -> PreparedDoc {
    let structured = parse_structure(&doc.text);
    let collect = |strategy: SplitStrategy| -> Vec<UnitTokens> {
        split_document(&structured, strategy)
            .into_iter()
            .filter_map(|unit| {
                let tokens = tokenize(&unit);
                if tokens.is_empty() {
                    None
                } else {
                    Some(UnitTokens { unit, tokens })
                }
            })
            .collect()
    };
    PreparedDoc {
        doc: doc.clone(),
        whole_units: collect(SplitStrategy::WholeElement),
        sub_units: collect(SplitStrategy::SubElement),
    }
}

/// Projects document-level continuous mentions into unit coordinates,
/// clipping at the unit boundary.
pub fn project_mentions(ut: &UnitTokens, mentions: &[MentionAnnotation]) -> Vec<MentionAnnotation> {
    let unit_len = cp_len(&ut.unit.text);
    mentions
        .iter()
        .filter(|m| !m.is_discontinuous())
        .filter_map(|m| {
            ut.unit.project(m.span(), unit_len).map(|local| MentionAnnotation {
                id: m.id.clone(),
                class: m.class,
                spans: vec![local],
                surface: String::new(),
            })
        })
        .collect()
}

/// Gold labels for a unit over a joint label set: per-class alignment
/// merged in label-set class order (first class wins on conflict).
pub fn gold_labels(
    ut: &UnitTokens,
    doc: &AnnotatedDocument,
    labels: &LabelSet,
) -> Result<Vec<BioLabel>> {
    let mut merged = vec![BioLabel::O; ut.tokens.len()];
    for class in labels.classes() {
        let doc_mentions: Vec<MentionAnnotation> =
            doc.mentions_of(class).into_iter().cloned().collect();
        let local = project_mentions(ut, &doc_mentions);
        let aligned = align_annotations(&ut.tokens, &local, class)?;
        for (slot, label) in merged.iter_mut().zip(aligned) {
            if *slot == BioLabel::O {
                *slot = label;
            }
        }
    }
    Ok(merged)
}

/// Embedding and lexicon resources shared by the feature-based taggers.
pub struct SharedResources {
    pub generic: EmbeddingModel,
    pub target: EmbeddingModel,
    pub clusters: ClusterModel,
    /// ADR lexicon alone (the ADR-specific feature set).
    pub adr_lexicons: Vec<Lexicon>,
    /// ADR, drug-class, and harvested severity/factor lexicons (the
    /// related-entity feature set).
    pub all_lexicons: Vec<Lexicon>,
    pub pos: RulePosTagger,
    pub semtype: SemTypeAnnotator,
    pub lemmatizer: SuffixLemmatizer,
}

impl SharedResources {
    /// Token surfaces lemmatized for embedding lookup.
    pub fn lookup_keys(&self, tokens: &[Token]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| self.lemmatizer.lemma(&t.surface))
            .collect()
    }
}

/// Which feature set a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    /// ADR lexicon only, no ADR-in-context flag (ADR tagger, ensembles).
    AdrSpecific,
    /// All lexicons plus the ADR-in-context flag (related-entity CRFs).
    RelatedEntity,
}

/// The trained tagger collection for one run configuration.
pub struct TaggerSuite {
    pub assignments: BTreeMap<EntityClass, TaggerKind>,
    pub feature_options: crate::config::FeatureOptions,
    pub resources: SharedResources,
    pub crf_models: BTreeMap<EntityClass, CrfModel>,
    pub blstm: Option<BlstmModel>,
    pub voting: Option<VotingEnsemble>,
    pub stacked: Option<StackedEnsemble>,
    pub negation: Option<NegationResource>,
    pub animal: Option<AnimalResource>,
}

impl TaggerSuite {
    fn feature_config(&self, set: FeatureSet) -> FeatureConfig {
        FeatureConfig {
            window: self.feature_options.window,
            use_pos: self.feature_options.pos,
            use_semtype: self.feature_options.semtype,
            use_clusters: self.feature_options.clusters,
            adr_context: set == FeatureSet::RelatedEntity,
        }
    }

    /// Feature vectors for one unit. `adr_mentions` must be unit-local.
    pub fn extract(
        &self,
        ut: &UnitTokens,
        set: FeatureSet,
        adr_mentions: Option<&[MentionAnnotation]>,
    ) -> Vec<FeatureVector> {
        let lexicons = match set {
            FeatureSet::AdrSpecific => &self.resources.adr_lexicons,
            FeatureSet::RelatedEntity => &self.resources.all_lexicons,
        };
        let resources = FeatureResources {
            lexicons,
            pos: Some(&self.resources.pos),
            semtype: Some(&self.resources.semtype),
            clusters: Some(&self.resources.clusters),
            lemmatizer: &self.resources.lemmatizer,
        };
        extract_features(&ut.tokens, &self.feature_config(set), &resources, adr_mentions)
    }

    /// Dense input vectors for the BLSTM-based taggers.
    pub fn input_vectors(&self, ut: &UnitTokens) -> Vec<Array1<f64>> {
        let keys = self.resources.lookup_keys(&ut.tokens);
        build_input_vectors(&keys, &self.resources.generic, &self.resources.target)
    }

    /// Strategy used by each class's tagger.
    pub fn strategy_of(&self, class: EntityClass) -> SplitStrategy {
        match self.assignments.get(&class) {
            Some(TaggerKind::Rule) => SplitStrategy::SubElement,
            _ => SplitStrategy::WholeElement,
        }
    }
}

fn stage_err(stage: &str, doc_id: &str, err: Error) -> Error {
    Error::Runtime(format!("stage {stage}: document {doc_id}: {err}"))
}

fn build_resources(
    config: &RunConfig,
    train_docs: &[AnnotatedDocument],
    prepared_train: &[PreparedDoc],
) -> Result<SharedResources> {
    let lemmatizer = SuffixLemmatizer;
    let target = match &config.embeddings.target_model {
        Some(path) => EmbeddingModel::load(path)?,
        None => {
            let sentences: Vec<Vec<String>> = prepared_train
                .iter()
                .flat_map(|p| &p.whole_units)
                .map(|ut| {
                    ut.tokens
                        .iter()
                        .map(|t| lemmatizer.lemma(&t.surface))
                        .collect()
                })
                .collect();
            let cbow = CbowConfig {
                dim: config.embeddings.dim,
                window: config.embeddings.window,
                negatives: config.embeddings.negatives,
                min_count: config.embeddings.min_count,
                epochs: config.embeddings.epochs,
                learning_rate: config.embeddings.learning_rate,
                seed: config.embeddings.seed,
            };
            train_cbow(&sentences, &cbow)?
        }
    };
    let generic = match &config.embeddings.generic_model {
        Some(path) => EmbeddingModel::load(path)?,
        None => EmbeddingModel::empty(config.embeddings.dim),
    };
    let clusters = match &config.embeddings.clusters {
        Some(path) => ClusterModel::load(path)?,
        None => {
            let mut k = config.embeddings.kmeans_k;
            if target.vocab_size() < k {
                log::warn!(
                    "vocabulary of {} words is smaller than kmeans_k={k}; clustering with k={}",
                    target.vocab_size(),
                    target.vocab_size()
                );
                k = target.vocab_size();
            }
            kmeans(&target, k, config.embeddings.seed)?
        }
    };
    let adr = match &config.lexicons.adr {
        Some(path) => Lexicon::from_file("adr", path)?,
        None => bundled_adr_lexicon(),
    };
    let drug_class = match &config.lexicons.drug_class {
        Some(path) => Lexicon::from_file("drugclass", path)?,
        None => bundled_drug_class_lexicon(),
    };
    let severity = harvest_lexicon(train_docs, EntityClass::Severity);
    let factor = harvest_lexicon(train_docs, EntityClass::Factor);
    Ok(SharedResources {
        generic,
        target,
        clusters,
        adr_lexicons: vec![adr.clone()],
        all_lexicons: vec![adr, drug_class, severity, factor],
        pos: RulePosTagger,
        semtype: SemTypeAnnotator::bundled(),
        lemmatizer,
    })
}

fn negation_resource(config: &RunConfig) -> Result<NegationResource> {
    let bundled = NegationResource::bundled();
    Ok(NegationResource {
        triggers: match &config.rules.negation_triggers {
            Some(path) => Lexicon::from_file("negation", path)?,
            None => bundled.triggers,
        },
        ignore_phrases: match &config.rules.negation_ignore {
            Some(path) => Lexicon::from_file("negation_ignore", path)?,
            None => bundled.ignore_phrases,
        },
    })
}

fn animal_resource(config: &RunConfig) -> Result<AnimalResource> {
    Ok(AnimalResource {
        species: match &config.rules.animal_species {
            Some(path) => Lexicon::from_file("animal", path)?,
            None => AnimalResource::bundled().species,
        },
    })
}

/// Trains every configured tagger on the training split, using the
/// validation split for BLSTM early stopping.
pub fn train_suite(
    config: &RunConfig,
    train_docs: &[AnnotatedDocument],
    validation_docs: &[AnnotatedDocument],
) -> Result<TaggerSuite> {
    let prepared_train: Vec<PreparedDoc> =
        par_map(config.jobs, train_docs, prepare_doc);
    let prepared_val: Vec<PreparedDoc> =
        par_map(config.jobs, validation_docs, prepare_doc);

    let resources = build_resources(config, train_docs, &prepared_train)?;
    let mut suite = TaggerSuite {
        assignments: config.taggers.clone(),
        feature_options: config.features.clone(),
        resources,
        crf_models: BTreeMap::new(),
        blstm: None,
        voting: None,
        stacked: None,
        negation: None,
        animal: None,
    };

    if suite.assignments.get(&EntityClass::Negation) == Some(&TaggerKind::Rule) {
        suite.negation = Some(negation_resource(config)?);
    }
    if suite.assignments.get(&EntityClass::Animal) == Some(&TaggerKind::Rule) {
        suite.animal = Some(animal_resource(config)?);
    }

    // per-class CRFs
    for class in config.classes_of(TaggerKind::Crf) {
        let set = if class == EntityClass::AdverseReaction {
            FeatureSet::AdrSpecific
        } else {
            FeatureSet::RelatedEntity
        };
        let labels = LabelSet::per_class(class);
        let mut examples = Vec::new();
        for p in &prepared_train {
            let gold_adr: Vec<MentionAnnotation> = p
                .doc
                .mentions_of(EntityClass::AdverseReaction)
                .into_iter()
                .cloned()
                .collect();
            for ut in &p.whole_units {
                let adr_local = project_mentions(ut, &gold_adr);
                let features = suite.extract(ut, set, Some(&adr_local));
                let labels_seq = gold_labels(ut, &p.doc, &labels)
                    .map_err(|e| stage_err("train-crf", &p.doc.doc_id, e))?;
                examples.push(CrfExample {
                    features,
                    labels: labels_seq,
                });
            }
        }
        if examples.is_empty() {
            return Err(Error::Config(format!(
                "training split produced no sequences for class {class}"
            )));
        }
        let model = train_crf(&examples, labels, &config.crf)?;
        suite.crf_models.insert(class, model);
    }

    let blstm_config = BlstmTrainConfig {
        learning_rate: config.blstm.learning_rate,
        epochs: config.blstm.epochs,
        patience: config.blstm.patience,
        batch_size: config.blstm.batch_size,
        seed: config.blstm.seed,
    };
    let collect_blstm = |suite: &TaggerSuite,
                         prepared: &[PreparedDoc],
                         labels: &LabelSet|
     -> Result<Vec<BlstmExample>> {
        let mut out = Vec::new();
        for p in prepared {
            for ut in &p.whole_units {
                out.push(BlstmExample {
                    inputs: suite.input_vectors(ut),
                    labels: gold_labels(ut, &p.doc, labels)
                        .map_err(|e| stage_err("train-blstm", &p.doc.doc_id, e))?,
                });
            }
        }
        Ok(out)
    };

    // one joint BLSTM over all blstm-assigned classes
    let blstm_classes = config.classes_of(TaggerKind::Blstm);
    if !blstm_classes.is_empty() {
        let labels = LabelSet::joint(&blstm_classes);
        let train = collect_blstm(&suite, &prepared_train, &labels)?;
        let validation = collect_blstm(&suite, &prepared_val, &labels)?;
        let input_dim = suite.resources.generic.dim() + suite.resources.target.dim();
        let init = BlstmModel::new(
            input_dim,
            config.blstm.hidden,
            labels,
            config.blstm.dropout,
            config.blstm.seed,
        );
        let (model, log) = train_blstm(init, &train, &validation, &blstm_config)?;
        log::info!(
            "blstm: best validation F1 {:.2} at epoch {}",
            log.best_validation_f1,
            log.best_epoch
        );
        suite.blstm = Some(model);
    }

    let collect_ensemble = |suite: &TaggerSuite,
                            prepared: &[PreparedDoc],
                            labels: &LabelSet|
     -> Result<Vec<EnsembleExample>> {
        let mut out = Vec::new();
        for p in prepared {
            for ut in &p.whole_units {
                out.push(EnsembleExample {
                    features: suite.extract(ut, FeatureSet::AdrSpecific, None),
                    inputs: suite.input_vectors(ut),
                    labels: gold_labels(ut, &p.doc, labels)
                        .map_err(|e| stage_err("train-ensemble", &p.doc.doc_id, e))?,
                });
            }
        }
        Ok(out)
    };

    let voting_classes = config.classes_of(TaggerKind::Voting);
    if !voting_classes.is_empty() {
        let labels = LabelSet::joint(&voting_classes);
        let train = collect_ensemble(&suite, &prepared_train, &labels)?;
        let validation = collect_ensemble(&suite, &prepared_val, &labels)?;
        let input_dim = suite.resources.generic.dim() + suite.resources.target.dim();
        let init = BlstmModel::new(
            input_dim,
            config.blstm.hidden,
            labels.clone(),
            config.blstm.dropout,
            config.blstm.seed,
        );
        let (model, _) = voting_train(
            &train,
            &validation,
            labels,
            &config.crf,
            init,
            &blstm_config,
        )?;
        suite.voting = Some(model);
    }

    let stacked_classes = config.classes_of(TaggerKind::Stacked);
    if !stacked_classes.is_empty() {
        let labels = LabelSet::joint(&stacked_classes);
        let train = collect_ensemble(&suite, &prepared_train, &labels)?;
        let validation = collect_ensemble(&suite, &prepared_val, &labels)?;
        let input_dim =
            suite.resources.generic.dim() + suite.resources.target.dim() + labels.len();
        let init = BlstmModel::new(
            input_dim,
            config.blstm.hidden,
            labels.clone(),
            config.blstm.dropout,
            config.blstm.seed,
        );
        let (model, _) = stacked_train(
            &train,
            &validation,
            labels,
            &config.crf,
            init,
            &blstm_config,
        )?;
        suite.stacked = Some(model);
    }

    Ok(suite)
}

impl TaggerSuite {
    /// Mentions predicted by one model group for one document. Groups
    /// whose label set includes AdverseReaction run in the first stage;
    /// the rest receive the predicted ADR mentions.
    fn run_group(
        &self,
        kind: TaggerKind,
        prepared: &PreparedDoc,
        adr_mentions: &[MentionAnnotation],
    ) -> Result<Vec<MentionAnnotation>> {
        let mut out = Vec::new();
        match kind {
            TaggerKind::Crf => {
                for (&class, model) in &self.crf_models {
                    let set = if class == EntityClass::AdverseReaction {
                        FeatureSet::AdrSpecific
                    } else {
                        FeatureSet::RelatedEntity
                    };
                    for ut in &prepared.whole_units {
                        let adr_local = project_mentions(ut, adr_mentions);
                        let features = self.extract(ut, set, Some(&adr_local));
                        let labels = model.viterbi(&features)?;
                        let seq =
                            TaggedSequence::new(ut.unit.clone(), ut.tokens.clone(), labels)?;
                        out.extend(decode_mentions(&seq));
                    }
                }
            }
            TaggerKind::Blstm => {
                if let Some(model) = &self.blstm {
                    for ut in &prepared.whole_units {
                        let labels = model.predict_labels(&self.input_vectors(ut))?;
                        let seq =
                            TaggedSequence::new(ut.unit.clone(), ut.tokens.clone(), labels)?;
                        out.extend(decode_mentions(&seq));
                    }
                }
            }
            TaggerKind::Voting => {
                if let Some(model) = &self.voting {
                    for ut in &prepared.whole_units {
                        let features = self.extract(ut, FeatureSet::AdrSpecific, None);
                        let labels = model.predict(&features, &self.input_vectors(ut))?;
                        let seq =
                            TaggedSequence::new(ut.unit.clone(), ut.tokens.clone(), labels)?;
                        out.extend(decode_mentions(&seq));
                    }
                }
            }
            TaggerKind::Stacked => {
                if let Some(model) = &self.stacked {
                    for ut in &prepared.whole_units {
                        let features = self.extract(ut, FeatureSet::AdrSpecific, None);
                        let labels = model.predict(&features, &self.input_vectors(ut))?;
                        let seq =
                            TaggedSequence::new(ut.unit.clone(), ut.tokens.clone(), labels)?;
                        out.extend(decode_mentions(&seq));
                    }
                }
            }
            TaggerKind::Rule => {
                for ut in &prepared.sub_units {
                    if let Some(resource) = &self.negation {
                        let adr_local = project_mentions(ut, adr_mentions);
                        out.extend(tag_negations(&ut.unit, &ut.tokens, &adr_local, resource));
                    }
                    if let Some(resource) = &self.animal {
                        out.extend(tag_animals(&ut.unit, &ut.tokens, resource));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Tags one prepared document: ADR-producing groups first, then the
    /// related-entity groups with the predicted ADR mentions available.
    pub fn tag_prepared(&self, prepared: &PreparedDoc) -> Result<AnnotatedDocument> {
        let mut kinds: Vec<TaggerKind> = self.assignments.values().copied().collect();
        kinds.sort();
        kinds.dedup();

        let adr_kind = self.assignments.get(&EntityClass::AdverseReaction).copied();
        let mut mentions: Vec<MentionAnnotation> = Vec::new();
        let mut adr_mentions: Vec<MentionAnnotation> = Vec::new();
        if let Some(kind) = adr_kind {
            let produced = self.run_group(kind, prepared, &[])?;
            adr_mentions = produced
                .iter()
                .filter(|m| m.class == EntityClass::AdverseReaction)
                .cloned()
                .collect();
            mentions.extend(produced);
        }
        for kind in kinds {
            if Some(kind) == adr_kind {
                continue;
            }
            mentions.extend(self.run_group(kind, prepared, &adr_mentions)?);
        }

        mentions.sort_by(|a, b| {
            (a.start(), a.end(), a.class).cmp(&(b.start(), b.end(), b.class))
        });
        let mentions = mentions
            .into_iter()
            .enumerate()
            .map(|(i, mut m)| {
                m.id = format!("T{}", i + 1);
                m
            })
            .collect();
        AnnotatedDocument::new(prepared.doc.doc_id.clone(), prepared.doc.text.clone(), mentions)
    }

    /// Tags a corpus; per-document work parallelizes under `jobs`.
    pub fn tag_documents(
        &self,
        docs: &[AnnotatedDocument],
        jobs: usize,
    ) -> Result<Vec<AnnotatedDocument>> {
        let results = par_map(jobs, docs, |doc| {
            let prepared = prepare_doc(doc);
            self.tag_prepared(&prepared)
                .map_err(|e| stage_err("tag", &doc.doc_id, e))
        });
        results.into_iter().collect()
    }
}

/// Evaluation scores: token level per class plus mention level in both
/// matching modes.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub token: PrfScores,
    pub mention_with_type: PrfScores,
    pub mention_without_type: PrfScores,
}

impl EvalReport {
    fn render_section(out: &mut String, title: &str, scores: &PrfScores) {
        out.push_str(title);
        out.push('\n');
        out.push_str(&format!(
            "{:<18} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8}\n",
            "class", "tp", "fp", "fn", "P", "R", "F1"
        ));
        for (class, counts) in &scores.per_class {
            out.push_str(&format!(
                "{:<18} {:>6} {:>6} {:>6} {:>8.2} {:>8.2} {:>8.2}\n",
                class.name(),
                counts.tp,
                counts.fp,
                counts.fn_,
                counts.precision(),
                counts.recall(),
                counts.f1()
            ));
        }
        let m = &scores.micro;
        out.push_str(&format!(
            "{:<18} {:>6} {:>6} {:>6} {:>8.2} {:>8.2} {:>8.2}\n",
            "micro",
            m.tp,
            m.fp,
            m.fn_,
            m.precision(),
            m.recall(),
            m.f1()
        ));
    }

    /// Aligned plain-text tables.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        Self::render_section(&mut out, "Token-level scores (B/I ignored)", &self.token);
        out.push('\n');
        Self::render_section(
            &mut out,
            "Mention-level scores, exact span, considering entity type",
            &self.mention_with_type,
        );
        out.push('\n');
        Self::render_section(
            &mut out,
            "Mention-level scores, exact span, not considering entity type",
            &self.mention_without_type,
        );
        out
    }

    /// Machine-readable summary: one line per (section, class) with
    /// tp/fp/fn and P/R/F1.
    pub fn render_tsv(&self) -> String {
        let mut out = String::from("section\tclass\ttp\tfp\tfn\tprecision\trecall\tf1\n");
        let mut emit = |section: &str, class: &str, c: &PrfCounts| {
            out.push_str(&format!(
                "{section}\t{class}\t{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}\n",
                c.tp,
                c.fp,
                c.fn_,
                c.precision(),
                c.recall(),
                c.f1()
            ));
        };
        for (class, counts) in &self.token.per_class {
            emit("token", class.name(), counts);
        }
        emit("token", "micro", &self.token.micro);
        for (class, counts) in &self.mention_with_type.per_class {
            emit("mention_with_type", class.name(), counts);
        }
        emit("mention_with_type", "micro", &self.mention_with_type.micro);
        emit(
            "mention_without_type",
            "micro",
            &self.mention_without_type.micro,
        );
        out
    }
}

/// Scores predictions against gold over aligned documents. Token-level
/// sequences are built per class on that class's unit strategy.
pub fn evaluate_documents(
    gold_docs: &[AnnotatedDocument],
    pred_docs: &[AnnotatedDocument],
    strategy_of: impl Fn(EntityClass) -> SplitStrategy,
) -> Result<EvalReport> {
    if gold_docs.len() != pred_docs.len() {
        return Err(Error::Validation(format!(
            "gold corpus has {} documents, predictions have {}",
            gold_docs.len(),
            pred_docs.len()
        )));
    }
    let mut per_class: BTreeMap<EntityClass, PrfCounts> = BTreeMap::new();
    let mut mention_pairs = Vec::new();

    for (gold, pred) in gold_docs.iter().zip(pred_docs) {
        if gold.doc_id != pred.doc_id {
            return Err(Error::Validation(format!(
                "document order mismatch: {} vs {}",
                gold.doc_id, pred.doc_id
            )));
        }
        let prepared = prepare_doc(gold);
        for class in EntityClass::ALL {
            let units = match strategy_of(class) {
                SplitStrategy::WholeElement => &prepared.whole_units,
                SplitStrategy::SubElement => &prepared.sub_units,
            };
            let mut gold_seqs = Vec::new();
            let mut pred_seqs = Vec::new();
            for ut in units {
                let gold_mentions: Vec<MentionAnnotation> =
                    gold.mentions_of(class).into_iter().cloned().collect();
                let pred_mentions: Vec<MentionAnnotation> =
                    pred.mentions_of(class).into_iter().cloned().collect();
                let g = align_annotations(
                    &ut.tokens,
                    &project_mentions(ut, &gold_mentions),
                    class,
                )?;
                let p = align_annotations(
                    &ut.tokens,
                    &project_mentions(ut, &pred_mentions),
                    class,
                )?;
                gold_seqs.push(TaggedSequence::new(ut.unit.clone(), ut.tokens.clone(), g)?);
                pred_seqs.push(TaggedSequence::new(ut.unit.clone(), ut.tokens.clone(), p)?);
            }
            let counts = token_prf(&gold_seqs, &pred_seqs, class)?;
            per_class.entry(class).or_default().add(&counts);
        }
        let gold_mentions: Vec<MentionAnnotation> = gold
            .annotations
            .iter()
            .filter(|m| !m.is_discontinuous())
            .cloned()
            .collect();
        mention_pairs.push((gold_mentions, pred.annotations.clone()));
    }

    Ok(EvalReport {
        token: PrfScores::from_counts(per_class),
        mention_with_type: mention_prf(&mention_pairs, MatchMode::WithType),
        mention_without_type: mention_prf(&mention_pairs, MatchMode::WithoutType),
    })
}

/// `run` output: split sizes, dropped annotations, scores, and where
/// everything was written.
pub struct RunSummary {
    pub split_sizes: (usize, usize, usize),
    pub dropped_discontinuous: usize,
    pub report: EvalReport,
    pub predictions_dir: PathBuf,
    pub models_dir: PathBuf,
    pub report_path: PathBuf,
    pub summary_path: PathBuf,
}

/// End-to-end: load, filter, split, train, tag the test split, evaluate,
/// and write predictions, models, and reports under the output
/// directory. Partial outputs are removed on failure.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let result = run_pipeline_inner(config);
    if result.is_err() {
        let _ = fs::remove_dir_all(&config.output_dir);
    }
    result
}

fn run_pipeline_inner(config: &RunConfig) -> Result<RunSummary> {
    let docs = load_corpus(&config.corpus_dir, AnnotationFormat::Standoff)?;
    let (docs, dropped) = filter_discontinuous(&docs);
    if dropped > 0 {
        log::info!("dropped {dropped} discontinuous annotations");
    }
    let (train_docs, val_docs, test_docs) = split_corpus(&docs, &config.split)?;
    let suite = train_suite(config, &train_docs, &val_docs)?;
    let predictions = suite.tag_documents(&test_docs, config.jobs)?;
    let report = evaluate_documents(&test_docs, &predictions, |c| suite.strategy_of(c))?;

    let predictions_dir = config.output_dir.join("predictions");
    write_corpus(&predictions, &predictions_dir)?;
    let models_dir = config.output_dir.join("models");
    suite.save(&models_dir)?;
    let report_path = config.output_dir.join("report.txt");
    fs::write(&report_path, report.render_text())
        .map_err(|e| Error::io(&report_path, e))?;
    let summary_path = config.output_dir.join("summary.tsv");
    fs::write(&summary_path, report.render_tsv())
        .map_err(|e| Error::io(&summary_path, e))?;

    Ok(RunSummary {
        split_sizes: (train_docs.len(), val_docs.len(), test_docs.len()),
        dropped_discontinuous: dropped,
        report,
        predictions_dir,
        models_dir,
        report_path,
        summary_path,
    })
}

const SUITE_MANIFEST: &str = "suite.manifest";

impl TaggerSuite {
    /// Writes every model and resource plus a manifest into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::from("suite v1\n");
        manifest.push_str(&format!(
            "features\twindow={}\tpos={}\tsemtype={}\tclusters={}\n",
            self.feature_options.window,
            self.feature_options.pos,
            self.feature_options.semtype,
            self.feature_options.clusters
        ));
        for (&class, &kind) in &self.assignments {
            let file = match kind {
                TaggerKind::Rule => "-".to_string(),
                TaggerKind::Crf => format!("{}.crf", class.name()),
                TaggerKind::Blstm => "joint.blstm".to_string(),
                TaggerKind::Voting => "voting.ensemble".to_string(),
                TaggerKind::Stacked => "stacked.ensemble".to_string(),
            };
            manifest.push_str(&format!("tagger\t{}\t{}\t{file}\n", class.name(), kind.name()));
        }
        for (class, model) in &self.crf_models {
            model.save(&dir.join(format!("{}.crf", class.name())))?;
        }
        if let Some(model) = &self.blstm {
            model.save(&dir.join("joint.blstm"))?;
        }
        if let Some(model) = &self.voting {
            save_ensemble(dir, "voting", "voting", &model.crf, &model.blstm)?;
        }
        if let Some(model) = &self.stacked {
            save_ensemble(dir, "stacked", "stacked", &model.crf, &model.blstm)?;
        }
        self.resources.target.save(&dir.join("target.vec"))?;
        self.resources.generic.save(&dir.join("generic.vec"))?;
        self.resources.clusters.save(&dir.join("clusters.txt"))?;
        for (name, lex) in [
            ("lexicon_adr.txt", &self.resources.all_lexicons[0]),
            ("lexicon_drug_class.txt", &self.resources.all_lexicons[1]),
            ("lexicon_severity.txt", &self.resources.all_lexicons[2]),
            ("lexicon_factor.txt", &self.resources.all_lexicons[3]),
        ] {
            lex.save(&dir.join(name))?;
        }
        if let Some(negation) = &self.negation {
            negation.triggers.save(&dir.join("negation_triggers.txt"))?;
            negation
                .ignore_phrases
                .save(&dir.join("negation_ignore.txt"))?;
        }
        if let Some(animal) = &self.animal {
            animal.species.save(&dir.join("animal_species.txt"))?;
        }
        let path = dir.join(SUITE_MANIFEST);
        fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
    }

    /// Loads a suite saved by [`save`].
    pub fn load(dir: &Path) -> Result<TaggerSuite> {
        let path = dir.join(SUITE_MANIFEST);
        let content = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut assignments = BTreeMap::new();
        let mut feature_options = crate::config::FeatureOptions::default();
        for (i, line) in content.lines().enumerate() {
            if i == 0 {
                if line != "suite v1" {
                    return Err(Error::format(&path, 1, "expected `suite v1` header"));
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.first().copied() {
                Some("features") => {
                    for field in &fields[1..] {
                        let (k, v) = field.split_once('=').ok_or_else(|| {
                            Error::format(&path, i + 1, "bad features entry")
                        })?;
                        match k {
                            "window" => {
                                feature_options.window = v.parse().map_err(|_| {
                                    Error::format(&path, i + 1, "bad window")
                                })?
                            }
                            "pos" => feature_options.pos = v == "true",
                            "semtype" => feature_options.semtype = v == "true",
                            "clusters" => feature_options.clusters = v == "true",
                            _ => {
                                return Err(Error::format(&path, i + 1, "bad features key"))
                            }
                        }
                    }
                }
                Some("tagger") if fields.len() == 4 => {
                    let class = EntityClass::from_name(fields[1]).ok_or_else(|| {
                        Error::format(&path, i + 1, format!("unknown class {}", fields[1]))
                    })?;
                    let kind = TaggerKind::from_name(fields[2]).ok_or_else(|| {
                        Error::format(&path, i + 1, format!("unknown kind {}", fields[2]))
                    })?;
                    assignments.insert(class, kind);
                }
                _ => return Err(Error::format(&path, i + 1, "bad manifest line")),
            }
        }

        let target = EmbeddingModel::load(&dir.join("target.vec"))?;
        let generic = EmbeddingModel::load(&dir.join("generic.vec"))?;
        let clusters = ClusterModel::load(&dir.join("clusters.txt"))?;
        let adr = Lexicon::from_file("adr", &dir.join("lexicon_adr.txt"))?;
        let drug_class = Lexicon::from_file("drugclass", &dir.join("lexicon_drug_class.txt"))?;
        let severity = Lexicon::from_file("severity", &dir.join("lexicon_severity.txt"))?;
        let factor = Lexicon::from_file("factor", &dir.join("lexicon_factor.txt"))?;
        let resources = SharedResources {
            generic,
            target,
            clusters,
            adr_lexicons: vec![adr.clone()],
            all_lexicons: vec![adr, drug_class, severity, factor],
            pos: RulePosTagger,
            semtype: SemTypeAnnotator::bundled(),
            lemmatizer: SuffixLemmatizer,
        };
        let mut suite = TaggerSuite {
            assignments: assignments.clone(),
            feature_options,
            resources,
            crf_models: BTreeMap::new(),
            blstm: None,
            voting: None,
            stacked: None,
            negation: None,
            animal: None,
        };
        for (&class, &kind) in &assignments {
            match kind {
                TaggerKind::Crf => {
                    let model = CrfModel::load(&dir.join(format!("{}.crf", class.name())))?;
                    suite.crf_models.insert(class, model);
                }
                TaggerKind::Blstm if suite.blstm.is_none() => {
                    suite.blstm = Some(BlstmModel::load(&dir.join("joint.blstm"))?);
                }
                TaggerKind::Voting if suite.voting.is_none() => {
                    let (_, crf, blstm) = load_ensemble(&dir.join("voting.ensemble"))?;
                    suite.voting = Some(VotingEnsemble::new(crf, blstm)?);
                }
                TaggerKind::Stacked if suite.stacked.is_none() => {
                    let (_, crf, blstm) = load_ensemble(&dir.join("stacked.ensemble"))?;
                    suite.stacked = Some(StackedEnsemble { crf, blstm });
                }
                TaggerKind::Rule => match class {
                    EntityClass::Negation => {
                        suite.negation = Some(NegationResource {
                            triggers: Lexicon::from_file(
                                "negation",
                                &dir.join("negation_triggers.txt"),
                            )?,
                            ignore_phrases: Lexicon::from_file(
                                "negation_ignore",
                                &dir.join("negation_ignore.txt"),
                            )?,
                        });
                    }
                    EntityClass::Animal => {
                        suite.animal = Some(AnimalResource {
                            species: Lexicon::from_file(
                                "animal",
                                &dir.join("animal_species.txt"),
                            )?,
                        });
                    }
                    _ => {
                        return Err(Error::Config(format!(
                            "no rule-based tagger exists for class {class}"
                        )))
                    }
                },
                _ => {}
            }
        }
        Ok(suite)
    }
}
