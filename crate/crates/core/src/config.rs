//! Run configuration: a flat key-value text format with `[section]`
//! headers, plus the run1/run2 tagger-assignment presets.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::EntityClass;
use crate::crf::CrfTrainConfig;
use crate::error::{Error, Result};
use crate::eval::SplitSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TaggerKind {
    Rule,
    Crf,
    Blstm,
    Voting,
    Stacked,
}

impl TaggerKind {
    pub fn name(self) -> &'static str {
        match self {
            TaggerKind::Rule => "rule",
            TaggerKind::Crf => "crf",
            TaggerKind::Blstm => "blstm",
            TaggerKind::Voting => "voting",
            TaggerKind::Stacked => "stacked",
        }
    }

    pub fn from_name(s: &str) -> Option<TaggerKind> {
        match s {
            "rule" => Some(TaggerKind::Rule),
            "crf" => Some(TaggerKind::Crf),
            "blstm" => Some(TaggerKind::Blstm),
            "voting" => Some(TaggerKind::Voting),
            "stacked" => Some(TaggerKind::Stacked),
            _ => None,
        }
    }
}

/// Tagger assignments of the two submitted systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Run1,
    Run2,
}

impl Preset {
    pub fn from_name(s: &str) -> Option<Preset> {
        match s {
            "run1" => Some(Preset::Run1),
            "run2" => Some(Preset::Run2),
            _ => None,
        }
    }

    pub fn assignments(self) -> BTreeMap<EntityClass, TaggerKind> {
        use EntityClass::*;
        use TaggerKind::*;
        let pairs: &[(EntityClass, TaggerKind)] = match self {
            // rule-based negation and animal, CRF for ADR, one BLSTM for
            // the three related entities
            Preset::Run1 => &[
                (AdverseReaction, Crf),
                (Severity, Blstm),
                (Factor, Blstm),
                (DrugClass, Blstm),
                (Negation, Rule),
                (Animal, Rule),
            ],
            // rule-based negation, stacked ensemble for everything else
            Preset::Run2 => &[
                (AdverseReaction, Stacked),
                (Severity, Stacked),
                (Factor, Stacked),
                (DrugClass, Stacked),
                (Negation, Rule),
                (Animal, Stacked),
            ],
        };
        pairs.iter().copied().collect()
    }
}

fn class_key(class: EntityClass) -> &'static str {
    match class {
        EntityClass::AdverseReaction => "adverse_reaction",
        EntityClass::Severity => "severity",
        EntityClass::Factor => "factor",
        EntityClass::DrugClass => "drug_class",
        EntityClass::Negation => "negation",
        EntityClass::Animal => "animal",
    }
}

fn class_from_key(key: &str) -> Option<EntityClass> {
    EntityClass::ALL.into_iter().find(|&c| class_key(c) == key)
}

#[derive(Debug, Clone)]
pub struct FeatureOptions {
    pub window: usize,
    pub pos: bool,
    pub semtype: bool,
    pub clusters: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            window: 5,
            pos: true,
            semtype: true,
            clusters: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingOptions {
    /// Pre-trained target-domain model in the text vector format; when
    /// absent the pipeline trains one on the training split.
    pub target_model: Option<PathBuf>,
    /// Pre-trained generic-domain model; when absent that half of the
    /// BLSTM input stays zero.
    pub generic_model: Option<PathBuf>,
    pub clusters: Option<PathBuf>,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_count: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub kmeans_k: usize,
    pub seed: u64,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        EmbeddingOptions {
            target_model: None,
            generic_model: None,
            clusters: None,
            dim: 200,
            window: 5,
            negatives: 5,
            min_count: 2,
            epochs: 5,
            learning_rate: 0.025,
            kmeans_k: 50,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlstmOptions {
    pub hidden: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for BlstmOptions {
    fn default() -> Self {
        BlstmOptions {
            hidden: crate::blstm::DEFAULT_HIDDEN_UNITS,
            dropout: crate::blstm::DEFAULT_DROPOUT,
            learning_rate: 1e-5,
            epochs: 50,
            patience: 10,
            batch_size: 8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RuleOptions {
    pub negation_triggers: Option<PathBuf>,
    pub negation_ignore: Option<PathBuf>,
    pub animal_species: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct LexiconOptions {
    pub adr: Option<PathBuf>,
    pub drug_class: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    pub output_dir: PathBuf,
    pub split: SplitSpec,
    pub taggers: BTreeMap<EntityClass, TaggerKind>,
    pub features: FeatureOptions,
    pub embeddings: EmbeddingOptions,
    pub crf: CrfTrainConfig,
    pub blstm: BlstmOptions,
    pub rules: RuleOptions,
    pub lexicons: LexiconOptions,
    pub jobs: usize,
}

impl RunConfig {
    pub fn new(corpus_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            corpus_dir: corpus_dir.into(),
            output_dir: output_dir.into(),
            split: SplitSpec::default(),
            taggers: BTreeMap::new(),
            features: FeatureOptions::default(),
            embeddings: EmbeddingOptions::default(),
            crf: CrfTrainConfig::default(),
            blstm: BlstmOptions::default(),
            rules: RuleOptions::default(),
            lexicons: LexiconOptions::default(),
            jobs: 1,
        }
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        self.taggers = preset.assignments();
    }

    /// Every class assigned exactly once, rule taggers only where one
    /// exists, and referenced paths present.
    pub fn validate(&self) -> Result<()> {
        for class in EntityClass::ALL {
            match self.taggers.get(&class) {
                None => {
                    return Err(Error::Config(format!(
                        "no tagger assigned for class {} (key `{}`)",
                        class,
                        class_key(class)
                    )))
                }
                Some(TaggerKind::Rule)
                    if class != EntityClass::Negation && class != EntityClass::Animal =>
                {
                    return Err(Error::Config(format!(
                        "no rule-based tagger exists for class {class}"
                    )))
                }
                Some(_) => {}
            }
        }
        if !self.corpus_dir.is_dir() {
            return Err(Error::Config(format!(
                "corpus directory {} does not exist",
                self.corpus_dir.display()
            )));
        }
        let declared = [
            &self.embeddings.target_model,
            &self.embeddings.generic_model,
            &self.embeddings.clusters,
            &self.rules.negation_triggers,
            &self.rules.negation_ignore,
            &self.rules.animal_species,
            &self.lexicons.adr,
            &self.lexicons.drug_class,
        ];
        for path in declared.into_iter().flatten() {
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "configured file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    /// Classes grouped by assigned tagger kind, in class order.
    pub fn classes_of(&self, kind: TaggerKind) -> Vec<EntityClass> {
        EntityClass::ALL
            .into_iter()
            .filter(|c| self.taggers.get(c) == Some(&kind))
            .collect()
    }

    /// The resolved stage plan printed by `run --dry-run`.
    pub fn describe_plan(&self) -> String {
        let mut out = String::new();
        out.push_str("stages: parse -> split -> tokenize -> train/load -> tag ADR -> tag related -> decode -> write -> evaluate\n");
        out.push_str(&format!("corpus: {}\n", self.corpus_dir.display()));
        out.push_str(&format!("output: {}\n", self.output_dir.display()));
        out.push_str(&format!(
            "split: train={} validation={} test={} seed={}\n",
            self.split.train, self.split.validation, self.split.test, self.split.seed
        ));
        out.push_str("taggers:\n");
        for class in EntityClass::ALL {
            let kind = self
                .taggers
                .get(&class)
                .map(|k| k.name())
                .unwrap_or("(unassigned)");
            out.push_str(&format!("  {:<16} {}\n", class_key(class), kind));
        }
        out
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        parse_config(&content, base, path)
    }
}

fn parse_bool(value: &str, path: &Path, line: usize) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::format(path, line, format!("expected boolean, got {value:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, path: &Path, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::format(path, line, format!("bad numeric value {value:?}")))
}

fn parse_config(content: &str, base: &Path, path: &Path) -> Result<RunConfig> {
    let mut config = RunConfig::new(base.join("corpus"), base.join("out"));
    let mut saw_corpus_dir = false;
    let mut section = String::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            match section.as_str() {
                "corpus" | "output" | "split" | "taggers" | "features" | "embeddings"
                | "crf" | "blstm" | "rules" | "lexicons" | "run" => {}
                other => {
                    return Err(Error::format(path, line_no, format!("unknown section [{other}]")))
                }
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::format(path, line_no, format!("expected `key = value`, got {line:?}"))
        })?;
        let key = key.trim();
        let value = value.trim();
        let resolve = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match (section.as_str(), key) {
            ("corpus", "dir") => {
                config.corpus_dir = resolve(value);
                saw_corpus_dir = true;
            }
            ("output", "dir") => config.output_dir = resolve(value),
            ("split", "train") => config.split.train = parse_num(value, path, line_no)?,
            ("split", "validation") => config.split.validation = parse_num(value, path, line_no)?,
            ("split", "test") => config.split.test = parse_num(value, path, line_no)?,
            ("split", "seed") => config.split.seed = parse_num(value, path, line_no)?,
            ("taggers", class) => {
                let class = class_from_key(class).ok_or_else(|| {
                    Error::format(path, line_no, format!("unknown entity class key {class:?}"))
                })?;
                let kind = TaggerKind::from_name(value).ok_or_else(|| {
                    Error::format(path, line_no, format!("unknown tagger kind {value:?}"))
                })?;
                config.taggers.insert(class, kind);
            }
            ("features", "window") => config.features.window = parse_num(value, path, line_no)?,
            ("features", "pos") => config.features.pos = parse_bool(value, path, line_no)?,
            ("features", "semtype") => config.features.semtype = parse_bool(value, path, line_no)?,
            ("features", "clusters") => {
                config.features.clusters = parse_bool(value, path, line_no)?
            }
            ("embeddings", "target_model") => {
                config.embeddings.target_model = Some(resolve(value))
            }
            ("embeddings", "generic_model") => {
                config.embeddings.generic_model = Some(resolve(value))
            }
            ("embeddings", "clusters") => config.embeddings.clusters = Some(resolve(value)),
            ("embeddings", "dim") => config.embeddings.dim = parse_num(value, path, line_no)?,
            ("embeddings", "window") => {
                config.embeddings.window = parse_num(value, path, line_no)?
            }
            ("embeddings", "negatives") => {
                config.embeddings.negatives = parse_num(value, path, line_no)?
            }
            ("embeddings", "min_count") => {
                config.embeddings.min_count = parse_num(value, path, line_no)?
            }
            ("embeddings", "epochs") => {
                config.embeddings.epochs = parse_num(value, path, line_no)?
            }
            ("embeddings", "learning_rate") => {
                config.embeddings.learning_rate = parse_num(value, path, line_no)?
            }
            ("embeddings", "kmeans_k") => {
                config.embeddings.kmeans_k = parse_num(value, path, line_no)?
            }
            ("embeddings", "seed") => config.embeddings.seed = parse_num(value, path, line_no)?,
            ("crf", "l2_sigma") => config.crf.l2_sigma = parse_num(value, path, line_no)?,
            ("crf", "max_iters") => config.crf.max_iters = parse_num(value, path, line_no)?,
            ("crf", "tolerance") => config.crf.tolerance = parse_num(value, path, line_no)?,
            ("blstm", "hidden") => config.blstm.hidden = parse_num(value, path, line_no)?,
            ("blstm", "dropout") => config.blstm.dropout = parse_num(value, path, line_no)?,
            ("blstm", "learning_rate") => {
                config.blstm.learning_rate = parse_num(value, path, line_no)?
            }
            ("blstm", "epochs") => config.blstm.epochs = parse_num(value, path, line_no)?,
            ("blstm", "patience") => config.blstm.patience = parse_num(value, path, line_no)?,
            ("blstm", "batch_size") => {
                config.blstm.batch_size = parse_num(value, path, line_no)?
            }
            ("blstm", "seed") => config.blstm.seed = parse_num(value, path, line_no)?,
            ("rules", "negation_triggers") => {
                config.rules.negation_triggers = Some(resolve(value))
            }
            ("rules", "negation_ignore") => config.rules.negation_ignore = Some(resolve(value)),
            ("rules", "animal_species") => config.rules.animal_species = Some(resolve(value)),
            ("lexicons", "adr") => config.lexicons.adr = Some(resolve(value)),
            ("lexicons", "drug_class") => config.lexicons.drug_class = Some(resolve(value)),
            ("run", "jobs") => config.jobs = parse_num(value, path, line_no)?,
            (section, key) => {
                return Err(Error::format(
                    path,
                    line_no,
                    format!("unknown key {key:?} in section [{section}]"),
                ))
            }
        }
    }
    if !saw_corpus_dir {
        return Err(Error::format(path, 0, "missing [corpus] dir"));
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_run_assignments() {
        let run1 = Preset::Run1.assignments();
        assert_eq!(run1[&EntityClass::Negation], TaggerKind::Rule);
        assert_eq!(run1[&EntityClass::Animal], TaggerKind::Rule);
        assert_eq!(run1[&EntityClass::AdverseReaction], TaggerKind::Crf);
        assert_eq!(run1[&EntityClass::Severity], TaggerKind::Blstm);
        assert_eq!(run1[&EntityClass::Factor], TaggerKind::Blstm);
        assert_eq!(run1[&EntityClass::DrugClass], TaggerKind::Blstm);

        let run2 = Preset::Run2.assignments();
        assert_eq!(run2[&EntityClass::Negation], TaggerKind::Rule);
        for class in [
            EntityClass::AdverseReaction,
            EntityClass::Severity,
            EntityClass::Factor,
            EntityClass::DrugClass,
            EntityClass::Animal,
        ] {
            assert_eq!(run2[&class], TaggerKind::Stacked);
        }
    }

    #[test]
    fn parse_minimal_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("corpus")).unwrap();
        let cfg_path = dir.path().join("run.cfg");
        std::fs::write(
            &cfg_path,
            "# comment\n[corpus]\ndir = corpus\n[output]\ndir = out\n[split]\nseed = 7\n[blstm]\nhidden = 16\n",
        )
        .unwrap();
        let config = RunConfig::from_file(&cfg_path).unwrap();
        assert_eq!(config.corpus_dir, dir.path().join("corpus"));
        assert_eq!(config.split.seed, 7);
        assert_eq!(config.blstm.hidden, 16);
        assert_eq!(config.blstm.epochs, 50); // default retained
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.cfg");
        std::fs::write(&cfg_path, "[corpus]\ndir = x\nbogus = 1\n").unwrap();
        assert!(matches!(
            RunConfig::from_file(&cfg_path),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn missing_tagger_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::new(dir.path(), dir.path().join("out"));
        config.apply_preset(Preset::Run1);
        config.taggers.remove(&EntityClass::Animal);
        let err = config.validate();
        assert!(matches!(err, Err(Error::Config(_))));
        let msg = format!("{}", err.unwrap_err());
        assert!(msg.contains("animal"), "{msg}");
    }

    #[test]
    fn rule_only_for_negation_and_animal() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::new(dir.path(), dir.path().join("out"));
        config.apply_preset(Preset::Run1);
        config
            .taggers
            .insert(EntityClass::Severity, TaggerKind::Rule);
        assert!(config.validate().is_err());
    }

    #[test]
    fn valid_preset_config_passes() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::new(dir.path(), dir.path().join("out"));
        config.apply_preset(Preset::Run2);
        config.validate().unwrap();
        let plan = config.describe_plan();
        assert!(plan.contains("adverse_reaction stacked"));
        assert!(plan.contains("negation         rule"));
    }

    #[test]
    fn classes_of_groups_by_kind() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::new(dir.path(), dir.path());
        config.apply_preset(Preset::Run1);
        assert_eq!(
            config.classes_of(TaggerKind::Blstm),
            vec![
                EntityClass::Severity,
                EntityClass::Factor,
                EntityClass::DrugClass
            ]
        );
        assert_eq!(
            config.classes_of(TaggerKind::Crf),
            vec![EntityClass::AdverseReaction]
        );
    }
}
