//! CRF + BLSTM ensembles: probability-averaging voting, and stacked
//! generalization where the CRF's per-token marginals become extra
//! input dimensions for the BLSTM.

use std::fs;
use std::path::Path;

use ndarray::Array1;

use crate::blstm::{
    train_blstm, BlstmExample, BlstmModel, BlstmTrainConfig, TrainingLog,
};
use crate::crf::{train_crf, CrfExample, CrfModel, CrfTrainConfig};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::tokenize::{BioLabel, LabelSet};

/// One sequence carrying both tagger inputs: CRF feature vectors and
/// BLSTM dense vectors, plus gold labels for training.
#[derive(Debug, Clone)]
pub struct EnsembleExample {
    pub features: Vec<FeatureVector>,
    pub inputs: Vec<Array1<f64>>,
    pub labels: Vec<BioLabel>,
}

/// Argmax of the element-wise mean of two distributions; ties go to the
/// lower index.
pub fn vote(a: &[f64], b: &[f64]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    let mut best = 0usize;
    let mut best_avg = f64::NEG_INFINITY;
    for (y, (pa, pb)) in a.iter().zip(b).enumerate() {
        let avg = (pa + pb) / 2.0;
        if avg > best_avg {
            best_avg = avg;
            best = y;
        }
    }
    best
}

/// Voting ensemble over a shared label set.
#[derive(Debug, Clone)]
pub struct VotingEnsemble {
    pub crf: CrfModel,
    pub blstm: BlstmModel,
}

impl VotingEnsemble {
    pub fn new(crf: CrfModel, blstm: BlstmModel) -> Result<VotingEnsemble> {
        if crf.labels() != blstm.labels() {
            return Err(Error::Config(format!(
                "voting components disagree on labels: {:?} vs {:?}",
                crf.labels().names(),
                blstm.labels().names()
            )));
        }
        Ok(VotingEnsemble { crf, blstm })
    }

    pub fn labels(&self) -> &LabelSet {
        self.crf.labels()
    }

    /// Per-token average of CRF marginals and BLSTM distributions,
    /// argmax with lower-index tie break.
    pub fn predict(
        &self,
        features: &[FeatureVector],
        inputs: &[Array1<f64>],
    ) -> Result<Vec<BioLabel>> {
        if features.len() != inputs.len() {
            return Err(Error::Validation(format!(
                "feature count {} does not match input count {}",
                features.len(),
                inputs.len()
            )));
        }
        let (_, marginals) = self.crf.forward_backward(features)?;
        let dists = self.blstm.predict(inputs)?;
        Ok((0..features.len())
            .map(|t| {
                let y = vote(marginals.row(t), dists[t].as_slice().unwrap());
                self.labels().get(y)
            })
            .collect())
    }
}

/// Trains the two voting components independently on the same label set.
pub fn voting_train(
    train: &[EnsembleExample],
    validation: &[EnsembleExample],
    labels: LabelSet,
    crf_config: &CrfTrainConfig,
    blstm_init: BlstmModel,
    blstm_config: &BlstmTrainConfig,
) -> Result<(VotingEnsemble, TrainingLog)> {
    let crf_examples: Vec<CrfExample> = train
        .iter()
        .map(|ex| CrfExample {
            features: ex.features.clone(),
            labels: ex.labels.clone(),
        })
        .collect();
    let crf = train_crf(&crf_examples, labels, crf_config)?;
    let to_blstm = |ex: &EnsembleExample| BlstmExample {
        inputs: ex.inputs.clone(),
        labels: ex.labels.clone(),
    };
    let blstm_train: Vec<BlstmExample> = train.iter().map(to_blstm).collect();
    let blstm_val: Vec<BlstmExample> = validation.iter().map(to_blstm).collect();
    let (blstm, log) = train_blstm(blstm_init, &blstm_train, &blstm_val, blstm_config)?;
    Ok((VotingEnsemble::new(crf, blstm)?, log))
}

/// Appends the CRF's per-token marginals to each base vector. The result
/// has dimension `base + |labels|`; the first `base` entries are
/// untouched.
pub fn augment_with_marginals(
    crf: &CrfModel,
    features: &[FeatureVector],
    base: &[Array1<f64>],
) -> Result<Vec<Array1<f64>>> {
    if features.len() != base.len() {
        return Err(Error::Validation(format!(
            "feature count {} does not match input count {}",
            features.len(),
            base.len()
        )));
    }
    let (_, marginals) = crf.forward_backward(features)?;
    let n = crf.n_labels();
    Ok(base
        .iter()
        .enumerate()
        .map(|(t, v)| {
            let mut out = Array1::zeros(v.len() + n);
            out.slice_mut(ndarray::s![..v.len()]).assign(v);
            for (y, slot) in out.slice_mut(ndarray::s![v.len()..]).iter_mut().enumerate() {
                *slot = marginals.prob(t, y);
            }
            out
        })
        .collect())
}

/// Stacked ensemble: stage-one CRF, stage-two BLSTM over marginal-
/// augmented vectors.
#[derive(Debug, Clone)]
pub struct StackedEnsemble {
    pub crf: CrfModel,
    pub blstm: BlstmModel,
}

impl StackedEnsemble {
    pub fn labels(&self) -> &LabelSet {
        self.crf.labels()
    }

    pub fn predict(
        &self,
        features: &[FeatureVector],
        base_inputs: &[Array1<f64>],
    ) -> Result<Vec<BioLabel>> {
        let augmented = augment_with_marginals(&self.crf, features, base_inputs)?;
        self.blstm.predict_labels(&augmented)
    }
}

/// Two-stage training: fit the CRF, augment every train and validation
/// sequence with its marginals, then fit the BLSTM on the augmented
/// vectors. `blstm_init` must have input dimension `base + |labels|`.
pub fn stacked_train(
    train: &[EnsembleExample],
    validation: &[EnsembleExample],
    labels: LabelSet,
    crf_config: &CrfTrainConfig,
    blstm_init: BlstmModel,
    blstm_config: &BlstmTrainConfig,
) -> Result<(StackedEnsemble, TrainingLog)> {
    let crf_examples: Vec<CrfExample> = train
        .iter()
        .map(|ex| CrfExample {
            features: ex.features.clone(),
            labels: ex.labels.clone(),
        })
        .collect();
    let crf = train_crf(&crf_examples, labels.clone(), crf_config)?;
    if crf.labels() != blstm_init.labels() {
        return Err(Error::Config(
            "stacked components disagree on labels".into(),
        ));
    }

    let augment_set = |set: &[EnsembleExample]| -> Result<Vec<BlstmExample>> {
        set.iter()
            .map(|ex| {
                Ok(BlstmExample {
                    inputs: augment_with_marginals(&crf, &ex.features, &ex.inputs)?,
                    labels: ex.labels.clone(),
                })
            })
            .collect()
    };
    let blstm_train = augment_set(train)?;
    let blstm_val = augment_set(validation)?;
    if let Some(first) = blstm_train.first().and_then(|ex| ex.inputs.first()) {
        if first.len() != blstm_init.input_dim() {
            return Err(Error::Config(format!(
                "stacked blstm expects input dimension {}, augmentation produced {}",
                blstm_init.input_dim(),
                first.len()
            )));
        }
    }
    let (blstm, log) = train_blstm(blstm_init, &blstm_train, &blstm_val, blstm_config)?;
    Ok((StackedEnsemble { crf, blstm }, log))
}

/// Ensemble container: a manifest referencing the two component model
/// files (written next to it) plus the label order.
pub fn save_ensemble(
    dir: &Path,
    stem: &str,
    kind: &str,
    crf: &CrfModel,
    blstm: &BlstmModel,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let crf_name = format!("{stem}.crf");
    let blstm_name = format!("{stem}.blstm");
    crf.save(&dir.join(&crf_name))?;
    blstm.save(&dir.join(&blstm_name))?;
    let manifest = format!(
        "ensemble v1\nkind {kind}\ncrf {crf_name}\nblstm {blstm_name}\nlabels\t{}\n",
        crf.labels().names().join("\t")
    );
    let path = dir.join(format!("{stem}.ensemble"));
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

/// Loads a manifest written by [`save_ensemble`]; returns the kind and
/// both components.
pub fn load_ensemble(path: &Path) -> Result<(String, CrfModel, BlstmModel)> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut kind = None;
    let mut crf_name = None;
    let mut blstm_name = None;
    for (i, line) in content.lines().enumerate() {
        if i == 0 {
            if line != "ensemble v1" {
                return Err(Error::format(path, 1, "expected `ensemble v1` header"));
            }
            continue;
        }
        if let Some(v) = line.strip_prefix("kind ") {
            kind = Some(v.to_string());
        } else if let Some(v) = line.strip_prefix("crf ") {
            crf_name = Some(v.to_string());
        } else if let Some(v) = line.strip_prefix("blstm ") {
            blstm_name = Some(v.to_string());
        }
    }
    let kind = kind.ok_or_else(|| Error::format(path, 0, "missing kind"))?;
    let crf_name = crf_name.ok_or_else(|| Error::format(path, 0, "missing crf entry"))?;
    let blstm_name = blstm_name.ok_or_else(|| Error::format(path, 0, "missing blstm entry"))?;
    let crf = CrfModel::load(&dir.join(crf_name))?;
    let blstm = BlstmModel::load(&dir.join(blstm_name))?;
    if crf.labels() != blstm.labels() {
        return Err(Error::Config(
            "ensemble components disagree on labels".into(),
        ));
    }
    Ok((kind, crf, blstm))
}
