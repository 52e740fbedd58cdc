//! Linear-chain conditional random field: path scoring,
//! forward-backward marginals, Viterbi decoding, and regularized
//! maximum-likelihood training by gradient descent with backtracking
//! line search.
//!
//! All inference runs in log space. Weights for unseen (feature, label)
//! pairs are implicitly zero.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::tokenize::{BioLabel, LabelSet};

/// Per-token label distributions from forward-backward.
#[derive(Debug, Clone)]
pub struct MarginalTable {
    rows: Vec<Vec<f64>>,
}

impl MarginalTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn prob(&self, t: usize, label: usize) -> f64 {
        self.rows[t][label]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t]
    }
}

/// One training sequence: feature vectors plus gold labels.
#[derive(Debug, Clone)]
pub struct CrfExample {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<BioLabel>,
}

/// Accumulated gradient in the model's weight layout.
#[derive(Debug, Clone)]
pub struct CrfGradient {
    pub unary: Vec<f64>,
    pub transitions: Vec<f64>,
}

impl CrfGradient {
    pub fn norm(&self) -> f64 {
        self.unary
            .iter()
            .chain(self.transitions.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct CrfTrainConfig {
    pub l2_sigma: f64,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for CrfTrainConfig {
    fn default() -> Self {
        CrfTrainConfig {
            l2_sigma: 10.0,
            max_iters: 100,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrfModel {
    labels: LabelSet,
    feature_names: Vec<String>,
    feature_index: HashMap<String, usize>,
    /// `feature * n_labels + label`
    unary: Vec<f64>,
    /// `from * n_labels + to`
    transitions: Vec<f64>,
    pub l2_sigma: f64,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl CrfModel {
    /// A zero-weight model over the given feature inventory. Feature
    /// names are sorted so weight indices are deterministic.
    pub fn new(
        labels: LabelSet,
        features: impl IntoIterator<Item = String>,
        l2_sigma: f64,
    ) -> CrfModel {
        let mut feature_names: Vec<String> = features.into_iter().collect();
        feature_names.sort();
        feature_names.dedup();
        let feature_index = feature_names
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        let n = labels.len();
        CrfModel {
            unary: vec![0.0; feature_names.len() * n],
            transitions: vec![0.0; n * n],
            labels,
            feature_names,
            feature_index,
            l2_sigma,
        }
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    /// Weight-table index of a registered feature.
    pub fn feature_id(&self, feature: &str) -> Option<usize> {
        self.feature_index.get(feature).copied()
    }

    pub fn unary_weight(&self, feature: &str, label: usize) -> f64 {
        match self.feature_index.get(feature) {
            Some(&f) => self.unary[f * self.n_labels() + label],
            None => 0.0,
        }
    }

    pub fn set_unary_weight(&mut self, feature: &str, label: usize, weight: f64) {
        let n = self.n_labels();
        if let Some(&f) = self.feature_index.get(feature) {
            self.unary[f * n + label] = weight;
        }
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transitions[from * self.n_labels() + to]
    }

    pub fn set_transition(&mut self, from: usize, to: usize, weight: f64) {
        let n = self.n_labels();
        self.transitions[from * n + to] = weight;
    }

    pub fn weights_are_zero(&self) -> bool {
        self.unary.iter().chain(self.transitions.iter()).all(|&w| w == 0.0)
    }

    fn label_indices(&self, labels: &[BioLabel]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|&l| {
                self.labels
                    .index_of(l)
                    .ok_or_else(|| Error::Validation(format!("unknown label {l}")))
            })
            .collect()
    }

    /// Unary score of every label at one position.
    fn unary_scores(&self, fv: &FeatureVector) -> Vec<f64> {
        let n = self.n_labels();
        let mut scores = vec![0.0; n];
        for key in &fv.keys {
            if let Some(&f) = self.feature_index.get(key) {
                let base = f * n;
                for (y, s) in scores.iter_mut().enumerate() {
                    *s += self.unary[base + y];
                }
            }
        }
        scores
    }

    fn unary_matrix(&self, features: &[FeatureVector]) -> Vec<Vec<f64>> {
        features.iter().map(|fv| self.unary_scores(fv)).collect()
    }

    /// Unnormalized log-potential of a label path:
    /// sum of unary scores plus transition scores.
    pub fn score_path(&self, features: &[FeatureVector], labels: &[BioLabel]) -> Result<f64> {
        if features.len() != labels.len() {
            return Err(Error::Validation(format!(
                "path length {} does not match sequence length {}",
                labels.len(),
                features.len()
            )));
        }
        let idx = self.label_indices(labels)?;
        Ok(self.score_path_indices(&self.unary_matrix(features), &idx))
    }

    fn score_path_indices(&self, unary: &[Vec<f64>], idx: &[usize]) -> f64 {
        let mut score = 0.0;
        for (t, &y) in idx.iter().enumerate() {
            score += unary[t][y];
            if t > 0 {
                score += self.transition(idx[t - 1], y);
            }
        }
        score
    }

    /// Log partition function and per-token marginals.
    pub fn forward_backward(&self, features: &[FeatureVector]) -> Result<(f64, MarginalTable)> {
        if features.is_empty() {
            return Err(Error::Runtime("forward-backward on empty sequence".into()));
        }
        let unary = self.unary_matrix(features);
        let (log_z, alpha, beta) = self.alpha_beta(&unary);
        let n = self.n_labels();
        let rows = (0..features.len())
            .map(|t| {
                (0..n)
                    .map(|y| (alpha[t][y] + beta[t][y] - log_z).exp())
                    .collect()
            })
            .collect();
        Ok((log_z, MarginalTable { rows }))
    }

    fn alpha_beta(&self, unary: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let t_len = unary.len();
        let n = self.n_labels();
        let mut alpha = vec![vec![0.0; n]; t_len];
        alpha[0].clone_from_slice(&unary[0]);
        let mut scratch = vec![0.0; n];
        for t in 1..t_len {
            for y in 0..n {
                for (prev, s) in scratch.iter_mut().enumerate() {
                    *s = alpha[t - 1][prev] + self.transition(prev, y);
                }
                alpha[t][y] = unary[t][y] + log_sum_exp(&scratch);
            }
        }
        let log_z = log_sum_exp(&alpha[t_len - 1]);

        let mut beta = vec![vec![0.0; n]; t_len];
        for t in (0..t_len.saturating_sub(1)).rev() {
            for y in 0..n {
                for (next, s) in scratch.iter_mut().enumerate() {
                    *s = self.transition(y, next) + unary[t + 1][next] + beta[t + 1][next];
                }
                beta[t][y] = log_sum_exp(&scratch);
            }
        }
        (log_z, alpha, beta)
    }

    /// Highest-scoring label path; ties broken toward the lowest label
    /// index.
    pub fn viterbi(&self, features: &[FeatureVector]) -> Result<Vec<BioLabel>> {
        if features.is_empty() {
            return Err(Error::Runtime("viterbi on empty sequence".into()));
        }
        let unary = self.unary_matrix(features);
        let t_len = unary.len();
        let n = self.n_labels();
        let mut delta = vec![vec![0.0f64; n]; t_len];
        let mut back = vec![vec![0usize; n]; t_len];
        delta[0].clone_from_slice(&unary[0]);
        for t in 1..t_len {
            for y in 0..n {
                let mut best_prev = 0usize;
                let mut best = f64::NEG_INFINITY;
                for (prev, &d) in delta[t - 1].iter().enumerate() {
                    let score = d + self.transition(prev, y);
                    if score > best {
                        best = score;
                        best_prev = prev;
                    }
                }
                delta[t][y] = unary[t][y] + best;
                back[t][y] = best_prev;
            }
        }
        let mut last = 0usize;
        let mut best = f64::NEG_INFINITY;
        for (y, &score) in delta[t_len - 1].iter().enumerate() {
            if score > best {
                best = score;
                last = y;
            }
        }
        let mut path = vec![0usize; t_len];
        path[t_len - 1] = last;
        for t in (1..t_len).rev() {
            path[t - 1] = back[t][path[t]];
        }
        Ok(path.into_iter().map(|y| self.labels.get(y)).collect())
    }

    /// Regularized negative log-likelihood of a batch plus its gradient.
    /// Loss: sum over sequences of `log Z - score(gold)` plus
    /// `||w||^2 / (2 sigma^2)`; gradient: expected minus empirical
    /// feature counts plus `w / sigma^2`.
    pub fn nll_and_gradient(&self, batch: &[CrfExample]) -> Result<(f64, CrfGradient)> {
        if batch.is_empty() {
            return Err(Error::Validation("empty training batch".into()));
        }
        let n = self.n_labels();
        let mut loss = 0.0;
        let mut grad = CrfGradient {
            unary: vec![0.0; self.unary.len()],
            transitions: vec![0.0; self.transitions.len()],
        };

        for example in batch {
            if example.features.is_empty() {
                return Err(Error::Validation("empty sequence in batch".into()));
            }
            let gold = self.label_indices(&example.labels)?;
            if gold.len() != example.features.len() {
                return Err(Error::Validation(format!(
                    "gold label count {} does not match sequence length {}",
                    gold.len(),
                    example.features.len()
                )));
            }
            let unary = self.unary_matrix(&example.features);
            let (log_z, alpha, beta) = self.alpha_beta(&unary);
            loss += log_z - self.score_path_indices(&unary, &gold);

            for (t, fv) in example.features.iter().enumerate() {
                for y in 0..n {
                    let marginal = (alpha[t][y] + beta[t][y] - log_z).exp();
                    let empirical = if gold[t] == y { 1.0 } else { 0.0 };
                    let delta = marginal - empirical;
                    if delta == 0.0 {
                        continue;
                    }
                    for key in &fv.keys {
                        if let Some(&f) = self.feature_index.get(key) {
                            grad.unary[f * n + y] += delta;
                        }
                    }
                }
                if t > 0 {
                    for (a, &alpha_prev) in alpha[t - 1].iter().enumerate() {
                        for b in 0..n {
                            let pair = (alpha_prev
                                + self.transition(a, b)
                                + unary[t][b]
                                + beta[t][b]
                                - log_z)
                                .exp();
                            let empirical =
                                if gold[t - 1] == a && gold[t] == b { 1.0 } else { 0.0 };
                            grad.transitions[a * n + b] += pair - empirical;
                        }
                    }
                }
            }
        }

        let sigma2 = self.l2_sigma * self.l2_sigma;
        for (w, g) in self
            .unary
            .iter()
            .zip(grad.unary.iter_mut())
            .chain(self.transitions.iter().zip(grad.transitions.iter_mut()))
        {
            loss += w * w / (2.0 * sigma2);
            *g += w / sigma2;
        }
        Ok((loss, grad))
    }

    /// Regularized NLL without the gradient (line-search evaluations).
    pub fn nll(&self, batch: &[CrfExample]) -> Result<f64> {
        let mut loss = 0.0;
        for example in batch {
            if example.features.is_empty() {
                return Err(Error::Validation("empty sequence in batch".into()));
            }
            let gold = self.label_indices(&example.labels)?;
            let unary = self.unary_matrix(&example.features);
            let (log_z, _, _) = self.alpha_beta(&unary);
            loss += log_z - self.score_path_indices(&unary, &gold);
        }
        let sigma2 = self.l2_sigma * self.l2_sigma;
        loss += self
            .unary
            .iter()
            .chain(self.transitions.iter())
            .map(|w| w * w / (2.0 * sigma2))
            .sum::<f64>();
        Ok(loss)
    }

    fn apply_step(&self, grad: &CrfGradient, step: f64) -> CrfModel {
        let mut next = self.clone();
        for (w, g) in next.unary.iter_mut().zip(&grad.unary) {
            *w -= step * g;
        }
        for (w, g) in next.transitions.iter_mut().zip(&grad.transitions) {
            *w -= step * g;
        }
        next
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("crf v1\n");
        out.push_str(&format!("sigma {}\n", self.l2_sigma));
        out.push_str("labels\t");
        out.push_str(&self.labels.names().join("\t"));
        out.push('\n');
        out.push_str("unary\n");
        let n = self.n_labels();
        for (f, name) in self.feature_names.iter().enumerate() {
            for y in 0..n {
                let w = self.unary[f * n + y];
                if w != 0.0 {
                    out.push_str(&format!("{name}\t{}\t{w}\n", self.labels.get(y)));
                }
            }
        }
        out.push_str("transitions\n");
        for a in 0..n {
            let row: Vec<String> = (0..n).map(|b| self.transition(a, b).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<CrfModel> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = content.lines().enumerate();
        let mut next_line = |expect: &str| -> Result<(usize, String)> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l.to_string()))
                .ok_or_else(|| Error::format(path, 0, format!("missing {expect}")))
        };
        let (ln, header) = next_line("header")?;
        if header != "crf v1" {
            return Err(Error::format(path, ln, "expected `crf v1` header"));
        }
        let (ln, sigma_line) = next_line("sigma")?;
        let l2_sigma: f64 = sigma_line
            .strip_prefix("sigma ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, ln, "bad sigma line"))?;
        let (ln, labels_line) = next_line("labels")?;
        let names: Vec<String> = labels_line
            .strip_prefix("labels\t")
            .ok_or_else(|| Error::format(path, ln, "bad labels line"))?
            .split('\t')
            .map(String::from)
            .collect();
        let labels = LabelSet::from_names(&names)?;
        let n = labels.len();
        let (ln, marker) = next_line("unary section")?;
        if marker != "unary" {
            return Err(Error::format(path, ln, "expected `unary`"));
        }
        let mut entries: Vec<(String, usize, f64)> = Vec::new();
        let mut transitions = vec![0.0; n * n];
        let mut row = 0usize;
        let mut in_transitions = false;
        for (i, line) in lines {
            if !in_transitions {
                if line == "transitions" {
                    in_transitions = true;
                    continue;
                }
                let mut parts = line.split('\t');
                let (feat, label, weight) = (parts.next(), parts.next(), parts.next());
                match (feat, label, weight) {
                    (Some(f), Some(l), Some(w)) => {
                        let label = BioLabel::parse(l)?;
                        let y = labels.index_of(label).ok_or_else(|| {
                            Error::format(path, i + 1, format!("label {l} not in label set"))
                        })?;
                        let w: f64 = w
                            .parse()
                            .map_err(|_| Error::format(path, i + 1, "bad weight"))?;
                        entries.push((f.to_string(), y, w));
                    }
                    _ => return Err(Error::format(path, i + 1, "bad unary line")),
                }
            } else {
                if line.is_empty() {
                    continue;
                }
                if row >= n {
                    return Err(Error::format(path, i + 1, "too many transition rows"));
                }
                for (b, field) in line.split(' ').enumerate() {
                    if b >= n {
                        return Err(Error::format(path, i + 1, "too many transition columns"));
                    }
                    transitions[row * n + b] = field
                        .parse()
                        .map_err(|_| Error::format(path, i + 1, "bad transition weight"))?;
                }
                row += 1;
            }
        }
        if row != n {
            return Err(Error::format(path, 0, "missing transition rows"));
        }
        let mut model = CrfModel::new(
            labels,
            entries.iter().map(|(f, _, _)| f.clone()),
            l2_sigma,
        );
        for (f, y, w) in entries {
            model.set_unary_weight(&f, y, w);
        }
        model.transitions = transitions;
        Ok(model)
    }
}

/// Trains a CRF by full-batch gradient descent with Armijo backtracking
/// line search. Deterministic; stops when the gradient norm drops below
/// `tolerance` or after `max_iters` accepted iterations.
pub fn train_crf(
    dataset: &[CrfExample],
    labels: LabelSet,
    config: &CrfTrainConfig,
) -> Result<CrfModel> {
    Ok(train_crf_traced(dataset, labels, config)?.0)
}

/// [`train_crf`] plus the loss value at each accepted iterate (the trace
/// is non-increasing).
pub fn train_crf_traced(
    dataset: &[CrfExample],
    labels: LabelSet,
    config: &CrfTrainConfig,
) -> Result<(CrfModel, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::Validation("empty training set".into()));
    }
    let features: Vec<String> = dataset
        .iter()
        .flat_map(|ex| ex.features.iter())
        .flat_map(|fv| fv.keys.iter().cloned())
        .collect();
    let mut model = CrfModel::new(labels, features, config.l2_sigma);

    let (mut loss, mut grad) = model.nll_and_gradient(dataset)?;
    if !loss.is_finite() {
        return Err(Error::Runtime(format!("non-finite initial loss {loss}")));
    }
    let mut trace = vec![loss];
    let mut step = 1.0f64;
    for _iter in 0..config.max_iters {
        let gnorm = grad.norm();
        if gnorm < config.tolerance {
            break;
        }
        let g2 = gnorm * gnorm;
        let mut accepted = false;
        let mut try_step = step * 2.0;
        while try_step > 1e-14 {
            let candidate = model.apply_step(&grad, try_step);
            let cand_loss = candidate.nll(dataset)?;
            if !cand_loss.is_finite() {
                return Err(Error::Runtime(format!(
                    "non-finite loss {cand_loss} at step {try_step}"
                )));
            }
            if cand_loss <= loss - 1e-4 * try_step * g2 {
                model = candidate;
                step = try_step;
                accepted = true;
                break;
            }
            try_step *= 0.5;
        }
        if !accepted {
            break; // no descent step found
        }
        let (l, g) = model.nll_and_gradient(dataset)?;
        loss = l;
        grad = g;
        trace.push(l);
    }
    Ok((model, trace))
}
