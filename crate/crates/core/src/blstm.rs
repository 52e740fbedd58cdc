//! Bidirectional LSTM token classifier over dense word vectors, trained
//! with RMSprop, inverted dropout on each direction's hidden outputs,
//! and early stopping on validation token F1.
//!
//! Gradients are exact backpropagation through time; the test suite
//! checks them against central finite differences.

use std::fs;
use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EmbeddingModel;
use crate::error::{Error, Result};
use crate::eval::token_counts_micro;
use crate::tokenize::{BioLabel, LabelSet};

/// Gate parameters for one direction. `W_*` map the input, `U_*` the
/// previous hidden state; biases `b_*`.
#[derive(Debug, Clone)]
pub struct LstmDirectionParams {
    pub w_i: Array2<f64>,
    pub w_f: Array2<f64>,
    pub w_o: Array2<f64>,
    pub w_c: Array2<f64>,
    pub u_i: Array2<f64>,
    pub u_f: Array2<f64>,
    pub u_o: Array2<f64>,
    pub u_c: Array2<f64>,
    pub b_i: Array1<f64>,
    pub b_f: Array1<f64>,
    pub b_o: Array1<f64>,
    pub b_c: Array1<f64>,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-r, r);
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

impl LstmDirectionParams {
    fn new(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> LstmDirectionParams {
        LstmDirectionParams {
            w_i: glorot(input_dim, hidden, rng),
            w_f: glorot(input_dim, hidden, rng),
            w_o: glorot(input_dim, hidden, rng),
            w_c: glorot(input_dim, hidden, rng),
            u_i: glorot(hidden, hidden, rng),
            u_f: glorot(hidden, hidden, rng),
            u_o: glorot(hidden, hidden, rng),
            u_c: glorot(hidden, hidden, rng),
            b_i: Array1::zeros(hidden),
            // forget gate opens at initialization
            b_f: Array1::ones(hidden),
            b_o: Array1::zeros(hidden),
            b_c: Array1::zeros(hidden),
        }
    }

    fn zeros_like(&self) -> LstmDirectionParams {
        LstmDirectionParams {
            w_i: Array2::zeros(self.w_i.raw_dim()),
            w_f: Array2::zeros(self.w_f.raw_dim()),
            w_o: Array2::zeros(self.w_o.raw_dim()),
            w_c: Array2::zeros(self.w_c.raw_dim()),
            u_i: Array2::zeros(self.u_i.raw_dim()),
            u_f: Array2::zeros(self.u_f.raw_dim()),
            u_o: Array2::zeros(self.u_o.raw_dim()),
            u_c: Array2::zeros(self.u_c.raw_dim()),
            b_i: Array1::zeros(self.b_i.len()),
            b_f: Array1::zeros(self.b_f.len()),
            b_o: Array1::zeros(self.b_o.len()),
            b_c: Array1::zeros(self.b_c.len()),
        }
    }

    fn matrices(&self) -> [&Array2<f64>; 8] {
        [
            &self.w_i, &self.w_f, &self.w_o, &self.w_c, &self.u_i, &self.u_f, &self.u_o,
            &self.u_c,
        ]
    }

    fn matrices_mut(&mut self) -> [&mut Array2<f64>; 8] {
        [
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_c,
            &mut self.u_i,
            &mut self.u_f,
            &mut self.u_o,
            &mut self.u_c,
        ]
    }

    fn biases(&self) -> [&Array1<f64>; 4] {
        [&self.b_i, &self.b_f, &self.b_o, &self.b_c]
    }

    fn biases_mut(&mut self) -> [&mut Array1<f64>; 4] {
        [&mut self.b_i, &mut self.b_f, &mut self.b_o, &mut self.b_c]
    }
}

/// Bidirectional model: two directions plus an affine softmax projection
/// of the concatenated hidden states.
#[derive(Debug, Clone)]
pub struct BlstmModel {
    pub forward: LstmDirectionParams,
    pub backward: LstmDirectionParams,
    /// `(2H) x |labels|`
    pub output_weights: Array2<f64>,
    pub output_bias: Array1<f64>,
    labels: LabelSet,
    pub dropout_rate: f64,
    input_dim: usize,
    hidden: usize,
}

pub const DEFAULT_HIDDEN_UNITS: usize = 170;
pub const DEFAULT_DROPOUT: f64 = 0.1;

impl BlstmModel {
    pub fn new(
        input_dim: usize,
        hidden: usize,
        labels: LabelSet,
        dropout_rate: f64,
        seed: u64,
    ) -> BlstmModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forward = LstmDirectionParams::new(input_dim, hidden, &mut rng);
        let backward = LstmDirectionParams::new(input_dim, hidden, &mut rng);
        let output_weights = glorot(2 * hidden, labels.len(), &mut rng);
        let output_bias = Array1::zeros(labels.len());
        BlstmModel {
            forward,
            backward,
            output_weights,
            output_bias,
            labels,
            dropout_rate,
            input_dim,
            hidden,
        }
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Flattens every parameter in a fixed order (forward direction
    /// matrices then biases, backward likewise, output weights, output
    /// bias). Used by the optimizer and by finite-difference checks.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for dir in [&self.forward, &self.backward] {
            for m in dir.matrices() {
                out.extend(m.iter());
            }
            for b in dir.biases() {
                out.extend(b.iter());
            }
        }
        out.extend(self.output_weights.iter());
        out.extend(self.output_bias.iter());
        out
    }

    /// Inverse of [`flat_params`].
    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for dir in [&mut self.forward, &mut self.backward] {
            for m in dir.matrices_mut() {
                for v in m.iter_mut() {
                    *v = *it.next().expect("parameter vector too short");
                }
            }
            for b in dir.biases_mut() {
                for v in b.iter_mut() {
                    *v = *it.next().expect("parameter vector too short");
                }
            }
        }
        for v in self
            .output_weights
            .iter_mut()
            .chain(self.output_bias.iter_mut())
        {
            *v = *it.next().expect("parameter vector too short");
        }
        assert!(it.next().is_none(), "parameter vector too long");
    }
}

/// One training sequence: one dense vector and one gold label per token.
#[derive(Debug, Clone)]
pub struct BlstmExample {
    pub inputs: Vec<Array1<f64>>,
    pub labels: Vec<BioLabel>,
}

#[derive(Debug, Clone)]
pub struct BlstmTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for BlstmTrainConfig {
    fn default() -> Self {
        BlstmTrainConfig {
            learning_rate: 1e-5,
            epochs: 50,
            patience: 10,
            batch_size: 8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_f1: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_validation_f1: f64,
}

/// Builds the per-token input vectors: concatenation of the generic and
/// target embedding lookups; an out-of-vocabulary half is zero.
pub fn build_input_vectors(
    tokens: &[String],
    generic: &EmbeddingModel,
    target: &EmbeddingModel,
) -> Vec<Array1<f64>> {
    let d = generic.dim() + target.dim();
    tokens
        .iter()
        .map(|w| {
            let mut v = Array1::zeros(d);
            if let Some(g) = generic.vector(w) {
                v.slice_mut(ndarray::s![..generic.dim()]).assign(&g);
            }
            if let Some(t) = target.vector(w) {
                v.slice_mut(ndarray::s![generic.dim()..]).assign(&t);
            }
            v
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct StepCache {
    x: Array1<f64>,
    i: Array1<f64>,
    f: Array1<f64>,
    o: Array1<f64>,
    g: Array1<f64>,
    c: Array1<f64>,
    tanh_c: Array1<f64>,
    h: Array1<f64>,
}

fn run_direction(params: &LstmDirectionParams, inputs: &[Array1<f64>]) -> Vec<StepCache> {
    let hidden = params.b_i.len();
    let mut h_prev = Array1::zeros(hidden);
    let mut c_prev: Array1<f64> = Array1::zeros(hidden);
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let i = (x.dot(&params.w_i) + h_prev.dot(&params.u_i) + &params.b_i).mapv(sigmoid);
        let f = (x.dot(&params.w_f) + h_prev.dot(&params.u_f) + &params.b_f).mapv(sigmoid);
        let o = (x.dot(&params.w_o) + h_prev.dot(&params.u_o) + &params.b_o).mapv(sigmoid);
        let g = (x.dot(&params.w_c) + h_prev.dot(&params.u_c) + &params.b_c).mapv(f64::tanh);
        let c = &f * &c_prev + &i * &g;
        let tanh_c = c.mapv(f64::tanh);
        let h = &o * &tanh_c;
        h_prev = h.clone();
        c_prev = c.clone();
        caches.push(StepCache {
            x: x.clone(),
            i,
            f,
            o,
            g,
            c,
            tanh_c,
            h,
        });
    }
    caches
}

fn softmax(z: &Array1<f64>) -> Array1<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp = z.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

impl BlstmModel {
    fn check_inputs(&self, inputs: &[Array1<f64>]) -> Result<()> {
        if inputs.is_empty() {
            return Err(Error::Runtime("blstm on empty sequence".into()));
        }
        for x in inputs {
            if x.len() != self.input_dim {
                return Err(Error::Config(format!(
                    "input vector dimension {} does not match model input_dim {}",
                    x.len(),
                    self.input_dim
                )));
            }
        }
        Ok(())
    }

    /// Per-token label distributions (dropout disabled).
    pub fn predict(&self, inputs: &[Array1<f64>]) -> Result<Vec<Array1<f64>>> {
        self.check_inputs(inputs)?;
        let fwd = run_direction(&self.forward, inputs);
        let rev_inputs: Vec<Array1<f64>> = inputs.iter().rev().cloned().collect();
        let mut bwd = run_direction(&self.backward, &rev_inputs);
        bwd.reverse();
        Ok((0..inputs.len())
            .map(|t| {
                let mut concat = Array1::zeros(2 * self.hidden);
                concat
                    .slice_mut(ndarray::s![..self.hidden])
                    .assign(&fwd[t].h);
                concat
                    .slice_mut(ndarray::s![self.hidden..])
                    .assign(&bwd[t].h);
                softmax(&(concat.dot(&self.output_weights) + &self.output_bias))
            })
            .collect())
    }

    /// Argmax labels with ties toward the lower label index.
    pub fn predict_labels(&self, inputs: &[Array1<f64>]) -> Result<Vec<BioLabel>> {
        Ok(self
            .predict(inputs)?
            .into_iter()
            .map(|dist| {
                let mut best = 0usize;
                let mut best_p = f64::NEG_INFINITY;
                for (y, &p) in dist.iter().enumerate() {
                    if p > best_p {
                        best_p = p;
                        best = y;
                    }
                }
                self.labels.get(best)
            })
            .collect())
    }

    /// Mean per-token cross-entropy over a batch, dropout disabled.
    pub fn batch_loss(&self, batch: &[BlstmExample]) -> Result<f64> {
        let (loss, _) = self.batch_loss_and_grads(batch, None)?;
        Ok(loss)
    }

    /// Loss plus exact BPTT gradients (flattened in [`flat_params`]
    /// order). When `dropout_rng` is provided, fresh inverted-dropout
    /// masks are applied to each direction's hidden outputs.
    pub fn batch_loss_and_grads(
        &self,
        batch: &[BlstmExample],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<f64>)> {
        let total_tokens: usize = batch.iter().map(|ex| ex.inputs.len()).sum();
        if total_tokens == 0 {
            return Err(Error::Validation("empty batch".into()));
        }
        let hidden = self.hidden;
        let n_labels = self.labels.len();
        let scale = 1.0 / total_tokens as f64;

        let mut loss = 0.0;
        let mut g_fwd = self.forward.zeros_like();
        let mut g_bwd = self.backward.zeros_like();
        let mut g_wout: Array2<f64> = Array2::zeros(self.output_weights.raw_dim());
        let mut g_bout: Array1<f64> = Array1::zeros(self.output_bias.len());

        for ex in batch {
            self.check_inputs(&ex.inputs)?;
            if ex.labels.len() != ex.inputs.len() {
                return Err(Error::Validation(format!(
                    "label count {} does not match input count {}",
                    ex.labels.len(),
                    ex.inputs.len()
                )));
            }
            let gold: Vec<usize> = ex
                .labels
                .iter()
                .map(|&l| {
                    self.labels
                        .index_of(l)
                        .ok_or_else(|| Error::Validation(format!("unknown label {l}")))
                })
                .collect::<Result<_>>()?;
            let t_len = ex.inputs.len();

            let fwd = run_direction(&self.forward, &ex.inputs);
            let rev_inputs: Vec<Array1<f64>> = ex.inputs.iter().rev().cloned().collect();
            let bwd_rev = run_direction(&self.backward, &rev_inputs);

            // inverted dropout masks on the hidden outputs fed to the
            // projection; the recurrent path stays undropped
            let mask = |rng: &mut Option<&mut ChaCha8Rng>| -> Array1<f64> {
                match rng {
                    Some(rng) if self.dropout_rate > 0.0 => {
                        let keep = 1.0 - self.dropout_rate;
                        Array1::from_shape_fn(hidden, |_| {
                            if rng.gen::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                    }
                    _ => Array1::ones(hidden),
                }
            };
            let masks_f: Vec<Array1<f64>> =
                (0..t_len).map(|_| mask(&mut dropout_rng)).collect();
            let masks_b: Vec<Array1<f64>> =
                (0..t_len).map(|_| mask(&mut dropout_rng)).collect();

            // output layer forward + backward
            let mut dh_out_f: Vec<Array1<f64>> = vec![Array1::zeros(hidden); t_len];
            let mut dh_out_b_rev: Vec<Array1<f64>> = vec![Array1::zeros(hidden); t_len];
            for t in 0..t_len {
                let h_f = &fwd[t].h * &masks_f[t];
                let h_b = &bwd_rev[t_len - 1 - t].h * &masks_b[t];
                let mut concat = Array1::zeros(2 * hidden);
                concat.slice_mut(ndarray::s![..hidden]).assign(&h_f);
                concat.slice_mut(ndarray::s![hidden..]).assign(&h_b);
                let probs = softmax(&(concat.dot(&self.output_weights) + &self.output_bias));
                loss -= probs[gold[t]].max(1e-300).ln() * scale;

                let mut dz = probs;
                dz[gold[t]] -= 1.0;
                dz *= scale;
                for a in 0..2 * hidden {
                    for (b, &dzb) in dz.iter().enumerate().take(n_labels) {
                        g_wout[[a, b]] += concat[a] * dzb;
                    }
                }
                g_bout += &dz;
                let dconcat = self.output_weights.dot(&dz);
                dh_out_f[t] = &dconcat.slice(ndarray::s![..hidden]) * &masks_f[t];
                dh_out_b_rev[t_len - 1 - t] =
                    &dconcat.slice(ndarray::s![hidden..]) * &masks_b[t];
            }

            backprop_direction(&self.forward, &fwd, &dh_out_f, &mut g_fwd);
            backprop_direction(&self.backward, &bwd_rev, &dh_out_b_rev, &mut g_bwd);
        }

        if !loss.is_finite() {
            return Err(Error::Runtime(format!("non-finite training loss {loss}")));
        }

        let mut flat = Vec::new();
        for dir in [&g_fwd, &g_bwd] {
            for m in dir.matrices() {
                flat.extend(m.iter());
            }
            for b in dir.biases() {
                flat.extend(b.iter());
            }
        }
        flat.extend(g_wout.iter());
        flat.extend(g_bout.iter());
        Ok((loss, flat))
    }
}

/// BPTT through one direction, accumulating into `grads`. `caches` and
/// `dh_out` are in the direction's own processing order.
fn backprop_direction(
    params: &LstmDirectionParams,
    caches: &[StepCache],
    dh_out: &[Array1<f64>],
    grads: &mut LstmDirectionParams,
) {
    let hidden = params.b_i.len();
    let t_len = caches.len();
    let zeros = Array1::zeros(hidden);
    let mut dh_next = Array1::zeros(hidden);
    let mut dc_next = Array1::zeros(hidden);

    for t in (0..t_len).rev() {
        let cache = &caches[t];
        let c_prev = if t > 0 { &caches[t - 1].c } else { &zeros };
        let h_prev = if t > 0 { &caches[t - 1].h } else { &zeros };

        let dh = &dh_out[t] + &dh_next;
        let d_o = &dh * &cache.tanh_c;
        let dpre_o = &d_o * &(&cache.o * &cache.o.mapv(|v| 1.0 - v));
        let dc = &dh * &cache.o * &cache.tanh_c.mapv(|v| 1.0 - v * v) + &dc_next;
        let d_i = &dc * &cache.g;
        let dpre_i = &d_i * &(&cache.i * &cache.i.mapv(|v| 1.0 - v));
        let d_g = &dc * &cache.i;
        let dpre_g = &d_g * &cache.g.mapv(|v| 1.0 - v * v);
        let d_f = &dc * c_prev;
        let dpre_f = &d_f * &(&cache.f * &cache.f.mapv(|v| 1.0 - v));

        for (w, u, b, dpre) in [
            (&mut grads.w_i, &mut grads.u_i, &mut grads.b_i, &dpre_i),
            (&mut grads.w_f, &mut grads.u_f, &mut grads.b_f, &dpre_f),
            (&mut grads.w_o, &mut grads.u_o, &mut grads.b_o, &dpre_o),
            (&mut grads.w_c, &mut grads.u_c, &mut grads.b_c, &dpre_g),
        ] {
            for (r, &xv) in cache.x.iter().enumerate() {
                if xv != 0.0 {
                    for (col, &d) in dpre.iter().enumerate() {
                        w[[r, col]] += xv * d;
                    }
                }
            }
            for (r, &hv) in h_prev.iter().enumerate() {
                if hv != 0.0 {
                    for (col, &d) in dpre.iter().enumerate() {
                        u[[r, col]] += hv * d;
                    }
                }
            }
            *b += dpre;
        }

        dh_next = params.u_i.dot(&dpre_i)
            + params.u_f.dot(&dpre_f)
            + params.u_o.dot(&dpre_o)
            + params.u_c.dot(&dpre_g);
        dc_next = &dc * &cache.f;
    }
}

/// Trains with RMSprop (decay 0.9, epsilon 1e-8), evaluating validation
/// micro token F1 after each epoch and returning the parameters from the
/// best epoch. Stops once `patience` epochs pass without improvement.
pub fn train_blstm(
    mut model: BlstmModel,
    train: &[BlstmExample],
    validation: &[BlstmExample],
    config: &BlstmTrainConfig,
) -> Result<(BlstmModel, TrainingLog)> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Validation(
            "training and validation sets must be non-empty".into(),
        ));
    }
    if config.learning_rate <= 0.0 {
        return Err(Error::Validation(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        )));
    }
    if config.patience > config.epochs {
        return Err(Error::Validation(format!(
            "patience {} exceeds epoch budget {}",
            config.patience, config.epochs
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(101));
    let mut cache = vec![0.0f64; model.flat_params().len()];
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, usize, BlstmModel)> = None;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let batch: Vec<BlstmExample> =
                chunk.iter().map(|&i| train[i].clone()).collect();
            let (loss, grads) =
                model.batch_loss_and_grads(&batch, Some(&mut dropout_rng))?;
            epoch_loss += loss;
            batches += 1;
            let mut params = model.flat_params();
            for ((w, g), c) in params.iter_mut().zip(&grads).zip(cache.iter_mut()) {
                *c = 0.9 * *c + 0.1 * g * g;
                *w -= config.learning_rate * g / (c.sqrt() + 1e-8);
            }
            model.set_flat_params(&params);
        }

        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for ex in validation {
            gold.push(ex.labels.clone());
            pred.push(model.predict_labels(&ex.inputs)?);
        }
        let val_f1 = token_counts_micro(&gold, &pred).f1();
        log.epochs.push(EpochStats {
            epoch,
            train_loss: epoch_loss / batches.max(1) as f64,
            validation_f1: val_f1,
        });

        let improved = match &best {
            Some((best_f1, _, _)) => val_f1 > *best_f1,
            None => true,
        };
        if improved {
            best = Some((val_f1, epoch, model.clone()));
        }
        let best_epoch = best.as_ref().map(|(_, e, _)| *e).unwrap_or(0);
        if epoch - best_epoch > config.patience {
            break;
        }
    }

    let (best_f1, best_epoch, best_model) = best.expect("at least one epoch ran");
    log.best_epoch = best_epoch;
    log.best_validation_f1 = best_f1;
    Ok((best_model, log))
}

const MAGIC: &[u8; 8] = b"BLSTM\0v1";

impl BlstmModel {
    /// Binary container: 8-byte magic, shape header, label list, then
    /// all parameters as little-endian f64 in [`flat_params`] order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(MAGIC);
        let names = self.labels.names();
        for v in [
            self.input_dim as u32,
            self.hidden as u32,
            names.len() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.dropout_rate.to_le_bytes());
        for name in &names {
            let bytes = name.as_bytes();
            out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
            out.extend_from_slice(bytes);
        }
        for v in self.flat_params() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<BlstmModel> {
        let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > bytes.len() {
                return Err(Error::format(path, 0, "truncated model file"));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 8)? != MAGIC {
            return Err(Error::format(path, 0, "bad magic header"));
        }
        let read_u32 = |pos: &mut usize| -> Result<u32> {
            Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
        };
        let input_dim = read_u32(&mut pos)? as usize;
        let hidden = read_u32(&mut pos)? as usize;
        let n_labels = read_u32(&mut pos)? as usize;
        let dropout_rate = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        let mut names = Vec::with_capacity(n_labels);
        for _ in 0..n_labels {
            let len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
            let s = std::str::from_utf8(take(&mut pos, len)?)
                .map_err(|_| Error::format(path, 0, "bad label encoding"))?;
            names.push(s.to_string());
        }
        let labels = LabelSet::from_names(&names)?;
        let mut model = BlstmModel::new(input_dim, hidden, labels, dropout_rate, 0);
        let count = model.flat_params().len();
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            params.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
        }
        if pos != bytes.len() {
            return Err(Error::format(path, 0, "trailing bytes in model file"));
        }
        model.set_flat_params(&params);
        Ok(model)
    }
}
