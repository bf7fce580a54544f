//! Sentence-level binary relation classifier.
//!
//! Each token is embedded as `[word; head position; tail position]`, encoded
//! with a bidirectional LSTM, pooled with additive attention
//! (`u_i = v' tanh(W h_i)`, `a = softmax(u)`) and scored with a sigmoid head.

use std::fs;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{relative_positions, Corpus, Instance, Vocabulary};
use crate::eval::prf1;
use crate::nn::{BiLstm, INIT_SCALE};
use crate::numerics::{
    checkpoint_bytes, dropout_mask, read_checkpoint, softplus, AdamState, Graph, NumericsError,
    ParamGrads, ParamId, ParamSet, SeededRng, Tensor, Var,
};

#[derive(Debug, Error)]
pub enum NreError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("expected {expected} labels, got {found}")]
    LabelCount { expected: usize, found: usize },
    #[error("label {value} at index {index} is outside [0, 1]")]
    LabelOutOfRange { index: usize, value: f64 },
    #[error("input has {found} rows, model expects {expected}")]
    InputShape { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("word vectors: {0}")]
    WordVectors(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NreConfig {
    pub word_dim: usize,
    /// Size of each of the two position tables.
    pub pos_dim: usize,
    pub max_rel_dist: usize,
    pub hidden: usize,
    pub dropout_embed: f64,
    pub dropout_encoder: f64,
    pub dropout_final: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
}

impl Default for NreConfig {
    fn default() -> Self {
        NreConfig {
            word_dim: 100,
            pos_dim: 5,
            max_rel_dist: 60,
            hidden: 200,
            dropout_embed: 0.3,
            dropout_encoder: 0.3,
            dropout_final: 0.5,
            lr: 0.001,
            batch_size: 50,
            max_epochs: 30,
            validation_fraction: 0.1,
        }
    }
}

impl NreConfig {
    /// Width of one input column.
    pub fn input_dim(&self) -> usize {
        self.word_dim + 2 * self.pos_dim
    }

    pub fn validate(&self) -> Result<(), NreError> {
        let sizes = [
            self.word_dim,
            self.pos_dim,
            self.max_rel_dist,
            self.hidden,
            self.batch_size,
        ];
        if sizes.contains(&0) {
            return Err(NreError::Config("all sizes must be positive".into()));
        }
        for p in [self.dropout_embed, self.dropout_encoder, self.dropout_final] {
            if !(0.0..1.0).contains(&p) {
                return Err(NreError::Config("dropout rates must lie in [0, 1)".into()));
            }
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(NreError::Config(
                "validation_fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct NreIds {
    word: ParamId,
    pos_head: ParamId,
    pos_tail: ParamId,
    encoder: BiLstm,
    attn_w: ParamId,
    attn_v: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

impl NreIds {
    fn lookup(params: &ParamSet, hidden: usize) -> Option<Self> {
        Some(NreIds {
            word: params.id_of("word")?,
            pos_head: params.id_of("pos_head")?,
            pos_tail: params.id_of("pos_tail")?,
            encoder: BiLstm::lookup(params, "encoder", hidden)?,
            attn_w: params.id_of("attn.w")?,
            attn_v: params.id_of("attn.v")?,
            out_w: params.id_of("out.w")?,
            out_b: params.id_of("out.b")?,
        })
    }
}

/// Dropout masks are only drawn when a random source is supplied.
struct Dropout<'r> {
    rng: Option<&'r mut SeededRng>,
}

impl Dropout<'_> {
    fn apply(&mut self, g: &mut Graph<'_>, v: Var, p: f64) -> Var {
        match self.rng.as_deref_mut() {
            Some(rng) if p > 0.0 => {
                let mask = dropout_mask(g.value(v).shape(), p, rng);
                let m = g.input(mask);
                g.mul(v, m)
            }
            _ => v,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NreModel {
    config: NreConfig,
    vocab: Vocabulary,
    params: ParamSet,
    ids: NreIds,
}

/// Per-epoch training record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_f1: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: NreModel,
    pub log: Vec<EpochRecord>,
    /// 1-based epoch whose checkpoint was kept.
    pub best_epoch: usize,
}

/// Binary cross-entropy on a logit, `softplus(z) - y z`.
fn bce(logit: f64, y: f64) -> f64 {
    softplus(logit) - y * logit
}

impl NreModel {
    /// Randomly initialised model over `vocab`.
    pub fn new(config: NreConfig, vocab: Vocabulary, seed: u64) -> Result<Self, NreError> {
        config.validate()?;
        let mut rng = SeededRng::new(seed);
        let mut params = ParamSet::new();
        let rows = 2 * config.max_rel_dist + 1;
        params.add_uniform(
            "word",
            &[vocab.len(), config.word_dim],
            INIT_SCALE,
            &mut rng,
        );
        params.add_uniform("pos_head", &[rows, config.pos_dim], INIT_SCALE, &mut rng);
        params.add_uniform("pos_tail", &[rows, config.pos_dim], INIT_SCALE, &mut rng);
        BiLstm::register(
            &mut params,
            "encoder",
            config.input_dim(),
            config.hidden,
            &mut rng,
        );
        let h2 = 2 * config.hidden;
        params.add_uniform("attn.w", &[h2, h2], INIT_SCALE, &mut rng);
        params.add_uniform("attn.v", &[h2], INIT_SCALE, &mut rng);
        params.add_uniform("out.w", &[h2], INIT_SCALE, &mut rng);
        params.add_zeros("out.b", &[1]);
        let ids = NreIds::lookup(&params, config.hidden).expect("just registered");
        Ok(NreModel {
            config,
            vocab,
            params,
            ids,
        })
    }

    /// Rebuilds a model from a checkpoint produced by [`NreModel::checkpoint`].
    pub fn from_checkpoint(
        config: NreConfig,
        vocab: Vocabulary,
        bytes: &[u8],
    ) -> Result<Self, NreError> {
        let mut model = NreModel::new(config, vocab, 0)?;
        let loaded = read_checkpoint(bytes)?;
        model.params.assign_from(&loaded)?;
        Ok(model)
    }

    pub fn checkpoint(&self) -> Vec<u8> {
        checkpoint_bytes(&self.params)
    }

    pub fn config(&self) -> &NreConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Loads whitespace-separated `token v1 .. vd` lines into the word table.
    /// Tokens outside the vocabulary are skipped. Returns the rows replaced.
    pub fn load_word_vectors(&mut self, path: &Path) -> Result<usize, NreError> {
        let file = fs::File::open(path)?;
        let mut loaded = 0;
        let dim = self.config.word_dim;
        for (k, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(tok) = parts.next() else { continue };
            let values: Vec<f64> = parts
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| NreError::WordVectors(format!("line {}: {e}", k + 1)))?;
            if values.len() != dim {
                return Err(NreError::WordVectors(format!(
                    "line {}: expected {dim} values, got {}",
                    k + 1,
                    values.len()
                )));
            }
            if !values.iter().all(|v| v.is_finite()) {
                return Err(NreError::WordVectors(format!(
                    "line {}: non-finite value",
                    k + 1
                )));
            }
            let id = self.vocab.id(tok);
            if id == crate::corpus::UNK_ID {
                continue;
            }
            let table = self.params.get_mut(self.ids.word);
            table.data_mut()[id * dim..(id + 1) * dim].copy_from_slice(&values);
            loaded += 1;
        }
        Ok(loaded)
    }

    fn position_rows(&self, inst: &Instance) -> Vec<(usize, usize)> {
        let m = self.config.max_rel_dist as i64;
        relative_positions(inst, self.config.max_rel_dist)
            .into_iter()
            .map(|(h, t)| ((h + m) as usize, (t + m) as usize))
            .collect()
    }

    /// Input representation of an instance: a (d_x x T) matrix.
    pub fn embed(&self, inst: &Instance) -> Tensor {
        let word = self.params.get(self.ids.word);
        let ph = self.params.get(self.ids.pos_head);
        let pt = self.params.get(self.ids.pos_tail);
        let cols: Vec<Vec<f64>> = inst
            .tokens
            .iter()
            .zip(self.position_rows(inst))
            .map(|(tok, (h, t))| {
                let mut col = Vec::with_capacity(self.config.input_dim());
                col.extend_from_slice(word.row(self.vocab.id(tok)));
                col.extend_from_slice(ph.row(h));
                col.extend_from_slice(pt.row(t));
                col
            })
            .collect();
        Tensor::from_columns(&cols).expect("instances have at least one token")
    }

    /// Same as [`embed`](Self::embed) but recorded so embedding tables receive gradients.
    fn embed_graph(&self, g: &mut Graph<'_>, inst: &Instance) -> Var {
        let cols: Vec<Var> = inst
            .tokens
            .iter()
            .zip(self.position_rows(inst))
            .map(|(tok, (h, t))| {
                let w = g.lookup(self.ids.word, self.vocab.id(tok));
                let ph = g.lookup(self.ids.pos_head, h);
                let pt = g.lookup(self.ids.pos_tail, t);
                g.concat(&[w, ph, pt])
            })
            .collect();
        g.stack_cols(&cols)
    }

    fn forward(&self, g: &mut Graph<'_>, x: Var, mut dropout: Dropout<'_>) -> Var {
        let c = &self.config;
        let x = dropout.apply(g, x, c.dropout_embed);
        let h = self.ids.encoder.encode(g, x);
        let h = dropout.apply(g, h, c.dropout_encoder);
        let w = g.param(self.ids.attn_w);
        let v = g.param(self.ids.attn_v);
        let proj = g.matmul(w, h);
        let act = g.tanh(proj);
        let scores = g.vecmat(v, act);
        let weights = g.softmax(scores);
        let pooled = g.matvec(h, weights);
        let pooled = dropout.apply(g, pooled, c.dropout_final);
        let ow = g.param(self.ids.out_w);
        let ob = g.param(self.ids.out_b);
        let z = g.dot(ow, pooled);
        g.add(z, ob)
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NreError> {
        if !x.is_matrix() || x.rows() != self.config.input_dim() {
            return Err(NreError::InputShape {
                expected: self.config.input_dim(),
                found: x.rows(),
            });
        }
        Ok(())
    }

    /// Inference-mode logit for an input representation.
    pub fn logit(&self, x: &Tensor) -> Result<f64, NreError> {
        self.check_input(x)?;
        let mut g = Graph::new(&self.params);
        let xv = g.input(x.clone());
        let z = self.forward(&mut g, xv, Dropout { rng: None });
        Ok(g.value(z).item())
    }

    /// `P(r | x)` with dropout disabled. Accepts agent-modified inputs.
    pub fn predict(&self, x: &Tensor) -> Result<f64, NreError> {
        Ok(crate::numerics::sigmoid(self.logit(x)?))
    }

    /// `ln P(r | x)`, finite even when the probability underflows.
    pub fn log_prob(&self, x: &Tensor) -> Result<f64, NreError> {
        Ok(-softplus(-self.logit(x)?))
    }

    pub fn predict_instance(&self, inst: &Instance) -> f64 {
        self.predict(&self.embed(inst))
            .expect("embedded inputs have the right shape")
    }

    pub fn predict_corpus(&self, corpus: &Corpus) -> Vec<f64> {
        corpus
            .instances
            .iter()
            .map(|i| self.predict_instance(i))
            .collect()
    }

    /// Mean BCE of `batch` and its gradient, evaluated with `params` (which
    /// must share this model's layout).
    pub fn loss_and_grads_with(
        &self,
        params: &ParamSet,
        batch: &[(&Instance, f64)],
        mut dropout: Option<&mut SeededRng>,
    ) -> Result<(f64, ParamGrads), NreError> {
        let mut grads = ParamGrads::zeros_like(params);
        let mut total = 0.0;
        let w = 1.0 / batch.len() as f64;
        for &(inst, y) in batch {
            let mut g = Graph::new(params);
            let x = self.embed_graph(&mut g, inst);
            let z = self.forward(
                &mut g,
                x,
                Dropout {
                    rng: dropout.as_deref_mut(),
                },
            );
            // softplus(z) - y z
            let sp = g.softplus(z);
            let yz = g.scale(z, y);
            let loss = g.sub(sp, yz);
            total += g.value(loss).item();
            let gr = g.backward(loss)?;
            grads.accumulate(&gr, w);
        }
        Ok((total * w, grads))
    }

    pub fn loss_and_grads(
        &self,
        batch: &[(&Instance, f64)],
        dropout: Option<&mut SeededRng>,
    ) -> Result<(f64, ParamGrads), NreError> {
        self.loss_and_grads_with(&self.params, batch, dropout)
    }

    /// Inference-mode mean BCE of `batch` under `params`; forward only.
    pub fn loss_with(&self, params: &ParamSet, batch: &[(&Instance, f64)]) -> f64 {
        let total: f64 = batch
            .iter()
            .map(|&(inst, y)| {
                let mut g = Graph::new(params);
                let x = self.embed_graph(&mut g, inst);
                let z = self.forward(&mut g, x, Dropout { rng: None });
                bce(g.value(z).item(), y)
            })
            .sum();
        total / batch.len() as f64
    }
}

fn check_labels(corpus: &Corpus, labels: &[f64]) -> Result<(), NreError> {
    if corpus.is_empty() {
        return Err(NreError::EmptyCorpus);
    }
    if labels.len() != corpus.len() {
        return Err(NreError::LabelCount {
            expected: corpus.len(),
            found: labels.len(),
        });
    }
    if let Some((index, &value)) = labels
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(NreError::LabelOutOfRange { index, value });
    }
    Ok(())
}

// Keeps the split stream distinct from the training stream of the same seed.
const SPLIT_SALT: u64 = 0x5eed_0001;

/// Splits positions into (train, validation): the validation part is the last
/// `fraction` of a seeded shuffle.
pub fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(seed ^ SPLIT_SALT).shuffle(&mut order);
    let n_val = (n as f64 * fraction).floor() as usize;
    let val = order.split_off(n - n_val);
    (order, val)
}

/// Trains a copy of `initial` on soft targets and keeps the epoch with the
/// best validation F1 (ties broken by lower validation loss, then earlier).
pub fn train(
    initial: &NreModel,
    corpus: &Corpus,
    labels: &[f64],
    seed: u64,
) -> Result<TrainOutcome, NreError> {
    check_labels(corpus, labels)?;
    let config = initial.config.clone();
    let (train_idx, mut val_idx) = validation_split(corpus.len(), config.validation_fraction, seed);
    if val_idx.is_empty() {
        val_idx = train_idx.clone();
    }
    let mut model = initial.clone();
    let mut adam = AdamState::new(&model.params, config.lr);
    let mut rng = SeededRng::new(seed);
    let mut best: Option<(f64, f64, ParamSet, usize)> = None;
    let mut log = Vec::with_capacity(config.max_epochs);
    let val_gold: Vec<i8> = val_idx
        .iter()
        .map(|&i| if labels[i] > 0.5 { 1 } else { -1 })
        .collect();

    for epoch in 1..=config.max_epochs {
        let mut order = train_idx.clone();
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&Instance, f64)> = chunk
                .iter()
                .map(|&i| (&corpus.instances[i], labels[i]))
                .collect();
            let (loss, grads) = model.loss_and_grads(&batch, Some(&mut rng))?;
            epoch_loss += loss * chunk.len() as f64;
            adam.step(&mut model.params, &grads)?;
        }
        let probs: Vec<f64> = val_idx
            .iter()
            .map(|&i| model.predict_instance(&corpus.instances[i]))
            .collect();
        let val_f1 = prf1(&probs, &val_gold, 0.5).map(|m| m.f1).unwrap_or(0.0);
        let val_loss = val_idx
            .iter()
            .zip(&probs)
            .map(|(&i, &p)| {
                let p = p.clamp(1e-12, 1.0 - 1e-12);
                -(labels[i] * p.ln() + (1.0 - labels[i]) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / val_idx.len() as f64;
        log.push(EpochRecord {
            epoch,
            loss: epoch_loss / train_idx.len().max(1) as f64,
            val_f1,
            val_loss,
        });
        let better = match &best {
            None => true,
            Some((f1, vl, _, _)) => val_f1 > *f1 || (val_f1 == *f1 && val_loss < *vl),
        };
        if better {
            best = Some((val_f1, val_loss, model.params.clone(), epoch));
        }
    }
    let (best_epoch, params) = match best {
        Some((_, _, params, epoch)) => (epoch, params),
        None => (0, model.params.clone()),
    };
    model.params = params;
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
    })
}
