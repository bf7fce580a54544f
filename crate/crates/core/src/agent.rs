//! Token-erasing agent trained with REINFORCE.
//!
//! The policy reads the classifier's input representation `x` and, for every
//! token independently, outputs the probability `o_i` of erasing it. Erasing
//! zeroes the word rows of the column and leaves the position rows intact.
//! The reward trades prediction confidence against sparsity:
//!
//! ```text
//! R = ln(P(r | x_hat) / P(r | x)) + eta * (1 - T_hat / T)
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::nn::{BiLstm, INIT_SCALE};
use crate::nre::{NreError, NreModel};
use crate::numerics::{
    checkpoint_bytes, read_checkpoint, sigmoid, AdamState, Graph, NumericsError, ParamGrads,
    ParamId, ParamSet, SeededRng, Tensor, Var,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no instances left after top-k filtering")]
    EmptyFilteredCorpus,
    #[error("action sequence has length {actions}, input has {tokens} columns")]
    LengthMismatch { actions: usize, tokens: usize },
    #[error("raw prediction probability is zero")]
    ZeroProbability,
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nre(#[from] NreError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub top_k: usize,
    /// Subtract a running-mean reward baseline. Off by default.
    pub baseline: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            hidden: 200,
            lr: 0.001,
            batch_size: 5,
            epochs: 10,
            epsilon: 0.1,
            eta: 0.5,
            top_k: 10_000,
            baseline: false,
        }
    }
}

/// Sparsity weights used to train one agent each.
pub const DEFAULT_ETA_GRID: [f64; 5] = [0.05, 0.1, 0.5, 1.0, 1.5];

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(AgentError::Config("epsilon must lie in [0, 1]".into()));
        }
        if self.eta < 0.0 || !self.eta.is_finite() {
            return Err(AgentError::Config("eta must be non-negative".into()));
        }
        if self.top_k == 0 || self.hidden == 0 || self.batch_size == 0 {
            return Err(AgentError::Config(
                "top_k, hidden and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-token decisions: 0 retains, 1 erases.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSequence(Vec<u8>);

impl ActionSequence {
    pub fn new(actions: Vec<u8>) -> Self {
        assert!(actions.iter().all(|&a| a <= 1), "actions must be 0 or 1");
        ActionSequence(actions)
    }

    pub fn all_retain(len: usize) -> Self {
        ActionSequence(vec![0; len])
    }

    pub fn all_erase(len: usize) -> Self {
        ActionSequence(vec![1; len])
    }

    /// Erases everything except the listed positions.
    pub fn from_retained(len: usize, retained: &[usize]) -> Self {
        let mut a = vec![1; len];
        for &i in retained {
            a[i] = 0;
        }
        ActionSequence(a)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn erases(&self, i: usize) -> bool {
        self.0[i] == 1
    }

    pub fn retains(&self, i: usize) -> bool {
        self.0[i] == 0
    }

    /// Number of retained tokens.
    pub fn retained_count(&self) -> usize {
        self.0.iter().filter(|&&a| a == 0).count()
    }

    pub fn retained_indices(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.retains(i)).collect()
    }
}

/// Zeroes the word rows of erased columns; position rows are untouched.
pub fn transform_input(
    x: &Tensor,
    actions: &ActionSequence,
    word_dim: usize,
) -> Result<Tensor, AgentError> {
    if actions.len() != x.cols() {
        return Err(AgentError::LengthMismatch {
            actions: actions.len(),
            tokens: x.cols(),
        });
    }
    let mut out = x.clone();
    let cols = x.cols();
    let data = out.data_mut();
    for (j, _) in actions
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &a)| a == 1)
    {
        for r in 0..word_dim {
            data[r * cols + j] = 0.0;
        }
    }
    Ok(out)
}

/// Reward from log-probabilities of the modified and raw inputs.
pub fn reward_value(log_p_hat: f64, log_p: f64, eta: f64, t: usize, t_hat: usize) -> f64 {
    (log_p_hat - log_p) + eta * (1.0 - t_hat as f64 / t as f64)
}

/// Reward of replacing `x` by `x_hat` under the frozen classifier.
pub fn reward(
    model: &NreModel,
    x: &Tensor,
    x_hat: &Tensor,
    eta: f64,
    t: usize,
    t_hat: usize,
) -> Result<f64, AgentError> {
    if model.predict(x)? == 0.0 {
        return Err(AgentError::ZeroProbability);
    }
    Ok(reward_value(
        model.log_prob(x_hat)?,
        model.log_prob(x)?,
        eta,
        t,
        t_hat,
    ))
}

/// ε-greedy sampling, independently per token.
pub fn sample_actions(o: &[f64], epsilon: f64, rng: &mut SeededRng) -> ActionSequence {
    ActionSequence(
        o.iter()
            .map(|&p| {
                let erase = if rng.bernoulli(epsilon) {
                    rng.bernoulli(0.5)
                } else {
                    rng.bernoulli(p)
                };
                erase as u8
            })
            .collect(),
    )
}

/// Erase iff `o_i > 0.5`; ties retain.
pub fn greedy_actions(o: &[f64]) -> ActionSequence {
    ActionSequence(o.iter().map(|&p| (p > 0.5) as u8).collect())
}

#[derive(Clone, Copy, Debug)]
struct PolicyIds {
    encoder: BiLstm,
    w_x: ParamId,
    w_h: ParamId,
    v: ParamId,
    w_o: ParamId,
    b_o: ParamId,
}

impl PolicyIds {
    fn lookup(params: &ParamSet, hidden: usize) -> Option<Self> {
        Some(PolicyIds {
            encoder: BiLstm::lookup(params, "encoder", hidden)?,
            w_x: params.id_of("attn.w_x")?,
            w_h: params.id_of("attn.w_h")?,
            v: params.id_of("attn.v")?,
            w_o: params.id_of("out.w")?,
            b_o: params.id_of("out.b")?,
        })
    }
}

/// Bidirectional-LSTM policy with per-token attention context.
#[derive(Clone, Debug)]
pub struct PolicyNetwork {
    config: AgentConfig,
    input_dim: usize,
    params: ParamSet,
    ids: PolicyIds,
}

/// Values of a policy forward pass for one input.
#[derive(Clone, Debug)]
pub struct PolicyOutput {
    /// Erase probabilities.
    pub erase_probs: Vec<f64>,
    /// `alpha[i][j]`: weight of state `j` in the context of token `i`.
    pub attention: Vec<Vec<f64>>,
}

impl PolicyNetwork {
    pub fn new(input_dim: usize, config: AgentConfig, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        let mut rng = SeededRng::new(seed);
        let h = config.hidden;
        let mut params = ParamSet::new();
        BiLstm::register(&mut params, "encoder", input_dim, h, &mut rng);
        params.add_uniform("attn.w_x", &[2 * h, input_dim], INIT_SCALE, &mut rng);
        params.add_uniform("attn.w_h", &[2 * h, 2 * h], INIT_SCALE, &mut rng);
        params.add_uniform("attn.v", &[2 * h], INIT_SCALE, &mut rng);
        params.add_uniform("out.w", &[input_dim + 2 * h], INIT_SCALE, &mut rng);
        params.add_zeros("out.b", &[1]);
        let ids = PolicyIds::lookup(&params, h).expect("just registered");
        Ok(PolicyNetwork {
            config,
            input_dim,
            params,
            ids,
        })
    }

    /// Policy with every parameter set to zero (every `o_i` is 0.5).
    pub fn zeros(input_dim: usize, config: AgentConfig) -> Result<Self, AgentError> {
        let mut p = PolicyNetwork::new(input_dim, config, 0)?;
        p.params.zero_all();
        Ok(p)
    }

    pub fn from_checkpoint(
        input_dim: usize,
        config: AgentConfig,
        bytes: &[u8],
    ) -> Result<Self, AgentError> {
        let mut p = PolicyNetwork::new(input_dim, config, 0)?;
        p.params.assign_from(&read_checkpoint(bytes)?)?;
        Ok(p)
    }

    pub fn checkpoint(&self) -> Vec<u8> {
        checkpoint_bytes(&self.params)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn check_input(&self, x: &Tensor) -> Result<(), AgentError> {
        if !x.is_matrix() || x.rows() != self.input_dim {
            return Err(NreError::InputShape {
                expected: self.input_dim,
                found: x.rows(),
            }
            .into());
        }
        Ok(())
    }

    /// Records the policy on `g`; returns (erase logits, attention weight nodes).
    fn forward(&self, g: &mut Graph<'_>, x: Var) -> (Var, Vec<Var>) {
        let t_len = g.value(x).cols();
        let h = self.ids.encoder.encode(g, x);
        let w_x = g.param(self.ids.w_x);
        let w_h = g.param(self.ids.w_h);
        let v = g.param(self.ids.v);
        let w_o = g.param(self.ids.w_o);
        let b_o = g.param(self.ids.b_o);
        let proj_x = g.matmul(w_x, x);
        let proj_h = g.matmul(w_h, h);
        let mut logits = Vec::with_capacity(t_len);
        let mut weights = Vec::with_capacity(t_len);
        for i in 0..t_len {
            let xi_proj = g.column(proj_x, i);
            let pre = g.add_col(proj_h, xi_proj);
            let act = g.tanh(pre);
            let scores = g.vecmat(v, act);
            let alpha = g.softmax(scores);
            let context = g.matvec(h, alpha);
            let x_i = g.column(x, i);
            let z_i = g.concat(&[x_i, context]);
            let l = g.dot(w_o, z_i);
            logits.push(g.add(l, b_o));
            weights.push(alpha);
        }
        (g.concat(&logits), weights)
    }

    /// `ln pi(a | x) = -sum softplus((1 - 2 a_i) l_i)` for erase logits `l`.
    fn log_prob_node(g: &mut Graph<'_>, logits: Var, actions: &ActionSequence) -> Var {
        let signs: Vec<f64> = actions
            .as_slice()
            .iter()
            .map(|&a| if a == 1 { -1.0 } else { 1.0 })
            .collect();
        let s = g.input(Tensor::vector(signs).expect("finite"));
        let signed = g.mul(logits, s);
        let sp = g.softplus(signed);
        let total = g.sum(sp);
        g.scale(total, -1.0)
    }

    pub fn forward_values(&self, x: &Tensor) -> Result<PolicyOutput, AgentError> {
        self.check_input(x)?;
        let mut g = Graph::new(&self.params);
        let xv = g.input(x.clone());
        let (logits, weights) = self.forward(&mut g, xv);
        Ok(PolicyOutput {
            erase_probs: g.value(logits).data().iter().map(|&l| sigmoid(l)).collect(),
            attention: weights
                .iter()
                .map(|&w| g.value(w).data().to_vec())
                .collect(),
        })
    }

    /// Per-token erase probabilities.
    pub fn policy_forward(&self, x: &Tensor) -> Result<Vec<f64>, AgentError> {
        Ok(self.forward_values(x)?.erase_probs)
    }

    pub fn log_prob(&self, x: &Tensor, actions: &ActionSequence) -> Result<f64, AgentError> {
        self.log_prob_with(&self.params, x, actions)
    }

    /// `ln pi(a | x)` evaluated with `params` (same layout as this network).
    pub fn log_prob_with(
        &self,
        params: &ParamSet,
        x: &Tensor,
        actions: &ActionSequence,
    ) -> Result<f64, AgentError> {
        self.check_input(x)?;
        if actions.len() != x.cols() {
            return Err(AgentError::LengthMismatch {
                actions: actions.len(),
                tokens: x.cols(),
            });
        }
        let mut g = Graph::new(params);
        let xv = g.input(x.clone());
        let (logits, _) = self.forward(&mut g, xv);
        let lp = Self::log_prob_node(&mut g, logits, actions);
        Ok(g.value(lp).item())
    }

    /// Gradient of `reward * ln pi(a | x)` with respect to every parameter.
    pub fn policy_gradient(
        &self,
        x: &Tensor,
        actions: &ActionSequence,
        reward: f64,
    ) -> Result<ParamGrads, AgentError> {
        self.check_input(x)?;
        if actions.len() != x.cols() {
            return Err(AgentError::LengthMismatch {
                actions: actions.len(),
                tokens: x.cols(),
            });
        }
        let mut g = Graph::new(&self.params);
        let xv = g.input(x.clone());
        let (logits, _) = self.forward(&mut g, xv);
        let lp = Self::log_prob_node(&mut g, logits, actions);
        let grads = g.backward(lp)?;
        let mut out = ParamGrads::zeros_like(&self.params);
        out.accumulate(&grads, reward);
        Ok(out)
    }

    pub fn greedy(&self, x: &Tensor) -> Result<ActionSequence, AgentError> {
        Ok(greedy_actions(&self.policy_forward(x)?))
    }
}

/// Corpus positions of the `top_k` instances with the highest `P(r | x)`,
/// highest first (ties by position).
pub fn filter_top_k(model: &NreModel, corpus: &Corpus, top_k: usize) -> Vec<usize> {
    let probs = model.predict_corpus(corpus);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order.truncate(top_k.min(corpus.len()));
    order
}

#[derive(Clone, Debug)]
pub struct AgentOutcome {
    pub agent: PolicyNetwork,
    /// Mean sampled reward per epoch.
    pub epoch_rewards: Vec<f64>,
    pub filtered: Vec<usize>,
}

/// Trains one agent against the frozen classifier.
pub fn train_agent(
    model: &NreModel,
    corpus: &Corpus,
    config: &AgentConfig,
    seed: u64,
) -> Result<AgentOutcome, AgentError> {
    config.validate()?;
    let filtered = filter_top_k(model, corpus, config.top_k);
    if filtered.is_empty() {
        return Err(AgentError::EmptyFilteredCorpus);
    }
    let word_dim = model.config().word_dim;
    let inputs: Vec<(Tensor, f64)> = filtered
        .iter()
        .map(|&i| {
            let x = model.embed(&corpus.instances[i]);
            let lp = model.log_prob(&x)?;
            Ok((x, lp))
        })
        .collect::<Result<_, NreError>>()?;

    let mut agent = PolicyNetwork::new(model.config().input_dim(), config.clone(), seed)?;
    let mut adam = AdamState::new(&agent.params, config.lr);
    let mut rng = SeededRng::new(seed).fork();
    let mut baseline = 0.0;
    let mut baseline_n = 0usize;
    let mut epoch_rewards = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        rng.shuffle(&mut order);
        let mut reward_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut grads = ParamGrads::zeros_like(&agent.params);
            let w = 1.0 / chunk.len() as f64;
            for &k in chunk {
                let (x, log_p) = &inputs[k];
                let mut g = Graph::new(&agent.params);
                let xv = g.input(x.clone());
                let (logits, _) = agent.forward(&mut g, xv);
                let o: Vec<f64> = g.value(logits).data().iter().map(|&l| sigmoid(l)).collect();
                let actions = sample_actions(&o, config.epsilon, &mut rng);
                let x_hat = transform_input(x, &actions, word_dim)?;
                let r = reward_value(
                    model.log_prob(&x_hat)?,
                    *log_p,
                    config.eta,
                    actions.len(),
                    actions.retained_count(),
                );
                reward_sum += r;
                let advantage = if config.baseline {
                    let a = r - baseline;
                    baseline_n += 1;
                    baseline += (r - baseline) / baseline_n as f64;
                    a
                } else {
                    r
                };
                let lp = PolicyNetwork::log_prob_node(&mut g, logits, &actions);
                let gr = g.backward(lp)?;
                // Adam minimises, so ascend on R * ln pi.
                grads.accumulate(&gr, -advantage * w);
            }
            adam.step(&mut agent.params, &grads)?;
        }
        epoch_rewards.push(reward_sum / inputs.len() as f64);
    }
    Ok(AgentOutcome {
        agent,
        epoch_rewards,
        filtered,
    })
}

/// Greedy extraction result for one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub instance_id: String,
    pub eta: f64,
    pub actions: ActionSequence,
    pub reward: f64,
    pub retained: Vec<usize>,
}

/// Runs the trained agent greedily on the given corpus positions.
pub fn extract(
    agent: &PolicyNetwork,
    model: &NreModel,
    corpus: &Corpus,
    positions: &[usize],
) -> Result<Vec<ExtractionRecord>, AgentError> {
    let word_dim = model.config().word_dim;
    positions
        .iter()
        .map(|&i| {
            let inst = &corpus.instances[i];
            let x = model.embed(inst);
            let actions = agent.greedy(&x)?;
            let x_hat = transform_input(&x, &actions, word_dim)?;
            let r = reward(
                model,
                &x,
                &x_hat,
                agent.config.eta,
                actions.len(),
                actions.retained_count(),
            )?;
            Ok(ExtractionRecord {
                instance_id: inst.id.clone(),
                eta: agent.config.eta,
                retained: actions.retained_indices(),
                actions,
                reward: r,
            })
        })
        .collect()
}
