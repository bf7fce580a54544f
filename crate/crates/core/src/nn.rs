//! Recurrent building blocks shared by the relation classifier and the agent.

use crate::numerics::{Graph, ParamId, ParamSet, SeededRng, Var};

/// Initial weights are drawn from uniform(-INIT_SCALE, INIT_SCALE).
pub const INIT_SCALE: f64 = 0.1;

/// Single-direction LSTM with gate order (input, forget, cell, output).
#[derive(Clone, Copy, Debug)]
pub(crate) struct Lstm {
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
    hidden: usize,
}

impl Lstm {
    pub(crate) fn register(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut SeededRng,
    ) -> Self {
        Lstm {
            w_ih: params.add_uniform(
                format!("{prefix}.w_ih"),
                &[4 * hidden, input],
                INIT_SCALE,
                rng,
            ),
            w_hh: params.add_uniform(
                format!("{prefix}.w_hh"),
                &[4 * hidden, hidden],
                INIT_SCALE,
                rng,
            ),
            bias: params.add_zeros(format!("{prefix}.bias"), &[4 * hidden]),
            hidden,
        }
    }

    pub(crate) fn lookup(params: &ParamSet, prefix: &str, hidden: usize) -> Option<Self> {
        Some(Lstm {
            w_ih: params.id_of(&format!("{prefix}.w_ih"))?,
            w_hh: params.id_of(&format!("{prefix}.w_hh"))?,
            bias: params.id_of(&format!("{prefix}.bias"))?,
            hidden,
        })
    }

    /// Hidden states for the columns of `x` (d x T), returned in input order.
    pub(crate) fn run(&self, g: &mut Graph<'_>, x: Var, reverse: bool) -> Vec<Var> {
        let t_len = g.value(x).cols();
        let h = self.hidden;
        let w_ih = g.param(self.w_ih);
        let w_hh = g.param(self.w_hh);
        let bias = g.param(self.bias);
        let proj = g.matmul(w_ih, x);
        let proj = g.add_col(proj, bias);
        let mut states: Vec<Option<Var>> = vec![None; t_len];
        let mut prev: Option<(Var, Var)> = None;
        let order: Vec<usize> = if reverse {
            (0..t_len).rev().collect()
        } else {
            (0..t_len).collect()
        };
        for t in order {
            let mut pre = g.column(proj, t);
            if let Some((h_prev, _)) = prev {
                let rec = g.matvec(w_hh, h_prev);
                pre = g.add(pre, rec);
            }
            let if_raw = g.slice(pre, 0, 2 * h);
            let if_gates = g.sigmoid(if_raw);
            let i_gate = g.slice(if_gates, 0, h);
            let f_gate = g.slice(if_gates, h, h);
            let c_raw = g.slice(pre, 2 * h, h);
            let cand = g.tanh(c_raw);
            let o_raw = g.slice(pre, 3 * h, h);
            let o_gate = g.sigmoid(o_raw);
            let mut c = g.mul(i_gate, cand);
            if let Some((_, c_prev)) = prev {
                let keep = g.mul(f_gate, c_prev);
                c = g.add(c, keep);
            }
            let c_act = g.tanh(c);
            let h_t = g.mul(o_gate, c_act);
            states[t] = Some(h_t);
            prev = Some((h_t, c));
        }
        states.into_iter().map(Option::unwrap).collect()
    }
}

/// Forward and backward LSTMs whose states are concatenated per token.
#[derive(Clone, Copy, Debug)]
pub(crate) struct BiLstm {
    fwd: Lstm,
    bwd: Lstm,
}

impl BiLstm {
    pub(crate) fn register(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut SeededRng,
    ) -> Self {
        BiLstm {
            fwd: Lstm::register(params, &format!("{prefix}.fwd"), input, hidden, rng),
            bwd: Lstm::register(params, &format!("{prefix}.bwd"), input, hidden, rng),
        }
    }

    pub(crate) fn lookup(params: &ParamSet, prefix: &str, hidden: usize) -> Option<Self> {
        Some(BiLstm {
            fwd: Lstm::lookup(params, &format!("{prefix}.fwd"), hidden)?,
            bwd: Lstm::lookup(params, &format!("{prefix}.bwd"), hidden)?,
        })
    }

    /// Encodes `x` (d x T) into a (2h x T) matrix of concatenated states.
    pub(crate) fn encode(&self, g: &mut Graph<'_>, x: Var) -> Var {
        let f = self.fwd.run(g, x, false);
        let b = self.bwd.run(g, x, true);
        let cols: Vec<Var> = f
            .into_iter()
            .zip(b)
            .map(|(hf, hb)| g.concat(&[hf, hb]))
            .collect();
        g.stack_cols(&cols)
    }
}
