use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::config::{ActivationKind, ModelConfig};
use super::weights::{FeedForward, NormParams};
use super::Model;
use crate::error::{Error, Result};

pub(crate) fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

pub(crate) fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// Row-wise normalization.
pub(crate) fn normalize(x: ArrayView2<f64>, p: &NormParams, eps: f64) -> Array2<f64> {
    let mut out = x.to_owned();
    let d = x.ncols() as f64;
    for mut row in out.rows_mut() {
        match &p.bias {
            Some(bias) => {
                let mean = row.sum() / d;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
                let inv = 1.0 / (var + eps).sqrt();
                for ((v, g), b) in row.iter_mut().zip(&p.gain).zip(bias) {
                    *v = (*v - mean) * inv * g + b;
                }
            }
            None => {
                let ms = row.iter().map(|v| v * v).sum::<f64>() / d;
                let inv = 1.0 / (ms + eps).sqrt();
                for (v, g) in row.iter_mut().zip(&p.gain) {
                    *v *= inv * g;
                }
            }
        }
    }
    out
}

fn add_bias(mut m: Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    m += &b.view().insert_axis(Axis(0));
    m
}

/// Feed-forward intermediates of one layer.
#[derive(Debug, Clone)]
pub enum FfTrace {
    Mlp {
        /// `x·W_in + b_in`
        pre: Array2<f64>,
        /// `gelu(pre)`
        act: Array2<f64>,
    },
    Gated {
        gate: Array2<f64>,
        act: Array2<f64>,
        up: Array2<f64>,
        /// `act ⊙ up`
        hidden: Array2<f64>,
    },
}

impl FfTrace {
    /// Input of the down / output projection.
    pub fn hidden(&self) -> &Array2<f64> {
        match self {
            FfTrace::Mlp { act, .. } => act,
            FfTrace::Gated { hidden, .. } => hidden,
        }
    }
}

/// Everything recorded for one transformer block.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub input: Array2<f64>,
    pub norm1: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// Per head, scaled pre-softmax scores `Q·Kᵀ/√d_k`; entries above the diagonal are 0.
    pub scores: Vec<Array2<f64>>,
    /// Per head, attention weights; entries above the diagonal are 0.
    pub attn: Vec<Array2<f64>>,
    /// Concatenated head outputs `A·V`.
    pub heads_out: Array2<f64>,
    pub attn_out: Array2<f64>,
    pub mid: Array2<f64>,
    pub norm2: Array2<f64>,
    pub ff: FfTrace,
    pub ff_out: Array2<f64>,
    pub output: Array2<f64>,
}

/// Immutable record of one forward pass.
#[derive(Debug, Clone)]
pub struct ActivationTrace {
    pub tokens: Vec<u32>,
    /// Positions whose token embedding was zeroed.
    pub masked: Vec<bool>,
    /// Input to the first block: token embedding + position embedding.
    pub embeddings: Array2<f64>,
    pub layers: Vec<LayerTrace>,
    pub final_hidden: Array2<f64>,
    pub logits: Array2<f64>,
}

impl ActivationTrace {
    pub fn seq_len(&self) -> usize {
        self.tokens.len()
    }

    /// Residual stream entering the final norm.
    pub fn final_input(&self) -> &Array2<f64> {
        match self.layers.last() {
            Some(l) => &l.output,
            None => &self.embeddings,
        }
    }

    /// Softmax probability of each vocabulary entry at position `t`.
    pub fn probabilities(&self, t: usize) -> Array1<f64> {
        softmax(self.logits.row(t))
    }
}

pub(crate) fn softmax(x: ArrayView1<f64>) -> Array1<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut e = x.mapv(|v| (v - max).exp());
    let z = e.sum();
    e /= z;
    e
}

impl Model {
    fn check_tokens(&self, tokens: &[u32]) -> Result<()> {
        let cfg = &self.config;
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        if tokens.len() > cfg.max_seq {
            return Err(Error::SequenceTooLong {
                len: tokens.len(),
                max: cfg.max_seq,
            });
        }
        if let Some(&id) = tokens.iter().find(|&&id| id as usize >= cfg.vocab_size) {
            return Err(Error::TokenOutOfRange {
                id,
                vocab: cfg.vocab_size,
            });
        }
        Ok(())
    }

    pub fn forward(&self, tokens: &[u32]) -> Result<ActivationTrace> {
        self.forward_masked(tokens, &vec![false; tokens.len()])
    }

    /// Forward pass with the token embedding of every `mask[t] == true` position
    /// replaced by zeros. Position embeddings are still added.
    pub fn forward_masked(&self, tokens: &[u32], mask: &[bool]) -> Result<ActivationTrace> {
        self.check_tokens(tokens)?;
        if mask.len() != tokens.len() {
            return Err(Error::Shape(format!(
                "mask of length {} for {} tokens",
                mask.len(),
                tokens.len()
            )));
        }
        let cfg: &ModelConfig = &self.config;
        let w = &self.weights;
        let n = tokens.len();
        let d = cfg.d_model;

        let mut x = Array2::<f64>::zeros((n, d));
        for (t, (&id, &m)) in tokens.iter().zip(mask).enumerate() {
            let mut row = x.row_mut(t);
            if !m {
                row += &w.token_embedding.row(id as usize);
            }
            row += &w.position_embedding.row(t);
        }
        let embeddings = x.clone();

        let mut layers = Vec::with_capacity(cfg.n_layers);
        for lw in &w.layers {
            let input = x;
            let norm1 = normalize(input.view(), &lw.norm1, cfg.epsilon_norm);
            let q = norm1.dot(&lw.wq);
            let k = norm1.dot(&lw.wk);
            let v = norm1.dot(&lw.wv);
            let (scores, attn, heads_out) = attention(cfg, &q, &k, &v);
            let attn_out = heads_out.dot(&lw.wo);
            let mid = &input + &attn_out;
            let norm2 = normalize(mid.view(), &lw.norm2, cfg.epsilon_norm);
            let (ff, ff_out) = feed_forward(cfg.activation_kind, &lw.ff, &norm2);
            let output = &mid + &ff_out;
            x = output.clone();
            layers.push(LayerTrace {
                input,
                norm1,
                q,
                k,
                v,
                scores,
                attn,
                heads_out,
                attn_out,
                mid,
                norm2,
                ff,
                ff_out,
                output,
            });
        }
        let final_hidden = normalize(x.view(), &w.final_norm, cfg.epsilon_norm);
        let logits = final_hidden.dot(&w.unembedding);
        Ok(ActivationTrace {
            tokens: tokens.to_vec(),
            masked: mask.to_vec(),
            embeddings,
            layers,
            final_hidden,
            logits,
        })
    }

    /// Greedy decoding; ties go to the lowest token id.
    pub fn generate(&self, prompt: &[u32], max_new: usize) -> Result<Vec<u32>> {
        if prompt.is_empty() {
            return Err(Error::EmptySequence);
        }
        if prompt.len() + max_new > self.config.max_seq {
            return Err(Error::SequenceTooLong {
                len: prompt.len() + max_new,
                max: self.config.max_seq,
            });
        }
        let mut seq = prompt.to_vec();
        for _ in 0..max_new {
            let trace = self.forward(&seq)?;
            let row = trace.logits.row(seq.len() - 1);
            seq.push(argmax(row) as u32);
        }
        Ok(seq)
    }
}

pub(crate) fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

type AttentionOut = (Vec<Array2<f64>>, Vec<Array2<f64>>, Array2<f64>);

fn attention(cfg: &ModelConfig, q: &Array2<f64>, k: &Array2<f64>, v: &Array2<f64>) -> AttentionOut {
    let n = q.nrows();
    let dk = cfg.head_dim();
    let scale = 1.0 / (dk as f64).sqrt();
    let mut scores = Vec::with_capacity(cfg.n_heads);
    let mut attn = Vec::with_capacity(cfg.n_heads);
    let mut out = Array2::<f64>::zeros((n, cfg.d_model));
    for h in 0..cfg.n_heads {
        let cols = s![.., h * dk..(h + 1) * dk];
        let (qh, kh, vh) = (q.slice(cols), k.slice(cols), v.slice(cols));
        let mut sc = qh.dot(&kh.t()) * scale;
        let mut a = Array2::<f64>::zeros((n, n));
        for t in 0..n {
            for s in t + 1..n {
                sc[[t, s]] = 0.0;
            }
            let p = softmax(sc.slice(s![t, ..=t]));
            a.slice_mut(s![t, ..=t]).assign(&p);
        }
        out.slice_mut(cols).assign(&a.dot(&vh));
        scores.push(sc);
        attn.push(a);
    }
    (scores, attn, out)
}

fn feed_forward(kind: ActivationKind, ff: &FeedForward, x: &Array2<f64>) -> (FfTrace, Array2<f64>) {
    match (kind, ff) {
        (
            _,
            FeedForward::Mlp {
                w_in,
                b_in,
                w_out,
                b_out,
            },
        ) => {
            let pre = add_bias(x.dot(w_in), b_in);
            let act = pre.mapv(gelu);
            let out = add_bias(act.dot(w_out), b_out);
            (FfTrace::Mlp { pre, act }, out)
        }
        (
            _,
            FeedForward::Gated {
                w_gate,
                b_gate,
                w_up,
                b_up,
                w_down,
                b_down,
            },
        ) => {
            let gate = add_bias(x.dot(w_gate), b_gate);
            let act = gate.mapv(silu);
            let up = add_bias(x.dot(w_up), b_up);
            let hidden = &act * &up;
            let out = add_bias(hidden.dot(w_down), b_down);
            (
                FfTrace::Gated {
                    gate,
                    act,
                    up,
                    hidden,
                },
                out,
            )
        }
    }
}
