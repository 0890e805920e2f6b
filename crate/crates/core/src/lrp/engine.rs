//! Reverse relevance pass over a recorded forward trace.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::rules::{linear_rows, matmul_rule, residual_split, stabilize, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::model::{ActivationTrace, FeedForward, FfTrace, Model};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrpConfig {
    pub epsilon: f64,
    pub exec: Exec,
}

impl Default for LrpConfig {
    fn default() -> Self {
        LrpConfig {
            epsilon: DEFAULT_EPSILON,
            exec: Exec::default(),
        }
    }
}

/// Relevance of every position before `target` for the token at `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceVector {
    pub target: usize,
    pub seed: f64,
    /// One value per position `0..target`.
    pub values: Vec<f64>,
}

impl RelevanceVector {
    /// Values zero-padded (or truncated) to `len`.
    pub fn padded(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        let n = self.values.len().min(len);
        out[..n].copy_from_slice(&self.values[..n]);
        out
    }
}

/// Relevance rows for every answer token of a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceMatrix {
    /// Number of positions before the first answer token.
    pub context_len: usize,
    pub rows: Vec<RelevanceVector>,
}

impl RelevanceMatrix {
    pub fn row_for(&self, target: usize) -> Option<&RelevanceVector> {
        self.rows.iter().find(|r| r.target == target)
    }

    pub fn targets(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(|r| r.target)
    }
}

/// Kind of rule applied at one step of the reverse pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Linear,
    Identity,
    Softmax,
    Bilinear,
    /// Matrix product rule, used for `A·V` and `Q·Kᵀ`.
    Product,
    Residual,
}

/// Relevance totals entering and leaving one step of the reverse pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub layer: Option<usize>,
    pub site: String,
    pub rule: RuleKind,
    /// Signed sum of relevance handed to the step.
    pub inflow: f64,
    /// Sum of absolute relevance handed to the step.
    pub inflow_mass: f64,
    /// Signed sum of relevance the step passes on.
    pub outflow: f64,
    /// Relevance absorbed by the ε stabilizer, computed from the rule itself.
    pub epsilon_absorbed: f64,
    /// Relevance absorbed by bias terms.
    pub bias_absorbed: f64,
}

/// Relevance of every prompt position for the token at `target`, seeded with
/// `seed` at its realized logit.
pub fn attribute_token(
    model: &Model,
    trace: &ActivationTrace,
    target: usize,
    seed: f64,
    config: &LrpConfig,
) -> Result<RelevanceVector> {
    Reverse::new(model, trace, target, config.epsilon, false)?.run(seed)
}

/// Same as [`attribute_token`], also returning the per-step log.
pub fn attribute_token_logged(
    model: &Model,
    trace: &ActivationTrace,
    target: usize,
    seed: f64,
    config: &LrpConfig,
) -> Result<(RelevanceVector, Vec<StepLog>)> {
    let mut rev = Reverse::new(model, trace, target, config.epsilon, true)?;
    let rv = rev.run(seed)?;
    Ok((rv, rev.log))
}

/// One relevance row per answer position, each seeded with 1.0.
///
/// `positions` must be strictly increasing and each at least
/// `max(context_len, 1)`.
pub fn attribute_response(
    model: &Model,
    trace: &ActivationTrace,
    context_len: usize,
    positions: &[usize],
    config: &LrpConfig,
) -> Result<RelevanceMatrix> {
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "answer positions must be strictly increasing".into(),
        ));
    }
    if let Some(&p) = positions.iter().find(|&&p| p < context_len.max(1)) {
        return Err(Error::InvalidArgument(format!(
            "answer position {p} lies before the context boundary {context_len}"
        )));
    }
    let rows = config
        .exec
        .map(positions, |&p| attribute_token(model, trace, p, 1.0, config))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(RelevanceMatrix { context_len, rows })
}

struct Reverse<'a> {
    model: &'a Model,
    trace: &'a ActivationTrace,
    target: usize,
    /// Rows that can receive relevance: `0..m`.
    m: usize,
    eps: f64,
    logging: bool,
    log: Vec<StepLog>,
}

impl<'a> Reverse<'a> {
    fn new(
        model: &'a Model,
        trace: &'a ActivationTrace,
        target: usize,
        eps: f64,
        logging: bool,
    ) -> Result<Self> {
        let len = trace.seq_len();
        if target == 0 || target >= len {
            return Err(Error::TargetOutOfRange { target, len });
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if trace.layers.len() != model.config.n_layers {
            return Err(Error::Shape(format!(
                "trace has {} layers, model has {}",
                trace.layers.len(),
                model.config.n_layers
            )));
        }
        Ok(Reverse {
            model,
            trace,
            target,
            m: target,
            eps,
            logging,
            log: Vec::new(),
        })
    }

    fn rows<'b>(&self, a: &'b Array2<f64>) -> ArrayView2<'b, f64> {
        a.slice(s![..self.m, ..])
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        layer: Option<usize>,
        site: &str,
        rule: RuleKind,
        r_in: &Array2<f64>,
        outflow: f64,
        epsilon_absorbed: f64,
        bias_absorbed: f64,
    ) {
        if self.logging {
            self.log.push(StepLog {
                layer,
                site: site.to_string(),
                rule,
                inflow: r_in.sum(),
                inflow_mass: r_in.iter().map(|v| v.abs()).sum(),
                outflow,
                epsilon_absorbed,
                bias_absorbed,
            });
        }
    }

    fn identity(&mut self, layer: Option<usize>, site: &str, r: &Array2<f64>) {
        let total = r.sum();
        self.record(layer, site, RuleKind::Identity, r, total, 0.0, 0.0);
    }

    fn linear(
        &mut self,
        layer: Option<usize>,
        site: &str,
        x: &Array2<f64>,
        w: &Array2<f64>,
        bias: Option<&Array1<f64>>,
        z: &Array2<f64>,
        r: &Array2<f64>,
    ) -> Array2<f64> {
        let (out, eps_abs, bias_abs) = linear_rows(
            self.rows(x),
            w.view(),
            bias.map(|b| b.view()),
            self.rows(z),
            r.view(),
            self.eps,
        );
        self.record(layer, site, RuleKind::Linear, r, out.sum(), eps_abs, bias_abs);
        out
    }

    fn run(&mut self, seed: f64) -> Result<RelevanceVector> {
        let (model, trace) = (self.model, self.trace);
        let w = &model.weights;
        let d = model.config.d_model;
        let row = self.m - 1;
        let tok = trace.tokens[self.target] as usize;

        // unembedding: only the realized logit carries relevance
        let hf = trace.final_hidden.row(row);
        let z = trace.logits[[row, tok]];
        let c = seed / stabilize(z, self.eps);
        let mut r = Array2::<f64>::zeros((self.m, d));
        for i in 0..d {
            r[[row, i]] = hf[i] * w.unembedding[[i, tok]] * c;
        }
        if self.logging {
            let seed_row = Array2::from_elem((1, 1), seed);
            let out = r.sum();
            self.record(
                None,
                "unembedding",
                RuleKind::Linear,
                &seed_row,
                out,
                c * (stabilize(z, self.eps) - z),
                0.0,
            );
        }
        self.identity(None, "final_norm", &r);

        for l in (0..model.config.n_layers).rev() {
            r = self.layer(l, r)?;
        }
        Ok(RelevanceVector {
            target: self.target,
            seed,
            values: r.sum_axis(Axis(1)).to_vec(),
        })
    }

    fn layer(&mut self, l: usize, r_out: Array2<f64>) -> Result<Array2<f64>> {
        let (model, trace) = (self.model, self.trace);
        let lt = &trace.layers[l];
        let lw = &model.weights.layers[l];
        let layer = Some(l);
        let eps = self.eps;

        // output = mid + ff_out
        let (r_mid_skip, r_ff, eps_abs) = residual_split(
            self.rows(&lt.mid),
            self.rows(&lt.ff_out),
            self.rows(&lt.output),
            r_out.view(),
            eps,
        );
        let out = r_mid_skip.sum() + r_ff.sum();
        self.record(layer, "ff_residual", RuleKind::Residual, &r_out, out, eps_abs, 0.0);

        let r_norm2 = match (&lt.ff, &lw.ff) {
            (
                FfTrace::Mlp { pre, act },
                FeedForward::Mlp {
                    w_in,
                    b_in,
                    w_out,
                    b_out,
                },
            ) => {
                let r_act = self.linear(layer, "ff.out", act, w_out, Some(b_out), &lt.ff_out, &r_ff);
                self.identity(layer, "ff.activation", &r_act);
                self.linear(layer, "ff.in", &lt.norm2, w_in, Some(b_in), pre, &r_act)
            }
            (
                FfTrace::Gated {
                    gate, up, hidden, ..
                },
                FeedForward::Gated {
                    w_gate,
                    b_gate,
                    w_up,
                    b_up,
                    w_down,
                    b_down,
                },
            ) => {
                let r_hidden =
                    self.linear(layer, "ff.down", hidden, w_down, Some(b_down), &lt.ff_out, &r_ff);
                let r_half = &r_hidden / 2.0;
                let out = 2.0 * r_half.sum();
                self.record(layer, "ff.product", RuleKind::Bilinear, &r_hidden, out, 0.0, 0.0);
                self.identity(layer, "ff.activation", &r_half);
                let r_gate = self.linear(layer, "ff.gate", &lt.norm2, w_gate, Some(b_gate), gate, &r_half);
                let r_up = self.linear(layer, "ff.up", &lt.norm2, w_up, Some(b_up), up, &r_half);
                r_gate + r_up
            }
            _ => {
                return Err(Error::Shape(format!(
                    "layer {l}: feed-forward trace does not match its weights"
                )))
            }
        };
        self.identity(layer, "norm2", &r_norm2);
        let r_mid = r_mid_skip + r_norm2;

        // mid = input + attn_out
        let (r_in_skip, r_attn, eps_abs) = residual_split(
            self.rows(&lt.input),
            self.rows(&lt.attn_out),
            self.rows(&lt.mid),
            r_mid.view(),
            eps,
        );
        let out = r_in_skip.sum() + r_attn.sum();
        self.record(layer, "attn_residual", RuleKind::Residual, &r_mid, out, eps_abs, 0.0);

        let r_heads = self.linear(layer, "attn.out", &lt.heads_out, &lw.wo, None, &lt.attn_out, &r_attn);
        let (r_q, r_k, r_v) = self.attention(l, &r_heads)?;

        let mut r_norm1 = self.linear(layer, "attn.q", &lt.norm1, &lw.wq, None, &lt.q, &r_q);
        r_norm1 += &self.linear(layer, "attn.k", &lt.norm1, &lw.wk, None, &lt.k, &r_k);
        r_norm1 += &self.linear(layer, "attn.v", &lt.norm1, &lw.wv, None, &lt.v, &r_v);
        self.identity(layer, "norm1", &r_norm1);
        Ok(r_in_skip + r_norm1)
    }

    /// Relevance of `Q`, `K` and `V` from relevance on the concatenated head outputs.
    fn attention(
        &mut self,
        l: usize,
        r_heads: &Array2<f64>,
    ) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
        let cfg = &self.model.config;
        let lt = &self.trace.layers[l];
        let (m, d, dk) = (self.m, cfg.d_model, cfg.head_dim());
        let scale = 1.0 / (dk as f64).sqrt();
        let eps = self.eps;
        let layer = Some(l);
        let mut r_q = Array2::<f64>::zeros((m, d));
        let mut r_k = Array2::<f64>::zeros((m, d));
        let mut r_v = Array2::<f64>::zeros((m, d));
        for h in 0..cfg.n_heads {
            let cols = s![..m, h * dk..(h + 1) * dk];
            let a = lt.attn[h].slice(s![..m, ..m]);
            let r_o = r_heads.slice(s![.., h * dk..(h + 1) * dk]).to_owned();
            let (r_a, r_vh, eps_abs) =
                matmul_rule(a, lt.v.slice(cols), lt.heads_out.slice(cols), r_o.view(), eps)?;
            let out = r_a.sum() + r_vh.sum();
            self.record(layer, &format!("head{h}.av"), RuleKind::Product, &r_o, out, eps_abs, 0.0);
            r_v.slice_mut(cols).assign(&r_vh);

            let scores = lt.scores[h].slice(s![..m, ..m]);
            let mut r_s = Array2::<f64>::zeros((m, m));
            for t in 0..m {
                let x = scores.slice(s![t, ..=t]);
                let p = a.slice(s![t, ..=t]);
                let r = r_a.slice(s![t, ..=t]);
                let total = r.sum();
                for i in 0..=t {
                    r_s[[t, i]] = x[i] * (r[i] - p[i] * total);
                }
            }
            let out = r_s.sum();
            self.record(layer, &format!("head{h}.softmax"), RuleKind::Softmax, &r_a, out, 0.0, 0.0);

            // scores = (Q·scale)·Kᵀ; the constant scale passes relevance through
            let q_scaled = &lt.q.slice(cols) * scale;
            let k_t = lt.k.slice(cols).t().to_owned();
            let (r_qh, r_kt, eps_abs) = matmul_rule(q_scaled.view(), k_t.view(), scores, r_s.view(), eps)?;
            let out = r_qh.sum() + r_kt.sum();
            self.record(layer, &format!("head{h}.qk"), RuleKind::Product, &r_s, out, eps_abs, 0.0);
            r_q.slice_mut(cols).assign(&r_qh);
            r_k.slice_mut(cols).assign(&r_kt.t());
        }
        Ok((r_q, r_k, r_v))
    }
}
