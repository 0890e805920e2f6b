use ndarray::{Array1, Array2};

use super::config::{ActivationKind, ModelConfig, NormKind};
use crate::error::{Error, Result};

/// Gain (and, for layernorm, bias) of one normalization site.
#[derive(Debug, Clone, PartialEq)]
pub struct NormParams {
    pub gain: Array1<f64>,
    pub bias: Option<Array1<f64>>,
}

impl NormParams {
    pub fn unit(kind: NormKind, d: usize) -> Self {
        NormParams {
            gain: Array1::ones(d),
            bias: (kind == NormKind::LayerNorm).then(|| Array1::zeros(d)),
        }
    }
}

/// All matrices act on row vectors: `y = x · W`, so `W` is `[in × out]`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedForward {
    Mlp {
        w_in: Array2<f64>,
        b_in: Array1<f64>,
        w_out: Array2<f64>,
        b_out: Array1<f64>,
    },
    Gated {
        w_gate: Array2<f64>,
        b_gate: Array1<f64>,
        w_up: Array2<f64>,
        b_up: Array1<f64>,
        w_down: Array2<f64>,
        b_down: Array1<f64>,
    },
}

impl FeedForward {
    pub fn zeros(kind: ActivationKind, d: usize, f: usize) -> Self {
        match kind {
            ActivationKind::Gelu => FeedForward::Mlp {
                w_in: Array2::zeros((d, f)),
                b_in: Array1::zeros(f),
                w_out: Array2::zeros((f, d)),
                b_out: Array1::zeros(d),
            },
            ActivationKind::Silu => FeedForward::Gated {
                w_gate: Array2::zeros((d, f)),
                b_gate: Array1::zeros(f),
                w_up: Array2::zeros((d, f)),
                b_up: Array1::zeros(f),
                w_down: Array2::zeros((f, d)),
                b_down: Array1::zeros(d),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub norm1: NormParams,
    pub ff: FeedForward,
    pub norm2: NormParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub token_embedding: Array2<f64>,
    pub position_embedding: Array2<f64>,
    pub layers: Vec<LayerWeights>,
    pub final_norm: NormParams,
    pub unembedding: Array2<f64>,
}

impl ModelWeights {
    /// All-zero weights with unit norm gains; a starting point for hand-built models.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.d_model;
        let layer = LayerWeights {
            wq: Array2::zeros((d, d)),
            wk: Array2::zeros((d, d)),
            wv: Array2::zeros((d, d)),
            wo: Array2::zeros((d, d)),
            norm1: NormParams::unit(cfg.norm_kind, d),
            ff: FeedForward::zeros(cfg.activation_kind, d, cfg.d_ff),
            norm2: NormParams::unit(cfg.norm_kind, d),
        };
        ModelWeights {
            token_embedding: Array2::zeros((cfg.vocab_size, d)),
            position_embedding: Array2::zeros((cfg.max_seq, d)),
            layers: vec![layer; cfg.n_layers],
            final_norm: NormParams::unit(cfg.norm_kind, d),
            unembedding: Array2::zeros((d, cfg.vocab_size)),
        }
    }

    /// Tensors in manifest order, flattened row-major.
    pub fn tensors(&self) -> Vec<&[f64]> {
        fn s2(a: &Array2<f64>) -> &[f64] {
            a.as_slice().expect("standard layout")
        }
        fn s1(a: &Array1<f64>) -> &[f64] {
            a.as_slice().expect("standard layout")
        }
        fn norm<'a>(out: &mut Vec<&'a [f64]>, n: &'a NormParams) {
            out.push(s1(&n.gain));
            if let Some(b) = &n.bias {
                out.push(s1(b));
            }
        }
        let mut out = vec![s2(&self.token_embedding), s2(&self.position_embedding)];
        for l in &self.layers {
            out.extend([s2(&l.wq), s2(&l.wk), s2(&l.wv), s2(&l.wo)]);
            norm(&mut out, &l.norm1);
            match &l.ff {
                FeedForward::Mlp {
                    w_in,
                    b_in,
                    w_out,
                    b_out,
                } => out.extend([s2(w_in), s1(b_in), s2(w_out), s1(b_out)]),
                FeedForward::Gated {
                    w_gate,
                    b_gate,
                    w_up,
                    b_up,
                    w_down,
                    b_down,
                } => out.extend([
                    s2(w_gate),
                    s1(b_gate),
                    s2(w_up),
                    s1(b_up),
                    s2(w_down),
                    s1(b_down),
                ]),
            }
            norm(&mut out, &l.norm2);
        }
        norm(&mut out, &self.final_norm);
        out.push(s2(&self.unembedding));
        out
    }

    /// Rebuild weights from flat tensors in manifest order.
    pub fn from_tensors(cfg: &ModelConfig, tensors: Vec<Vec<f64>>) -> Result<Self> {
        let manifest = cfg.manifest();
        if tensors.len() != manifest.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, got {}",
                manifest.len(),
                tensors.len()
            )));
        }
        let mut it = manifest.into_iter().zip(tensors);
        let mut next = || -> Result<(Vec<usize>, Vec<f64>)> {
            let (spec, data) = it.next().expect("length checked");
            if data.len() != spec.numel() {
                return Err(Error::ShapeMismatch {
                    expected: spec.numel() * 4,
                    tensor: spec.name,
                    found: data.len() * 4,
                });
            }
            Ok((spec.shape, data))
        };
        fn m2((shape, data): (Vec<usize>, Vec<f64>)) -> Array2<f64> {
            Array2::from_shape_vec((shape[0], shape[1]), data).expect("numel checked")
        }
        fn m1((_, data): (Vec<usize>, Vec<f64>)) -> Array1<f64> {
            Array1::from(data)
        }
        let layernorm = cfg.norm_kind == NormKind::LayerNorm;
        let norm = |next: &mut dyn FnMut() -> Result<(Vec<usize>, Vec<f64>)>| -> Result<NormParams> {
            let gain = m1(next()?);
            let bias = if layernorm { Some(m1(next()?)) } else { None };
            Ok(NormParams { gain, bias })
        };

        let token_embedding = m2(next()?);
        let position_embedding = m2(next()?);
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for _ in 0..cfg.n_layers {
            let wq = m2(next()?);
            let wk = m2(next()?);
            let wv = m2(next()?);
            let wo = m2(next()?);
            let norm1 = norm(&mut next)?;
            let ff = match cfg.activation_kind {
                ActivationKind::Gelu => FeedForward::Mlp {
                    w_in: m2(next()?),
                    b_in: m1(next()?),
                    w_out: m2(next()?),
                    b_out: m1(next()?),
                },
                ActivationKind::Silu => FeedForward::Gated {
                    w_gate: m2(next()?),
                    b_gate: m1(next()?),
                    w_up: m2(next()?),
                    b_up: m1(next()?),
                    w_down: m2(next()?),
                    b_down: m1(next()?),
                },
            };
            let norm2 = norm(&mut next)?;
            layers.push(LayerWeights {
                wq,
                wk,
                wv,
                wo,
                norm1,
                ff,
                norm2,
            });
        }
        let final_norm = norm(&mut next)?;
        let unembedding = m2(next()?);
        Ok(ModelWeights {
            token_embedding,
            position_embedding,
            layers,
            final_norm,
            unembedding,
        })
    }

    /// Check every tensor's shape against `cfg` and that all entries are finite.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let manifest = cfg.manifest();
        let tensors = self.tensors();
        if manifest.len() != tensors.len() {
            return Err(Error::Shape(format!(
                "weights hold {} tensors, config implies {}",
                tensors.len(),
                manifest.len()
            )));
        }
        for (spec, data) in manifest.iter().zip(tensors) {
            if data.len() != spec.numel() {
                return Err(Error::ShapeMismatch {
                    tensor: spec.name.clone(),
                    expected: spec.numel() * 4,
                    found: data.len() * 4,
                });
            }
            if let Some(index) = data.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteWeight {
                    tensor: spec.name.clone(),
                    index,
                });
            }
        }
        let d = cfg.d_model;
        let shapes_ok = self.token_embedding.dim() == (cfg.vocab_size, d)
            && self.position_embedding.dim() == (cfg.max_seq, d)
            && self.unembedding.dim() == (d, cfg.vocab_size)
            && self.layers.iter().all(|l| {
                [&l.wq, &l.wk, &l.wv, &l.wo].iter().all(|w| w.dim() == (d, d))
            });
        if !shapes_ok {
            return Err(Error::Shape("matrix dimensions disagree with config".into()));
        }
        Ok(())
    }
}
