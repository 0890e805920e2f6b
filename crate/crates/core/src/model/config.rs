use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    LayerNorm,
    RmsNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    /// Plain two-matrix MLP with a GELU in between.
    Gelu,
    /// Gated MLP: `silu(x·Wg + bg) ⊙ (x·Wu + bu)` followed by a down projection.
    Silu,
}

impl FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layernorm" => Ok(NormKind::LayerNorm),
            "rmsnorm" => Ok(NormKind::RmsNorm),
            other => Err(Error::Config(format!("unknown norm_kind `{other}`"))),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::LayerNorm => "layernorm",
            NormKind::RmsNorm => "rmsnorm",
        })
    }
}

impl FromStr for ActivationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gelu" => Ok(ActivationKind::Gelu),
            "silu" => Ok(ActivationKind::Silu),
            other => Err(Error::Config(format!("unknown activation_kind `{other}`"))),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActivationKind::Gelu => "gelu",
            ActivationKind::Silu => "silu",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_seq: usize,
    pub norm_kind: NormKind,
    pub activation_kind: ActivationKind,
    pub epsilon_norm: f64,
}

/// Name and shape of one tensor in the on-disk weight blob.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    fn new(name: impl Into<String>, shape: &[usize]) -> Self {
        TensorSpec {
            name: name.into(),
            shape: shape.to_vec(),
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.max_seq < 2 {
            return Err(Error::Config("max_seq must be at least 2".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(self.epsilon_norm.is_finite() && self.epsilon_norm > 0.0) {
            return Err(Error::Config("epsilon_norm must be a small positive real".into()));
        }
        Ok(())
    }

    /// Tensors of the weight blob, in file order.
    pub fn manifest(&self) -> Vec<TensorSpec> {
        let (v, d, f, t) = (self.vocab_size, self.d_model, self.d_ff, self.max_seq);
        let mut specs = vec![
            TensorSpec::new("token_embedding", &[v, d]),
            TensorSpec::new("position_embedding", &[t, d]),
        ];
        let norm = |specs: &mut Vec<TensorSpec>, prefix: &str| {
            specs.push(TensorSpec::new(format!("{prefix}.gain"), &[d]));
            if self.norm_kind == NormKind::LayerNorm {
                specs.push(TensorSpec::new(format!("{prefix}.bias"), &[d]));
            }
        };
        for l in 0..self.n_layers {
            for w in ["wq", "wk", "wv", "wo"] {
                specs.push(TensorSpec::new(format!("layer{l}.{w}"), &[d, d]));
            }
            norm(&mut specs, &format!("layer{l}.norm1"));
            match self.activation_kind {
                ActivationKind::Gelu => {
                    specs.push(TensorSpec::new(format!("layer{l}.ff.w_in"), &[d, f]));
                    specs.push(TensorSpec::new(format!("layer{l}.ff.b_in"), &[f]));
                    specs.push(TensorSpec::new(format!("layer{l}.ff.w_out"), &[f, d]));
                    specs.push(TensorSpec::new(format!("layer{l}.ff.b_out"), &[d]));
                }
                ActivationKind::Silu => {
                    specs.push(TensorSpec::new(format!("layer{l}.ff.w_gate"), &[d, f]));
                    specs.push(TensorSpec::new(format!("layer{l}.ff.b_gate"), &[f]));
                    specs.push(TensorSpec::new(format!("layer{l}.ff.w_up"), &[d, f]));
                    specs.push(TensorSpec::new(format!("layer{l}.ff.b_up"), &[f]));
                    specs.push(TensorSpec::new(format!("layer{l}.ff.w_down"), &[f, d]));
                    specs.push(TensorSpec::new(format!("layer{l}.ff.b_down"), &[d]));
                }
            }
            norm(&mut specs, &format!("layer{l}.norm2"));
        }
        norm(&mut specs, "final_norm");
        specs.push(TensorSpec::new("unembedding", &[d, v]));
        specs
    }

    /// Parse the `key=value` config file. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut get = std::collections::HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            get.insert(k.trim().to_string(), v.trim().to_string());
        }
        fn field<T: FromStr>(
            map: &std::collections::HashMap<String, String>,
            key: &str,
        ) -> Result<T> {
            let raw = map
                .get(key)
                .ok_or_else(|| Error::Config(format!("missing key `{key}`")))?;
            raw.parse()
                .map_err(|_| Error::Config(format!("bad value for `{key}`: {raw}")))
        }
        let cfg = ModelConfig {
            vocab_size: field(&get, "vocab_size")?,
            d_model: field(&get, "d_model")?,
            n_layers: field(&get, "n_layers")?,
            n_heads: field(&get, "n_heads")?,
            d_ff: field(&get, "d_ff")?,
            max_seq: field(&get, "max_seq")?,
            norm_kind: field(&get, "norm_kind")?,
            activation_kind: field(&get, "activation_kind")?,
            epsilon_norm: field(&get, "epsilon_norm")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_config_string(&self) -> String {
        format!(
            "vocab_size={}\nd_model={}\nn_layers={}\nn_heads={}\nd_ff={}\nmax_seq={}\nnorm_kind={}\nactivation_kind={}\nepsilon_norm={:e}\n",
            self.vocab_size,
            self.d_model,
            self.n_layers,
            self.n_heads,
            self.d_ff,
            self.max_seq,
            self.norm_kind,
            self.activation_kind,
            self.epsilon_norm
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ModelConfig {
        ModelConfig {
            vocab_size: 8,
            d_model: 4,
            n_layers: 2,
            n_heads: 2,
            d_ff: 6,
            max_seq: 5,
            norm_kind: NormKind::LayerNorm,
            activation_kind: ActivationKind::Gelu,
            epsilon_norm: 1e-5,
        }
    }

    #[test]
    fn config_text_roundtrip() {
        let cfg = toy();
        assert_eq!(ModelConfig::parse(&cfg.to_config_string()).unwrap(), cfg);
    }

    #[test]
    fn rejects_indivisible_heads() {
        let mut cfg = toy();
        cfg.n_heads = 3;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_short_max_seq_and_zero_counts() {
        let mut cfg = toy();
        cfg.max_seq = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = toy();
        cfg.d_ff = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn manifest_order_and_sizes() {
        let cfg = toy();
        let m = cfg.manifest();
        assert_eq!(m[0].name, "token_embedding");
        assert_eq!(m[1].name, "position_embedding");
        assert_eq!(m[2].name, "layer0.wq");
        assert_eq!(m.last().unwrap().name, "unembedding");
        // per layer: 4 projections + 2 layernorms x 2 + 4 ff tensors = 12
        assert_eq!(m.len(), 2 + 2 * 12 + 2 + 1);
    }

    #[test]
    fn missing_key_is_reported() {
        let err = ModelConfig::parse("vocab_size=3\n").unwrap_err();
        assert!(err.to_string().contains("d_model"));
    }
}
