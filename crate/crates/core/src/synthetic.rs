//! Hand-built and randomly initialized micro models, plus the synthetic RAG
//! corpus generator used by the acceptance suite and the demo.
//!
//! Two hand-built architectures are provided:
//!
//! * [`copy_head_model`]: one attention head that attends from position `t`
//!   to `t − 1` and writes that token into the output block, so the model
//!   predicts "the previous token again".
//! * [`induction_model`]: the same previous-token head in layer 0, followed
//!   by a layer-1 head that looks for an earlier position whose *previous*
//!   token equals the current token and copies the token found there. Under
//!   teacher forcing, an answer sentence copied from the context is predicted
//!   from, and attributed to, the context sentence it was copied from.
//!
//! Corpus layout (see [`generate_corpus`]): every sample has two passages of
//! two sentences each, built from disjoint words of [`WORD_POOL`], the fixed
//! question [`QUESTION`], and an answer of one to three sentences. A faithful
//! answer sentence is a verbatim copy of one context sentence. A hallucinated
//! one is built from pool words that do not occur anywhere in the sample's
//! context. A sample is labeled correct (1) iff all its answer sentences are
//! faithful.

use ndarray::{Array1, Array2};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    ActivationKind, FeedForward, Model, ModelConfig, ModelWeights, NormKind, NormParams,
};
use crate::pipeline::Sample;
use crate::tokenizer::{Tokenizer, UNK};

/// Shape of a randomly initialized model.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomModelSpec {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_seq: usize,
    pub norm_kind: NormKind,
    pub activation_kind: ActivationKind,
    /// Zero every bias (feed-forward and layernorm).
    pub zero_bias: bool,
}

impl RandomModelSpec {
    /// A random micro shape: ≤ 2 layers, d_model ≤ 16.
    pub fn sample(rng: &mut impl Rng) -> Self {
        let d_model = *[4usize, 8, 12, 16].choose(rng).unwrap();
        let heads: Vec<usize> = [1usize, 2, 4].into_iter().filter(|h| d_model % h == 0).collect();
        RandomModelSpec {
            vocab_size: rng.random_range(5..=12),
            d_model,
            n_layers: rng.random_range(1..=2),
            n_heads: *heads.choose(rng).unwrap(),
            d_ff: rng.random_range(2..=16),
            max_seq: 12,
            norm_kind: if rng.random_bool(0.5) {
                NormKind::LayerNorm
            } else {
                NormKind::RmsNorm
            },
            activation_kind: if rng.random_bool(0.5) {
                ActivationKind::Gelu
            } else {
                ActivationKind::Silu
            },
            zero_bias: rng.random_bool(0.5),
        }
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            vocab_size: self.vocab_size,
            d_model: self.d_model,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_ff: self.d_ff,
            max_seq: self.max_seq,
            norm_kind: self.norm_kind,
            activation_kind: self.activation_kind,
            epsilon_norm: 1e-6,
        }
    }
}

fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

fn uniform_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| rng.random_range(-scale..scale))
}

/// Random weights with variance-preserving uniform initialization.
pub fn random_model(spec: &RandomModelSpec, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = spec.config();
    let (d, f) = (cfg.d_model, cfg.d_ff);
    let mut w = ModelWeights::zeros(&cfg);
    let lim = |fan_in: usize| (3.0 / fan_in as f64).sqrt();
    let bias_scale = if spec.zero_bias { 0.0 } else { 0.2 };
    let rng = &mut rng;
    let bias = |rng: &mut ChaCha8Rng, n: usize| {
        if bias_scale == 0.0 {
            Array1::zeros(n)
        } else {
            uniform_vec(rng, n, bias_scale)
        }
    };
    w.token_embedding = uniform_matrix(rng, cfg.vocab_size, d, 1.0);
    w.position_embedding = uniform_matrix(rng, cfg.max_seq, d, 0.5);
    let norm = |rng: &mut ChaCha8Rng| NormParams {
        gain: Array1::from_shape_fn(d, |_| rng.random_range(0.8..1.2)),
        bias: (cfg.norm_kind == NormKind::LayerNorm).then(|| bias(rng, d)),
    };
    for l in 0..cfg.n_layers {
        let layer = &mut w.layers[l];
        layer.wq = uniform_matrix(rng, d, d, lim(d));
        layer.wk = uniform_matrix(rng, d, d, lim(d));
        layer.wv = uniform_matrix(rng, d, d, lim(d));
        layer.wo = uniform_matrix(rng, d, d, lim(d));
        layer.norm1 = norm(rng);
        layer.norm2 = norm(rng);
        layer.ff = match cfg.activation_kind {
            ActivationKind::Gelu => FeedForward::Mlp {
                w_in: uniform_matrix(rng, d, f, lim(d)),
                b_in: bias(rng, f),
                w_out: uniform_matrix(rng, f, d, lim(f)),
                b_out: bias(rng, d),
            },
            ActivationKind::Silu => FeedForward::Gated {
                w_gate: uniform_matrix(rng, d, f, lim(d)),
                b_gate: bias(rng, f),
                w_up: uniform_matrix(rng, d, f, lim(d)),
                b_up: bias(rng, f),
                w_down: uniform_matrix(rng, f, d, lim(f)),
                b_down: bias(rng, d),
            },
        };
    }
    w.final_norm = norm(rng);
    w.unembedding = uniform_matrix(rng, d, cfg.vocab_size, lim(d));
    Model::new(cfg, w).expect("random weights match their config")
}

/// Softmax margin targeted by the hand-built attention heads.
const SCORE_MARGIN: f64 = 40.0;

/// One-layer previous-token copy model over `n_symbols` symbols.
///
/// Residual layout: `[token one-hot | position one-hot | output one-hot]`.
/// At position `t` the head attends to `t − 1` (position 0 attends to itself)
/// and the unembedding reads the copied symbol, so the greedy next token is
/// the symbol at `t − 1`.
pub fn copy_head_model(n_symbols: usize, max_seq: usize) -> Model {
    let (v, t) = (n_symbols, max_seq);
    let d = 2 * v + t;
    let cfg = ModelConfig {
        vocab_size: v,
        d_model: d,
        n_layers: 1,
        n_heads: 1,
        d_ff: 1,
        max_seq: t,
        norm_kind: NormKind::RmsNorm,
        activation_kind: ActivationKind::Gelu,
        epsilon_norm: 1e-9,
    };
    let (tok, pos, out) = (0, v, v + t);
    let mut w = ModelWeights::zeros(&cfg);
    for s in 0..v {
        w.token_embedding[[s, tok + s]] = 1.0;
    }
    for p in 0..t {
        w.position_embedding[[p, pos + p]] = 1.0;
    }
    // rows carry one token unit and one position unit
    let rms0_sq = 2.0 / d as f64;
    let dk = d as f64;
    let layer = &mut w.layers[0];
    let beta = SCORE_MARGIN * dk.sqrt() * rms0_sq;
    for p in 1..t {
        layer.wq[[pos + p, pos + p - 1]] = beta;
    }
    for p in 0..t {
        layer.wk[[pos + p, pos + p]] = 1.0;
    }
    for s in 0..v {
        layer.wv[[tok + s, out + s]] = 1.0;
        layer.wo[[out + s, out + s]] = rms0_sq.sqrt();
        w.unembedding[[out + s, s]] = 1.0;
    }
    Model::new(cfg, w).expect("hand-built copy model is well-formed")
}

/// Unit-norm random sign codes, one per vocabulary entry.
fn sign_codes(n: usize, dim: usize, rng: &mut impl Rng) -> Array2<f64> {
    let scale = 1.0 / (dim as f64).sqrt();
    Array2::from_shape_fn((n, dim), |_| if rng.random_bool(0.5) { scale } else { -scale })
}

/// Two-layer induction model: a previous-token head feeding a match-and-copy head.
///
/// Residual layout: `[token code | position one-hot | previous-token code | output code]`
/// with random unit-norm token codes of width `code_dim`.
pub fn induction_model(vocab_size: usize, max_seq: usize, code_dim: usize, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, t) = (code_dim, max_seq);
    let d = 3 * c + t;
    let cfg = ModelConfig {
        vocab_size,
        d_model: d,
        n_layers: 2,
        n_heads: 1,
        d_ff: 1,
        max_seq: t,
        norm_kind: NormKind::RmsNorm,
        activation_kind: ActivationKind::Gelu,
        epsilon_norm: 1e-9,
    };
    let (tok, pos, prev, out) = (0, c, c + t, 2 * c + t);
    let codes = sign_codes(vocab_size, c, &mut rng);
    let mut w = ModelWeights::zeros(&cfg);
    for s in 0..vocab_size {
        for i in 0..c {
            w.token_embedding[[s, tok + i]] = codes[[s, i]];
        }
    }
    for p in 0..t {
        w.position_embedding[[p, pos + p]] = 1.0;
    }
    let dk = (d as f64).sqrt();

    // layer 0: previous-token head, token code -> previous-token block
    let rms0_sq = 2.0 / d as f64;
    {
        let l0 = &mut w.layers[0];
        let beta = SCORE_MARGIN * dk * rms0_sq;
        for p in 1..t {
            l0.wq[[pos + p, pos + p - 1]] = beta;
        }
        for p in 0..t {
            l0.wk[[pos + p, pos + p]] = 1.0;
        }
        for i in 0..c {
            l0.wv[[tok + i, prev + i]] = 1.0;
            l0.wo[[prev + i, prev + i]] = rms0_sq.sqrt();
        }
    }

    // layer 1: query = current token code, key = previous-token code, value = token code
    let rms1_sq = 3.0 / d as f64;
    {
        let l1 = &mut w.layers[1];
        let beta = SCORE_MARGIN * dk * rms1_sq;
        for i in 0..c {
            l1.wq[[tok + i, i]] = beta;
            l1.wk[[prev + i, i]] = 1.0;
            l1.wv[[tok + i, out + i]] = 1.0;
            l1.wo[[out + i, out + i]] = rms1_sq.sqrt();
        }
    }
    for s in 0..vocab_size {
        for i in 0..c {
            w.unembedding[[out + i, s]] = 2.0 * codes[[s, i]];
        }
    }
    Model::new(cfg, w).expect("hand-built induction model is well-formed")
}

/// Content words used to build synthetic passages. None is a stopword.
pub const WORD_POOL: &[&str] = &[
    "falcon", "river", "copper", "meadow", "lantern", "harbor", "violin", "glacier", "orchard",
    "granite", "pepper", "saddle", "tunnel", "walnut", "canyon", "ribbon", "anchor", "beacon",
    "cactus", "dolphin", "ember", "fossil", "goblet", "hammer", "igloo", "jasmine", "kettle",
    "ladder", "marble", "nectar", "oyster", "pigeon", "quartz", "raven", "sapphire", "thistle",
    "umbrella", "velvet", "wagon", "yarrow", "zephyr", "almond", "bramble", "cobalt", "dune",
    "elk", "fjord", "gazelle", "hazel", "iris", "juniper", "kelp", "lemur", "maple", "nutmeg",
    "otter", "pebble", "quill", "reef", "spruce", "tundra", "urchin", "vessel", "willow",
    "yak", "zinc", "apricot", "basalt", "cinder", "delta", "estuary", "ferret", "garnet",
    "heron", "ivory", "jackal", "kiln", "lagoon", "mosaic", "nickel", "opal", "parsley",
    "quarry", "rhubarb", "salmon", "tapestry", "vulture", "wharf", "badger", "cedar",
    "drum", "fern", "geyser", "hornet", "indigo", "jade", "koala", "lichen", "mango",
    "nomad", "olive", "plateau", "quail", "resin", "sparrow", "tulip", "valley", "walrus",
    "acorn", "bison", "clover", "dragon", "eagle", "flint", "grove", "honey", "inlet",
    "jetty", "kayak", "lynx", "moss", "nebula", "onyx", "panther", "radish", "sorrel",
    "timber", "vapor", "wren", "azure", "barley", "crane", "dingo", "egret", "fennel",
    "gravel", "hemp", "ibis", "jungle", "knoll", "linen", "mica", "newt", "orca", "prairie",
];

/// Fixed question appended after the passages.
pub const QUESTION: &str = "Which statements hold?";

const CONTEXT_SENTENCES: usize = 4;

/// Knobs of the synthetic corpus.
#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub n_samples: usize,
    pub seed: u64,
    /// Probability that a sample contains at least one hallucinated sentence.
    pub hallucination_rate: f64,
    /// Answer sentences per sample, inclusive range.
    pub answer_sentences: (usize, usize),
    pub words_per_sentence: (usize, usize),
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_samples: 200,
            seed: 7,
            hallucination_rate: 0.5,
            answer_sentences: (1, 3),
            words_per_sentence: (4, 5),
        }
    }
}

fn sentence(words: &[&str]) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s.push('.');
    s
}

/// Vocabulary covering every synthetic text: `<unk>`, punctuation, question words, pool.
pub fn corpus_vocab() -> Vec<String> {
    let mut v: Vec<String> = [UNK, ".", "?", ",", "which", "statements", "hold"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    v.extend(WORD_POOL.iter().map(|s| s.to_string()));
    v
}

pub fn corpus_tokenizer() -> Tokenizer {
    Tokenizer::from_tokens(corpus_vocab()).expect("corpus vocab contains <unk>")
}

/// Induction model sized for the synthetic corpus.
pub fn corpus_model(seed: u64) -> Model {
    induction_model(corpus_vocab().len(), 64, 32, seed)
}

/// Generate labeled samples as described in the module docs.
pub fn generate_corpus(spec: &CorpusSpec) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let mut pool: Vec<&str> = WORD_POOL.to_vec();
        pool.shuffle(&mut rng);
        let mut cursor = 0;
        let mut take = |rng: &mut ChaCha8Rng| {
            let n = rng.random_range(spec.words_per_sentence.0..=spec.words_per_sentence.1);
            let words = &pool[cursor..cursor + n];
            cursor += n;
            sentence(words)
        };
        let context: Vec<String> = (0..CONTEXT_SENTENCES).map(|_| take(&mut rng)).collect();

        let n_answer = rng
            .random_range(spec.answer_sentences.0..=spec.answer_sentences.1)
            .min(CONTEXT_SENTENCES);
        let hallucinated = rng.random_bool(spec.hallucination_rate);
        let mut labels = vec![1u8; n_answer];
        if hallucinated {
            labels[rng.random_range(0..n_answer)] = 0;
            for l in labels.iter_mut() {
                if rng.random_bool(0.25) {
                    *l = 0;
                }
            }
        }
        let mut sources: Vec<usize> = (0..CONTEXT_SENTENCES).collect();
        sources.shuffle(&mut rng);
        let answer: Vec<String> = labels
            .iter()
            .zip(&sources)
            .map(|(&l, &src)| if l == 1 { context[src].clone() } else { take(&mut rng) })
            .collect();

        samples.push(Sample {
            id: format!("syn-{i:04}"),
            context: vec![
                format!("{} {}", context[0], context[1]),
                format!("{} {}", context[2], context[3]),
            ],
            question: QUESTION.to_string(),
            answer: answer.join(" "),
            label: Some(u8::from(labels.iter().all(|&l| l == 1))),
            fragment_labels: Some(labels),
        });
    }
    samples
}
