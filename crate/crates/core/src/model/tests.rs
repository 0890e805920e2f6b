use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::synthetic::{copy_head_model, random_model, RandomModelSpec};

fn sample_model(seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_model(&RandomModelSpec::sample(&mut rng), seed)
}

fn mat(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matvec(x: &[f64], w: &[Vec<f64>]) -> Vec<f64> {
    let cols = w[0].len();
    (0..cols)
        .map(|j| x.iter().zip(w).map(|(xi, row)| xi * row[j]).sum())
        .collect()
}

fn norm_ref(x: &[f64], p: &NormParams, eps: f64) -> Vec<f64> {
    let d = x.len() as f64;
    match &p.bias {
        Some(b) => {
            let mean: f64 = x.iter().sum::<f64>() / d;
            let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
            (0..x.len())
                .map(|i| (x[i] - mean) / (var + eps).sqrt() * p.gain[i] + b[i])
                .collect()
        }
        None => {
            let ms: f64 = x.iter().map(|v| v * v).sum::<f64>() / d;
            (0..x.len()).map(|i| x[i] / (ms + eps).sqrt() * p.gain[i]).collect()
        }
    }
}

fn gelu_ref(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

/// Position-by-position scalar forward pass, written without ndarray algebra.
fn reference_logits(m: &Model, tokens: &[u32]) -> Vec<Vec<f64>> {
    let cfg = &m.config;
    let w = &m.weights;
    let (n, d) = (tokens.len(), cfg.d_model);
    let dk = cfg.head_dim();
    let mut x: Vec<Vec<f64>> = (0..n)
        .map(|t| {
            (0..d)
                .map(|i| w.token_embedding[[tokens[t] as usize, i]] + w.position_embedding[[t, i]])
                .collect()
        })
        .collect();
    for lw in &w.layers {
        let h: Vec<Vec<f64>> = x.iter().map(|r| norm_ref(r, &lw.norm1, cfg.epsilon_norm)).collect();
        let q: Vec<Vec<f64>> = h.iter().map(|r| matvec(r, &mat(&lw.wq))).collect();
        let k: Vec<Vec<f64>> = h.iter().map(|r| matvec(r, &mat(&lw.wk))).collect();
        let v: Vec<Vec<f64>> = h.iter().map(|r| matvec(r, &mat(&lw.wv))).collect();
        let mut heads = vec![vec![0.0; d]; n];
        for head in 0..cfg.n_heads {
            let cols = head * dk..(head + 1) * dk;
            for t in 0..n {
                let scores: Vec<f64> = (0..=t)
                    .map(|s| {
                        cols.clone().map(|c| q[t][c] * k[s][c]).sum::<f64>() / (dk as f64).sqrt()
                    })
                    .collect();
                let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
                let z: f64 = e.iter().sum();
                for c in cols.clone() {
                    heads[t][c] = (0..=t).map(|s| e[s] / z * v[s][c]).sum();
                }
            }
        }
        for t in 0..n {
            let a = matvec(&heads[t], &mat(&lw.wo));
            let mid: Vec<f64> = (0..d).map(|i| x[t][i] + a[i]).collect();
            let h2 = norm_ref(&mid, &lw.norm2, cfg.epsilon_norm);
            let ff = match &lw.ff {
                FeedForward::Mlp { w_in, b_in, w_out, b_out } => {
                    let pre = matvec(&h2, &mat(w_in));
                    let act: Vec<f64> = pre.iter().zip(b_in).map(|(p, b)| gelu_ref(p + b)).collect();
                    let o = matvec(&act, &mat(w_out));
                    o.iter().zip(b_out).map(|(o, b)| o + b).collect::<Vec<_>>()
                }
                FeedForward::Gated { w_gate, b_gate, w_up, b_up, w_down, b_down } => {
                    let g = matvec(&h2, &mat(w_gate));
                    let u = matvec(&h2, &mat(w_up));
                    let hid: Vec<f64> = (0..g.len())
                        .map(|j| {
                            let gj = g[j] + b_gate[j];
                            gj / (1.0 + (-gj).exp()) * (u[j] + b_up[j])
                        })
                        .collect();
                    let o = matvec(&hid, &mat(w_down));
                    o.iter().zip(b_down).map(|(o, b)| o + b).collect::<Vec<_>>()
                }
            };
            x[t] = (0..d).map(|i| mid[i] + ff[i]).collect();
        }
    }
    x.iter()
        .map(|r| matvec(&norm_ref(r, &w.final_norm, cfg.epsilon_norm), &mat(&w.unembedding)))
        .collect()
}

#[test]
fn forward_matches_scalar_reference() {
    for seed in 0..20 {
        let m = sample_model(seed);
        let tokens: Vec<u32> = (0..7).map(|i| (i * 3 + seed as u32) % m.config.vocab_size as u32).collect();
        let trace = m.forward(&tokens).unwrap();
        let want = reference_logits(&m, &tokens);
        for (t, row) in want.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((trace.logits[[t, j]] - v).abs() < 1e-10, "seed {seed} t {t} j {j}");
            }
        }
    }
}

#[test]
fn single_token_attends_to_itself() {
    let m = sample_model(3);
    let trace = m.forward(&[1]).unwrap();
    for layer in &trace.layers {
        for a in &layer.attn {
            assert_eq!(a.dim(), (1, 1));
            assert!((a[[0, 0]] - 1.0).abs() < 1e-15);
        }
    }
}

#[test]
fn attention_rows_sum_to_one_and_are_causal() {
    let m = sample_model(5);
    let tokens: Vec<u32> = (0..10).map(|i| i % m.config.vocab_size as u32).collect();
    let trace = m.forward(&tokens).unwrap();
    for layer in &trace.layers {
        for a in &layer.attn {
            for t in 0..tokens.len() {
                let row = a.row(t);
                assert!((row.sum() - 1.0).abs() < 1e-12);
                assert!(row.iter().skip(t + 1).all(|&v| v == 0.0));
            }
        }
    }
}

#[test]
fn forward_is_deterministic_and_causal() {
    let m = sample_model(8);
    let a = [1u32, 2, 3, 4, 0, 1];
    let mut b = a;
    b[5] = 2;
    let ta = m.forward(&a).unwrap();
    assert_eq!(ta.logits, m.forward(&a).unwrap().logits);
    let tb = m.forward(&b).unwrap();
    for t in 0..5 {
        assert_eq!(ta.logits.row(t), tb.logits.row(t));
    }
}

#[test]
fn rmsnorm_output_has_unit_rms() {
    let spec = RandomModelSpec {
        norm_kind: NormKind::RmsNorm,
        ..RandomModelSpec::sample(&mut ChaCha8Rng::seed_from_u64(1))
    };
    let mut m = random_model(&spec, 1);
    m.config.epsilon_norm = 1e-15;
    for l in &mut m.weights.layers {
        l.norm1.gain.fill(1.0);
    }
    let trace = m.forward(&[0, 1, 2, 3]).unwrap();
    for row in trace.layers[0].norm1.rows() {
        let rms = (row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64).sqrt();
        assert!((rms - 1.0).abs() < 1e-10);
    }
}

#[test]
fn trace_shapes_close() {
    let m = sample_model(11);
    let n = 5;
    let trace = m.forward(&[0, 1, 2, 1, 0]).unwrap();
    let (d, v) = (m.config.d_model, m.config.vocab_size);
    assert_eq!(trace.embeddings.dim(), (n, d));
    assert_eq!(trace.logits.dim(), (n, v));
    assert_eq!(trace.layers.len(), m.config.n_layers);
    for l in &trace.layers {
        assert_eq!(l.attn.len(), m.config.n_heads);
        assert_eq!(l.output.dim(), (n, d));
        assert_eq!(l.ff.hidden().dim(), (n, m.config.d_ff));
    }
}

#[test]
fn rejects_bad_sequences() {
    let m = sample_model(2);
    assert!(matches!(m.forward(&[]), Err(Error::EmptySequence)));
    let long = vec![0u32; m.config.max_seq + 1];
    assert!(matches!(m.forward(&long), Err(Error::SequenceTooLong { .. })));
    let bad = m.config.vocab_size as u32;
    assert!(matches!(m.forward(&[bad]), Err(Error::TokenOutOfRange { .. })));
}

#[test]
fn masking_zeroes_token_embedding_only() {
    let m = sample_model(4);
    let trace = m.forward_masked(&[1, 2, 3], &[false, true, false]).unwrap();
    assert_eq!(trace.embeddings.row(1), m.weights.position_embedding.row(1));
    assert!(m.forward_masked(&[1, 2], &[true]).is_err());
}

#[test]
fn copy_head_predicts_previous_token() {
    let m = copy_head_model(6, 10);
    let tokens = [3u32, 1, 4, 1, 5, 2, 0];
    let trace = m.forward(&tokens).unwrap();
    for t in 1..tokens.len() {
        let row = trace.logits.row(t);
        let best = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(best as u32, tokens[t - 1], "position {t}");
    }
}

#[test]
fn generate_edge_cases() {
    let m = copy_head_model(5, 8);
    assert_eq!(m.generate(&[1, 2], 0).unwrap(), vec![1, 2]);
    let out = m.generate(&[1, 2], 3).unwrap();
    assert_eq!(out, m.generate(&[1, 2], 3).unwrap());
    assert_eq!(&out[..3], &[1, 2, 1]);
    assert!(matches!(m.generate(&[1, 2], 7), Err(Error::SequenceTooLong { .. })));
    assert!(matches!(m.generate(&[], 1), Err(Error::EmptySequence)));
}

#[test]
fn weights_round_trip_through_directory() {
    let m = sample_model(6);
    let dir = tempfile::tempdir().unwrap();
    save_model(dir.path(), &m, None).unwrap();
    let back = Model::load(dir.path()).unwrap();
    assert_eq!(back.config, m.config);
    // the blob stores f32
    for (a, b) in back.weights.tensors().iter().zip(m.weights.tensors()) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(*x, *y as f32 as f64);
        }
    }
}

#[test]
fn truncated_blob_names_the_tensor() {
    let m = sample_model(7);
    let mut bytes = encode_weights(&m.weights);
    bytes.truncate(bytes.len() - 4);
    let last = m.config.manifest().last().unwrap().name.clone();
    match decode_weights(&m.config, &bytes) {
        Err(Error::ShapeMismatch { tensor, .. }) => assert_eq!(tensor, last),
        other => panic!("expected shape mismatch, got {other:?}"),
    }
    bytes.extend_from_slice(&[0; 8]);
    assert!(matches!(decode_weights(&m.config, &bytes), Err(Error::ShapeMismatch { .. })));
}

#[test]
fn non_finite_weight_is_rejected() {
    let m = sample_model(9);
    let mut bytes = encode_weights(&m.weights);
    bytes[8..12].copy_from_slice(&f32::NAN.to_le_bytes());
    match decode_weights(&m.config, &bytes) {
        Err(Error::NonFiniteWeight { tensor, index }) => {
            assert_eq!(tensor, "token_embedding");
            assert_eq!(index, 2);
        }
        other => panic!("expected non-finite error, got {other:?}"),
    }
}

#[test]
fn missing_directory_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Model::load(dir.path()), Err(Error::MissingFile(_))));
}

#[test]
fn config_round_trips_and_validates() {
    let m = sample_model(10);
    let text = m.config.to_config_string();
    assert_eq!(ModelConfig::parse(&text).unwrap(), m.config);
    let bad = ModelConfig { n_heads: 3, d_model: 8, ..m.config.clone() };
    assert!(bad.validate().is_err());
}
