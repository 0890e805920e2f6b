use ndarray::{arr1, arr2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rules::{linear_rows, residual_split};
use super::*;
use crate::error::Error;
use crate::model::Model;
use crate::par::Exec;
use crate::synthetic::{copy_head_model, random_model, RandomModelSpec};

fn sample_case(seed: u64) -> (Model, Vec<u32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomModelSpec::sample(&mut rng);
    let m = random_model(&spec, seed);
    let n = rng.random_range(2..=m.config.max_seq);
    let tokens = (0..n).map(|_| rng.random_range(0..m.config.vocab_size as u32)).collect();
    (m, tokens)
}

#[test]
fn relevance_covers_only_earlier_positions() {
    let cfg = LrpConfig::default();
    for seed in 0..10 {
        let (m, tokens) = sample_case(seed);
        let trace = m.forward(&tokens).unwrap();
        for target in 1..tokens.len() {
            let rv = attribute_token(&m, &trace, target, 1.0, &cfg).unwrap();
            assert_eq!(rv.target, target);
            assert_eq!(rv.values.len(), target);
            assert!(rv.values.iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn relevance_is_homogeneous_in_the_seed() {
    let cfg = LrpConfig::default();
    for seed in 0..10 {
        let (m, tokens) = sample_case(seed);
        let trace = m.forward(&tokens).unwrap();
        let target = tokens.len() - 1;
        let base = attribute_token(&m, &trace, target, 1.0, &cfg).unwrap();
        let twice = attribute_token(&m, &trace, target, 2.0, &cfg).unwrap();
        for (a, b) in base.values.iter().zip(&twice.values) {
            assert!((2.0 * a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn single_predecessor_receives_seed_minus_leaks() {
    let cfg = LrpConfig::default();
    for seed in 0..20 {
        let (m, tokens) = sample_case(seed);
        let trace = m.forward(&tokens[..2]).unwrap();
        let (rv, log) = attribute_token_logged(&m, &trace, 1, 1.0, &cfg).unwrap();
        assert_eq!(rv.values.len(), 1);
        let leaks: f64 = log.iter().map(|s| s.inflow - s.outflow).sum();
        assert!((rv.values[0] - (1.0 - leaks)).abs() < 1e-8, "seed {seed}");
    }
}

#[test]
fn rejects_targets_out_of_range() {
    let (m, tokens) = sample_case(1);
    let trace = m.forward(&tokens).unwrap();
    let cfg = LrpConfig::default();
    assert!(matches!(
        attribute_token(&m, &trace, 0, 1.0, &cfg),
        Err(Error::TargetOutOfRange { .. })
    ));
    assert!(matches!(
        attribute_token(&m, &trace, tokens.len(), 1.0, &cfg),
        Err(Error::TargetOutOfRange { .. })
    ));
    let bad = LrpConfig { epsilon: 0.0, ..cfg };
    assert!(attribute_token(&m, &trace, 1, 1.0, &bad).is_err());
}

/// Drop of the attributed logit when each input token embedding is zeroed.
fn occlusion_scores(m: &Model, tokens: &[u32], target: usize) -> Vec<f64> {
    let col = tokens[target] as usize;
    let base = m.forward(tokens).unwrap().logits[[target - 1, col]];
    (0..target)
        .map(|s| {
            let mut mask = vec![false; tokens.len()];
            mask[s] = true;
            base - m.forward_masked(tokens, &mask).unwrap().logits[[target - 1, col]]
        })
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

#[test]
fn copy_head_relevance_agrees_with_occlusion() {
    let m = copy_head_model(4, 8);
    let cfg = LrpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let n = rng.random_range(3..=8);
        let mut tokens: Vec<u32> = (0..n).map(|_| rng.random_range(0..4)).collect();
        // the realized token is the one the head copies
        let target = n - 1;
        tokens[target] = tokens[target - 2];
        let trace = m.forward(&tokens).unwrap();
        let rv = attribute_token(&m, &trace, target, 1.0, &cfg).unwrap();
        let attending = target - 1;
        assert_eq!(argmax(&rv.values), attending - 1, "tokens {tokens:?}");
        assert_eq!(argmax(&occlusion_scores(&m, &tokens, target)), attending - 1);
    }
}

#[test]
fn response_rows_follow_positions_in_both_modes() {
    let (m, tokens) = sample_case(4);
    let trace = m.forward(&tokens).unwrap();
    let positions: Vec<usize> = (1..tokens.len()).collect();
    let seq = LrpConfig { exec: Exec::Sequential, ..LrpConfig::default() };
    let par = LrpConfig { exec: Exec::Parallel, ..LrpConfig::default() };
    let a = attribute_response(&m, &trace, 1, &positions, &seq).unwrap();
    let b = attribute_response(&m, &trace, 1, &positions, &par).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.targets().collect::<Vec<_>>(), positions);
    assert!(a.rows.iter().all(|r| r.seed == 1.0));
    assert!(attribute_response(&m, &trace, 1, &[2, 1], &seq).is_err());
    assert!(attribute_response(&m, &trace, 3, &[2], &seq).is_err());
    assert!(attribute_response(&m, &trace, 0, &[0], &seq).is_err());
}

#[test]
fn bias_absorption_matches_scalar_algebra() {
    let eps = 1e-9;
    let x = arr2(&[[0.7, -1.3]]);
    let w = arr2(&[[1.5, -0.4], [0.2, 0.9]]);
    let b = arr1(&[0.3, -0.6]);
    let z = x.dot(&w) + &b;
    let r = arr2(&[[0.8, -0.5]]);
    let (r_in, eps_abs, bias_abs) =
        linear_rows(x.view(), w.view(), Some(b.view()), z.view(), r.view(), eps);
    let mut want = 0.0;
    for j in 0..2 {
        let zj: f64 = z[[0, j]];
        let den = if zj >= 0.0 { zj + eps } else { zj - eps };
        want += b[j] * r[[0, j]] / den;
    }
    assert!((bias_abs - want).abs() < 1e-12);
    let total = r_in.sum() + eps_abs + bias_abs;
    assert!((total - r.sum()).abs() < 1e-12);
}

#[test]
fn residual_split_is_proportional() {
    let a = arr2(&[[3.0, -1.0]]);
    let b = arr2(&[[1.0, -3.0]]);
    let z = &a + &b;
    let r = arr2(&[[1.0, 2.0]]);
    let (ra, rb, eps_abs) = residual_split(a.view(), b.view(), z.view(), r.view(), 1e-12);
    assert!((ra[[0, 0]] - 0.75).abs() < 1e-9 && (rb[[0, 0]] - 0.25).abs() < 1e-9);
    assert!((ra[[0, 1]] - 0.5).abs() < 1e-9 && (rb[[0, 1]] - 1.5).abs() < 1e-9);
    assert!(eps_abs.abs() < 1e-11);
}

#[test]
fn identity_steps_do_not_leak() {
    let cfg = LrpConfig::default();
    for seed in 0..10 {
        let (m, tokens) = sample_case(seed);
        let trace = m.forward(&tokens).unwrap();
        let (_, log) = attribute_token_logged(&m, &trace, tokens.len() - 1, 1.0, &cfg).unwrap();
        for report in conservation_report(&log) {
            match report.rule {
                RuleKind::Identity | RuleKind::Bilinear => assert_eq!(report.leak, 0.0),
                RuleKind::Softmax => {}
                _ => assert!(report.unexplained.abs() < 1e-10, "{report:?}"),
            }
        }
    }
}
