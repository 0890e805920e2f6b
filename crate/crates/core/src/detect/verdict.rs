use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::scorer::FragmentScore;
use crate::error::{Error, Result};

/// Response-level decision from fragment labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseVerdict {
    pub fragment_labels: Vec<u8>,
    pub scores: Vec<f64>,
    pub alpha: f64,
    /// 1 when the response counts as faithful.
    pub label: u8,
    pub hallucinated_proportion: f64,
}

/// The response is faithful iff the share of fragments labelled 0 is at most `alpha`.
pub fn classify_response(labels: &[u8], alpha: f64) -> Result<ResponseVerdict> {
    if labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("fragment label {l} is not 0 or 1")));
    }
    let bad = labels.iter().filter(|&&l| l == 0).count();
    let proportion = bad as f64 / labels.len() as f64;
    Ok(ResponseVerdict {
        fragment_labels: labels.to_vec(),
        scores: Vec::new(),
        alpha,
        label: u8::from(proportion <= alpha),
        hallucinated_proportion: proportion,
    })
}

/// [`classify_response`] keeping the fragment scores.
pub fn classify_scored(scores: &[FragmentScore], alpha: f64) -> Result<ResponseVerdict> {
    let labels: Vec<u8> = scores.iter().map(|s| s.label).collect();
    let mut v = classify_response(&labels, alpha)?;
    v.scores = scores.iter().map(|s| s.score).collect();
    Ok(v)
}

/// Precision, recall and F1 with label 1 (faithful response) as the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
    /// Set when the metric's denominator was zero and 0 was reported.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics_from_pairs(pairs: impl IntoIterator<Item = (u8, u8)>) -> Metrics {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (pred, gold) in pairs {
        match (pred, gold) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    let (precision, precision_undefined) = ratio(tp, tp + fp);
    let (recall, recall_undefined) = ratio(tp, tp + fn_);
    let (f1, f1_undefined) = if precision + recall > 0.0 {
        (2.0 * precision * recall / (precision + recall), false)
    } else {
        (0.0, true)
    };
    Metrics {
        precision,
        recall,
        f1,
        true_positive: tp,
        false_positive: fp,
        false_negative: fn_,
        true_negative: tn,
        precision_undefined,
        recall_undefined,
        f1_undefined,
    }
}

/// Metrics of predicted against gold labels, matched by id.
pub fn evaluate(predicted: &[(String, u8)], gold: &[(String, u8)]) -> Result<Metrics> {
    if predicted.len() != gold.len() {
        return Err(Error::IdMismatch(format!(
            "{} predictions for {} gold labels",
            predicted.len(),
            gold.len()
        )));
    }
    let gold: HashMap<&str, u8> = gold.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let mut pairs = Vec::with_capacity(predicted.len());
    for (id, p) in predicted {
        let g = gold.get(id.as_str()).ok_or_else(|| Error::IdMismatch(id.clone()))?;
        pairs.push((*p, *g));
    }
    Ok(metrics_from_pairs(pairs))
}

/// Alphas reported by default: 0, 0.1, ..., 0.4.
pub fn default_alphas() -> Vec<f64> {
    (0..=4).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub metrics: Metrics,
}

/// Metrics at each alpha, re-deciding every response from its fragment labels.
/// `samples` holds `(fragment labels, gold response label)`.
pub fn alpha_sweep(samples: &[(Vec<u8>, u8)], alphas: &[f64]) -> Result<Vec<SweepRow>> {
    alphas
        .iter()
        .map(|&alpha| {
            let pairs = samples
                .iter()
                .map(|(labels, gold)| Ok((classify_response(labels, alpha)?.label, *gold)))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRow {
                alpha,
                metrics: metrics_from_pairs(pairs),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_examples() {
        assert_eq!(classify_response(&[1, 1, 1], 0.0).unwrap().label, 1);
        let v = classify_response(&[0, 1, 1], 0.0).unwrap();
        assert_eq!(v.label, 0);
        assert!((v.hallucinated_proportion - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(classify_response(&[0, 1, 1, 1, 1], 0.2).unwrap().label, 1);
    }

    #[test]
    fn verdict_errors() {
        assert!(matches!(classify_response(&[], 0.1), Err(Error::EmptyLabels)));
        assert!(classify_response(&[1], 1.5).is_err());
        assert!(classify_response(&[2], 0.5).is_err());
    }

    #[test]
    fn scored_keeps_scores() {
        let v = classify_scored(
            &[FragmentScore { label: 1, score: 0.9 }, FragmentScore { label: 0, score: 0.1 }],
            0.5,
        )
        .unwrap();
        assert_eq!(v.scores, vec![0.9, 0.1]);
        assert_eq!(v.label, 1);
    }

    #[test]
    fn perfect_and_degenerate_metrics() {
        let ids = |v: &[u8]| -> Vec<(String, u8)> {
            v.iter().enumerate().map(|(i, &l)| (format!("s{i}"), l)).collect()
        };
        let m = evaluate(&ids(&[1, 0, 1]), &ids(&[1, 0, 1])).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let m = evaluate(&ids(&[0, 0]), &ids(&[1, 0])).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.precision_undefined);
        assert!(!m.recall_undefined);
        assert!(m.f1_undefined);
    }

    #[test]
    fn id_mismatch() {
        let a = vec![("a".to_string(), 1)];
        let b = vec![("b".to_string(), 1)];
        assert!(matches!(evaluate(&a, &b), Err(Error::IdMismatch(_))));
        assert!(evaluate(&a, &[]).is_err());
    }

    #[test]
    fn sweep_recall_non_decreasing() {
        let samples = vec![
            (vec![1, 1, 0], 1),
            (vec![0, 1, 1, 1, 1], 1),
            (vec![0, 0], 0),
            (vec![1], 1),
        ];
        let rows = alpha_sweep(&samples, &default_alphas()).unwrap();
        assert_eq!(rows.len(), 5);
        for w in rows.windows(2) {
            assert!(w[1].metrics.recall >= w[0].metrics.recall);
        }
        assert_eq!(rows[4].metrics.recall, 1.0);
    }
}
