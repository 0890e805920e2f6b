//! Generation and pruning perturbation tests over source fragments.
//!
//! Pruning starts from the full input and masks sources from the least to the
//! most relevant; generation starts with every source masked and reveals them
//! from the most to the least relevant. At each step the answer fragment is
//! teacher-forced and compared with the unperturbed pass. Random orders are
//! the baseline the relevance order is measured against.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{softmax, ActivationTrace, Model};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    Generation,
    Pruning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    Relevance,
    Random,
}

impl PerturbMode {
    pub fn name(self) -> &'static str {
        match self {
            PerturbMode::Generation => "generation",
            PerturbMode::Pruning => "pruning",
        }
    }
}

impl Order {
    pub fn name(self) -> &'static str {
        match self {
            Order::Relevance => "relevance",
            Order::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Share of sources masked (pruning) or revealed (generation).
    pub fraction: f64,
    pub embedding_delta: f64,
    pub mean_target_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCurve {
    pub mode: PerturbMode,
    pub order: Order,
    /// Shuffle seed for random orders.
    pub seed: Option<u64>,
    pub points: Vec<CurvePoint>,
    pub auc_embedding: f64,
    pub auc_prob: f64,
}

/// Mask with every position of the given token spans set.
pub fn mask_fragments(n_tokens: usize, spans: &[Range<usize>]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n_tokens];
    for span in spans {
        if span.start > span.end || span.end > n_tokens {
            return Err(Error::Shape(format!(
                "span {}..{} outside {n_tokens} tokens",
                span.start, span.end
            )));
        }
        mask[span.clone()].iter_mut().for_each(|m| *m = true);
    }
    Ok(mask)
}

fn check_span(trace: &ActivationTrace, span: &Range<usize>) -> Result<()> {
    if span.is_empty() || span.end > trace.seq_len() {
        return Err(Error::Shape(format!(
            "target span {}..{} invalid for {} positions",
            span.start,
            span.end,
            trace.seq_len()
        )));
    }
    Ok(())
}

/// Mean over `span` of the squared distance between final hidden states,
/// divided by the model width.
pub fn embedding_delta(base: &ActivationTrace, other: &ActivationTrace, span: Range<usize>) -> Result<f64> {
    check_span(base, &span)?;
    check_span(other, &span)?;
    if base.final_hidden.ncols() != other.final_hidden.ncols() {
        return Err(Error::Shape("traces have different widths".into()));
    }
    let d = base.final_hidden.ncols() as f64;
    let n = span.len() as f64;
    let total: f64 = span
        .map(|t| {
            let a = base.final_hidden.row(t);
            let b = other.final_hidden.row(t);
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        })
        .sum();
    Ok(total / d / n)
}

/// Mean probability the model assigns to the realized token at each position
/// of `span`, read from the preceding position's distribution.
pub fn mean_target_prob(trace: &ActivationTrace, span: Range<usize>) -> Result<f64> {
    check_span(trace, &span)?;
    if span.start == 0 {
        return Err(Error::Shape("position 0 has no predicting position".into()));
    }
    let n = span.len() as f64;
    let total: f64 = span
        .map(|p| softmax(trace.logits.row(p - 1))[trace.tokens[p] as usize])
        .sum();
    Ok(total / n)
}

/// Trapezoidal area under `ys` over `xs`.
pub fn trapezoid_auc(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum()
}

/// `steps + 1` evenly spaced fractions from 0 to 1.
pub fn fraction_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// A sample prepared for perturbation.
#[derive(Debug, Clone)]
pub struct PerturbationInput<'a> {
    pub model: &'a Model,
    pub tokens: &'a [u32],
    /// Token span of each source fragment.
    pub sources: Vec<Range<usize>>,
    /// Fragment-level relevance of each source for the target fragment.
    pub relevance: Vec<f64>,
    /// Token span of the target answer fragment.
    pub target: Range<usize>,
}

/// Source order in which fragments are perturbed: ascending relevance for
/// pruning, descending for generation, shuffled for random. Ties by index.
pub fn perturbation_order(relevance: &[f64], mode: PerturbMode, order: Order, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..relevance.len()).collect();
    match order {
        Order::Random => idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        Order::Relevance => idx.sort_by(|&a, &b| {
            let c = relevance[a].total_cmp(&relevance[b]);
            let c = match mode {
                PerturbMode::Pruning => c,
                PerturbMode::Generation => c.reverse(),
            };
            c.then(a.cmp(&b))
        }),
    }
    idx
}

pub fn run_perturbation(
    input: &PerturbationInput,
    mode: PerturbMode,
    order: Order,
    steps: usize,
    seed: u64,
    exec: Exec,
) -> Result<PerturbationCurve> {
    let m = input.sources.len();
    if m < 2 {
        return Err(Error::DegenerateCurve(format!("{m} source fragment(s)")));
    }
    if input.relevance.len() != m {
        return Err(Error::Shape(format!(
            "{} relevance values for {m} sources",
            input.relevance.len()
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let n = input.tokens.len();
    let base = input.model.forward(input.tokens)?;
    check_span(&base, &input.target)?;
    let ranked = perturbation_order(&input.relevance, mode, order, seed);
    let grid = fraction_grid(steps);
    let points = exec.map(&grid, |&f| -> Result<CurvePoint> {
        let count = (f * m as f64).round() as usize;
        let masked: Vec<Range<usize>> = match mode {
            PerturbMode::Pruning => ranked[..count].iter().map(|&s| input.sources[s].clone()).collect(),
            PerturbMode::Generation => ranked[count..].iter().map(|&s| input.sources[s].clone()).collect(),
        };
        let mask = mask_fragments(n, &masked)?;
        let trace = input.model.forward_masked(input.tokens, &mask)?;
        Ok(CurvePoint {
            fraction: f,
            embedding_delta: embedding_delta(&base, &trace, input.target.clone())?,
            mean_target_prob: mean_target_prob(&trace, input.target.clone())?,
        })
    });
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(with_aucs(mode, order, (order == Order::Random).then_some(seed), points))
}

fn with_aucs(mode: PerturbMode, order: Order, seed: Option<u64>, points: Vec<CurvePoint>) -> PerturbationCurve {
    let xs: Vec<f64> = points.iter().map(|p| p.fraction).collect();
    let de: Vec<f64> = points.iter().map(|p| p.embedding_delta).collect();
    let pr: Vec<f64> = points.iter().map(|p| p.mean_target_prob).collect();
    PerturbationCurve {
        mode,
        order,
        seed,
        auc_embedding: trapezoid_auc(&xs, &de),
        auc_prob: trapezoid_auc(&xs, &pr),
        points,
    }
}

/// Pointwise mean of curves sharing mode, order and fraction grid.
pub fn mean_curve(curves: &[PerturbationCurve]) -> Result<PerturbationCurve> {
    let first = curves
        .first()
        .ok_or(Error::InsufficientCurves { needed: 1, got: 0 })?;
    let same = curves.iter().all(|c| {
        c.mode == first.mode
            && c.order == first.order
            && c.points.len() == first.points.len()
            && c.points.iter().zip(&first.points).all(|(a, b)| a.fraction == b.fraction)
    });
    if !same {
        return Err(Error::InvalidArgument("curves differ in mode, order or grid".into()));
    }
    let k = curves.len() as f64;
    let points = (0..first.points.len())
        .map(|i| CurvePoint {
            fraction: first.points[i].fraction,
            embedding_delta: curves.iter().map(|c| c.points[i].embedding_delta).sum::<f64>() / k,
            mean_target_prob: curves.iter().map(|c| c.points[i].mean_target_prob).sum::<f64>() / k,
        })
        .collect();
    let seed = curves.iter().all(|c| c.seed == first.seed).then_some(first.seed).flatten();
    Ok(with_aucs(first.mode, first.order, seed, points))
}

pub const MIN_RANDOM_CURVES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMetric {
    EmbeddingDelta,
    TargetProb,
}

impl CurveMetric {
    pub fn name(self) -> &'static str {
        match self {
            CurveMetric::EmbeddingDelta => "embedding_delta",
            CurveMetric::TargetProb => "target_prob",
        }
    }
}

/// Relevance-order AUC against the spread of random-order AUCs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucComparison {
    pub mode: PerturbMode,
    pub metric: CurveMetric,
    pub relevance_auc: f64,
    pub random_mean: f64,
    /// Sample standard deviation of the random AUCs.
    pub random_std: f64,
    /// Improvement over the random mean: lower is better for the embedding
    /// change, higher for the target probability.
    pub advantage: f64,
    /// `advantage / random_std`; 0 when the spread is 0.
    pub sigmas: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    // constant samples: avoid rounding noise in the mean
    if xs.windows(2).all(|w| w[0] == w[1]) {
        return (xs.first().copied().unwrap_or(0.0), 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// One comparison per metric for the relevance curve of one mode.
pub fn compare_orders(relevance: &PerturbationCurve, random: &[PerturbationCurve]) -> Result<Vec<AucComparison>> {
    if random.len() < MIN_RANDOM_CURVES {
        return Err(Error::InsufficientCurves {
            needed: MIN_RANDOM_CURVES,
            got: random.len(),
        });
    }
    if random.iter().any(|c| c.mode != relevance.mode) {
        return Err(Error::InvalidArgument("random curves of a different mode".into()));
    }
    let metrics = [
        (CurveMetric::EmbeddingDelta, -1.0, relevance.auc_embedding, random.iter().map(|c| c.auc_embedding).collect::<Vec<_>>()),
        (CurveMetric::TargetProb, 1.0, relevance.auc_prob, random.iter().map(|c| c.auc_prob).collect()),
    ];
    Ok(metrics
        .into_iter()
        .map(|(metric, sign, rel, rand)| {
            let (mean, std) = mean_std(&rand);
            let advantage = sign * (rel - mean);
            AucComparison {
                mode: relevance.mode,
                metric,
                relevance_auc: rel,
                random_mean: mean,
                random_std: std,
                advantage,
                sigmas: if std > 0.0 { advantage / std } else { 0.0 },
            }
        })
        .collect())
}

pub const CSV_HEADER: [&str; 7] = [
    "sample_id",
    "mode",
    "order",
    "seed",
    "fraction",
    "embedding_delta",
    "mean_target_prob",
];

/// Writes curves as CSV rows, one per point.
pub fn write_curves_csv<W: Write>(out: W, sample_id: &str, curves: &[PerturbationCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in curves {
        let seed = c.seed.map(|s| s.to_string()).unwrap_or_default();
        for p in &c.points {
            w.write_record([
                sample_id,
                c.mode.name(),
                c.order.name(),
                &seed,
                &p.fraction.to_string(),
                &p.embedding_delta.to_string(),
                &p.mean_target_prob.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(Path::new("<csv>"), e))?;
    Ok(())
}
