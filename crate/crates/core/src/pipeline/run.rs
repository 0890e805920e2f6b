use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Rejected, Sample};
use super::heatmap::{emit_heatmap, HeatmapAggregation};
use crate::detect::{
    alpha_sweep, classify_scored, default_alphas, linearize_node, metrics_from_pairs,
    FragmentScorer, LinearizedUnit, Metrics, ResponseVerdict, ScorerBinding, SweepRow,
    DEFAULT_SEPARATOR,
};
use crate::error::{Error, Result};
use crate::graph::{
    build_graph, export_graph, fragment_relevance_matrix, EdgeStrategy, FragmentRelevance,
    GraphFormat, ReasoningGraph, SourceTokens,
};
use crate::lrp::{attribute_response, LrpConfig, RelevanceMatrix};
use crate::model::{ActivationTrace, Model};
use crate::par::Exec;
use crate::perturb::{
    compare_orders, mean_curve, run_perturbation, write_curves_csv, AucComparison, Order,
    MIN_RANDOM_CURVES,
    PerturbMode, PerturbationCurve, PerturbationInput,
};
use crate::segment::{prompt_text, Document, Lexicon};
use crate::tokenizer::Tokenizer;

/// Model, tokenizer and word lists shared by every sample of a run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub model: Model,
    pub tokenizer: Tokenizer,
    pub lexicon: Lexicon,
}

impl Pipeline {
    pub fn new(model: Model, tokenizer: Tokenizer, lexicon: Lexicon) -> Result<Self> {
        if tokenizer.vocab_size() > model.config.vocab_size {
            return Err(Error::Config(format!(
                "tokenizer has {} entries, model vocabulary {}",
                tokenizer.vocab_size(),
                model.config.vocab_size
            )));
        }
        Ok(Pipeline {
            model,
            tokenizer,
            lexicon,
        })
    }

    /// Loads the model and `vocab.txt` from `dir` with the built-in word lists.
    pub fn load(dir: &Path) -> Result<Self> {
        let model = Model::load(dir)?;
        let tokenizer = Tokenizer::load(&dir.join(crate::model::VOCAB_FILE))?;
        Pipeline::new(model, tokenizer, Lexicon::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSettings {
    pub steps: usize,
    pub random_orders: usize,
    pub modes: Vec<PerturbMode>,
}

impl Default for PerturbSettings {
    fn default() -> Self {
        PerturbSettings {
            steps: 10,
            random_orders: 20,
            modes: vec![PerturbMode::Pruning, PerturbMode::Generation],
        }
    }
}

/// Artifacts written under the output directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Outputs {
    pub relevance: bool,
    pub heatmap: Option<HeatmapAggregation>,
    pub graphs: bool,
    pub verdicts: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub strategy: EdgeStrategy,
    pub alpha: f64,
    pub scorer: ScorerBinding,
    pub source_tokens: SourceTokens,
    pub separator: String,
    pub seed: u64,
    /// Tokens generated for samples without an answer.
    pub max_new_tokens: usize,
    pub epsilon: f64,
    /// Parallelism across samples; each sample is processed sequentially.
    pub exec: Exec,
    pub outputs: Outputs,
    pub perturb: Option<PerturbSettings>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            strategy: EdgeStrategy::TopK(3),
            alpha: 0.0,
            scorer: ScorerBinding::default(),
            source_tokens: SourceTokens::Terms,
            separator: DEFAULT_SEPARATOR.to_string(),
            seed: 0,
            max_new_tokens: 16,
            epsilon: crate::lrp::DEFAULT_EPSILON,
            exec: Exec::default(),
            outputs: Outputs {
                relevance: true,
                heatmap: None,
                graphs: true,
                verdicts: true,
            },
            perturb: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategy == EdgeStrategy::TopK(0) {
            return Err(Error::InvalidArgument("top-k needs k >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if let Some(p) = &self.perturb {
            if p.steps == 0 {
                return Err(Error::InvalidArgument("perturbation steps must be >= 1".into()));
            }
            if p.random_orders < MIN_RANDOM_CURVES {
                return Err(Error::InsufficientCurves {
                    needed: MIN_RANDOM_CURVES,
                    got: p.random_orders,
                });
            }
        }
        self.scorer.validate()
    }

    fn lrp(&self) -> LrpConfig {
        LrpConfig {
            epsilon: self.epsilon,
            exec: Exec::Sequential,
        }
    }
}

/// Everything computed for one sample up to the reasoning graph.
#[derive(Debug, Clone)]
pub struct SampleAnalysis {
    pub id: String,
    pub document: Document,
    pub trace: ActivationTrace,
    pub relevance: RelevanceMatrix,
    pub fragment_relevance: FragmentRelevance,
    pub graph: ReasoningGraph,
}

/// Tokenized and segmented prompt plus answer. An empty answer is generated
/// greedily from the prompt.
pub fn prepare_document(p: &Pipeline, sample: &Sample, max_new_tokens: usize) -> Result<Document> {
    let prompt = prompt_text(&sample.context, &sample.question);
    if !sample.answer.trim().is_empty() {
        return Document::from_text(&prompt, &sample.answer, &p.tokenizer, &p.lexicon);
    }
    let prompt_tokens = p.tokenizer.encode(&prompt);
    let budget = max_new_tokens.min(p.model.config.max_seq.saturating_sub(prompt_tokens.len()));
    let full = p.model.generate(&prompt_tokens.ids, budget)?;
    let (answer, answer_tokens) = p.tokenizer.decode_with_spans(&full[prompt_tokens.len()..]);
    Document::assemble(&prompt, prompt_tokens, &answer, answer_tokens, &p.lexicon)
}

pub fn analyze_sample(p: &Pipeline, sample: &Sample, cfg: &RunConfig) -> Result<SampleAnalysis> {
    let document = prepare_document(p, sample, cfg.max_new_tokens)?;
    if document.answer_fragments().is_empty() {
        return Err(Error::InvalidArgument("empty answer".into()));
    }
    let trace = p.model.forward(&document.tokens.ids)?;
    let positions: Vec<usize> = document.answer_positions().collect();
    let relevance = attribute_response(&p.model, &trace, document.context_len, &positions, &cfg.lrp())?;
    let fragment_relevance =
        fragment_relevance_matrix(&document, &relevance, cfg.source_tokens, Exec::Sequential)?;
    let graph = build_graph(&document, &fragment_relevance, cfg.strategy)?;
    Ok(SampleAnalysis {
        id: sample.id.clone(),
        document,
        trace,
        relevance,
        fragment_relevance,
        graph,
    })
}

/// Linearized units of every answer node and the response verdict.
pub fn detect_sample(
    a: &SampleAnalysis,
    scorer: &dyn FragmentScorer,
    alpha: f64,
    separator: &str,
) -> Result<(Vec<LinearizedUnit>, ResponseVerdict)> {
    let units = a
        .document
        .answer_fragments()
        .iter()
        .map(|f| linearize_node(&a.graph, f.id, separator))
        .collect::<Result<Vec<_>>>()?;
    let scores = scorer.score_batch(&units)?;
    let verdict = classify_scored(&scores, alpha)?;
    Ok((units, verdict))
}

/// Shuffle seed of random order `r` for the sample at `index`.
pub fn random_order_seed(base: u64, index: usize, r: usize) -> u64 {
    base.wrapping_add((index as u64) << 20).wrapping_add(r as u64)
}

/// Perturbation curves for the first answer fragment: one relevance-ordered
/// curve and `random_orders` shuffled curves per mode, in that order.
pub fn perturb_sample(
    p: &Pipeline,
    a: &SampleAnalysis,
    settings: &PerturbSettings,
    seeds: impl Fn(usize) -> u64,
    exec: Exec,
) -> Result<Vec<PerturbationCurve>> {
    let doc = &a.document;
    let target = &doc.answer_fragments()[0];
    let n_sources = doc.n_context;
    let sources: Vec<Range<usize>> = doc.fragments[..n_sources].iter().map(|f| f.tokens()).collect();
    let input = PerturbationInput {
        model: &p.model,
        tokens: &doc.tokens.ids,
        sources,
        relevance: a.fragment_relevance.candidates(0),
        target: target.tokens(),
    };
    let mut jobs = Vec::new();
    for &mode in &settings.modes {
        jobs.push((mode, Order::Relevance, 0));
        for r in 0..settings.random_orders {
            jobs.push((mode, Order::Random, seeds(r)));
        }
    }
    exec.map(&jobs, |&(mode, order, seed)| {
        run_perturbation(&input, mode, order, settings.steps, seed, Exec::Sequential)
    })
    .into_iter()
    .collect()
}

/// One line of `verdicts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub id: String,
    pub label: u8,
    pub alpha: f64,
    pub hallucinated_proportion: f64,
    pub fragment_labels: Vec<u8>,
    pub scores: Vec<f64>,
    /// Source node ids of each answer fragment, in premise order.
    pub sources: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub error: String,
}

/// Exit report of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub processed: usize,
    pub succeeded: usize,
    pub rejected: Vec<Rejected>,
    pub errored: Vec<Failure>,
    /// `rejected + errored`.
    pub failure_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub alpha: f64,
    pub evaluated: usize,
    pub metrics: Metrics,
    pub alpha_sweep: Vec<SweepRow>,
    /// Fragment-level metrics where gold fragment labels line up with the
    /// predicted fragments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment_metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSummary {
    pub samples: usize,
    pub random_orders: usize,
    /// Mean curves across samples compared against the per-seed mean random curves.
    pub corpus: Vec<AucComparison>,
    pub per_sample: Vec<SamplePerturbation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePerturbation {
    pub id: String,
    pub comparisons: Vec<AucComparison>,
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub report: RunReport,
    pub verdicts: Vec<VerdictRecord>,
    pub metrics: Option<MetricsReport>,
    pub perturbation: Option<PerturbSummary>,
}

/// File stem safe for any sample id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text.as_bytes())
}

struct SampleOutcome {
    verdict: Option<VerdictRecord>,
    curves: Vec<PerturbationCurve>,
}

fn process_sample(
    p: &Pipeline,
    index: usize,
    sample: &Sample,
    cfg: &RunConfig,
    scorer: Option<&dyn FragmentScorer>,
    out: &Path,
) -> Result<SampleOutcome> {
    let a = analyze_sample(p, sample, cfg)?;
    let stem = file_stem(&sample.id);
    if cfg.outputs.relevance {
        let mut buf = Vec::new();
        emit_heatmap(&mut buf, &a.relevance, &a.document.tokens.ids, &p.tokenizer, HeatmapAggregation::None)?;
        write(&out.join("relevance").join(format!("{stem}.csv")), &buf)?;
    }
    if let Some(agg) = cfg.outputs.heatmap {
        let mut buf = Vec::new();
        emit_heatmap(&mut buf, &a.relevance, &a.document.tokens.ids, &p.tokenizer, agg)?;
        write(&out.join("heatmaps").join(format!("{stem}.{}.csv", agg.name())), &buf)?;
    }
    if cfg.outputs.graphs {
        for fmt in [GraphFormat::Dot, GraphFormat::Json] {
            let text = export_graph(&a.graph, fmt)?;
            write(&out.join("graphs").join(format!("{stem}.{}", fmt.extension())), text.as_bytes())?;
        }
    }
    let verdict = match scorer {
        Some(scorer) => {
            let (units, v) = detect_sample(&a, scorer, cfg.alpha, &cfg.separator)?;
            Some(VerdictRecord {
                id: sample.id.clone(),
                label: v.label,
                alpha: v.alpha,
                hallucinated_proportion: v.hallucinated_proportion,
                fragment_labels: v.fragment_labels,
                scores: v.scores,
                sources: units.into_iter().map(|u| u.sources).collect(),
                gold: sample.label,
            })
        }
        None => None,
    };
    let curves = match &cfg.perturb {
        Some(settings) => {
            let curves = perturb_sample(p, &a, settings, |r| random_order_seed(cfg.seed, index, r), Exec::Sequential)?;
            let mut buf = Vec::new();
            write_curves_csv(&mut buf, &sample.id, &curves)?;
            write(&out.join("perturb").join(format!("{stem}.csv")), &buf)?;
            curves
        }
        None => Vec::new(),
    };
    Ok(SampleOutcome { verdict, curves })
}

/// Corpus metrics over verdicts that carry a gold label.
pub fn corpus_metrics(verdicts: &[VerdictRecord], samples: &[Sample], alpha: f64) -> Result<Option<MetricsReport>> {
    let gold: Vec<&VerdictRecord> = verdicts.iter().filter(|v| v.gold.is_some()).collect();
    if gold.is_empty() {
        return Ok(None);
    }
    let metrics = metrics_from_pairs(gold.iter().map(|v| (v.label, v.gold.unwrap_or(0))));
    let sweep_input: Vec<(Vec<u8>, u8)> = gold
        .iter()
        .map(|v| (v.fragment_labels.clone(), v.gold.unwrap_or(0)))
        .collect();
    let alpha_sweep = alpha_sweep(&sweep_input, &default_alphas())?;
    let mut pairs = Vec::new();
    for v in verdicts {
        let gold_fragments = samples
            .iter()
            .find(|s| s.id == v.id)
            .and_then(|s| s.fragment_labels.as_ref());
        if let Some(g) = gold_fragments {
            if g.len() == v.fragment_labels.len() {
                pairs.extend(v.fragment_labels.iter().copied().zip(g.iter().copied()));
            }
        }
    }
    Ok(Some(MetricsReport {
        alpha,
        evaluated: gold.len(),
        metrics,
        alpha_sweep,
        fragment_metrics: (!pairs.is_empty()).then(|| metrics_from_pairs(pairs)),
    }))
}

/// Mean relevance curve across samples against the mean random curves of
/// each random-order index, for every mode.
pub fn corpus_perturbation(
    per_sample: &[Vec<PerturbationCurve>],
    random_orders: usize,
) -> Result<Vec<AucComparison>> {
    let mut modes: Vec<PerturbMode> = Vec::new();
    for c in per_sample.iter().flatten() {
        if !modes.contains(&c.mode) {
            modes.push(c.mode);
        }
    }
    let mut out = Vec::new();
    for mode in modes {
        let of = |order: Order| -> Vec<Vec<&PerturbationCurve>> {
            per_sample
                .iter()
                .map(|cs| cs.iter().filter(|c| c.mode == mode && c.order == order).collect())
                .collect()
        };
        let rel: Vec<PerturbationCurve> = of(Order::Relevance).into_iter().flatten().cloned().collect();
        let random = of(Order::Random);
        let rel_mean = mean_curve(&rel)?;
        let random_means = (0..random_orders)
            .map(|r| {
                let curves: Vec<PerturbationCurve> =
                    random.iter().filter_map(|cs| cs.get(r).map(|c| (*c).clone())).collect();
                mean_curve(&curves)
            })
            .collect::<Result<Vec<_>>>()?;
        out.extend(compare_orders(&rel_mean, &random_means)?);
    }
    Ok(out)
}

/// Runs every stage enabled in `cfg` over the dataset and writes the
/// artifacts under `out`. Failing samples are recorded and skipped.
pub fn run_pipeline(p: &Pipeline, dataset: &Dataset, cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let scorer = if cfg.outputs.verdicts {
        Some(cfg.scorer.build(&p.lexicon)?)
    } else {
        None
    };
    let indexed: Vec<(usize, &Sample)> = dataset.samples.iter().enumerate().collect();
    let outcomes = cfg.exec.map(&indexed, |&(i, s)| process_sample(p, i, s, cfg, scorer.as_deref(), out));

    let mut summary = RunSummary::default();
    summary.report.rejected = dataset.rejected.clone();
    summary.report.processed = dataset.samples.len();
    let mut curves = Vec::new();
    for (sample, outcome) in dataset.samples.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                summary.report.succeeded += 1;
                summary.verdicts.extend(o.verdict);
                if !o.curves.is_empty() {
                    curves.push((sample.id.clone(), o.curves));
                }
            }
            Err(e) => summary.report.errored.push(Failure {
                id: sample.id.clone(),
                error: e.to_string(),
            }),
        }
    }
    summary.report.failure_count = summary.report.rejected.len() + summary.report.errored.len();

    if cfg.outputs.verdicts {
        let mut text = String::new();
        for v in &summary.verdicts {
            text.push_str(&serde_json::to_string(v)?);
            text.push('\n');
        }
        write(&out.join("verdicts.jsonl"), text.as_bytes())?;
        summary.metrics = corpus_metrics(&summary.verdicts, &dataset.samples, cfg.alpha)?;
        if let Some(m) = &summary.metrics {
            write_json(&out.join("metrics.json"), m)?;
        }
    }
    if let Some(settings) = &cfg.perturb {
        let per_sample = curves
            .iter()
            .map(|(id, cs)| {
                let mut comparisons = Vec::new();
                for &mode in &settings.modes {
                    let rel = cs.iter().find(|c| c.mode == mode && c.order == Order::Relevance);
                    let random: Vec<PerturbationCurve> = cs
                        .iter()
                        .filter(|c| c.mode == mode && c.order == Order::Random)
                        .cloned()
                        .collect();
                    if let Some(rel) = rel {
                        comparisons.extend(compare_orders(rel, &random)?);
                    }
                }
                Ok(SamplePerturbation {
                    id: id.clone(),
                    comparisons,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let all: Vec<Vec<PerturbationCurve>> = curves.into_iter().map(|(_, c)| c).collect();
        let corpus = if all.is_empty() {
            Vec::new()
        } else {
            corpus_perturbation(&all, settings.random_orders)?
        };
        let ps = PerturbSummary {
            samples: all.len(),
            random_orders: settings.random_orders,
            corpus,
            per_sample,
        };
        write_json(&out.join("perturb").join("summary.json"), &ps)?;
        summary.perturbation = Some(ps);
    }
    write_json(&out.join("report.json"), &summary.report)?;
    Ok(summary)
}

/// Output directory layout, for callers that read artifacts back.
pub fn graph_path(out: &Path, id: &str, format: GraphFormat) -> PathBuf {
    out.join("graphs").join(format!("{}.{}", file_stem(id), format.extension()))
}
