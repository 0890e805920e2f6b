use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use reasongraph::detect::{classify_response, ScorerBinding, ScorerKind, DEFAULT_THRESHOLD};
use reasongraph::graph::{EdgeStrategy, SourceTokens};
use reasongraph::model::save_model;
use reasongraph::par::Exec;
use reasongraph::perturb::PerturbMode;
use reasongraph::pipeline::{
    corpus_metrics, load_dataset, prepare_document, run_pipeline, write_dataset, Dataset,
    HeatmapAggregation, Outputs, PerturbSettings, Pipeline, RunConfig, RunSummary, Sample,
    VerdictRecord,
};
use reasongraph::segment::prompt_text;
use reasongraph::synthetic::{corpus_model, corpus_vocab, generate_corpus, CorpusSpec};

#[derive(Parser)]
#[command(name = "reasongraph", version, about = "Relevance-propagation reasoning graphs for RAG hallucination detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill in missing answers by greedy decoding and write the completed dataset
    Generate(GenerateArgs),
    /// Per-token relevance of every answer token over the prompt
    Attribute(AttributeArgs),
    /// Fragment-level reasoning graphs (DOT and JSON)
    Graph(GraphArgs),
    /// Graphs plus fragment and response verdicts
    Detect(DetectArgs),
    /// Generation and pruning perturbation curves
    Perturb(PerturbArgs),
    /// Metrics of a verdicts file against the dataset's gold labels
    Eval(EvalArgs),
    /// Write the hand-built demo model and a labeled synthetic corpus
    Synth(SynthArgs),
}

#[derive(Args)]
struct Common {
    /// Directory holding `config`, `vocab.txt` and `weights.bin`
    #[arg(long)]
    model_dir: PathBuf,
    /// JSONL dataset
    #[arg(long)]
    input: PathBuf,
    /// Output directory
    #[arg(long)]
    output: PathBuf,
    /// Worker threads across samples (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tokens generated for samples without an answer
    #[arg(long, default_value_t = 16)]
    max_new: usize,
}

#[derive(Args)]
struct GraphOpts {
    /// Keep the N most relevant sources per answer fragment
    #[arg(long, default_value_t = 3, conflicts_with = "adaptive")]
    topk: usize,
    /// Cut sources at the largest gap in sorted relevance
    #[arg(long)]
    adaptive: bool,
    /// Take each source fragment's maximum over all its tokens, not only its terms
    #[arg(long)]
    literal_sources: bool,
}

impl GraphOpts {
    fn strategy(&self) -> EdgeStrategy {
        if self.adaptive {
            EdgeStrategy::Adaptive
        } else {
            EdgeStrategy::TopK(self.topk)
        }
    }

    fn sources(&self) -> SourceTokens {
        if self.literal_sources {
            SourceTokens::All
        } else {
            SourceTokens::Terms
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Heatmap {
    None,
    Max,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scorer {
    Lexical,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Pruning,
    Generation,
    Both,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct AttributeArgs {
    #[command(flatten)]
    common: Common,
    /// Also write an aggregated heatmap across answer tokens
    #[arg(long, value_enum)]
    heatmap: Option<Heatmap>,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    graph: GraphOpts,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    graph: GraphOpts,
    /// Largest hallucinated-fragment share still judged faithful
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Scorer::Lexical)]
    scorer: Scorer,
    /// Base URL of the remote scorer
    #[arg(long)]
    scorer_url: Option<String>,
    /// Lexical coverage needed for a faithful fragment
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Remote request timeout in seconds
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

#[derive(Args)]
struct PerturbArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    graph: GraphOpts,
    /// Intervals of the masked-fraction grid
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, default_value_t = 20)]
    random_orders: usize,
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    mode: Mode,
}

#[derive(Args)]
struct EvalArgs {
    /// JSONL dataset with gold labels
    #[arg(long)]
    input: PathBuf,
    /// `verdicts.jsonl` written by `detect`
    #[arg(long)]
    verdicts: PathBuf,
    /// Re-derive response labels from fragment labels at this alpha
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Write metrics JSON here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory receiving `model/` and `corpus.jsonl`
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Share of samples containing a hallucinated sentence
    #[arg(long, default_value_t = 0.5)]
    hallucination_rate: f64,
}

fn exec(workers: Option<usize>) -> Exec {
    match workers {
        Some(1) => Exec::Sequential,
        _ => Exec::Parallel,
    }
}

fn load(common: &Common) -> Result<(Pipeline, Dataset)> {
    let pipeline = Pipeline::load(&common.model_dir)
        .with_context(|| format!("loading model from {}", common.model_dir.display()))?;
    let dataset = load_dataset(&common.input)
        .with_context(|| format!("reading dataset {}", common.input.display()))?;
    Ok((pipeline, dataset))
}

fn base_config(common: &Common) -> RunConfig {
    RunConfig {
        seed: common.seed,
        max_new_tokens: common.max_new,
        exec: exec(common.workers),
        outputs: Outputs::default(),
        ..RunConfig::default()
    }
}

fn run(common: &Common, cfg: RunConfig) -> Result<RunSummary> {
    let (pipeline, dataset) = load(common)?;
    let summary = cfg
        .exec
        .install(common.workers, || run_pipeline(&pipeline, &dataset, &cfg, &common.output))?;
    let r = &summary.report;
    println!(
        "processed {} samples: {} succeeded, {} rejected, {} errored",
        r.processed,
        r.succeeded,
        r.rejected.len(),
        r.errored.len()
    );
    for f in &r.rejected {
        eprintln!("rejected {} (line {}): {}", f.id, f.line, f.reason);
    }
    for f in &r.errored {
        eprintln!("failed {}: {}", f.id, f.error);
    }
    Ok(summary)
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let common = &args.common;
    let (pipeline, dataset) = load(common)?;
    let done: Vec<Result<Sample>> = exec(common.workers).install(common.workers, || {
        exec(common.workers).map(&dataset.samples, |s| {
            let doc = prepare_document(&pipeline, s, common.max_new)?;
            let prompt_len = prompt_text(&s.context, &s.question).len();
            Ok(Sample {
                answer: doc.text[prompt_len..].to_string(),
                ..s.clone()
            })
        })
    });
    let mut samples = Vec::with_capacity(done.len());
    for (s, r) in dataset.samples.iter().zip(done) {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => eprintln!("failed {}: {e}", s.id),
        }
    }
    fs::create_dir_all(&common.output)?;
    let path = common.output.join("generated.jsonl");
    write_dataset(&path, &samples)?;
    println!("wrote {} samples to {}", samples.len(), path.display());
    Ok(())
}

fn attribute(args: &AttributeArgs) -> Result<()> {
    let mut cfg = base_config(&args.common);
    cfg.outputs.relevance = true;
    cfg.outputs.heatmap = args.heatmap.map(|h| match h {
        Heatmap::None => HeatmapAggregation::None,
        Heatmap::Max => HeatmapAggregation::Max,
        Heatmap::Mean => HeatmapAggregation::Mean,
    });
    run(&args.common, cfg)?;
    Ok(())
}

fn graph(args: &GraphArgs) -> Result<()> {
    let mut cfg = base_config(&args.common);
    cfg.strategy = args.graph.strategy();
    cfg.source_tokens = args.graph.sources();
    cfg.outputs.graphs = true;
    run(&args.common, cfg)?;
    Ok(())
}

fn detect(args: &DetectArgs) -> Result<()> {
    if matches!(args.scorer, Scorer::Remote) && args.scorer_url.is_none() {
        bail!("--scorer remote needs --scorer-url");
    }
    let mut cfg = base_config(&args.common);
    cfg.strategy = args.graph.strategy();
    cfg.source_tokens = args.graph.sources();
    cfg.alpha = args.alpha;
    cfg.scorer = ScorerBinding {
        kind: match args.scorer {
            Scorer::Lexical => ScorerKind::Lexical,
            Scorer::Remote => ScorerKind::Remote,
        },
        threshold: args.threshold,
        endpoint: args.scorer_url.clone(),
        timeout: Duration::from_secs(args.timeout),
    };
    cfg.outputs.graphs = true;
    cfg.outputs.verdicts = true;
    let summary = run(&args.common, cfg)?;
    if let Some(m) = summary.metrics {
        println!(
            "alpha {}: precision {:.4} recall {:.4} f1 {:.4} over {} labeled samples",
            m.alpha, m.metrics.precision, m.metrics.recall, m.metrics.f1, m.evaluated
        );
    }
    Ok(())
}

fn perturb(args: &PerturbArgs) -> Result<()> {
    let mut cfg = base_config(&args.common);
    cfg.strategy = args.graph.strategy();
    cfg.source_tokens = args.graph.sources();
    cfg.perturb = Some(PerturbSettings {
        steps: args.steps,
        random_orders: args.random_orders,
        modes: match args.mode {
            Mode::Pruning => vec![PerturbMode::Pruning],
            Mode::Generation => vec![PerturbMode::Generation],
            Mode::Both => vec![PerturbMode::Pruning, PerturbMode::Generation],
        },
    });
    let summary = run(&args.common, cfg)?;
    for c in summary.perturbation.iter().flat_map(|p| &p.corpus) {
        println!(
            "{} {}: relevance AUC {:.4}, random {:.4} ± {:.4}, advantage {:.1}σ",
            c.mode.name(),
            c.metric.name(),
            c.relevance_auc,
            c.random_mean,
            c.random_std,
            c.sigmas
        );
    }
    Ok(())
}

fn read_verdicts(path: &Path) -> Result<Vec<VerdictRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn eval(args: &EvalArgs) -> Result<()> {
    let dataset = load_dataset(&args.input)?;
    let mut verdicts = read_verdicts(&args.verdicts)?;
    for v in verdicts.iter_mut() {
        let gold = dataset.samples.iter().find(|s| s.id == v.id).and_then(|s| s.label);
        v.gold = gold;
        v.label = classify_response(&v.fragment_labels, args.alpha)?.label;
        v.alpha = args.alpha;
    }
    let Some(metrics) = corpus_metrics(&verdicts, &dataset.samples, args.alpha)? else {
        bail!("no verdict has a gold label in {}", args.input.display());
    };
    let mut text = serde_json::to_string_pretty(&metrics)?;
    text.push('\n');
    match &args.output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let model_dir = args.output.join("model");
    save_model(&model_dir, &corpus_model(1), Some(&corpus_vocab()))?;
    let samples = generate_corpus(&CorpusSpec {
        n_samples: args.samples,
        seed: args.seed,
        hallucination_rate: args.hallucination_rate,
        ..CorpusSpec::default()
    });
    let corpus = args.output.join("corpus.jsonl");
    write_dataset(&corpus, &samples)?;
    println!("wrote {} and {} ({} samples)", model_dir.display(), corpus.display(), samples.len());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => generate(&a),
        Command::Attribute(a) => attribute(&a),
        Command::Graph(a) => graph(&a),
        Command::Detect(a) => detect(&a),
        Command::Perturb(a) => perturb(&a),
        Command::Eval(a) => eval(&a),
        Command::Synth(a) => synth(&a),
    }
}
