//! Sequential against rayon-parallel execution: per-token relevance of one
//! response, and a whole corpus run.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use reasongraph::lrp::{attribute_response, LrpConfig};
use reasongraph::model::{ActivationKind, NormKind};
use reasongraph::par::Exec;
use reasongraph::pipeline::{run_pipeline, Dataset, Pipeline, RunConfig};
use reasongraph::segment::Lexicon;
use reasongraph::synthetic::{corpus_model, corpus_tokenizer, generate_corpus, random_model, CorpusSpec, RandomModelSpec};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn relevance(c: &mut Criterion) {
    let spec = RandomModelSpec {
        vocab_size: 64,
        d_model: 32,
        n_layers: 2,
        n_heads: 4,
        d_ff: 64,
        max_seq: 64,
        norm_kind: NormKind::LayerNorm,
        activation_kind: ActivationKind::Gelu,
        zero_bias: false,
    };
    let model = random_model(&spec, 1);
    let tokens: Vec<u32> = (0..48).map(|i| (i * 7 % 64) as u32).collect();
    let trace = model.forward(&tokens).unwrap();
    let positions: Vec<usize> = (32..48).collect();
    let mut group = c.benchmark_group("attribute_response");
    for (name, exec) in MODES {
        let cfg = LrpConfig { exec, ..LrpConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| attribute_response(&model, &trace, 32, &positions, &cfg).unwrap())
        });
    }
    group.finish();
}

fn corpus_run(c: &mut Criterion) {
    let pipeline = Pipeline::new(corpus_model(1), corpus_tokenizer(), Lexicon::default()).unwrap();
    let dataset = Dataset {
        samples: generate_corpus(&CorpusSpec { n_samples: 24, ..CorpusSpec::default() }),
        rejected: vec![],
    };
    let dir = tempfile::tempdir().unwrap();
    let mut group = c.benchmark_group("run_pipeline");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = RunConfig { exec, ..RunConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_pipeline(&pipeline, &dataset, &cfg, dir.path()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, relevance, corpus_run);
criterion_main!(benches);
