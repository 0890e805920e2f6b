//! End-to-end runs over a dataset.

mod dataset;
mod heatmap;
mod run;

pub use dataset::{load_dataset, parse_dataset, write_dataset, Dataset, Rejected, Sample};
pub use heatmap::{aggregate_rows, emit_heatmap, HeatmapAggregation};
pub use run::{
    analyze_sample, corpus_metrics, corpus_perturbation, detect_sample, file_stem, graph_path,
    perturb_sample, prepare_document, random_order_seed, run_pipeline, Failure, MetricsReport,
    Outputs, PerturbSettings, PerturbSummary, Pipeline, RunConfig, RunReport, RunSummary,
    SampleAnalysis, SamplePerturbation, VerdictRecord,
};
