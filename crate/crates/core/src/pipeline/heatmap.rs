use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lrp::RelevanceMatrix;
use crate::tokenizer::Tokenizer;

/// How token-level relevance rows are summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapAggregation {
    /// One row per attributed token.
    None,
    /// Column-wise maximum over answer tokens.
    Max,
    /// Column-wise mean over answer tokens.
    Mean,
}

impl FromStr for HeatmapAggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(HeatmapAggregation::None),
            "max" => Ok(HeatmapAggregation::Max),
            "mean" => Ok(HeatmapAggregation::Mean),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl HeatmapAggregation {
    pub fn name(self) -> &'static str {
        match self {
            HeatmapAggregation::None => "none",
            HeatmapAggregation::Max => "max",
            HeatmapAggregation::Mean => "mean",
        }
    }
}

/// Column-wise aggregate of the relevance rows, each zero-padded to `len`
/// positions. `None` for the per-token view or when there are no rows.
pub fn aggregate_rows(rel: &RelevanceMatrix, len: usize, agg: HeatmapAggregation) -> Option<Vec<f64>> {
    if rel.rows.is_empty() {
        return None;
    }
    let rows: Vec<Vec<f64>> = rel.rows.iter().map(|r| r.padded(len)).collect();
    let col = |j: usize| rows.iter().map(move |r| r[j]);
    match agg {
        HeatmapAggregation::None => None,
        HeatmapAggregation::Max => Some((0..len).map(|j| col(j).fold(f64::NEG_INFINITY, f64::max)).collect()),
        HeatmapAggregation::Mean => Some((0..len).map(|j| col(j).sum::<f64>() / rows.len() as f64).collect()),
    }
}

/// Writes relevance as CSV with columns
/// `target_pos, source_pos, source_token, relevance`. Aggregated views use
/// the aggregation name in place of the target position.
pub fn emit_heatmap<W: Write>(
    out: W,
    rel: &RelevanceMatrix,
    tokens: &[u32],
    tokenizer: &Tokenizer,
    agg: HeatmapAggregation,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["target_pos", "source_pos", "source_token", "relevance"])?;
    match aggregate_rows(rel, tokens.len(), agg) {
        None => {
            for row in &rel.rows {
                for (j, v) in row.values.iter().enumerate() {
                    w.write_record([
                        &row.target.to_string(),
                        &j.to_string(),
                        tokenizer.token(tokens[j]),
                        &v.to_string(),
                    ])?;
                }
            }
        }
        Some(values) => {
            let last = rel.rows.iter().map(|r| r.target).max().unwrap_or(0);
            for (j, v) in values.iter().enumerate().take(last) {
                w.write_record([agg.name(), &j.to_string(), tokenizer.token(tokens[j]), &v.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(Path::new("<csv>"), e))?;
    Ok(())
}
