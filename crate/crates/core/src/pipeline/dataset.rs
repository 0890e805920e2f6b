//! JSONL dataset of RAG samples.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One retrieval-augmented sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub context: Vec<String>,
    pub question: String,
    /// Empty when the answer is to be generated.
    #[serde(default)]
    pub answer: String,
    /// 1 when the answer is faithful, 0 when it contains a hallucination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    /// Per answer fragment, 1 when faithful and 0 when hallucinated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment_labels: Option<Vec<u8>>,
}

/// A sample that parsed but cannot be processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejected {
    pub id: String,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub rejected: Vec<Rejected>,
}

/// Parses JSONL text. Blank lines are skipped; line numbers start at 1.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut out = Dataset::default();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: line_no,
            reason: e.to_string(),
        })?;
        if !seen.insert(sample.id.clone()) {
            return Err(Error::DuplicateId(sample.id));
        }
        if sample.context.iter().all(|p| p.trim().is_empty()) {
            out.rejected.push(Rejected {
                id: sample.id,
                line: line_no,
                reason: "empty context".into(),
            });
            continue;
        }
        if let Some(label) = sample.label {
            if label > 1 {
                return Err(Error::MalformedLine {
                    line: line_no,
                    reason: format!("label must be 0 or 1, got {label}"),
                });
            }
        }
        out.samples.push(sample);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn write_dataset(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for s in samples {
        let line = serde_json::to_string(s)?;
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
