use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::lrp::RelevanceMatrix;
use crate::par::Exec;
use crate::segment::{Document, Fragment};

/// Which source tokens the per-fragment maximum ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceTokens {
    /// Term (or fallback) positions of the source fragment.
    #[default]
    Terms,
    /// Every token of the source fragment.
    All,
}

/// Fragment-to-fragment relevance, one row per answer fragment and one column
/// per fragment (context first, then answer).
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentRelevance {
    pub values: Array2<f64>,
    pub n_context: usize,
    pub n_answer: usize,
}

impl FragmentRelevance {
    /// Score of source node `src` for answer fragment `i`.
    pub fn get(&self, i: usize, src: usize) -> f64 {
        self.values[[i, src]]
    }

    /// Admissible source scores for answer fragment `i`: every context
    /// fragment and every earlier answer fragment.
    pub fn candidates(&self, i: usize) -> Vec<f64> {
        self.values.slice(s![i, ..self.n_context + i]).to_vec()
    }
}

/// Mean relevance vector over the term tokens of an answer fragment; each
/// multi-token term is first averaged into one vector.
fn fragment_vector(f: &Fragment, rel: &RelevanceMatrix, len: usize) -> Result<Vec<f64>> {
    let terms = f.term_positions();
    let mut acc = vec![0.0; len];
    for positions in &terms {
        let mut term = vec![0.0; len];
        for &p in positions {
            let row = rel.row_for(p).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "no relevance row for token {p} of fragment {}",
                    f.id
                ))
            })?;
            for (t, v) in term.iter_mut().zip(row.padded(len)) {
                *t += v;
            }
        }
        let n = positions.len() as f64;
        for (a, t) in acc.iter_mut().zip(term) {
            *a += t / n;
        }
    }
    let n = terms.len() as f64;
    Ok(acc.into_iter().map(|v| v / n).collect())
}

/// Fragment-level relevance: for each answer fragment, average the relevance
/// vectors of its terms, then take the maximum over each source fragment's
/// tokens. Entries for the fragment itself and later answer fragments are 0.
pub fn fragment_relevance_matrix(
    doc: &Document,
    rel: &RelevanceMatrix,
    sources: SourceTokens,
    exec: Exec,
) -> Result<FragmentRelevance> {
    let n_c = doc.n_context;
    let answers = doc.answer_fragments();
    let n_a = answers.len();
    let len = doc.tokens.len();
    let source_positions: Vec<Vec<usize>> = doc
        .fragments
        .iter()
        .map(|f| match sources {
            SourceTokens::Terms => f.substantive_positions(),
            SourceTokens::All => f.tokens().collect(),
        })
        .collect();
    let rows = exec.map(answers, |f| -> Result<Vec<f64>> {
        let i = f.id - n_c;
        let v = fragment_vector(f, rel, len)?;
        Ok((0..n_c + n_a)
            .map(|j| {
                if j >= n_c + i {
                    0.0
                } else {
                    source_positions[j]
                        .iter()
                        .map(|&p| v[p])
                        .fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .collect())
    });
    let mut values = Array2::zeros((n_a, n_c + n_a));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    Ok(FragmentRelevance {
        values,
        n_context: n_c,
        n_answer: n_a,
    })
}
