use std::cmp::Ordering;

/// Candidate indices sorted by descending score, ties by lower index.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// The `k` highest-scoring candidates (all of them when fewer than `k`),
/// in rank order. Ties go to the lower index.
pub fn select_edges_topk(scores: &[f64], k: usize) -> Vec<usize> {
    let mut r = ranked(scores);
    r.truncate(k);
    r
}

/// Candidates above the largest drop in the descending score sequence.
///
/// With sorted scores `v_1 ≥ … ≥ v_m`, keeps the first `m*` where `m*`
/// maximizes `v_i − v_{i+1}` (smallest `i` on ties). A single candidate is
/// kept; no candidates gives an empty selection.
pub fn select_edges_adaptive(scores: &[f64]) -> Vec<usize> {
    let r = ranked(scores);
    if r.len() <= 1 {
        return r;
    }
    let mut cut = 1;
    let mut best = f64::NEG_INFINITY;
    for i in 0..r.len() - 1 {
        let gap = scores[r[i]] - scores[r[i + 1]];
        if gap > best {
            best = gap;
            cut = i + 1;
        }
    }
    r[..cut].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topk_examples() {
        assert_eq!(select_edges_topk(&[0.5, 0.3, 0.2], 2), vec![0, 1]);
        assert_eq!(select_edges_topk(&[0.2, 0.5], 10), vec![1, 0]);
        assert_eq!(select_edges_topk(&[0.4, 0.4, 0.4], 2), vec![0, 1]);
        assert!(select_edges_topk(&[], 3).is_empty());
    }

    #[test]
    fn adaptive_examples() {
        assert_eq!(select_edges_adaptive(&[0.9, 0.85, 0.1, 0.05]), vec![0, 1]);
        assert_eq!(select_edges_adaptive(&[0.3, 0.3, 0.3]), vec![0]);
        assert_eq!(select_edges_adaptive(&[0.7]), vec![0]);
        assert!(select_edges_adaptive(&[]).is_empty());
        // unsorted input
        assert_eq!(select_edges_adaptive(&[0.05, 0.9, 0.1, 0.85]), vec![1, 3]);
    }

    #[test]
    fn topk_sets_are_nested() {
        let scores = [0.1, 0.7, 0.7, -0.2, 0.3];
        for k in 1..5 {
            let a = select_edges_topk(&scores, k);
            let b = select_edges_topk(&scores, k + 1);
            assert_eq!(&b[..k], &a[..]);
        }
    }
}
