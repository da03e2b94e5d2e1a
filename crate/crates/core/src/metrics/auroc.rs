//! Rank-based AUROC (Mann-Whitney U with midranks for ties).

use crate::dataset::AuditDataset;

/// AUROC of `scores` against binary `outcomes`, or `None` when only one
/// class is present.
pub fn auroc_scores(outcomes: &[u8], scores: &[f64]) -> Option<f64> {
    assert_eq!(outcomes.len(), scores.len(), "outcome and score lengths differ");
    let n_pos = outcomes.iter().filter(|&&y| y == 1).count();
    let n_neg = outcomes.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let midrank = (i + 1 + j) as f64 / 2.0;
        let positives = order[i..j].iter().filter(|&&k| outcomes[k] == 1).count();
        rank_sum_pos += midrank * positives as f64;
        i = j;
    }

    let p = n_pos as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Some(u / (p * n_neg as f64))
}

pub fn auroc(dataset: &AuditDataset) -> Option<f64> {
    auroc_scores(dataset.outcomes(), dataset.scores())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fraction of concordant positive-negative pairs, ties counting half.
    fn pairwise(outcomes: &[u8], scores: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &yi) in outcomes.iter().enumerate() {
            for (j, &yj) in outcomes.iter().enumerate() {
                if yi == 1 && yj == 0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn separated_tied_and_mixed() {
        assert_eq!(auroc_scores(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]), Some(1.0));
        assert_eq!(auroc_scores(&[0, 1, 0, 1], &[0.3; 4]), Some(0.5));
        assert_eq!(auroc_scores(&[1, 0, 1, 0], &[0.9, 0.8, 0.7, 0.1]), Some(0.75));
    }

    #[test]
    fn single_class_is_undefined() {
        assert_eq!(auroc_scores(&[1, 1], &[0.2, 0.4]), None);
        assert_eq!(auroc_scores(&[0], &[0.2]), None);
    }

    proptest::proptest! {
        #[test]
        fn matches_pairwise_count(data in proptest::collection::vec((0u8..2, 0u8..6), 2..60)) {
            let outcomes: Vec<u8> = data.iter().map(|d| d.0).collect();
            let scores: Vec<f64> = data.iter().map(|d| d.1 as f64 / 5.0).collect();
            if let Some(a) = auroc_scores(&outcomes, &scores) {
                proptest::prop_assert!((a - pairwise(&outcomes, &scores)).abs() < 1e-12);
            }
        }
    }
}
