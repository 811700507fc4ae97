use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::model::{Model, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// `None` when AUC is undefined: one class only, or every score tied.
    pub auc: Option<f64>,
    pub loss: f64,
}

pub fn evaluate(model: &Model, params: &ModelParams, data: &Dataset) -> Metrics {
    if data.is_empty() {
        return Metrics {
            accuracy: 0.0,
            auc: None,
            loss: 0.0,
        };
    }
    let scores: Vec<f64> = data
        .features
        .iter()
        .map(|x| model.predict_proba(params, x))
        .collect();
    let correct = scores
        .iter()
        .zip(&data.labels)
        .filter(|(&p, &y)| (p >= 0.5) == (y == 1))
        .count();
    let rows: Vec<usize> = (0..data.len()).collect();
    Metrics {
        accuracy: correct as f64 / data.len() as f64,
        auc: auc(&scores, &data.labels),
        loss: model.loss(params, &data.features, &data.labels, &rows),
    }
}

/// Mann–Whitney rank statistic with midranks for ties.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    if scores.windows(2).all(|w| w[0] == w[1]) {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean.
        let midrank = (i + j + 2) as f64 / 2.0;
        rank_sum += order[i..=j]
            .iter()
            .filter(|&&k| labels[k] == 1)
            .count() as f64
            * midrank;
        i = j + 1;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// O(P·N) pair counting, ties worth one half.
    fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi == 1 && yj == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_separator() {
        let data = Dataset {
            site_id: 0,
            features: vec![vec![-2.0], vec![-1.0], vec![1.0], vec![3.0]],
            labels: vec![0, 0, 1, 1],
        };
        let model = Model::logistic(1);
        let params = ModelParams { weights: vec![10.0, 0.0] };
        let m = evaluate(&model, &params, &data);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.auc, Some(1.0));
    }

    #[test]
    fn random_scores_give_half() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let n = 10_000;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        let a = auc(&scores, &labels).unwrap();
        assert!((a - 0.5).abs() <= 0.02, "auc {a}");
    }

    #[test]
    fn degenerate_cases_are_flagged() {
        assert_eq!(auc(&[0.3, 0.3, 0.3], &[0, 1, 1]), None);
        assert_eq!(auc(&[0.1, 0.9], &[1, 1]), None);
        let data = Dataset {
            site_id: 0,
            features: vec![vec![1.0], vec![2.0]],
            labels: vec![1, 1],
        };
        let m = evaluate(&Model::logistic(1), &ModelParams { weights: vec![1.0, 0.0] }, &data);
        assert_eq!(m.auc, None);
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn rank_statistic_matches_pair_counting_with_ties() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(2..60);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
            labels[0] = 0;
            labels[1] = 1;
            if let Some(a) = auc(&scores, &labels) {
                assert!((a - auc_pairs(&scores, &labels)).abs() < 1e-12);
            }
        }
    }
}
