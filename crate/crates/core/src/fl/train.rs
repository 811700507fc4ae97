use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::model::{Model, ModelParams};
use super::FlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub local_epochs: u32,
    /// Rows per SGD step; 0 means full batch.
    pub batch_size: usize,
    pub rng_seed: u64,
    /// Optional L2 clip applied to the final delta.
    #[serde(default)]
    pub clip_norm: Option<f64>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), FlError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(FlError::Config("learning_rate must be positive".into()));
        }
        if self.local_epochs == 0 {
            return Err(FlError::Config("local_epochs must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(FlError::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }

    /// Same hyperparameters with a different shuffle seed.
    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..self.clone()
        }
    }
}

/// Runs local SGD from `global` and returns `w_local − global`, clipped to
/// `clip_norm` in L2 if configured. Zero epochs yield the zero delta.
pub fn local_train(model: &Model, global: &ModelParams, data: &Dataset, cfg: &TrainConfig) -> Result<Vec<f64>, FlError> {
    model.check(global)?;
    if !data.is_empty() && data.feature_dim() != model.features {
        return Err(FlError::Shape(format!(
            "model expects {} features, dataset has {}",
            model.features,
            data.feature_dim()
        )));
    }
    let mut local = global.clone();
    if data.is_empty() {
        return Ok(vec![0.0; global.dimension()]);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batch = if cfg.batch_size == 0 {
        data.len()
    } else {
        cfg.batch_size.min(data.len())
    };
    for _ in 0..cfg.local_epochs {
        order.shuffle(&mut rng);
        for rows in order.chunks(batch) {
            let (_, grad) = model.loss_and_grad(&local, &data.features, &data.labels, rows);
            for (w, g) in local.weights.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * g;
            }
        }
    }
    let mut delta: Vec<f64> = local
        .weights
        .iter()
        .zip(&global.weights)
        .map(|(l, g)| l - g)
        .collect();
    if let Some(c) = cfg.clip_norm {
        clip_l2(&mut delta, c);
    }
    Ok(delta)
}

pub fn clip_l2(v: &mut [f64], max_norm: f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        v.iter_mut().for_each(|x| *x *= s);
    }
}

/// `Δ = Σ nᵢ·wᵢ / Σ nᵢ`.
pub fn fedavg_aggregate(updates: &[Vec<f64>], weights: &[u64]) -> Result<Vec<f64>, FlError> {
    let first = updates.first().ok_or(FlError::EmptyRound)?;
    if updates.len() != weights.len() {
        return Err(FlError::Shape(format!(
            "{} updates but {} weights",
            updates.len(),
            weights.len()
        )));
    }
    if weights.contains(&0) {
        return Err(FlError::Config("aggregation weights must be positive".into()));
    }
    let d = first.len();
    if let Some(bad) = updates.iter().find(|u| u.len() != d) {
        return Err(FlError::Shape(format!("update of length {} in a round of dimension {d}", bad.len())));
    }
    let total: f64 = weights.iter().map(|&n| n as f64).sum();
    let mut delta = vec![0.0; d];
    for (u, &n) in updates.iter().zip(weights) {
        for (acc, x) in delta.iter_mut().zip(u) {
            *acc += n as f64 * x;
        }
    }
    delta.iter_mut().for_each(|x| *x /= total);
    Ok(delta)
}

/// `W′ = W + Δ`.
pub fn apply_update(global: &ModelParams, delta: &[f64]) -> Result<ModelParams, FlError> {
    if delta.len() != global.dimension() {
        return Err(FlError::Shape(format!(
            "delta of length {} for a model of dimension {}",
            delta.len(),
            global.dimension()
        )));
    }
    Ok(ModelParams {
        weights: global.weights.iter().zip(delta).map(|(w, d)| w + d).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::data::make_federation;
    use proptest::prelude::*;

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.1,
            local_epochs: 1,
            batch_size: 0,
            rng_seed: 1,
            clip_norm: None,
        }
    }

    #[test]
    fn zero_epochs_zero_delta() {
        let data = make_federation(1, 1, 20, 3, 0.0).remove(0);
        let model = Model::logistic(3);
        let c = TrainConfig {
            local_epochs: 0,
            ..cfg()
        };
        assert!(c.validate().is_err());
        let delta = local_train(&model, &model.init(0), &data, &c).unwrap();
        assert_eq!(delta, vec![0.0; 4]);
    }

    #[test]
    fn full_batch_step_is_negative_lr_times_finite_difference_gradient() {
        let data = make_federation(2, 1, 40, 5, 0.0).remove(0);
        let model = Model::logistic(5);
        let w = ModelParams {
            weights: vec![0.3, -0.2, 0.1, 0.05, -0.4, 0.2],
        };
        let rows: Vec<usize> = (0..data.len()).collect();
        let h = 1e-6;
        let fd: Vec<f64> = (0..w.dimension())
            .map(|j| {
                let (mut p, mut m) = (w.clone(), w.clone());
                p.weights[j] += h;
                m.weights[j] -= h;
                (model.loss(&p, &data.features, &data.labels, &rows)
                    - model.loss(&m, &data.features, &data.labels, &rows))
                    / (2.0 * h)
            })
            .collect();
        let delta = local_train(&model, &w, &data, &cfg()).unwrap();
        for (d, g) in delta.iter().zip(&fd) {
            let expected = -0.1 * g;
            assert!((d - expected).abs() <= 1e-4 * expected.abs().max(1e-8), "{d} vs {expected}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let data = make_federation(3, 1, 64, 4, 0.0).remove(0);
        let model = Model::logistic(4);
        let c = TrainConfig {
            batch_size: 8,
            local_epochs: 3,
            ..cfg()
        };
        let a = local_train(&model, &model.init(0), &data, &c).unwrap();
        let b = local_train(&model, &model.init(0), &data, &c).unwrap();
        assert_eq!(a, b);
        let other = local_train(&model, &model.init(0), &data, &c.with_seed(2)).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn clipping_bounds_the_delta() {
        let data = make_federation(3, 1, 64, 4, 0.0).remove(0);
        let model = Model::logistic(4);
        let c = TrainConfig {
            learning_rate: 5.0,
            clip_norm: Some(0.01),
            ..cfg()
        };
        let d = local_train(&model, &model.init(0), &data, &c).unwrap();
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 0.01).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let data = make_federation(3, 1, 10, 4, 0.0).remove(0);
        let model = Model::logistic(5);
        assert!(matches!(
            local_train(&model, &model.init(0), &data, &cfg()),
            Err(FlError::Shape(_))
        ));
        assert!(matches!(
            local_train(&model, &ModelParams::zeros(3), &data, &cfg()),
            Err(FlError::Shape(_))
        ));
    }

    #[test]
    fn fedavg_examples() {
        assert_eq!(fedavg_aggregate(&[vec![1.0, 2.0]], &[7]).unwrap(), vec![1.0, 2.0]);
        let u = vec![0.5, -1.5];
        assert_eq!(fedavg_aggregate(&[u.clone(), u.clone()], &[2, 9]).unwrap(), u);
        assert_eq!(
            fedavg_aggregate(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1, 3]).unwrap(),
            vec![0.25, 0.75]
        );
        assert_eq!(fedavg_aggregate(&[], &[]), Err(FlError::EmptyRound));
        assert!(matches!(
            fedavg_aggregate(&[vec![1.0], vec![1.0, 2.0]], &[1, 1]),
            Err(FlError::Shape(_))
        ));
    }

    #[test]
    fn apply_examples() {
        let w = ModelParams { weights: vec![1.0, 2.0] };
        assert_eq!(apply_update(&w, &[0.0, 0.0]).unwrap(), w);
        assert_eq!(apply_update(&w, &[0.5, -1.0]).unwrap().weights, vec![1.5, 1.0]);
        assert!(apply_update(&w, &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn fedavg_is_permutation_invariant(
            rows in proptest::collection::vec((proptest::collection::vec(-10.0f64..10.0, 3), 1u64..1000), 1..8),
            rot in 0usize..8,
        ) {
            let (u, n): (Vec<_>, Vec<_>) = rows.iter().cloned().unzip();
            let mut shuffled = rows.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let (su, sn): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
            let a = fedavg_aggregate(&u, &n).unwrap();
            let b = fedavg_aggregate(&su, &sn).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn apply_is_associative(
            w in proptest::collection::vec(-10.0f64..10.0, 4),
            d1 in proptest::collection::vec(-1.0f64..1.0, 4),
            d2 in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            let w = ModelParams { weights: w };
            let twice = apply_update(&apply_update(&w, &d1).unwrap(), &d2).unwrap();
            let sum: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
            let once = apply_update(&w, &sum).unwrap();
            for (a, b) in twice.weights.iter().zip(&once.weights) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
