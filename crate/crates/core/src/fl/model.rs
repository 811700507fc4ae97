use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::crypto::{tags, Digest, HashAlg};
use crate::wire::{Decode, Encode, Reader, WireError, Writer};

use super::FlError;

/// Flat parameter vector of the global (or a local) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub weights: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(dimension: usize) -> Self {
        Self {
            weights: vec![0.0; dimension],
        }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    /// Digest of the canonical serialization; what the ledger records.
    pub fn hash(&self, alg: HashAlg) -> Digest {
        Digest::of(alg, tags::MODEL, &[&self.to_bytes()])
    }
}

impl Encode for ModelParams {
    fn encode(&self, w: &mut Writer) {
        w.put_seq(&self.weights);
    }
}

impl Decode for ModelParams {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(ModelParams { weights: r.seq()? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    /// `σ(w·x + b)`; parameters are `[w, b]`.
    Logistic,
    /// One tanh hidden layer, sigmoid output. Parameters are
    /// `[W1 (hidden×k, row-major), b1, w2, b2]`.
    Mlp { hidden: usize },
}

/// Architecture plus input width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    pub features: usize,
}

impl Model {
    pub fn logistic(features: usize) -> Self {
        Self {
            kind: ModelKind::Logistic,
            features,
        }
    }

    pub fn mlp(features: usize, hidden: usize) -> Self {
        Self {
            kind: ModelKind::Mlp { hidden },
            features,
        }
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            ModelKind::Logistic => self.features + 1,
            ModelKind::Mlp { hidden } => hidden * self.features + 2 * hidden + 1,
        }
    }

    /// Logistic models start at zero. MLPs need symmetry breaking, so their
    /// first layer is drawn from a scaled normal.
    pub fn init(&self, seed: u64) -> ModelParams {
        match self.kind {
            ModelKind::Logistic => ModelParams::zeros(self.dimension()),
            ModelKind::Mlp { hidden } => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                let k = self.features;
                let mut weights = vec![0.0; self.dimension()];
                let s1 = (1.0 / k as f64).sqrt();
                for w in weights.iter_mut().take(hidden * k) {
                    *w = s1 * rng.sample::<f64, _>(StandardNormal);
                }
                let s2 = (1.0 / hidden as f64).sqrt();
                let w2 = hidden * k + hidden;
                for w in weights.iter_mut().skip(w2).take(hidden) {
                    *w = s2 * rng.sample::<f64, _>(StandardNormal);
                }
                ModelParams { weights }
            }
        }
    }

    pub fn check(&self, params: &ModelParams) -> Result<(), FlError> {
        if params.dimension() != self.dimension() {
            return Err(FlError::Shape(format!(
                "model expects {} parameters, got {}",
                self.dimension(),
                params.dimension()
            )));
        }
        Ok(())
    }

    /// Pre-sigmoid score for one example.
    pub fn logit(&self, params: &ModelParams, x: &[f64]) -> f64 {
        let p = &params.weights;
        let k = self.features;
        match self.kind {
            ModelKind::Logistic => dot(&p[..k], x) + p[k],
            ModelKind::Mlp { hidden } => {
                let (b1, w2, b2) = (hidden * k, hidden * k + hidden, hidden * k + 2 * hidden);
                (0..hidden)
                    .map(|j| {
                        let a = (dot(&p[j * k..(j + 1) * k], x) + p[b1 + j]).tanh();
                        p[w2 + j] * a
                    })
                    .sum::<f64>()
                    + p[b2]
            }
        }
    }

    pub fn predict_proba(&self, params: &ModelParams, x: &[f64]) -> f64 {
        sigmoid(self.logit(params, x))
    }

    /// Mean binary cross-entropy over the selected rows.
    pub fn loss(&self, params: &ModelParams, xs: &[Vec<f64>], ys: &[u8], rows: &[usize]) -> f64 {
        let total: f64 = rows
            .iter()
            .map(|&i| bce(self.logit(params, &xs[i]), ys[i]))
            .sum();
        total / rows.len() as f64
    }

    /// Mean loss and its analytic gradient over the selected rows.
    pub fn loss_and_grad(
        &self,
        params: &ModelParams,
        xs: &[Vec<f64>],
        ys: &[u8],
        rows: &[usize],
    ) -> (f64, Vec<f64>) {
        let p = &params.weights;
        let k = self.features;
        let mut grad = vec![0.0; p.len()];
        let mut loss = 0.0;
        for &i in rows {
            let x = &xs[i];
            let y = ys[i] as f64;
            match self.kind {
                ModelKind::Logistic => {
                    let z = dot(&p[..k], x) + p[k];
                    loss += bce(z, ys[i]);
                    let dz = sigmoid(z) - y;
                    for (g, xi) in grad[..k].iter_mut().zip(x) {
                        *g += dz * xi;
                    }
                    grad[k] += dz;
                }
                ModelKind::Mlp { hidden } => {
                    let (b1, w2, b2) = (hidden * k, hidden * k + hidden, hidden * k + 2 * hidden);
                    let a: Vec<f64> = (0..hidden)
                        .map(|j| (dot(&p[j * k..(j + 1) * k], x) + p[b1 + j]).tanh())
                        .collect();
                    let z = dot(&p[w2..w2 + hidden], &a) + p[b2];
                    loss += bce(z, ys[i]);
                    let dz = sigmoid(z) - y;
                    grad[b2] += dz;
                    for j in 0..hidden {
                        grad[w2 + j] += dz * a[j];
                        let dz1 = dz * p[w2 + j] * (1.0 - a[j] * a[j]);
                        grad[b1 + j] += dz1;
                        for (g, xi) in grad[j * k..(j + 1) * k].iter_mut().zip(x) {
                            *g += dz1 * xi;
                        }
                    }
                }
            }
        }
        let n = rows.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z) − y·z`, stable for large |z|.
fn bce(z: f64, y: u8) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - (y as f64) * z
}
