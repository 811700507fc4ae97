//! Synthetic cross-silo federations.
//!
//! Two Gaussian classes with identity covariance and means `±μ`, where `μ` is
//! a seeded random direction of norm [`CLASS_SEPARATION`]. Site `i` of `N`
//! draws labels with `P(y = 1) = 0.5 + skew · (i/(N−1) − 0.5)`, so `skew = 0`
//! is IID and `skew = 1` sends the first and last sites to a single class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::wire::{Decode, Encode, Reader, WireError, Writer};

/// Distance from each class mean to the origin.
pub const CLASS_SEPARATION: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub site_id: u32,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.len().max(1) as f64
    }
}

impl Encode for Dataset {
    fn encode(&self, w: &mut Writer) {
        w.put_u32(self.site_id);
        w.put_len(self.features.len());
        w.put_len(self.feature_dim());
        for row in &self.features {
            for &x in row {
                w.put_f64(x);
            }
        }
        w.put_bytes(&self.labels);
    }
}

impl Decode for Dataset {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let site_id = r.u32()?;
        let n = r.count(0)?;
        let k = r.u32()? as usize;
        let needed = n.saturating_mul(k).saturating_mul(8);
        if needed > r.remaining() {
            return Err(WireError::Truncated {
                needed,
                remaining: r.remaining(),
            });
        }
        let features = (0..n)
            .map(|_| (0..k).map(|_| r.f64()).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let labels = r.bytes()?.to_vec();
        if labels.len() != n || labels.iter().any(|&y| y > 1) {
            return Err(WireError::NonCanonical("dataset labels"));
        }
        Ok(Dataset {
            site_id,
            features,
            labels,
        })
    }
}

/// Reproducibility descriptor written next to serialized datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationDescriptor {
    pub seed: u64,
    pub num_sites: usize,
    pub per_site: usize,
    pub feature_dim: usize,
    pub skew: f64,
    pub class_separation: f64,
}

/// The shared data-generating process behind a federation.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    seed: u64,
    feature_dim: usize,
    mean: Vec<f64>,
}

impl SyntheticTask {
    pub fn new(seed: u64, feature_dim: usize) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..feature_dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let mean = raw.iter().map(|x| x / norm * CLASS_SEPARATION).collect();
        Self {
            seed,
            feature_dim,
            mean,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn sample(&self, stream: u64, site_id: u32, n: usize, positive_rate: f64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = rng.gen_bool(positive_rate.clamp(0.0, 1.0)) as u8;
            let sign = if y == 1 { 1.0 } else { -1.0 };
            let x = self
                .mean
                .iter()
                .map(|m| sign * m + rng.sample::<f64, _>(StandardNormal))
                .collect();
            features.push(x);
            labels.push(y);
        }
        Dataset {
            site_id,
            features,
            labels,
        }
    }

    pub fn site(&self, site: usize, num_sites: usize, n: usize, skew: f64) -> Dataset {
        let position = if num_sites > 1 {
            site as f64 / (num_sites - 1) as f64
        } else {
            0.5
        };
        let rate = 0.5 + skew.clamp(0.0, 1.0) * (position - 0.5);
        self.sample(1 + site as u64, site as u32, n, rate)
    }

    /// Balanced evaluation set from a stream no site uses.
    pub fn holdout(&self, n: usize) -> Dataset {
        self.sample(0, u32::MAX, n, 0.5)
    }
}

pub fn make_federation(seed: u64, num_sites: usize, per_site: usize, feature_dim: usize, skew: f64) -> Vec<Dataset> {
    let task = SyntheticTask::new(seed, feature_dim);
    (0..num_sites)
        .map(|i| task.site(i, num_sites, per_site, skew))
        .collect()
}
