//! Data-minimization scanner: searches persisted bytes for client secrets.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::crypto::Scalar;
use crate::encoding::QuantizedUpdate;
use crate::fl::ModelParams;
use crate::wire::Encode;

/// Consecutive coordinates that must match for a partial-vector hit.
pub const SCAN_WINDOW: usize = 4;

/// Quantized coordinates at or below this magnitude also occur as ordinary
/// lengths and counters, so a window made only of them is not evidence.
const SMALL_VALUE: i64 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecretKind {
    QuantizedUpdate,
    ModelParams,
    Blinding,
}

/// Byte patterns whose presence would reveal one secret.
#[derive(Debug, Clone)]
pub struct Secret {
    pub kind: SecretKind,
    pub label: String,
    patterns: Vec<Vec<u8>>,
}

impl Secret {
    /// The wire encoding, the raw little-endian vector and every
    /// [`SCAN_WINDOW`]-long run of coordinates that is not all small.
    pub fn update(label: impl Into<String>, q: &QuantizedUpdate) -> Self {
        let mut patterns = vec![q.to_bytes(), q.values.iter().flat_map(|v| v.to_le_bytes()).collect()];
        for w in q.values.windows(SCAN_WINDOW) {
            if w.iter().any(|v| v.abs() > SMALL_VALUE) {
                patterns.push(w.iter().flat_map(|v| v.to_le_bytes()).collect());
            }
        }
        Self {
            kind: SecretKind::QuantizedUpdate,
            label: label.into(),
            patterns,
        }
    }

    /// The whole parameter vector and every run of [`SCAN_WINDOW`] weights
    /// that are not all zero.
    pub fn model(label: impl Into<String>, m: &ModelParams) -> Self {
        let mut patterns = vec![m.weights.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>()];
        for w in m.weights.windows(SCAN_WINDOW) {
            if w.iter().any(|v| *v != 0.0) {
                patterns.push(w.iter().flat_map(|v| v.to_le_bytes()).collect());
            }
        }
        Self {
            kind: SecretKind::ModelParams,
            label: label.into(),
            patterns,
        }
    }

    pub fn blinding(label: impl Into<String>, r: &Scalar) -> Self {
        Self {
            kind: SecretKind::Blinding,
            label: label.into(),
            patterns: vec![r.to_bytes().to_vec()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leak {
    pub kind: SecretKind,
    pub label: String,
    pub offset: usize,
}

/// Every occurrence of any secret pattern in `haystack`.
pub fn scan_for_secrets(haystack: &[u8], secrets: &[Secret]) -> Vec<Leak> {
    let mut by_len: HashMap<usize, HashMap<&[u8], Vec<usize>>> = HashMap::new();
    for (i, s) in secrets.iter().enumerate() {
        for p in s.patterns.iter().filter(|p| !p.is_empty()) {
            by_len.entry(p.len()).or_default().entry(p.as_slice()).or_default().push(i);
        }
    }
    let mut leaks = Vec::new();
    let mut reported = HashSet::new();
    for (len, patterns) in &by_len {
        for (offset, window) in haystack.windows(*len).enumerate() {
            if let Some(owners) = patterns.get(window) {
                for &i in owners {
                    if reported.insert((i, offset)) {
                        leaks.push(Leak {
                            kind: secrets[i].kind,
                            label: secrets[i].label.clone(),
                            offset,
                        });
                    }
                }
            }
        }
    }
    leaks.sort_by_key(|l| l.offset);
    leaks
}
