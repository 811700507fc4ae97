use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256, Sha512_256};

use crate::wire::{Decode, Encode, Reader, WireError, Writer};

use super::CryptoError;

/// ASCII domain tags. Each use of the hash gets its own.
pub mod tags {
    pub const SIG: &[u8] = b"zkfl/sig";
    pub const SIG_NONCE: &[u8] = b"zkfl/sig-nonce";
    pub const COMMIT_ANCHOR: &[u8] = b"zkfl/commit-anchor";
    pub const ATTEST: &[u8] = b"zkfl/attest";
    pub const BLOCK: &[u8] = b"zkfl/block";
    pub const GENERATOR: &[u8] = b"zkfl/pedersen-generator";
    pub const KEYGEN: &[u8] = b"zkfl/keygen";
    pub const SEAL: &[u8] = b"zkfl/seal";
    pub const CLIENT_ID: &[u8] = b"zkfl/client-id";
    pub const STATEMENT: &[u8] = b"zkfl/statement";
    pub const POLICY: &[u8] = b"zkfl/policy";
    pub const FIXED_POINT: &[u8] = b"zkfl/fixed-point";
    pub const MODEL: &[u8] = b"zkfl/model";
    pub const ROUND_NONCE: &[u8] = b"zkfl/round-nonce";
    pub const MEASUREMENT: &[u8] = b"zkfl/measurement";
    pub const MOCK_PROOF: &[u8] = b"zkfl/mock-proof";
    pub const RECEIPT: &[u8] = b"zkfl/receipt";
    pub const REGISTRY: &[u8] = b"zkfl/registry";
    pub const TX: &[u8] = b"zkfl/tx";
    pub const GENESIS: &[u8] = b"zkfl/genesis";
    pub const COMMITMENT_SET: &[u8] = b"zkfl/commitment-set";
}

/// The configured 256-bit hash. Recorded in the round policy so every
/// verifier uses the same one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HashAlg {
    #[default]
    #[serde(rename = "sha256")]
    Sha256,
    #[serde(rename = "sha512-256")]
    Sha512_256,
}

impl HashAlg {
    pub fn name(self) -> &'static str {
        match self {
            HashAlg::Sha256 => "sha256",
            HashAlg::Sha512_256 => "sha512-256",
        }
    }
}

impl Encode for HashAlg {
    fn encode(&self, w: &mut Writer) {
        w.put_u8(match self {
            HashAlg::Sha256 => 0,
            HashAlg::Sha512_256 => 1,
        });
    }
}

impl Decode for HashAlg {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        match r.u8()? {
            0 => Ok(HashAlg::Sha256),
            1 => Ok(HashAlg::Sha512_256),
            tag => Err(WireError::InvalidTag { what: "hash", tag }),
        }
    }
}

/// 32-byte hash output.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest(out))
    }

    /// Domain-separated digest of a sequence of byte strings.
    pub fn of(alg: HashAlg, tag: &[u8], parts: &[&[u8]]) -> Digest {
        let mut h = Hasher::new(alg, tag);
        for part in parts {
            h.update(part);
        }
        h.finalize()
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}…)", &self.to_hex()[..12])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

impl Encode for Digest {
    fn encode(&self, w: &mut Writer) {
        w.put_raw(&self.0);
    }
}

impl Decode for Digest {
    const MIN_ENCODED_LEN: usize = 32;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Digest(r.array()?))
    }
}

#[derive(Clone)]
enum Inner {
    Sha256(Sha256),
    Sha512_256(Sha512_256),
}

/// Incremental hasher that starts from a length-prefixed domain tag.
#[derive(Clone)]
pub struct Hasher {
    inner: Inner,
}

impl Hasher {
    pub fn new(alg: HashAlg, tag: &[u8]) -> Self {
        let mut h = Self::raw(alg);
        h.update(&(tag.len() as u32).to_le_bytes());
        h.update(tag);
        h
    }

    /// A hasher with no domain prefix. Callers own the framing.
    pub(crate) fn raw(alg: HashAlg) -> Self {
        let inner = match alg {
            HashAlg::Sha256 => Inner::Sha256(Sha256::new()),
            HashAlg::Sha512_256 => Inner::Sha512_256(Sha512_256::new()),
        };
        Self { inner }
    }

    pub fn update(&mut self, bytes: &[u8]) -> &mut Self {
        match &mut self.inner {
            Inner::Sha256(h) => h.update(bytes),
            Inner::Sha512_256(h) => h.update(bytes),
        }
        self
    }

    pub fn finalize(self) -> Digest {
        let mut out = [0u8; 32];
        match self.inner {
            Inner::Sha256(h) => out.copy_from_slice(&h.finalize()),
            Inner::Sha512_256(h) => out.copy_from_slice(&h.finalize()),
        }
        Digest(out)
    }

    /// 64 bytes of output, for unbiased reduction into the scalar field or
    /// uniform hashing onto the group.
    pub fn finalize_wide(self) -> [u8; 64] {
        let mut lo = self.clone();
        lo.update(&[0]);
        let mut hi = self;
        hi.update(&[1]);
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(&lo.finalize().0);
        out[32..].copy_from_slice(&hi.finalize().0);
        out
    }
}

/// `H(domain_tag ‖ len(payload) ‖ payload ‖ nonce)` with a 4-byte
/// little-endian payload length, so (`"ab"`, `"c"`) and (`"a"`, `"bc"`) hash
/// differently.
pub fn hash_commit(
    alg: HashAlg,
    payload: &[u8],
    nonce: &[u8],
    domain_tag: &[u8],
) -> Result<Digest, CryptoError> {
    if domain_tag.is_empty() {
        return Err(CryptoError::MissingDomainTag);
    }
    let len = u32::try_from(payload.len()).map_err(|_| CryptoError::PayloadTooLarge)?;
    let mut h = Hasher::raw(alg);
    h.update(domain_tag)
        .update(&len.to_le_bytes())
        .update(payload)
        .update(nonce);
    Ok(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAG: &[u8] = tags::COMMIT_ANCHOR;

    #[test]
    fn hash_commit_is_deterministic() {
        let a = hash_commit(HashAlg::Sha256, b"update", b"nonce", TAG).unwrap();
        let b = hash_commit(HashAlg::Sha256, b"update", b"nonce", TAG).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nonce_changes_digest() {
        let a = hash_commit(HashAlg::Sha256, b"update", b"n1", TAG).unwrap();
        let b = hash_commit(HashAlg::Sha256, b"update", b"n2", TAG).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn length_prefix_separates_boundaries() {
        let a = hash_commit(HashAlg::Sha256, b"ab", b"c", TAG).unwrap();
        let b = hash_commit(HashAlg::Sha256, b"a", b"bc", TAG).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn empty_tag_is_rejected() {
        assert_eq!(
            hash_commit(HashAlg::Sha256, b"x", b"y", b""),
            Err(CryptoError::MissingDomainTag)
        );
    }

    #[test]
    fn hash_commit_matches_manual_sha256() {
        let expected: [u8; 32] = Sha256::new()
            .chain_update(TAG)
            .chain_update(2u32.to_le_bytes())
            .chain_update(b"ab")
            .chain_update(b"c")
            .finalize()
            .into();
        let got = hash_commit(HashAlg::Sha256, b"ab", b"c", TAG).unwrap();
        assert_eq!(got.0, expected);
    }

    #[test]
    fn algorithms_disagree() {
        let a = Digest::of(HashAlg::Sha256, tags::MODEL, &[b"x"]);
        let b = Digest::of(HashAlg::Sha512_256, tags::MODEL, &[b"x"]);
        assert_ne!(a, b);
    }
}
