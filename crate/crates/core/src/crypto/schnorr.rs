//! Schnorr signatures over the Ristretto group.
//!
//! `sig = (e, s)` with `R = k·G`, `e = H_sig(P ‖ R ‖ m)`, `s = k + e·x`.
//! Verification recomputes `R' = s·G − e·P` and checks `H_sig(P ‖ R' ‖ m) = e`.
//! Nonces are derived from the secret key and message, so signing is
//! deterministic and never depends on RNG quality.

use std::fmt;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::wire::{Decode, Encode, Reader, WireError, Writer};

use super::group::{GroupElement, Scalar};
use super::hash::{tags, Digest, HashAlg};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey([u8; 32]);

impl PublicKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Option<Self> {
        GroupElement::from_bytes(bytes).map(|_| PublicKey(bytes))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0
    }

    pub fn point(&self) -> GroupElement {
        GroupElement::from_bytes(self.0).expect("validated at construction")
    }

    /// Digest identifying the key holder.
    pub fn id(&self, alg: HashAlg) -> Digest {
        Digest::of(alg, tags::CLIENT_ID, &[&self.0])
    }

    pub fn verify(&self, alg: HashAlg, message: &[u8], sig: &Signature) -> bool {
        let p = self.point();
        let r = GroupElement::mul_base(&sig.response) - p * sig.challenge;
        challenge(alg, self, &r, message) == sig.challenge
    }

    /// Verifies a signature given as raw bytes. Malformed input is `false`.
    pub fn verify_bytes(&self, alg: HashAlg, message: &[u8], sig: &[u8]) -> bool {
        match Signature::from_slice(sig) {
            Some(sig) => self.verify(alg, message, &sig),
            None => false,
        }
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(self.0))
    }
}

impl Encode for PublicKey {
    fn encode(&self, w: &mut Writer) {
        w.put_raw(&self.0);
    }
}

impl Decode for PublicKey {
    const MIN_ENCODED_LEN: usize = 32;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        PublicKey::from_bytes(r.array()?).ok_or(WireError::NonCanonical("public key"))
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(&s, &mut bytes).map_err(serde::de::Error::custom)?;
        PublicKey::from_bytes(bytes).ok_or_else(|| serde::de::Error::custom("invalid public key"))
    }
}

#[derive(Clone)]
pub struct KeyPair {
    secret: Scalar,
    public: PublicKey,
}

impl KeyPair {
    /// Deterministic key derivation from seed material.
    pub fn from_seed(seed: &[u8]) -> Self {
        let mut counter = 0u32;
        loop {
            let secret =
                Scalar::hash_to_scalar(HashAlg::Sha256, tags::KEYGEN, &[seed, &counter.to_le_bytes()]);
            if !secret.is_zero() {
                return Self::from_secret(secret);
            }
            counter += 1;
        }
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let secret = Scalar::random(rng);
            if !secret.is_zero() {
                return Self::from_secret(secret);
            }
        }
    }

    fn from_secret(secret: Scalar) -> Self {
        let public = PublicKey(GroupElement::mul_base(&secret).to_bytes());
        Self { secret, public }
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub(crate) fn secret(&self) -> &Scalar {
        &self.secret
    }

    pub fn sign(&self, alg: HashAlg, message: &[u8]) -> Signature {
        let k = Scalar::hash_to_scalar(alg, tags::SIG_NONCE, &[&self.secret.to_bytes(), message]);
        let r = GroupElement::mul_base(&k);
        let e = challenge(alg, &self.public, &r, message);
        Signature {
            challenge: e,
            response: k + e * self.secret,
        }
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

fn challenge(alg: HashAlg, public: &PublicKey, r: &GroupElement, message: &[u8]) -> Scalar {
    Scalar::hash_to_scalar(alg, tags::SIG, &[&public.0, &r.to_bytes(), message])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub challenge: Scalar,
    pub response: Scalar,
}

impl Signature {
    pub const LEN: usize = 64;

    pub fn to_array(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(&self.challenge.to_bytes());
        out[32..].copy_from_slice(&self.response.to_bytes());
        out
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != Self::LEN {
            return None;
        }
        let mut c = [0u8; 32];
        let mut s = [0u8; 32];
        c.copy_from_slice(&bytes[..32]);
        s.copy_from_slice(&bytes[32..]);
        Some(Signature {
            challenge: Scalar::from_canonical_bytes(c)?,
            response: Scalar::from_canonical_bytes(s)?,
        })
    }
}

impl Encode for Signature {
    fn encode(&self, w: &mut Writer) {
        w.put_raw(&self.to_array());
    }
}

impl Decode for Signature {
    const MIN_ENCODED_LEN: usize = 64;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Signature::from_slice(r.raw(Self::LEN)?).ok_or(WireError::NonCanonical("signature"))
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_array()))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(s).map_err(serde::de::Error::custom)?;
        Signature::from_slice(&bytes).ok_or_else(|| serde::de::Error::custom("invalid signature"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALG: HashAlg = HashAlg::Sha256;

    #[test]
    fn sign_then_verify() {
        let kp = KeyPair::from_seed(b"hospital-1");
        let sig = kp.sign(ALG, b"round 7 anchor");
        assert!(kp.public().verify(ALG, b"round 7 anchor", &sig));
    }

    #[test]
    fn keygen_is_deterministic() {
        let a = KeyPair::from_seed(b"seed");
        let b = KeyPair::from_seed(b"seed");
        assert_eq!(a.public(), b.public());
        assert_eq!(a.sign(ALG, b"m"), b.sign(ALG, b"m"));
    }

    #[test]
    fn every_message_bit_matters() {
        let kp = KeyPair::from_seed(b"bits");
        let msg = b"commit".to_vec();
        let sig = kp.sign(ALG, &msg);
        for bit in 0..msg.len() * 8 {
            let mut m = msg.clone();
            m[bit / 8] ^= 1 << (bit % 8);
            assert!(!kp.public().verify(ALG, &m, &sig), "bit {bit}");
        }
    }

    #[test]
    fn every_signature_bit_matters() {
        let kp = KeyPair::from_seed(b"sigbits");
        let raw = kp.sign(ALG, b"m").to_array();
        for bit in 0..512 {
            let mut s = raw;
            s[bit / 8] ^= 1 << (bit % 8);
            assert!(!kp.public().verify_bytes(ALG, b"m", &s), "bit {bit}");
        }
    }

    #[test]
    fn every_public_key_bit_matters() {
        let kp = KeyPair::from_seed(b"pkbits");
        let sig = kp.sign(ALG, b"m");
        let pk = kp.public().to_bytes();
        for bit in 0..256 {
            let mut b = pk;
            b[bit / 8] ^= 1 << (bit % 8);
            // Most flips don't even decode to a group element.
            if let Some(other) = PublicKey::from_bytes(b) {
                assert!(!other.verify(ALG, b"m", &sig), "bit {bit}");
            }
        }
    }

    #[test]
    fn wrong_key_rejects() {
        let a = KeyPair::from_seed(b"a");
        let b = KeyPair::from_seed(b"b");
        assert!(!b.public().verify(ALG, b"m", &a.sign(ALG, b"m")));
    }

    #[test]
    fn malformed_bytes_are_false_not_panic() {
        let kp = KeyPair::from_seed(b"x");
        assert!(!kp.public().verify_bytes(ALG, b"m", &[]));
        assert!(!kp.public().verify_bytes(ALG, b"m", &[0u8; 63]));
        assert!(!kp.public().verify_bytes(ALG, b"m", &[0xff; 64]));
    }

    #[test]
    fn hash_choice_is_part_of_the_signature() {
        let kp = KeyPair::from_seed(b"alg");
        let sig = kp.sign(HashAlg::Sha256, b"m");
        assert!(!kp.public().verify(HashAlg::Sha512_256, b"m", &sig));
    }
}
