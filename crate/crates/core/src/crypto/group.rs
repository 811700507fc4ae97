//! Prime-order group and its scalar field.
//!
//! The concrete group is Ristretto255 (order q = 2^252 + 27742317777372353535851937790883648493,
//! ~126-bit security against discrete-log attacks). Elements encode to 32
//! compressed bytes, scalars to 32 little-endian bytes.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar as DalekScalar;
use curve25519_dalek::traits::{Identity, MultiscalarMul, VartimeMultiscalarMul};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::wire::{Decode, Encode, Reader, WireError, Writer};

use super::hash::{HashAlg, Hasher};

/// An integer modulo the group order q.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct Scalar(pub(crate) DalekScalar);

impl Scalar {
    pub const ZERO: Scalar = Scalar(DalekScalar::ZERO);
    pub const ONE: Scalar = Scalar(DalekScalar::ONE);

    pub fn from_u64(v: u64) -> Self {
        Scalar(DalekScalar::from(v))
    }

    pub fn from_u128(v: u128) -> Self {
        Scalar(DalekScalar::from(v))
    }

    /// Negative values map to q − |v|.
    pub fn from_i64(v: i64) -> Self {
        let magnitude = Scalar::from_u64(v.unsigned_abs());
        if v < 0 {
            -magnitude
        } else {
            magnitude
        }
    }

    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Scalar(DalekScalar::from_bytes_mod_order_wide(&wide))
    }

    /// Reduces 64 uniform bytes mod q.
    pub fn from_wide(bytes: &[u8; 64]) -> Self {
        Scalar(DalekScalar::from_bytes_mod_order_wide(bytes))
    }

    pub fn hash_to_scalar(alg: HashAlg, tag: &[u8], parts: &[&[u8]]) -> Self {
        let mut h = Hasher::new(alg, tag);
        for p in parts {
            h.update(p);
        }
        Scalar::from_wide(&h.finalize_wide())
    }

    /// Accepts only the canonical encoding (value < q).
    pub fn from_canonical_bytes(bytes: [u8; 32]) -> Option<Self> {
        Option::from(DalekScalar::from_canonical_bytes(bytes)).map(Scalar)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == DalekScalar::ZERO
    }

    pub fn invert(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Scalar(self.0.invert()))
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", hex::encode(self.to_bytes()))
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 + rhs.0)
    }
}

impl AddAssign for Scalar {
    fn add_assign(&mut self, rhs: Scalar) {
        self.0 += rhs.0;
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 - rhs.0)
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 * rhs.0)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::ZERO, |acc, s| acc + s)
    }
}

impl Encode for Scalar {
    fn encode(&self, w: &mut Writer) {
        w.put_raw(&self.to_bytes());
    }
}

impl Decode for Scalar {
    const MIN_ENCODED_LEN: usize = 32;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Scalar::from_canonical_bytes(r.array()?).ok_or(WireError::NonCanonical("scalar"))
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(&s, &mut bytes).map_err(serde::de::Error::custom)?;
        Scalar::from_canonical_bytes(bytes)
            .ok_or_else(|| serde::de::Error::custom("non-canonical scalar"))
    }
}

/// An element of the prime-order group.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GroupElement(pub(crate) RistrettoPoint);

impl GroupElement {
    pub fn identity() -> Self {
        GroupElement(RistrettoPoint::identity())
    }

    pub fn generator() -> Self {
        GroupElement(RISTRETTO_BASEPOINT_POINT)
    }

    pub fn is_identity(&self) -> bool {
        self.0 == RistrettoPoint::identity()
    }

    /// Hashes onto the group with no known discrete-log relation to any
    /// other output.
    pub fn hash_to_group(alg: HashAlg, tag: &[u8], parts: &[&[u8]]) -> Self {
        let mut h = Hasher::new(alg, tag);
        for p in parts {
            h.update(p);
        }
        GroupElement(RistrettoPoint::from_uniform_bytes(&h.finalize_wide()))
    }

    pub fn mul_base(s: &Scalar) -> Self {
        GroupElement(RistrettoPoint::mul_base(&s.0))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.compress().to_bytes()
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Option<Self> {
        CompressedRistretto(bytes).decompress().map(GroupElement)
    }

    /// Constant-time Σ sᵢ·Pᵢ, for secret scalars.
    pub fn multiscalar_mul(scalars: &[Scalar], points: &[GroupElement]) -> Self {
        debug_assert_eq!(scalars.len(), points.len());
        GroupElement(RistrettoPoint::multiscalar_mul(
            scalars.iter().map(|s| &s.0),
            points.iter().map(|p| &p.0),
        ))
    }

    /// Variable-time Σ sᵢ·Pᵢ, for public scalars only.
    pub fn vartime_multiscalar_mul(scalars: &[Scalar], points: &[GroupElement]) -> Self {
        debug_assert_eq!(scalars.len(), points.len());
        GroupElement(RistrettoPoint::vartime_multiscalar_mul(
            scalars.iter().map(|s| &s.0),
            points.iter().map(|p| &p.0),
        ))
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({})", hex::encode(self.to_bytes()))
    }
}

impl Add for GroupElement {
    type Output = GroupElement;
    fn add(self, rhs: GroupElement) -> GroupElement {
        GroupElement(self.0 + rhs.0)
    }
}

impl Sub for GroupElement {
    type Output = GroupElement;
    fn sub(self, rhs: GroupElement) -> GroupElement {
        GroupElement(self.0 - rhs.0)
    }
}

impl Mul<Scalar> for GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: Scalar) -> GroupElement {
        GroupElement(self.0 * rhs.0)
    }
}

impl Sum for GroupElement {
    fn sum<I: Iterator<Item = GroupElement>>(iter: I) -> GroupElement {
        iter.fold(GroupElement::identity(), |acc, p| acc + p)
    }
}

impl Encode for GroupElement {
    fn encode(&self, w: &mut Writer) {
        w.put_raw(&self.to_bytes());
    }
}

impl Decode for GroupElement {
    const MIN_ENCODED_LEN: usize = 32;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        GroupElement::from_bytes(r.array()?).ok_or(WireError::NonCanonical("group element"))
    }
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(&s, &mut bytes).map_err(serde::de::Error::custom)?;
        GroupElement::from_bytes(bytes)
            .ok_or_else(|| serde::de::Error::custom("invalid group element encoding"))
    }
}
