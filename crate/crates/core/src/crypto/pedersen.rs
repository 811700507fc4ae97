//! Pedersen vector commitments: `C = r·h + Σ vᵢ·gᵢ`.
//!
//! Generators come from hashing the setup seed onto the group, so nobody
//! knows a discrete-log relation between them. The commitment is additively
//! homomorphic, which is what lets a verifier check a weighted aggregate
//! against the individual commitments without seeing any opening.

use std::collections::HashSet;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::wire::{Decode, Encode, Reader, WireError, Writer};

use super::group::{GroupElement, Scalar};
use super::hash::{tags, HashAlg};
use super::CryptoError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PedersenParams {
    hash: HashAlg,
    seed: Vec<u8>,
    generators: Vec<GroupElement>,
    blinding: GroupElement,
}

impl PedersenParams {
    /// Derives `dimension` value generators and one blinding generator from
    /// `seed` with the default hash.
    pub fn setup(dimension: usize, seed: &[u8]) -> Result<Self, CryptoError> {
        Self::setup_with(HashAlg::default(), dimension, seed)
    }

    pub fn setup_with(hash: HashAlg, dimension: usize, seed: &[u8]) -> Result<Self, CryptoError> {
        if dimension == 0 {
            return Err(CryptoError::InvalidDimension);
        }
        let seed_len = (seed.len() as u32).to_le_bytes();
        let derive = |label: &[u8], index: u64| {
            GroupElement::hash_to_group(
                hash,
                tags::GENERATOR,
                &[&seed_len, seed, label, &index.to_le_bytes()],
            )
        };
        let generators: Vec<GroupElement> = (0..dimension as u64).map(|i| derive(b"g", i)).collect();
        let blinding = derive(b"h", 0);

        let mut seen = HashSet::with_capacity(dimension + 1);
        for g in generators.iter().chain(std::iter::once(&blinding)) {
            if g.is_identity() || !seen.insert(g.to_bytes()) {
                return Err(CryptoError::DegenerateGenerators);
            }
        }
        Ok(Self {
            hash,
            seed: seed.to_vec(),
            generators,
            blinding,
        })
    }

    pub fn dimension(&self) -> usize {
        self.generators.len()
    }

    pub fn hash(&self) -> HashAlg {
        self.hash
    }

    pub fn seed(&self) -> &[u8] {
        &self.seed
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    pub fn blinding_generator(&self) -> GroupElement {
        self.blinding
    }

    fn check_len(&self, len: usize) -> Result<(), CryptoError> {
        if len != self.dimension() {
            return Err(CryptoError::DimensionMismatch {
                expected: self.dimension(),
                got: len,
            });
        }
        Ok(())
    }

    /// Commits to secret values in constant time.
    pub fn commit(&self, values: &[Scalar], blinding: &Scalar) -> Result<Commitment, CryptoError> {
        self.check_len(values.len())?;
        let (scalars, points) = self.terms(values, blinding);
        Ok(Commitment(GroupElement::multiscalar_mul(&scalars, &points)))
    }

    /// Same result as [`commit`](Self::commit), variable time. Only for
    /// public openings such as a published aggregate.
    pub fn commit_public(
        &self,
        values: &[Scalar],
        blinding: &Scalar,
    ) -> Result<Commitment, CryptoError> {
        self.check_len(values.len())?;
        let (scalars, points) = self.terms(values, blinding);
        Ok(Commitment(GroupElement::vartime_multiscalar_mul(&scalars, &points)))
    }

    fn terms(&self, values: &[Scalar], blinding: &Scalar) -> (Vec<Scalar>, Vec<GroupElement>) {
        let mut scalars = Vec::with_capacity(values.len() + 1);
        scalars.push(*blinding);
        scalars.extend_from_slice(values);
        let mut points = Vec::with_capacity(values.len() + 1);
        points.push(self.blinding);
        points.extend_from_slice(&self.generators);
        (scalars, points)
    }

    /// True iff `c` opens to `(values, blinding)`. Never errors.
    pub fn verify_opening(&self, c: &Commitment, values: &[Scalar], blinding: &Scalar) -> bool {
        match self.commit_public(values, blinding) {
            Ok(expected) => expected == *c,
            Err(_) => false,
        }
    }
}

impl Encode for PedersenParams {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.hash);
        w.put_bytes(&self.seed);
        w.put_seq(&self.generators);
        w.put(&self.blinding);
    }
}

impl Decode for PedersenParams {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let hash = r.get()?;
        let seed = r.bytes()?.to_vec();
        let generators: Vec<GroupElement> = r.seq()?;
        let blinding = r.get()?;
        // Re-derive so a decoded parameter set can never carry planted generators.
        let derived = PedersenParams::setup_with(hash, generators.len(), &seed)
            .map_err(|_| WireError::NonCanonical("pedersen parameters"))?;
        if derived.generators != generators || derived.blinding != blinding {
            return Err(WireError::NonCanonical("pedersen parameters"));
        }
        Ok(derived)
    }
}

/// A Pedersen commitment. Adds and scales homomorphically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commitment(pub GroupElement);

impl Commitment {
    pub fn identity() -> Self {
        Commitment(GroupElement::identity())
    }

    pub fn point(&self) -> &GroupElement {
        &self.0
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    /// Σ wᵢ·Cᵢ for public weights.
    pub fn weighted_sum(weights: &[Scalar], commitments: &[Commitment]) -> Commitment {
        let points: Vec<GroupElement> = commitments.iter().map(|c| c.0).collect();
        Commitment(GroupElement::vartime_multiscalar_mul(weights, &points))
    }
}

impl Add for Commitment {
    type Output = Commitment;
    fn add(self, rhs: Commitment) -> Commitment {
        Commitment(self.0 + rhs.0)
    }
}

impl Mul<Scalar> for Commitment {
    type Output = Commitment;
    fn mul(self, rhs: Scalar) -> Commitment {
        Commitment(self.0 * rhs)
    }
}

impl Encode for Commitment {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.0);
    }
}

impl Decode for Commitment {
    const MIN_ENCODED_LEN: usize = 32;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Commitment(r.get()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn scalars(v: &[i64]) -> Vec<Scalar> {
        v.iter().map(|&x| Scalar::from_i64(x)).collect()
    }

    #[test]
    fn setup_is_deterministic() {
        let a = PedersenParams::setup(4, b"zkfl-v1").unwrap();
        let b = PedersenParams::setup(4, b"zkfl-v1").unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn different_seeds_change_every_generator() {
        let a = PedersenParams::setup(4, b"zkfl-v1").unwrap();
        let b = PedersenParams::setup(4, b"zkfl-v2").unwrap();
        for (ga, gb) in a.generators().iter().zip(b.generators()) {
            assert_ne!(ga.to_bytes(), gb.to_bytes());
        }
        assert_ne!(a.blinding_generator(), b.blinding_generator());
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert_eq!(
            PedersenParams::setup(0, b"any"),
            Err(CryptoError::InvalidDimension)
        );
    }

    #[test]
    fn zero_vector_zero_blinding_is_identity() {
        let p = PedersenParams::setup(3, b"zero").unwrap();
        let c = p.commit(&scalars(&[0, 0, 0]), &Scalar::ZERO).unwrap();
        assert_eq!(c, Commitment::identity());
    }

    #[test]
    fn matches_repeated_addition() {
        // v = (1, 2), r = 3  →  g1 + g2 + g2 + h + h + h
        let p = PedersenParams::setup(2, b"repeat").unwrap();
        let c = p.commit(&scalars(&[1, 2]), &Scalar::from_u64(3)).unwrap();
        let g = p.generators();
        let h = p.blinding_generator();
        let expected = g[0] + g[1] + g[1] + h + h + h;
        assert_eq!(c.0, expected);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let p = PedersenParams::setup(2, b"len").unwrap();
        assert_eq!(
            p.commit(&scalars(&[1]), &Scalar::ZERO),
            Err(CryptoError::DimensionMismatch { expected: 2, got: 1 })
        );
        assert!(!p.verify_opening(&Commitment::identity(), &scalars(&[0]), &Scalar::ZERO));
    }

    #[test]
    fn opening_checks() {
        let p = PedersenParams::setup(4, b"open").unwrap();
        let v = scalars(&[5, -7, 11, 0]);
        let r = Scalar::from_u64(99);
        let c = p.commit(&v, &r).unwrap();
        assert!(p.verify_opening(&c, &v, &r));
        assert!(!p.verify_opening(&c, &v, &(r + Scalar::ONE)));
        for i in 0..4 {
            let mut bumped = v.clone();
            bumped[i] += Scalar::ONE;
            assert!(!p.verify_opening(&c, &bumped, &r), "coordinate {i}");
        }
    }

    #[test]
    fn public_and_constant_time_paths_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let p = PedersenParams::setup(16, b"paths").unwrap();
        let v: Vec<Scalar> = (0..16).map(|_| Scalar::random(&mut rng)).collect();
        let r = Scalar::random(&mut rng);
        assert_eq!(p.commit(&v, &r).unwrap(), p.commit_public(&v, &r).unwrap());
    }

    #[test]
    fn decode_rejects_planted_generators() {
        let p = PedersenParams::setup(2, b"plant").unwrap();
        let mut bytes = p.to_bytes();
        assert_eq!(PedersenParams::from_bytes(&bytes).unwrap(), p);
        // Swap in the blinding generator for g1.
        let h = p.blinding_generator().to_bytes();
        let g_start = 1 + 4 + 5 + 4;
        bytes[g_start..g_start + 32].copy_from_slice(&h);
        assert!(PedersenParams::from_bytes(&bytes).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn homomorphism(
            pairs in (1usize..=64).prop_flat_map(|d| (
                proptest::collection::vec(any::<i32>(), d),
                proptest::collection::vec(any::<i32>(), d),
            )),
            r in any::<u64>(),
            s in any::<u64>(),
            alpha in any::<u32>(),
        ) {
            let (v, w) = pairs;
            let d = v.len();
            let p = PedersenParams::setup(d, b"prop").unwrap();
            let to_s = |x: &[i32]| x.iter().map(|&x| Scalar::from_i64(x as i64)).collect::<Vec<_>>();
            let (vs, ws) = (to_s(&v), to_s(&w));
            let (rs, ss) = (Scalar::from_u64(r), Scalar::from_u64(s));
            let cv = p.commit_public(&vs, &rs).unwrap();
            let cw = p.commit_public(&ws, &ss).unwrap();
            let sum: Vec<Scalar> = vs.iter().zip(&ws).map(|(a, b)| *a + *b).collect();
            prop_assert_eq!(cv + cw, p.commit_public(&sum, &(rs + ss)).unwrap());

            let a = Scalar::from_u64(alpha as u64);
            let scaled: Vec<Scalar> = vs.iter().map(|x| *x * a).collect();
            prop_assert_eq!(cv * a, p.commit_public(&scaled, &(rs * a)).unwrap());
        }
    }
}
