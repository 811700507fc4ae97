//! Cryptographic substrate: group arithmetic, Pedersen vector commitments,
//! hash commitments, Schnorr signatures and sealing.

mod group;
mod hash;
mod pedersen;
mod schnorr;
mod seal;

use thiserror::Error;

pub use group::{GroupElement, Scalar};
pub use hash::{hash_commit, tags, Digest, HashAlg, Hasher};
pub use pedersen::{Commitment, PedersenParams};
pub use schnorr::{KeyPair, PublicKey, Signature};
pub use seal::{seal, unseal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("invalid dimension: must be at least 1")]
    InvalidDimension,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("missing domain tag")]
    MissingDomainTag,
    #[error("payload too large to length-prefix")]
    PayloadTooLarge,
    #[error("derived generators are degenerate")]
    DegenerateGenerators,
    #[error("sealed payload could not be opened")]
    UnsealFailed,
}
