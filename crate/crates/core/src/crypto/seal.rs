//! Sealing to the enclave: ephemeral Diffie–Hellman over the group, a hashed
//! shared secret as the key, and ChaCha20-Poly1305 for authenticated
//! encryption. Output is `E ‖ ciphertext ‖ tag` where `E` is the ephemeral
//! public point.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::{CryptoRng, RngCore};

use super::group::{GroupElement, Scalar};
use super::hash::{tags, Hasher, HashAlg};
use super::schnorr::{KeyPair, PublicKey};
use super::CryptoError;

const EPHEMERAL_LEN: usize = 32;

fn derive_key(alg: HashAlg, ephemeral: &[u8; 32], shared: &GroupElement, recipient: &PublicKey) -> Key {
    let mut h = Hasher::new(alg, tags::SEAL);
    h.update(ephemeral)
        .update(&shared.to_bytes())
        .update(&recipient.to_bytes());
    Key::clone_from_slice(h.finalize().as_bytes())
}

pub fn seal<R: RngCore + CryptoRng>(
    alg: HashAlg,
    rng: &mut R,
    recipient: &PublicKey,
    aad: &[u8],
    plaintext: &[u8],
) -> Vec<u8> {
    let e = loop {
        let e = Scalar::random(rng);
        if !e.is_zero() {
            break e;
        }
    };
    let ephemeral = GroupElement::mul_base(&e).to_bytes();
    let shared = recipient.point() * e;
    let cipher = ChaCha20Poly1305::new(&derive_key(alg, &ephemeral, &shared, recipient));
    // The key is single-use, so a fixed nonce is safe.
    let ct = cipher
        .encrypt(Nonce::from_slice(&[0u8; 12]), Payload { msg: plaintext, aad })
        .expect("chacha20poly1305 encryption is infallible for in-memory buffers");
    let mut out = Vec::with_capacity(EPHEMERAL_LEN + ct.len());
    out.extend_from_slice(&ephemeral);
    out.extend_from_slice(&ct);
    out
}

pub fn unseal(alg: HashAlg, recipient: &KeyPair, aad: &[u8], sealed: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if sealed.len() < EPHEMERAL_LEN {
        return Err(CryptoError::UnsealFailed);
    }
    let mut ephemeral = [0u8; 32];
    ephemeral.copy_from_slice(&sealed[..EPHEMERAL_LEN]);
    let point = GroupElement::from_bytes(ephemeral).ok_or(CryptoError::UnsealFailed)?;
    let shared = point * *recipient.secret();
    let cipher = ChaCha20Poly1305::new(&derive_key(alg, &ephemeral, &shared, &recipient.public()));
    cipher
        .decrypt(
            Nonce::from_slice(&[0u8; 12]),
            Payload {
                msg: &sealed[EPHEMERAL_LEN..],
                aad,
            },
        )
        .map_err(|_| CryptoError::UnsealFailed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const ALG: HashAlg = HashAlg::Sha256;

    #[test]
    fn round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let enclave = KeyPair::from_seed(b"enclave");
        let sealed = seal(ALG, &mut rng, &enclave.public(), b"aad", b"secret update");
        assert_eq!(unseal(ALG, &enclave, b"aad", &sealed).unwrap(), b"secret update");
    }

    #[test]
    fn any_flip_or_wrong_context_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let enclave = KeyPair::from_seed(b"enclave");
        let sealed = seal(ALG, &mut rng, &enclave.public(), b"aad", b"payload");
        for i in 0..sealed.len() {
            let mut s = sealed.clone();
            s[i] ^= 0x01;
            assert!(unseal(ALG, &enclave, b"aad", &s).is_err(), "byte {i}");
        }
        assert!(unseal(ALG, &enclave, b"other", &sealed).is_err());
        assert!(unseal(ALG, &KeyPair::from_seed(b"not enclave"), b"aad", &sealed).is_err());
        assert!(unseal(ALG, &enclave, b"aad", &sealed[..10]).is_err());
    }

    #[test]
    fn ciphertext_hides_plaintext_bytes() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let enclave = KeyPair::from_seed(b"enclave");
        let pt = [0x42u8; 64];
        let sealed = seal(ALG, &mut rng, &enclave.public(), b"", &pt);
        assert!(!sealed.windows(8).any(|w| w == &pt[..8]));
    }
}
