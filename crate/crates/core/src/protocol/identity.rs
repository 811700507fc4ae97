use std::collections::BTreeMap;
use std::fmt;

use crate::crypto::{tags, Digest, HashAlg, KeyPair, PublicKey};
use crate::wire::{Decode, Encode, Reader, WireError, Writer};

/// A participant's signing identity. `client_id` is the digest of the
/// serialized public key.
#[derive(Clone)]
pub struct ClientIdentity {
    pub client_id: Digest,
    keypair: KeyPair,
    pub registered: bool,
}

impl ClientIdentity {
    pub fn new(alg: HashAlg, keypair: KeyPair) -> Self {
        Self {
            client_id: keypair.public().id(alg),
            keypair,
            registered: false,
        }
    }

    pub fn public(&self) -> PublicKey {
        self.keypair.public()
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }
}

impl fmt::Debug for ClientIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClientIdentity")
            .field("client_id", &self.client_id)
            .field("registered", &self.registered)
            .finish_non_exhaustive()
    }
}

/// Registered identities in canonical (client_id) order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    members: BTreeMap<Digest, PublicKey>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the id was already present; the existing key is kept.
    pub fn insert(&mut self, client_id: Digest, key: PublicKey) -> bool {
        if self.members.contains_key(&client_id) {
            return false;
        }
        self.members.insert(client_id, key);
        true
    }

    pub fn get(&self, client_id: &Digest) -> Option<&PublicKey> {
        self.members.get(client_id)
    }

    pub fn contains(&self, client_id: &Digest) -> bool {
        self.members.contains_key(client_id)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Digest, &PublicKey)> {
        self.members.iter()
    }

    pub fn digest(&self, alg: HashAlg) -> Digest {
        Digest::of(alg, tags::REGISTRY, &[&self.to_bytes()])
    }
}

impl Encode for Registry {
    fn encode(&self, w: &mut Writer) {
        w.put_len(self.members.len());
        for (id, key) in &self.members {
            w.put(id);
            w.put(key);
        }
    }
}

impl Decode for Registry {
    const MIN_ENCODED_LEN: usize = 4;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let n = r.count(64)?;
        let mut reg = Registry::new();
        let mut prev: Option<Digest> = None;
        for _ in 0..n {
            let id: Digest = r.get()?;
            let key: PublicKey = r.get()?;
            if prev.is_some_and(|p| p >= id) {
                return Err(WireError::NonCanonical("registry order"));
            }
            prev = Some(id);
            reg.members.insert(id, key);
        }
        Ok(reg)
    }
}
