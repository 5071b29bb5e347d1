//! Trusted-dealer test double: per-identity symmetric keys derived from one
//! dealer secret. Re-encryption decrypts and re-seals.

use rand::{CryptoRng, RngCore};

use super::PreError;
use crate::codec::{Reader, Writer};
use crate::crypto::sha256;
use crate::crypto::symmetric::{self, NONCE_LEN};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct DealerSecret([u8; 32]);

impl DealerSecret {
    pub(crate) fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self(symmetric::random_key(rng))
    }

    pub(crate) fn identity_key(&self, id: &str) -> [u8; 32] {
        sha256(&[b"eid-cloud/pre/dealer/v1", &self.0, id.as_bytes()])
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.fixed(&self.0);
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, PreError> {
        Ok(Self(r.fixed()?))
    }
}

fn aad(id: &str, level: u8) -> Vec<u8> {
    let mut w = Writer::new();
    w.str(id).u8(level);
    w.finish()
}

pub(crate) fn seal<R: RngCore + CryptoRng>(
    key: &[u8; 32],
    id: &str,
    level: u8,
    m: &[u8],
    rng: &mut R,
) -> ([u8; NONCE_LEN], Vec<u8>) {
    symmetric::seal(key, &aad(id, level), m, rng)
}

pub(crate) fn open(
    key: &[u8; 32],
    id: &str,
    level: u8,
    nonce: &[u8; NONCE_LEN],
    body: &[u8],
) -> Result<Vec<u8>, PreError> {
    symmetric::open(key, &aad(id, level), nonce, body).map_err(|_| PreError::Decryption)
}
