//! Conventional primitives: hash-then-sign signatures, authenticated
//! symmetric encryption and the hybrid public-key convention built on both.
//!
//! SHA-256 is the single hash function used across the crate.

mod dss;
mod pke;
pub(crate) mod symmetric;

pub use dss::{
    dss_keygen, dss_sign, dss_verify, SigKeyPair, Signature, SigningKey, VerifyingKey,
    SIGNATURE_LEN,
};
pub use pke::{
    hybrid_decrypt, hybrid_encrypt, pke_keygen, HybridCiphertext, PkeKeyPair, PkePublicKey,
    PkeSecretKey,
};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::DecodeError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("malformed key: {0}")]
    Key(&'static str),
    /// The failure symbol of decryption: wrong key or tampered ciphertext.
    #[error("decryption failed")]
    Decryption,
    #[error("decode: {0}")]
    Decode(#[from] DecodeError),
}

/// SHA-256 over the concatenation of `parts`.
pub fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Derives a 32-byte seed from an owner label and a numeric scenario seed.
///
/// Seeds are domain separated by purpose so that e.g. the signing and
/// encryption keys of one actor are unrelated.
pub(crate) fn seed_bytes(purpose: &str, owner: &str, seed: u64) -> [u8; 32] {
    let mut w = crate::codec::Writer::with_tag(b"eid-cloud/seed/v1");
    w.str(purpose).str(owner).u64(seed);
    sha256(&[&w.finish()])
}
