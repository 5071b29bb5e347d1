use std::fmt;

use ed25519_dalek::Signer;
use rand::{CryptoRng, RngCore};

use super::{seed_bytes, sha256, CryptoError};

pub const SIGNATURE_LEN: usize = 64 + HINT_LEN;
const HINT_LEN: usize = 8;

#[derive(Clone, PartialEq, Eq)]
pub struct SigningKey([u8; 32]);

impl SigningKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| CryptoError::Key("signing key must be 32 bytes"))?;
        Ok(Self(arr))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        VerifyingKey(
            ed25519_dalek::SigningKey::from_bytes(&self.0)
                .verifying_key()
                .to_bytes(),
        )
    }
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SigningKey(..)")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VerifyingKey([u8; 32]);

impl VerifyingKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| CryptoError::Key("verification key must be 32 bytes"))?;
        ed25519_dalek::VerifyingKey::from_bytes(&arr)
            .map_err(|_| CryptoError::Key("verification key is not a curve point"))?;
        Ok(Self(arr))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0
    }

    /// Short fingerprint carried inside signatures.
    pub fn fingerprint(&self) -> [u8; HINT_LEN] {
        let d = sha256(&[b"eid-cloud/pk-hint", &self.0]);
        let mut out = [0u8; HINT_LEN];
        out.copy_from_slice(&d[..HINT_LEN]);
        out
    }
}

impl fmt::Debug for VerifyingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VerifyingKey({})", hex::encode(&self.0[..8]))
    }
}

#[derive(Clone, Debug)]
pub struct SigKeyPair {
    pub sk: SigningKey,
    pub pk: VerifyingKey,
    pub owner: String,
}

impl SigKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(owner: &str, rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self::from_secret(owner, seed)
    }

    pub fn from_seed(owner: &str, seed: u64) -> Self {
        Self::from_secret(owner, seed_bytes("dss", owner, seed))
    }

    fn from_secret(owner: &str, secret: [u8; 32]) -> Self {
        assert!(!owner.is_empty(), "key owner must be non-empty");
        let sk = SigningKey(secret);
        let pk = sk.verifying_key();
        Self {
            sk,
            pk,
            owner: owner.to_owned(),
        }
    }
}

/// DSS.KG. With a seed the pair is reproducible; without one it is drawn
/// from the operating system RNG.
pub fn dss_keygen(owner: &str, seed: Option<u64>) -> SigKeyPair {
    match seed {
        Some(s) => SigKeyPair::from_seed(owner, s),
        None => SigKeyPair::generate(owner, &mut rand::rngs::OsRng),
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Signature {
    bytes: [u8; 64],
    signer_pk_hint: [u8; HINT_LEN],
}

impl Signature {
    pub fn to_bytes(&self) -> [u8; SIGNATURE_LEN] {
        let mut out = [0u8; SIGNATURE_LEN];
        out[..64].copy_from_slice(&self.bytes);
        out[64..].copy_from_slice(&self.signer_pk_hint);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != SIGNATURE_LEN {
            return Err(CryptoError::Key("signature must be 72 bytes"));
        }
        let mut sig = [0u8; 64];
        let mut hint = [0u8; HINT_LEN];
        sig.copy_from_slice(&bytes[..64]);
        hint.copy_from_slice(&bytes[64..]);
        Ok(Self {
            bytes: sig,
            signer_pk_hint: hint,
        })
    }

    pub fn signer_pk_hint(&self) -> [u8; HINT_LEN] {
        self.signer_pk_hint
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.bytes[..8]))
    }
}

fn message_digest(message: &[u8]) -> [u8; 32] {
    sha256(&[b"eid-cloud/dss/v1", message])
}

/// DSS.Sign over SHA-256 of the message (hash-then-sign).
pub fn dss_sign(sk: &SigningKey, message: &[u8]) -> Signature {
    let key = ed25519_dalek::SigningKey::from_bytes(&sk.0);
    let sig = key.sign(&message_digest(message));
    Signature {
        bytes: sig.to_bytes(),
        signer_pk_hint: sk.verifying_key().fingerprint(),
    }
}

/// DSS.Verify. Malformed keys or signatures verify as `false`.
pub fn dss_verify(pk: &VerifyingKey, message: &[u8], sig: &Signature) -> bool {
    if sig.signer_pk_hint != pk.fingerprint() {
        return false;
    }
    let Ok(key) = ed25519_dalek::VerifyingKey::from_bytes(&pk.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig.bytes);
    key.verify_strict(&message_digest(message), &sig).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_keygen_is_deterministic() {
        let a = dss_keygen("SRA", Some(1));
        let b = dss_keygen("SRA", Some(1));
        assert_eq!(a.pk, b.pk);
        assert_eq!(a.sk, b.sk);
    }

    #[test]
    fn distinct_seeds_and_owners_give_distinct_keys() {
        assert_ne!(dss_keygen("SRA", Some(1)).pk, dss_keygen("SRA", Some(2)).pk);
        assert_ne!(dss_keygen("SRA", Some(1)).pk, dss_keygen("CR", Some(1)).pk);
    }

    #[test]
    fn unseeded_pair_round_trips() {
        let kp = dss_keygen("CR", None);
        let sig = dss_sign(&kp.sk, b"mandate");
        assert!(dss_verify(&kp.pk, b"mandate", &sig));
    }

    #[test]
    fn signature_binds_message_and_key() {
        let kp = dss_keygen("MOA-ID", Some(3));
        let other = dss_keygen("MIS", Some(3));
        let sig = dss_sign(&kp.sk, b"m");
        assert!(dss_verify(&kp.pk, b"m", &sig));
        assert!(!dss_verify(&kp.pk, b"m'", &sig));
        assert!(!dss_verify(&other.pk, b"m", &sig));
    }

    #[test]
    fn every_single_bit_flip_is_rejected() {
        let kp = dss_keygen("SRA", Some(9));
        let msg = b"identity link".to_vec();
        let sig = dss_sign(&kp.sk, &msg);
        for i in 0..msg.len() * 8 {
            let mut m = msg.clone();
            m[i / 8] ^= 1 << (i % 8);
            assert!(!dss_verify(&kp.pk, &m, &sig), "message bit {i}");
        }
        let raw = sig.to_bytes();
        for i in 0..raw.len() * 8 {
            let mut s = raw;
            s[i / 8] ^= 1 << (i % 8);
            let s = Signature::from_bytes(&s).unwrap();
            assert!(!dss_verify(&kp.pk, &msg, &s), "signature bit {i}");
        }
    }

    #[test]
    fn malformed_keys_are_errors() {
        assert!(SigningKey::from_bytes(&[0u8; 31]).is_err());
        assert!(VerifyingKey::from_bytes(&[0u8; 33]).is_err());
        assert!(Signature::from_bytes(&[0u8; 10]).is_err());
    }
}
