use std::fmt;

use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;
use x25519_dalek::{PublicKey, StaticSecret};

use super::symmetric::{self, NONCE_LEN};
use super::{seed_bytes, CryptoError};
use crate::codec::{Reader, Writer};

#[derive(Clone, PartialEq, Eq)]
pub struct PkeSecretKey([u8; 32]);

impl PkeSecretKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        Ok(Self(
            bytes
                .try_into()
                .map_err(|_| CryptoError::Key("decryption key must be 32 bytes"))?,
        ))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0
    }

    pub fn public_key(&self) -> PkePublicKey {
        PkePublicKey(PublicKey::from(&StaticSecret::from(self.0)).to_bytes())
    }
}

impl fmt::Debug for PkeSecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PkeSecretKey(..)")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PkePublicKey([u8; 32]);

impl PkePublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        Ok(Self(
            bytes
                .try_into()
                .map_err(|_| CryptoError::Key("encryption key must be 32 bytes"))?,
        ))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0
    }
}

impl fmt::Debug for PkePublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PkePublicKey({})", hex::encode(&self.0[..8]))
    }
}

#[derive(Clone, Debug)]
pub struct PkeKeyPair {
    pub sk: PkeSecretKey,
    pub pk: PkePublicKey,
    pub owner: String,
}

impl PkeKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(owner: &str, rng: &mut R) -> Self {
        let mut s = [0u8; 32];
        rng.fill_bytes(&mut s);
        Self::from_secret(owner, s)
    }

    pub fn from_seed(owner: &str, seed: u64) -> Self {
        Self::from_secret(owner, seed_bytes("pke", owner, seed))
    }

    fn from_secret(owner: &str, secret: [u8; 32]) -> Self {
        assert!(!owner.is_empty(), "key owner must be non-empty");
        let sk = PkeSecretKey(StaticSecret::from(secret).to_bytes());
        let pk = sk.public_key();
        Self {
            sk,
            pk,
            owner: owner.to_owned(),
        }
    }
}

pub fn pke_keygen(owner: &str, seed: Option<u64>) -> PkeKeyPair {
    match seed {
        Some(s) => PkeKeyPair::from_seed(owner, s),
        None => PkeKeyPair::generate(owner, &mut rand::rngs::OsRng),
    }
}

/// `(c1, c2)`: the symmetric key wrapped under the recipient's public key and
/// the payload under that symmetric key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HybridCiphertext {
    pub wrapped_key: WrappedKey,
    pub body: SealedBody,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WrappedKey {
    ephemeral: [u8; 32],
    nonce: [u8; NONCE_LEN],
    sealed_key: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedBody {
    nonce: [u8; NONCE_LEN],
    ciphertext: Vec<u8>,
}

const HYBRID_TAG: &[u8] = b"eid-cloud/hybrid/v1";

impl HybridCiphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(HYBRID_TAG);
        w.fixed(&self.wrapped_key.ephemeral)
            .fixed(&self.wrapped_key.nonce)
            .bytes(&self.wrapped_key.sealed_key)
            .fixed(&self.body.nonce)
            .bytes(&self.body.ciphertext);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        r.expect_tag(HYBRID_TAG)?;
        let wrapped_key = WrappedKey {
            ephemeral: r.fixed()?,
            nonce: r.fixed()?,
            sealed_key: r.bytes()?.to_vec(),
        };
        let body = SealedBody {
            nonce: r.fixed()?,
            ciphertext: r.bytes()?.to_vec(),
        };
        r.finish()?;
        Ok(Self { wrapped_key, body })
    }
}

fn key_encryption_key(shared: &[u8; 32], ephemeral: &[u8; 32], recipient: &[u8; 32]) -> [u8; 32] {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(ephemeral);
    salt[32..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut out = [0u8; 32];
    hk.expand(b"eid-cloud/hybrid/kek", &mut out)
        .expect("32 bytes is a valid HKDF output length");
    out
}

/// PKE.Enc under the hybrid convention: ephemeral X25519 agreement wraps a
/// fresh ChaCha20-Poly1305 key, which seals the payload.
pub fn hybrid_encrypt<R: RngCore + CryptoRng>(
    pk: &PkePublicKey,
    payload: &[u8],
    rng: &mut R,
) -> Result<HybridCiphertext, CryptoError> {
    let mut eph_secret = [0u8; 32];
    rng.fill_bytes(&mut eph_secret);
    let eph = StaticSecret::from(eph_secret);
    let eph_pub = PublicKey::from(&eph).to_bytes();
    let shared = eph.diffie_hellman(&PublicKey::from(pk.0));
    if !shared.was_contributory() {
        return Err(CryptoError::Key("encryption key is a low-order point"));
    }
    let kek = key_encryption_key(shared.as_bytes(), &eph_pub, &pk.0);

    let data_key = symmetric::random_key(rng);
    let (knonce, sealed_key) = symmetric::seal(&kek, &eph_pub, &data_key, rng);
    let (bnonce, ciphertext) = symmetric::seal(&data_key, HYBRID_TAG, payload, rng);
    Ok(HybridCiphertext {
        wrapped_key: WrappedKey {
            ephemeral: eph_pub,
            nonce: knonce,
            sealed_key,
        },
        body: SealedBody {
            nonce: bnonce,
            ciphertext,
        },
    })
}

/// PKE.Dec. Wrong key or any tampering yields [`CryptoError::Decryption`].
pub fn hybrid_decrypt(sk: &PkeSecretKey, c: &HybridCiphertext) -> Result<Vec<u8>, CryptoError> {
    let secret = StaticSecret::from(sk.0);
    let recipient = PublicKey::from(&secret).to_bytes();
    let shared = secret.diffie_hellman(&PublicKey::from(c.wrapped_key.ephemeral));
    if !shared.was_contributory() {
        return Err(CryptoError::Decryption);
    }
    let kek = key_encryption_key(shared.as_bytes(), &c.wrapped_key.ephemeral, &recipient);
    let data_key = symmetric::open(
        &kek,
        &c.wrapped_key.ephemeral,
        &c.wrapped_key.nonce,
        &c.wrapped_key.sealed_key,
    )?;
    let data_key: [u8; 32] = data_key.try_into().map_err(|_| CryptoError::Decryption)?;
    symmetric::open(&data_key, HYBRID_TAG, &c.body.nonce, &c.body.ciphertext)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(5)
    }

    #[test]
    fn empty_payload_round_trips() {
        let kp = pke_keygen("C_alice", Some(1));
        let c = hybrid_encrypt(&kp.pk, b"", &mut rng()).unwrap();
        assert_eq!(hybrid_decrypt(&kp.sk, &c).unwrap(), b"");
    }

    #[test]
    fn mandate_payload_round_trips() {
        let kp = pke_keygen("C_alice", Some(1));
        let payload = [&b"mand"[..], b"MAND-0001", &[7u8; 72]].concat();
        let c = hybrid_encrypt(&kp.pk, &payload, &mut rng()).unwrap();
        assert_eq!(hybrid_decrypt(&kp.sk, &c).unwrap(), payload);
    }

    #[test]
    fn encryption_is_probabilistic() {
        let kp = pke_keygen("C_alice", Some(1));
        let mut r = rng();
        let a = hybrid_encrypt(&kp.pk, b"same", &mut r).unwrap();
        let b = hybrid_encrypt(&kp.pk, b"same", &mut r).unwrap();
        assert_ne!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn wrong_key_fails() {
        let kp = pke_keygen("C_alice", Some(1));
        let other = pke_keygen("C_bob", Some(1));
        let c = hybrid_encrypt(&kp.pk, b"secret", &mut rng()).unwrap();
        assert_eq!(hybrid_decrypt(&other.sk, &c), Err(CryptoError::Decryption));
    }

    #[test]
    fn every_body_byte_flip_fails() {
        let kp = pke_keygen("C_alice", Some(1));
        let c = hybrid_encrypt(&kp.pk, &[0x5a; 16], &mut rng()).unwrap();
        assert_eq!(c.body.ciphertext.len(), 16 + symmetric::TAG_LEN);
        for i in 0..c.body.ciphertext.len() {
            let mut t = c.clone();
            t.body.ciphertext[i] ^= 0x01;
            assert_eq!(hybrid_decrypt(&kp.sk, &t), Err(CryptoError::Decryption), "byte {i}");
        }
    }

    #[test]
    fn every_serialized_byte_flip_fails() {
        let kp = pke_keygen("C_alice", Some(1));
        let bytes = hybrid_encrypt(&kp.pk, &[1; 16], &mut rng()).unwrap().to_bytes();
        for i in 0..bytes.len() {
            let mut b = bytes.clone();
            b[i] ^= 0x80;
            let res = HybridCiphertext::from_bytes(&b).and_then(|c| hybrid_decrypt(&kp.sk, &c));
            assert!(res.is_err(), "byte {i}");
        }
    }

    #[test]
    fn low_order_public_key_is_rejected() {
        let zero = PkePublicKey::from_bytes(&[0u8; 32]).unwrap();
        assert!(matches!(
            hybrid_encrypt(&zero, b"x", &mut rng()),
            Err(CryptoError::Key(_))
        ));
    }
}
