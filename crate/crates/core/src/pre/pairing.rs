//! Unidirectional multi-use identity-based proxy re-encryption over
//! BLS12-381, used as a key-encapsulation layer.
//!
//! Notation (`GT` written additively, as arkworks does):
//!
//! * master secret `s`, public `P = s·g1`; identity key `sk_id = s·H1(id)`.
//! * encapsulation of `K ∈ GT` to `id`: `(U, V) = (r·g1, K + r·e(P, H1(id)))`.
//! * `rk(id1→id2) = (H2(X) − sk_id1, Enc(id2, X))` for a random `X ∈ GT`.
//! * re-encryption adds `e(U, R1)` to `V` of the newest layer, turning its
//!   mask into `e(U, H2(X))`, and appends `Enc(id2, X)` as a new layer.
//!
//! A level-`k` ciphertext therefore holds `k + 1` layers; decryption peels
//! them from the newest one (opened with `sk_id`) back to the original
//! encapsulated `K`.

use std::sync::OnceLock;

use ark_bls12_381::{g2, Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{CurveGroup, Group};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use ark_std::UniformRand;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;

use super::PreError;
use crate::codec::{Reader, Writer};
use crate::crypto::sha256;

pub(crate) type Gt = PairingOutput<Bls12_381>;

type G2Hasher = MapToCurveBasedHasher<G2Projective, DefaultFieldHasher<Sha256, 128>, WBMap<g2::Config>>;

const H1_DST: &[u8] = b"EIDCLOUD-PRE-V01-H1-ID_BLS12381G2_XMD:SHA-256_SSWU_RO_";
const H2_DST: &[u8] = b"EIDCLOUD-PRE-V01-H2-GT_BLS12381G2_XMD:SHA-256_SSWU_RO_";

fn hasher(dst: &'static [u8], cell: &'static OnceLock<G2Hasher>) -> &'static G2Hasher {
    cell.get_or_init(|| G2Hasher::new(dst).expect("BLS12-381 G2 hasher parameters are valid"))
}

/// Identity string to `G2`.
pub(crate) fn hash_identity(id: &str) -> G2Affine {
    static CELL: OnceLock<G2Hasher> = OnceLock::new();
    hasher(H1_DST, &CELL)
        .hash(id.as_bytes())
        .expect("hash to curve is total")
}

/// Target-group element to `G2`.
fn hash_gt(x: &Gt) -> G2Affine {
    static CELL: OnceLock<G2Hasher> = OnceLock::new();
    hasher(H2_DST, &CELL)
        .hash(&gt_bytes(x))
        .expect("hash to curve is total")
}

fn gt_bytes(x: &Gt) -> Vec<u8> {
    let mut out = Vec::with_capacity(576);
    x.serialize_compressed(&mut out)
        .expect("serialising into a Vec cannot fail");
    out
}

/// Symmetric key derived from the encapsulated `GT` element.
pub(crate) fn kdf(k: &Gt) -> [u8; 32] {
    sha256(&[b"eid-cloud/pre/kdf/v1", &gt_bytes(k)])
}

pub(crate) fn random_gt<R: RngCore + CryptoRng>(rng: &mut R) -> Gt {
    Gt::generator() * Fr::rand(rng)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct MasterPublic(pub G1Affine);

#[derive(Clone, PartialEq, Eq)]
pub(crate) struct MasterSecret(pub Fr);

#[derive(Clone, PartialEq, Eq)]
pub(crate) struct IdentitySecret(pub G2Affine);

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layer {
    pub u: G1Affine,
    pub v: Gt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct ReKeyMaterial {
    pub r1: G2Affine,
    pub r2: Layer,
}

pub(crate) fn setup<R: RngCore + CryptoRng>(rng: &mut R) -> (MasterPublic, MasterSecret) {
    let s = Fr::rand(rng);
    let p = (G1Projective::generator() * s).into_affine();
    (MasterPublic(p), MasterSecret(s))
}

pub(crate) fn extract(msk: &MasterSecret, id: &str) -> IdentitySecret {
    IdentitySecret((hash_identity(id) * msk.0).into_affine())
}

/// Encapsulates `k` to `id` under master public key `mpk`.
pub(crate) fn encapsulate<R: RngCore + CryptoRng>(
    mpk: &MasterPublic,
    id: &str,
    k: &Gt,
    rng: &mut R,
) -> Layer {
    let r = Fr::rand(rng);
    let u = (G1Projective::generator() * r).into_affine();
    let mask = Bls12_381::pairing(mpk.0, hash_identity(id)) * r;
    Layer { u, v: *k + mask }
}

pub(crate) fn rekey<R: RngCore + CryptoRng>(
    target_mpk: &MasterPublic,
    sk_from: &IdentitySecret,
    to_id: &str,
    rng: &mut R,
) -> ReKeyMaterial {
    let x = random_gt(rng);
    let r1 = (G2Projective::from(hash_gt(&x)) - sk_from.0).into_affine();
    let r2 = encapsulate(target_mpk, to_id, &x, rng);
    ReKeyMaterial { r1, r2 }
}

/// Transforms the newest layer with `rk`. Touches only public values.
pub(crate) fn transform(layers: &[Layer], rk: &ReKeyMaterial) -> Vec<Layer> {
    let mut out = layers.to_vec();
    let last = out.last_mut().expect("ciphertext has at least one layer");
    last.v += Bls12_381::pairing(last.u, rk.r1);
    out.push(rk.r2.clone());
    out
}

/// Recovers the encapsulated `K` from a layer chain with the key of the
/// identity the newest layer is addressed to.
pub(crate) fn decapsulate(layers: &[Layer], sk: &IdentitySecret) -> Gt {
    let (newest, older) = layers.split_last().expect("ciphertext has at least one layer");
    let mut x = newest.v - Bls12_381::pairing(newest.u, sk.0);
    for layer in older.iter().rev() {
        x = layer.v - Bls12_381::pairing(layer.u, hash_gt(&x));
    }
    x
}

fn put<T: CanonicalSerialize>(w: &mut Writer, v: &T) {
    let mut buf = Vec::new();
    v.serialize_compressed(&mut buf)
        .expect("serialising into a Vec cannot fail");
    w.bytes(&buf);
}

fn get<T: CanonicalDeserialize>(r: &mut Reader<'_>) -> Result<T, PreError> {
    T::deserialize_compressed(r.bytes()?).map_err(|_| PreError::Malformed("group element"))
}

impl Layer {
    pub(crate) fn write(&self, w: &mut Writer) {
        put(w, &self.u);
        put(w, &self.v);
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, PreError> {
        Ok(Self {
            u: get(r)?,
            v: get(r)?,
        })
    }
}

impl MasterPublic {
    pub(crate) fn write(&self, w: &mut Writer) {
        put(w, &self.0);
    }
    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, PreError> {
        Ok(Self(get(r)?))
    }
}

impl MasterSecret {
    pub(crate) fn write(&self, w: &mut Writer) {
        put(w, &self.0);
    }
    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, PreError> {
        Ok(Self(get(r)?))
    }
}

impl IdentitySecret {
    pub(crate) fn write(&self, w: &mut Writer) {
        put(w, &self.0);
    }
    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, PreError> {
        Ok(Self(get(r)?))
    }
}

impl ReKeyMaterial {
    pub(crate) fn write(&self, w: &mut Writer) {
        put(w, &self.r1);
        self.r2.write(w);
    }
    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, PreError> {
        Ok(Self {
            r1: get(r)?,
            r2: Layer::read(r)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn identity_hash_is_deterministic_and_separating() {
        assert_eq!(hash_identity("MOA-ID"), hash_identity("MOA-ID"));
        assert_ne!(hash_identity("MOA-ID"), hash_identity("MIS"));
    }

    #[test]
    fn encapsulation_opens_with_matching_key_only() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (mpk, msk) = setup(&mut rng);
        let k = random_gt(&mut rng);
        let layer = encapsulate(&mpk, "S_1", &k, &mut rng);
        assert_eq!(decapsulate(std::slice::from_ref(&layer), &extract(&msk, "S_1")), k);
        assert_ne!(decapsulate(&[layer], &extract(&msk, "S_2")), k);
    }

    #[test]
    fn two_hops_across_two_authorities() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (ec_pk, ec_sk) = setup(&mut rng);
        let (sra_pk, sra_sk) = setup(&mut rng);
        let k = random_gt(&mut rng);
        let c0 = vec![encapsulate(&ec_pk, "PEPS", &k, &mut rng)];
        let rk1 = rekey(&sra_pk, &extract(&ec_sk, "PEPS"), "MOA-ID", &mut rng);
        let c1 = transform(&c0, &rk1);
        assert_eq!(decapsulate(&c1, &extract(&sra_sk, "MOA-ID")), k);
        let rk2 = rekey(&sra_pk, &extract(&sra_sk, "MOA-ID"), "SPR-GW", &mut rng);
        let c2 = transform(&c1, &rk2);
        assert_eq!(c2.len(), 3);
        assert_eq!(decapsulate(&c2, &extract(&sra_sk, "SPR-GW")), k);
    }
}
