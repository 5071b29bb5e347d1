//! Identity-based proxy re-encryption (RE.Setup/KG/Enc/RKGen/ReEnc/Dec).
//!
//! Ciphertexts follow the hybrid convention: the re-encryption scheme only
//! encapsulates a symmetric key, and the payload is sealed once with
//! ChaCha20-Poly1305. Re-encryption transforms the encapsulation header and
//! never touches the sealed body.
//!
//! Two backends sit behind the same API:
//!
//! * [`Backend::Pairing`], the sound pairing-based scheme (default);
//! * [`Backend::TrustedDealer`], a **test double** in which every key carries
//!   the dealer's master secret and re-encryption decrypts and re-seals. It
//!   exists to exercise protocol logic quickly and offers no proxy
//!   blindness whatsoever; the privacy auditor refuses to certify runs that
//!   used it.

mod dealer;
mod pairing;

use std::fmt;

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};
use crate::crypto::symmetric::{self, NONCE_LEN};

/// Default re-encryption depth: the longest chain in the flows is three hops.
pub const DEFAULT_MAX_LEVELS: u8 = 4;
pub const MIN_MAX_LEVELS: u8 = 4;
pub const SECURITY_LEVEL: u32 = 128;

const CT_VERSION: u8 = 1;
const KEY_TAG: &[u8] = b"eid-cloud/pre/key/v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PreError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(&'static str),
    #[error("identity must be non-empty")]
    EmptyIdentity,
    #[error("identity key for {key} does not match identity {requested}")]
    KeyMismatch { key: String, requested: String },
    #[error("ciphertext at level {level} cannot be re-encrypted (max {max})")]
    DepthExhausted { level: u8, max: u8 },
    #[error("ciphertext addressed to {found}, re-encryption key expects {expected}")]
    Routing { expected: String, found: String },
    #[error("objects belong to different backends")]
    BackendMismatch,
    /// The `⊥` output of decryption.
    #[error("decryption failed")]
    Decryption,
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error("decode: {0}")]
    Decode(#[from] DecodeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Backend {
    Pairing,
    /// Test double. Never use for privacy claims.
    TrustedDealer,
}

impl Backend {
    pub fn label(self) -> &'static str {
        match self {
            Backend::Pairing => "pairing",
            Backend::TrustedDealer => "test-double",
        }
    }

    pub fn is_sound(self) -> bool {
        matches!(self, Backend::Pairing)
    }

    fn tag(self) -> u8 {
        match self {
            Backend::Pairing => 1,
            Backend::TrustedDealer => 2,
        }
    }

    fn from_tag(t: u8) -> Result<Self, PreError> {
        match t {
            1 => Ok(Backend::Pairing),
            2 => Ok(Backend::TrustedDealer),
            _ => Err(PreError::Malformed("backend tag")),
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pairing" => Ok(Backend::Pairing),
            "test-double" | "trusted-dealer" => Ok(Backend::TrustedDealer),
            other => Err(format!("unknown backend {other:?} (expected pairing or test-double)")),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum ParamsInner {
    Pairing(pairing::MasterPublic),
    Dealer(dealer::DealerSecret),
}

/// Public parameters of one key authority (the SRA or the EC).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReParams {
    authority: String,
    max_levels: u8,
    inner: ParamsInner,
}

impl ReParams {
    pub fn authority(&self) -> &str {
        &self.authority
    }

    pub fn max_levels(&self) -> u8 {
        self.max_levels
    }

    pub fn backend(&self) -> Backend {
        match self.inner {
            ParamsInner::Pairing(_) => Backend::Pairing,
            ParamsInner::Dealer(_) => Backend::TrustedDealer,
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
enum MasterInner {
    Pairing(pairing::MasterSecret),
    Dealer(dealer::DealerSecret),
}

#[derive(Clone, PartialEq, Eq)]
pub struct ReMasterKey {
    authority: String,
    inner: MasterInner,
}

impl ReMasterKey {
    pub fn authority(&self) -> &str {
        &self.authority
    }
}

impl fmt::Debug for ReMasterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReMasterKey({}, ..)", self.authority)
    }
}

#[derive(Clone, PartialEq, Eq)]
enum IdentityInner {
    Pairing(pairing::IdentitySecret),
    Dealer([u8; 32]),
}

#[derive(Clone, PartialEq, Eq)]
pub struct ReIdentityKey {
    id: String,
    inner: IdentityInner,
}

impl ReIdentityKey {
    pub fn id(&self) -> &str {
        &self.id
    }
}

impl fmt::Debug for ReIdentityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReIdentityKey({}, ..)", self.id)
    }
}

#[derive(Clone, PartialEq, Eq)]
enum ReKeyInner {
    Pairing(Box<pairing::ReKeyMaterial>),
    Dealer { from: [u8; 32], to: [u8; 32] },
}

/// `rk(from → to)`.
#[derive(Clone, PartialEq, Eq)]
pub struct ReEncKey {
    from_id: String,
    to_id: String,
    max_levels: u8,
    inner: ReKeyInner,
}

impl ReEncKey {
    pub fn from_id(&self) -> &str {
        &self.from_id
    }

    pub fn to_id(&self) -> &str {
        &self.to_id
    }

    pub fn backend(&self) -> Backend {
        match self.inner {
            ReKeyInner::Pairing(_) => Backend::Pairing,
            ReKeyInner::Dealer { .. } => Backend::TrustedDealer,
        }
    }

    /// Same key material with the identity labels swapped. Only useful to
    /// demonstrate that keys cannot be used in the reverse direction.
    #[doc(hidden)]
    pub fn relabelled_reverse(&self) -> Self {
        Self {
            from_id: self.to_id.clone(),
            to_id: self.from_id.clone(),
            ..self.clone()
        }
    }
}

impl fmt::Debug for ReEncKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReEncKey({} -> {}, ..)", self.from_id, self.to_id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Header {
    Pairing(Vec<pairing::Layer>),
    Dealer,
}

/// `c_id`: addressed to `target_id`, re-encrypted `level` times.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReCiphertext {
    target_id: String,
    level: u8,
    header: Header,
    nonce: [u8; NONCE_LEN],
    body: Vec<u8>,
}

impl ReCiphertext {
    pub fn target_id(&self) -> &str {
        &self.target_id
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn backend(&self) -> Backend {
        match self.header {
            Header::Pairing(_) => Backend::Pairing,
            Header::Dealer => Backend::TrustedDealer,
        }
    }

    /// The sealed payload. Re-encryption leaves it untouched.
    pub fn sealed_body(&self) -> &[u8] {
        &self.body
    }

    /// Overwrites the routing label without touching key material. Used by
    /// adversarial tests that bypass the proxy's routing check.
    #[doc(hidden)]
    pub fn relabel(&mut self, target_id: &str) {
        self.target_id = target_id.to_owned();
    }

    /// Versioned header `(version, scheme, target_id, level)` then body.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(CT_VERSION)
            .u8(self.backend().tag())
            .str(&self.target_id)
            .u8(self.level);
        if let Header::Pairing(layers) = &self.header {
            w.u32(layers.len() as u32);
            for l in layers {
                l.write(&mut w);
            }
        }
        w.fixed(&self.nonce).bytes(&self.body);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PreError> {
        let mut r = Reader::new(bytes);
        let version = r.u8()?;
        if version != CT_VERSION {
            return Err(DecodeError::Version(version).into());
        }
        let backend = Backend::from_tag(r.u8()?)?;
        let target_id = r.str()?.to_owned();
        let level = r.u8()?;
        let header = match backend {
            Backend::Pairing => {
                let n = r.u32()? as usize;
                if n != level as usize + 1 {
                    return Err(PreError::Malformed("layer count"));
                }
                let layers = (0..n)
                    .map(|_| pairing::Layer::read(&mut r))
                    .collect::<Result<_, _>>()?;
                Header::Pairing(layers)
            }
            Backend::TrustedDealer => Header::Dealer,
        };
        let nonce = r.fixed()?;
        let body = r.bytes()?.to_vec();
        r.finish()?;
        Ok(Self {
            target_id,
            level,
            header,
            nonce,
            body,
        })
    }
}

fn check_id(id: &str) -> Result<(), PreError> {
    if id.is_empty() {
        Err(PreError::EmptyIdentity)
    } else {
        Ok(())
    }
}

/// RE.Setup for one authority.
pub fn re_setup<R: RngCore + CryptoRng>(
    authority: &str,
    security_level: u32,
    max_levels: u8,
    backend: Backend,
    rng: &mut R,
) -> Result<(ReParams, ReMasterKey), PreError> {
    if max_levels == 0 {
        return Err(PreError::InvalidParameters("max_levels must be at least 1"));
    }
    if security_level == 0 || security_level > SECURITY_LEVEL {
        return Err(PreError::InvalidParameters(
            "BLS12-381 supports security levels up to 128 bits",
        ));
    }
    let (params, master) = match backend {
        Backend::Pairing => {
            let (p, s) = pairing::setup(rng);
            (ParamsInner::Pairing(p), MasterInner::Pairing(s))
        }
        Backend::TrustedDealer => {
            let d = dealer::DealerSecret::generate(rng);
            (ParamsInner::Dealer(d.clone()), MasterInner::Dealer(d))
        }
    };
    Ok((
        ReParams {
            authority: authority.to_owned(),
            max_levels,
            inner: params,
        },
        ReMasterKey {
            authority: authority.to_owned(),
            inner: master,
        },
    ))
}

/// [`re_setup`] driven by a numeric seed.
pub fn re_setup_seeded(
    authority: &str,
    security_level: u32,
    max_levels: u8,
    backend: Backend,
    seed: u64,
) -> Result<(ReParams, ReMasterKey), PreError> {
    let mut rng = ChaCha20Rng::from_seed(crate::crypto::seed_bytes("re-setup", authority, seed));
    re_setup(authority, security_level, max_levels, backend, &mut rng)
}

/// RE.KG.
pub fn re_keygen(msk: &ReMasterKey, id: &str) -> Result<ReIdentityKey, PreError> {
    check_id(id)?;
    let inner = match &msk.inner {
        MasterInner::Pairing(s) => IdentityInner::Pairing(pairing::extract(s, id)),
        MasterInner::Dealer(d) => IdentityInner::Dealer(d.identity_key(id)),
    };
    Ok(ReIdentityKey {
        id: id.to_owned(),
        inner,
    })
}

/// RE.Enc: a fresh level-0 ciphertext for `id`.
pub fn re_encrypt<R: RngCore + CryptoRng>(
    params: &ReParams,
    id: &str,
    m: &[u8],
    rng: &mut R,
) -> Result<ReCiphertext, PreError> {
    check_id(id)?;
    match &params.inner {
        ParamsInner::Pairing(mpk) => {
            let k = pairing::random_gt(rng);
            let layer = pairing::encapsulate(mpk, id, &k, rng);
            let (nonce, body) = symmetric::seal(&pairing::kdf(&k), &[], m, rng);
            Ok(ReCiphertext {
                target_id: id.to_owned(),
                level: 0,
                header: Header::Pairing(vec![layer]),
                nonce,
                body,
            })
        }
        ParamsInner::Dealer(d) => {
            let (nonce, body) = dealer::seal(&d.identity_key(id), id, 0, m, rng);
            Ok(ReCiphertext {
                target_id: id.to_owned(),
                level: 0,
                header: Header::Dealer,
                nonce,
                body,
            })
        }
    }
}

/// RE.RKGen. `target` are the parameters of the authority that issued
/// `to_id`'s key; only public information about `to_id` is needed.
pub fn re_rkgen<R: RngCore + CryptoRng>(
    target: &ReParams,
    sk_from: &ReIdentityKey,
    from_id: &str,
    to_id: &str,
    rng: &mut R,
) -> Result<ReEncKey, PreError> {
    check_id(from_id)?;
    check_id(to_id)?;
    if sk_from.id != from_id {
        return Err(PreError::KeyMismatch {
            key: sk_from.id.clone(),
            requested: from_id.to_owned(),
        });
    }
    let inner = match (&sk_from.inner, &target.inner) {
        (IdentityInner::Pairing(sk), ParamsInner::Pairing(mpk)) => {
            ReKeyInner::Pairing(Box::new(pairing::rekey(mpk, sk, to_id, rng)))
        }
        (IdentityInner::Dealer(from), ParamsInner::Dealer(d)) => ReKeyInner::Dealer {
            from: *from,
            to: d.identity_key(to_id),
        },
        _ => return Err(PreError::BackendMismatch),
    };
    Ok(ReEncKey {
        from_id: from_id.to_owned(),
        to_id: to_id.to_owned(),
        max_levels: target.max_levels,
        inner,
    })
}

/// RE.ReEnc. Needs only the ciphertext and the re-encryption key.
pub fn re_reencrypt<R: RngCore + CryptoRng>(
    c: &ReCiphertext,
    rk: &ReEncKey,
    rng: &mut R,
) -> Result<ReCiphertext, PreError> {
    if c.target_id != rk.from_id {
        return Err(PreError::Routing {
            expected: rk.from_id.clone(),
            found: c.target_id.clone(),
        });
    }
    if c.level >= rk.max_levels {
        return Err(PreError::DepthExhausted {
            level: c.level,
            max: rk.max_levels,
        });
    }
    let level = c.level + 1;
    match (&c.header, &rk.inner) {
        (Header::Pairing(layers), ReKeyInner::Pairing(material)) => Ok(ReCiphertext {
            target_id: rk.to_id.clone(),
            level,
            header: Header::Pairing(pairing::transform(layers, material)),
            nonce: c.nonce,
            body: c.body.clone(),
        }),
        (Header::Dealer, ReKeyInner::Dealer { from, to }) => {
            let m = dealer::open(from, &c.target_id, c.level, &c.nonce, &c.body)?;
            let (nonce, body) = dealer::seal(to, &rk.to_id, level, &m, rng);
            Ok(ReCiphertext {
                target_id: rk.to_id.clone(),
                level,
                header: Header::Dealer,
                nonce,
                body,
            })
        }
        _ => Err(PreError::BackendMismatch),
    }
}

/// RE.Dec. Any mismatch or tampering yields [`PreError::Decryption`].
pub fn re_decrypt(sk: &ReIdentityKey, c: &ReCiphertext) -> Result<Vec<u8>, PreError> {
    if sk.id != c.target_id {
        return Err(PreError::Decryption);
    }
    match (&sk.inner, &c.header) {
        (IdentityInner::Pairing(s), Header::Pairing(layers)) => {
            if layers.len() != c.level as usize + 1 {
                return Err(PreError::Decryption);
            }
            let k = pairing::decapsulate(layers, s);
            symmetric::open(&pairing::kdf(&k), &[], &c.nonce, &c.body)
                .map_err(|_| PreError::Decryption)
        }
        (IdentityInner::Dealer(k), Header::Dealer) => {
            dealer::open(k, &c.target_id, c.level, &c.nonce, &c.body)
        }
        _ => Err(PreError::Decryption),
    }
}

// Key material encodings used by the key store.

impl ReParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(KEY_TAG);
        w.u8(b'P')
            .str(&self.authority)
            .u8(self.max_levels)
            .u8(self.backend().tag());
        match &self.inner {
            ParamsInner::Pairing(p) => p.write(&mut w),
            ParamsInner::Dealer(d) => d.write(&mut w),
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PreError> {
        let mut r = key_reader(bytes, b'P')?;
        let authority = r.str()?.to_owned();
        let max_levels = r.u8()?;
        let inner = match Backend::from_tag(r.u8()?)? {
            Backend::Pairing => ParamsInner::Pairing(pairing::MasterPublic::read(&mut r)?),
            Backend::TrustedDealer => ParamsInner::Dealer(dealer::DealerSecret::read(&mut r)?),
        };
        r.finish()?;
        Ok(Self {
            authority,
            max_levels,
            inner,
        })
    }
}

impl ReMasterKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(KEY_TAG);
        w.u8(b'M').str(&self.authority);
        match &self.inner {
            MasterInner::Pairing(s) => {
                w.u8(Backend::Pairing.tag());
                s.write(&mut w);
            }
            MasterInner::Dealer(d) => {
                w.u8(Backend::TrustedDealer.tag());
                d.write(&mut w);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PreError> {
        let mut r = key_reader(bytes, b'M')?;
        let authority = r.str()?.to_owned();
        let inner = match Backend::from_tag(r.u8()?)? {
            Backend::Pairing => MasterInner::Pairing(pairing::MasterSecret::read(&mut r)?),
            Backend::TrustedDealer => MasterInner::Dealer(dealer::DealerSecret::read(&mut r)?),
        };
        r.finish()?;
        Ok(Self { authority, inner })
    }
}

impl ReIdentityKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(KEY_TAG);
        w.u8(b'I').str(&self.id);
        match &self.inner {
            IdentityInner::Pairing(s) => {
                w.u8(Backend::Pairing.tag());
                s.write(&mut w);
            }
            IdentityInner::Dealer(k) => {
                w.u8(Backend::TrustedDealer.tag()).fixed(k);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PreError> {
        let mut r = key_reader(bytes, b'I')?;
        let id = r.str()?.to_owned();
        let inner = match Backend::from_tag(r.u8()?)? {
            Backend::Pairing => IdentityInner::Pairing(pairing::IdentitySecret::read(&mut r)?),
            Backend::TrustedDealer => IdentityInner::Dealer(r.fixed()?),
        };
        r.finish()?;
        Ok(Self { id, inner })
    }
}

impl ReEncKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(KEY_TAG);
        w.u8(b'R')
            .str(&self.from_id)
            .str(&self.to_id)
            .u8(self.max_levels);
        match &self.inner {
            ReKeyInner::Pairing(m) => {
                w.u8(Backend::Pairing.tag());
                m.write(&mut w);
            }
            ReKeyInner::Dealer { from, to } => {
                w.u8(Backend::TrustedDealer.tag()).fixed(from).fixed(to);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PreError> {
        let mut r = key_reader(bytes, b'R')?;
        let from_id = r.str()?.to_owned();
        let to_id = r.str()?.to_owned();
        let max_levels = r.u8()?;
        let inner = match Backend::from_tag(r.u8()?)? {
            Backend::Pairing => ReKeyInner::Pairing(Box::new(pairing::ReKeyMaterial::read(&mut r)?)),
            Backend::TrustedDealer => ReKeyInner::Dealer {
                from: r.fixed()?,
                to: r.fixed()?,
            },
        };
        r.finish()?;
        Ok(Self {
            from_id,
            to_id,
            max_levels,
            inner,
        })
    }
}

fn key_reader(bytes: &[u8], kind: u8) -> Result<Reader<'_>, PreError> {
    let mut r = Reader::new(bytes);
    r.expect_tag(KEY_TAG)?;
    if r.u8()? != kind {
        return Err(PreError::Malformed("key kind"));
    }
    Ok(r)
}
