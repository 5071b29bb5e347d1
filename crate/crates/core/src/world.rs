//! Key material, registers and the public directory produced by the trusted
//! authorities, plus the on-disk world layout.
//!
//! A world directory contains:
//!
//! ```text
//! world.json          public directory: actors, public keys, RE parameters
//! scenario.toml       the scenario the world was built from
//! keys/<actor>.json   one versioned key store per actor
//! registers/crr.json  registers/cr.json  registers/sr.json  registers/fidp.json
//! ```
//!
//! Key stores hold hex-encoded entries under stable names:
//! `dss.sk`, `pke.sk`, `re.msk.<AUTHORITY>`, `re.id.<ID>`, `re.rk.<FROM>-><TO>`,
//! `pin.key`, `issuer.dss.sk`, `card.identity_link`, `card.modified_identity_link`,
//! `card.certificate` and `card.pseudonymous_certificate`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write as _;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    dss_keygen, pke_keygen, seed_bytes, PkeKeyPair, PkePublicKey, PkeSecretKey, SigKeyPair,
    SigningKey, VerifyingKey,
};
use crate::eid::{
    derive_sspin, issue_identity_link, issue_modified_identity_link, Certificate, CentralRegister,
    CompanyRegister, EidError, ForeignIdpRegister, IdentityLink, IssuerContext, LegalPerson,
    Mandate, ModifiedIdentityLink, PinKey, ServiceRegistry, SupplementaryRegister, MOA_ID,
};
use crate::pre::{
    re_keygen, re_rkgen, re_setup_seeded, Backend, PreError, ReEncKey, ReIdentityKey,
    ReMasterKey, ReParams, SECURITY_LEVEL,
};
use crate::scenario::{Scenario, FOREIGN_IDP, INFRASTRUCTURE};

pub const KEYSTORE_VERSION: u32 = 1;
pub const WORLD_VERSION: u32 = 1;

pub const SRA: &str = "SRA";
pub const EC: &str = "EC";
pub const MIS: &str = "MIS";
pub const CR: &str = "CR";
pub const SPR_GW: &str = "SPR-GW";
pub const SR: &str = "SR";
pub const PEPS: &str = "PEPS";
pub const F_IDP: &str = FOREIGN_IDP;

/// Actors whose hosting provider is honest but curious.
pub const CLOUD_HOSTED: [&str; 4] = [MOA_ID, MIS, SPR_GW, PEPS];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "CCS")]
    Ccs,
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "MOA-ID")]
    MoaId,
    #[serde(rename = "MIS")]
    Mis,
    #[serde(rename = "SPR-GW")]
    SprGw,
    #[serde(rename = "SR")]
    Sr,
    #[serde(rename = "CR")]
    Cr,
    #[serde(rename = "PEPS")]
    Peps,
    #[serde(rename = "F-IdP")]
    FIdp,
    #[serde(rename = "SRA")]
    Sra,
    #[serde(rename = "EC")]
    Ec,
}

impl Role {
    fn of_infrastructure(id: &str) -> Option<Role> {
        Some(match id {
            SRA => Role::Sra,
            EC => Role::Ec,
            MOA_ID => Role::MoaId,
            MIS => Role::Mis,
            CR => Role::Cr,
            SPR_GW => Role::SprGw,
            SR => Role::Sr,
            PEPS => Role::Peps,
            F_IDP => Role::FIdp,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trust {
    Trusted,
    CloudHosted,
}

impl Trust {
    pub fn of(actor: &str) -> Trust {
        if CLOUD_HOSTED.contains(&actor) {
            Trust::CloudHosted
        } else {
            Trust::Trusted
        }
    }
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error("inconsistent scenario: {0}")]
    Scenario(String),
    #[error("identity model: {0}")]
    Eid(#[from] EidError),
    #[error("re-encryption: {0}")]
    Pre(#[from] PreError),
}

#[derive(Debug, Error)]
pub enum WorldIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("scenario: {0}")]
    Scenario(#[from] crate::scenario::ScenarioError),
}

/// Public entry of one actor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActorInfo {
    pub id: String,
    pub role: Role,
    pub trust: Trust,
    pub dss_pk: VerifyingKey,
    pub pke_pk: Option<PkePublicKey>,
}

/// Everything every actor may know.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Directory {
    pub seed: u64,
    pub backend: Backend,
    pub actors: BTreeMap<String, ActorInfo>,
    /// RE parameters per authority (`SRA`, `EC`).
    pub re_params: BTreeMap<String, ReParams>,
}

impl Directory {
    pub fn actor(&self, id: &str) -> Option<&ActorInfo> {
        self.actors.get(id)
    }

    pub fn params(&self, authority: &str) -> &ReParams {
        &self.re_params[authority]
    }
}

/// Contents of a citizen card (or a foreign citizen's eID token).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Card {
    pub identity_link: Option<IdentityLink>,
    pub modified_link: Option<ModifiedIdentityLink>,
    pub certificate: Certificate,
    pub pseudonymous_certificate: Option<Certificate>,
}

/// Secret material held by one actor.
#[derive(Clone)]
pub struct KeyRing {
    pub owner: String,
    pub role: Role,
    pub trust: Trust,
    pub signing: SigKeyPair,
    pub pke: Option<PkeKeyPair>,
    pub re_masters: BTreeMap<String, ReMasterKey>,
    pub re_identities: BTreeMap<String, ReIdentityKey>,
    /// Keyed `FROM->TO`.
    pub re_keys: BTreeMap<String, ReEncKey>,
    pub pin_key: Option<PinKey>,
    /// Identity Link issuing key (the SR issues links on the SRA's behalf).
    pub issuer: Option<SigKeyPair>,
    pub card: Option<Card>,
}

impl fmt::Debug for KeyRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyRing")
            .field("owner", &self.owner)
            .field("role", &self.role)
            .field("re_identities", &self.re_identities.keys().collect::<Vec<_>>())
            .field("re_keys", &self.re_keys.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

pub fn rk_name(from: &str, to: &str) -> String {
    format!("{from}->{to}")
}

impl KeyRing {
    fn new(owner: &str, role: Role, seed: u64) -> Self {
        Self {
            owner: owner.to_owned(),
            role,
            trust: Trust::of(owner),
            signing: dss_keygen(owner, Some(seed)),
            pke: None,
            re_masters: BTreeMap::new(),
            re_identities: BTreeMap::new(),
            re_keys: BTreeMap::new(),
            pin_key: None,
            issuer: None,
            card: None,
        }
    }

    pub fn re_key(&self, from: &str, to: &str) -> Option<&ReEncKey> {
        self.re_keys.get(&rk_name(from, to))
    }

    /// Names of all stored entries, as written to disk.
    pub fn entry_names(&self) -> BTreeSet<String> {
        self.entries().into_keys().collect()
    }

    fn entries(&self) -> BTreeMap<String, String> {
        let mut e = BTreeMap::new();
        e.insert("dss.sk".into(), hex::encode(self.signing.sk.to_bytes()));
        if let Some(p) = &self.pke {
            e.insert("pke.sk".into(), hex::encode(p.sk.to_bytes()));
        }
        for (a, k) in &self.re_masters {
            e.insert(format!("re.msk.{a}"), hex::encode(k.to_bytes()));
        }
        for (id, k) in &self.re_identities {
            e.insert(format!("re.id.{id}"), hex::encode(k.to_bytes()));
        }
        for (n, k) in &self.re_keys {
            e.insert(format!("re.rk.{n}"), hex::encode(k.to_bytes()));
        }
        if let Some(k) = &self.pin_key {
            e.insert("pin.key".into(), hex::encode(k));
        }
        if let Some(k) = &self.issuer {
            e.insert("issuer.dss.sk".into(), hex::encode(k.sk.to_bytes()));
            e.insert("issuer.owner".into(), hex::encode(k.owner.as_bytes()));
        }
        if let Some(c) = &self.card {
            if let Some(il) = &c.identity_link {
                e.insert("card.identity_link".into(), hex::encode(il.to_bytes()));
            }
            if let Some(il) = &c.modified_link {
                e.insert("card.modified_identity_link".into(), hex::encode(il.to_bytes()));
            }
            e.insert("card.certificate".into(), hex::encode(c.certificate.to_bytes()));
            if let Some(p) = &c.pseudonymous_certificate {
                e.insert("card.pseudonymous_certificate".into(), hex::encode(p.to_bytes()));
            }
        }
        e
    }

    fn from_entries(file: &KeyFile) -> Result<Self, String> {
        let get = |name: &str| -> Result<Option<Vec<u8>>, String> {
            file.entries
                .get(name)
                .map(|h| hex::decode(h).map_err(|e| format!("entry {name}: {e}")))
                .transpose()
        };
        let bad = |name: &str, e: &dyn fmt::Display| format!("entry {name}: {e}");
        let sk_bytes = get("dss.sk")?.ok_or("missing entry dss.sk")?;
        let sk = SigningKey::from_bytes(&sk_bytes).map_err(|e| bad("dss.sk", &e))?;
        let signing = SigKeyPair {
            pk: sk.verifying_key(),
            sk,
            owner: file.owner.clone(),
        };
        let pke = match get("pke.sk")? {
            Some(b) => {
                let sk = PkeSecretKey::from_bytes(&b).map_err(|e| bad("pke.sk", &e))?;
                Some(PkeKeyPair {
                    pk: sk.public_key(),
                    sk,
                    owner: file.owner.clone(),
                })
            }
            None => None,
        };
        let mut ring = KeyRing {
            owner: file.owner.clone(),
            role: file.role,
            trust: file.trust,
            signing,
            pke,
            re_masters: BTreeMap::new(),
            re_identities: BTreeMap::new(),
            re_keys: BTreeMap::new(),
            pin_key: None,
            issuer: None,
            card: None,
        };
        for (name, h) in &file.entries {
            let bytes = hex::decode(h).map_err(|e| bad(name, &e))?;
            if let Some(a) = name.strip_prefix("re.msk.") {
                let k = ReMasterKey::from_bytes(&bytes).map_err(|e| bad(name, &e))?;
                ring.re_masters.insert(a.to_owned(), k);
            } else if let Some(id) = name.strip_prefix("re.id.") {
                let k = ReIdentityKey::from_bytes(&bytes).map_err(|e| bad(name, &e))?;
                ring.re_identities.insert(id.to_owned(), k);
            } else if let Some(n) = name.strip_prefix("re.rk.") {
                let k = ReEncKey::from_bytes(&bytes).map_err(|e| bad(name, &e))?;
                ring.re_keys.insert(n.to_owned(), k);
            }
        }
        if let Some(b) = get("pin.key")? {
            ring.pin_key = Some(b.try_into().map_err(|_| "entry pin.key: expected 32 bytes")?);
        }
        if let Some(b) = get("issuer.dss.sk")? {
            let sk = SigningKey::from_bytes(&b).map_err(|e| bad("issuer.dss.sk", &e))?;
            let owner = get("issuer.owner")?.ok_or("missing entry issuer.owner")?;
            ring.issuer = Some(SigKeyPair {
                pk: sk.verifying_key(),
                sk,
                owner: String::from_utf8(owner).map_err(|e| bad("issuer.owner", &e))?,
            });
        }
        if let Some(b) = get("card.certificate")? {
            let certificate = Certificate::from_bytes(&b).map_err(|e| bad("card.certificate", &e))?;
            let identity_link = get("card.identity_link")?
                .map(|b| IdentityLink::from_bytes(&b))
                .transpose()
                .map_err(|e| bad("card.identity_link", &e))?;
            let modified_link = get("card.modified_identity_link")?
                .map(|b| ModifiedIdentityLink::from_bytes(&b))
                .transpose()
                .map_err(|e| bad("card.modified_identity_link", &e))?;
            let pseudonymous_certificate = get("card.pseudonymous_certificate")?
                .map(|b| Certificate::from_bytes(&b))
                .transpose()
                .map_err(|e| bad("card.pseudonymous_certificate", &e))?;
            ring.card = Some(Card {
                identity_link,
                modified_link,
                certificate,
                pseudonymous_certificate,
            });
        }
        Ok(ring)
    }
}

/// Registers held by trusted actors.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registers {
    pub crr: CentralRegister,
    pub cr: CompanyRegister,
    pub sr: SupplementaryRegister,
    pub fidp: ForeignIdpRegister,
}

#[derive(Clone, Debug)]
pub struct World {
    pub scenario: Scenario,
    pub directory: Directory,
    pub rings: BTreeMap<String, KeyRing>,
    pub registers: Registers,
}

impl World {
    pub fn ring(&self, actor: &str) -> &KeyRing {
        self.rings
            .get(actor)
            .unwrap_or_else(|| panic!("no key ring for {actor}"))
    }

    pub fn backend(&self) -> Backend {
        self.directory.backend
    }

    pub fn seed(&self) -> u64 {
        self.directory.seed
    }

    pub fn sra_pk(&self) -> VerifyingKey {
        self.ring(SRA).signing.pk
    }
}

/// Authority that issues the RE identity key of `id`.
pub fn authority_of(id: &str) -> &'static str {
    if id == PEPS {
        EC
    } else {
        SRA
    }
}

/// `sra_setup`: generates and distributes all key material, issues citizen
/// cards and fills the registers.
pub fn sra_setup(scenario: &Scenario, seed: u64, backend: Backend) -> Result<World, SetupError> {
    let mut ids = BTreeSet::new();
    let people = scenario
        .citizens
        .iter()
        .map(|c| c.entry.id.as_str())
        .chain(scenario.foreign_citizens.iter().map(|f| f.id.as_str()))
        .chain(scenario.service_providers.iter().map(|s| s.id.as_str()));
    for id in INFRASTRUCTURE.iter().copied().chain([F_IDP]).chain(people) {
        if id.is_empty() || !ids.insert(id) {
            return Err(SetupError::Scenario(format!("duplicate actor id {id:?}")));
        }
    }
    if scenario.sectors.is_empty() {
        return Err(SetupError::Scenario("no governmental sectors".into()));
    }
    for sp in &scenario.service_providers {
        if !scenario.sectors.contains(&sp.sector) {
            return Err(SetupError::Scenario(format!(
                "{} is assigned to unknown sector {:?}",
                sp.id, sp.sector
            )));
        }
    }
    if !scenario.sectors.contains(&scenario.cr_sector) {
        return Err(SetupError::Scenario(format!(
            "company register sector {:?} is not configured",
            scenario.cr_sector
        )));
    }

    let mut rng = ChaCha20Rng::from_seed(seed_bytes("setup", "world", seed));
    let mut rings: BTreeMap<String, KeyRing> = BTreeMap::new();
    for id in INFRASTRUCTURE.iter().copied().chain([F_IDP]) {
        let role = Role::of_infrastructure(id).expect("infrastructure role");
        rings.insert(id.to_owned(), KeyRing::new(id, role, seed));
    }
    for sp in &scenario.service_providers {
        rings.insert(sp.id.clone(), KeyRing::new(&sp.id, Role::Sp, seed));
    }

    // RE.Setup at both authorities.
    let (sra_params, sra_msk) = re_setup_seeded(SRA, SECURITY_LEVEL, scenario.max_levels, backend, seed)?;
    let (ec_params, ec_msk) = re_setup_seeded(EC, SECURITY_LEVEL, scenario.max_levels, backend, seed)?;
    let params_for = |id: &str| if authority_of(id) == EC { &ec_params } else { &sra_params };

    let sk_moa = re_keygen(&sra_msk, MOA_ID)?;
    let sk_mis = re_keygen(&sra_msk, MIS)?;
    let sk_sprgw = re_keygen(&sra_msk, SPR_GW)?;
    let sk_peps = re_keygen(&ec_msk, PEPS)?;

    let rk = |sk: &ReIdentityKey, from: &str, to: &str, rng: &mut ChaCha20Rng| {
        re_rkgen(params_for(to), sk, from, to, rng).map(|k| (rk_name(from, to), k))
    };
    let moa_keys = [
        rk(&sk_moa, MOA_ID, MIS, &mut rng)?,
        rk(&sk_moa, MOA_ID, SPR_GW, &mut rng)?,
    ];
    let mis_keys = [rk(&sk_mis, MIS, CR, &mut rng)?, rk(&sk_mis, MIS, MOA_ID, &mut rng)?];
    let sprgw_keys = [
        rk(&sk_sprgw, SPR_GW, SR, &mut rng)?,
        rk(&sk_sprgw, SPR_GW, MOA_ID, &mut rng)?,
    ];
    let peps_keys = [rk(&sk_peps, PEPS, MOA_ID, &mut rng)?];

    {
        let sra = rings.get_mut(SRA).expect("SRA ring");
        sra.re_masters.insert(SRA.into(), sra_msk.clone());
        for k in [&sk_moa, &sk_mis, &sk_sprgw] {
            sra.re_identities.insert(k.id().to_owned(), k.clone());
        }
    }
    {
        let ec = rings.get_mut(EC).expect("EC ring");
        ec.re_masters.insert(EC.into(), ec_msk.clone());
        ec.re_identities.insert(PEPS.into(), sk_peps.clone());
    }
    for (holder, keys) in [
        (MOA_ID, &moa_keys[..]),
        (MIS, &mis_keys[..]),
        (SPR_GW, &sprgw_keys[..]),
        (PEPS, &peps_keys[..]),
    ] {
        let r = rings.get_mut(holder).expect("proxy ring");
        r.re_keys.extend(keys.iter().cloned());
    }
    for id in [CR, SR] {
        let k = re_keygen(&sra_msk, id)?;
        rings.get_mut(id).expect("ring").re_identities.insert(id.to_owned(), k);
    }

    // Service provider registration.
    let mut registry = ServiceRegistry::default();
    for sp in &scenario.service_providers {
        let (sk, rk) = registry.register(&sra_msk, &sra_params, &sk_moa, &sp.id, &mut rng)?;
        rings.get_mut(&sp.id).expect("SP ring").re_identities.insert(sp.id.clone(), sk);
        rings
            .get_mut(MOA_ID)
            .expect("MOA-ID ring")
            .re_keys
            .insert(rk_name(MOA_ID, &sp.id), rk);
    }

    // The SRA's sourcePIN key, shared with the SR for foreign registrations.
    let mut pin_key = [0u8; 32];
    rng.fill_bytes(&mut pin_key);
    let sra_signing = rings[SRA].signing.clone();
    rings.get_mut(SRA).expect("SRA").pin_key = Some(pin_key);
    {
        let sr = rings.get_mut(SR).expect("SR");
        sr.pin_key = Some(pin_key);
        sr.issuer = Some(sra_signing.clone());
    }

    let mut registers = Registers {
        cr: CompanyRegister::new(&scenario.cr_sector),
        ..Registers::default()
    };
    for c in &scenario.citizens {
        registers.crr.insert(c.entry.clone());
    }

    // Citizen cards.
    let issuer = IssuerContext {
        signing: &sra_signing,
        pin_key: &pin_key,
        re_params: &sra_params,
    };
    for c in &scenario.citizens {
        let id = &c.entry.id;
        let mut ring = KeyRing::new(id, Role::Ccs, seed);
        let pke = pke_keygen(id, Some(seed));
        let certificate = Certificate::issue(
            &sra_signing,
            &format!("AT-CERT-{id}"),
            &c.entry.full_name(),
            "AT",
            ring.signing.pk,
        );
        let pseudonymous = Certificate::issue_pseudonymous(&sra_signing, &format!("AT-PSN-{id}"), ring.signing.pk);
        let il = issue_identity_link(&issuer, &registers.crr, id, certificate.serial())?;
        let mil = issue_modified_identity_link(&issuer, &registers.crr, id, &scenario.sectors, MOA_ID, &mut rng)?;
        ring.pke = Some(pke);
        ring.card = Some(Card {
            identity_link: Some(il),
            modified_link: Some(mil),
            certificate,
            pseudonymous_certificate: Some(pseudonymous),
        });
        rings.insert(id.clone(), ring);
    }

    // Company register and mandates keyed by ssPIN_CR.
    for co in &scenario.companies {
        registers.cr.companies.insert(
            co.register_number.clone(),
            LegalPerson {
                register_number: co.register_number.clone(),
                name: co.name.clone(),
            },
        );
    }
    for m in &scenario.mandates {
        let rep = registers.crr.get(&m.representative)?.clone();
        let sp = registers.crr.source_pin(&pin_key, &m.representative)?;
        let sspin = derive_sspin(&sp, &scenario.cr_sector)?;
        let mandate = Mandate {
            mand_id: m.id.clone(),
            mandator: registers.cr.companies[&m.mandator].clone(),
            representative: rep.full_name(),
            representative_ref: rep.id.clone(),
            empowerment: m.empowerment.clone(),
            register: CR.into(),
        };
        registers.cr.add_mandate(&sspin, mandate)?;
    }

    // Foreign citizens: tokens issued by the F-IdP.
    let fidp_signing = rings[F_IDP].signing.clone();
    for f in &scenario.foreign_citizens {
        let mut ring = KeyRing::new(&f.id, Role::Ccs, seed);
        let certificate = Certificate::issue(
            &fidp_signing,
            &format!("{}-CERT-{}", f.data.country, f.id),
            &f.data.full_name(),
            &f.data.country,
            ring.signing.pk,
        );
        ring.card = Some(Card {
            identity_link: None,
            modified_link: None,
            certificate,
            pseudonymous_certificate: None,
        });
        rings.insert(f.id.clone(), ring);
        registers.fidp.citizens.insert(f.id.clone(), f.data.clone());
    }

    let actors = rings
        .values()
        .map(|r| {
            (
                r.owner.clone(),
                ActorInfo {
                    id: r.owner.clone(),
                    role: r.role,
                    trust: r.trust,
                    dss_pk: r.signing.pk,
                    pke_pk: r.pke.as_ref().map(|p| p.pk),
                },
            )
        })
        .collect();
    let directory = Directory {
        seed,
        backend,
        actors,
        re_params: [(SRA.to_owned(), sra_params), (EC.to_owned(), ec_params)].into(),
    };
    Ok(World {
        scenario: scenario.clone(),
        directory,
        rings,
        registers,
    })
}

#[derive(Serialize, Deserialize)]
struct KeyFile {
    version: u32,
    owner: String,
    role: Role,
    trust: Trust,
    entries: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ActorRecord {
    role: Role,
    trust: Trust,
    dss_pk: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pke_pk: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct WorldFile {
    version: u32,
    scenario: String,
    seed: u64,
    backend: String,
    max_levels: u8,
    sectors: Vec<String>,
    service_providers: BTreeMap<String, String>,
    re_params: BTreeMap<String, String>,
    actors: BTreeMap<String, ActorRecord>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WorldIoError + '_ {
    move |source| WorldIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn fmt_err(path: &Path, message: impl fmt::Display) -> WorldIoError {
    WorldIoError::Format {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), WorldIoError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("world records serialize");
    s.push(b'\n');
    s
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, WorldIoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| fmt_err(path, e))
}

impl World {
    pub fn save(&self, dir: &Path) -> Result<(), WorldIoError> {
        let d = &self.directory;
        let file = WorldFile {
            version: WORLD_VERSION,
            scenario: self.scenario.name.clone(),
            seed: d.seed,
            backend: d.backend.label().to_owned(),
            max_levels: self.scenario.max_levels,
            sectors: self.scenario.sectors.clone(),
            service_providers: self
                .scenario
                .service_providers
                .iter()
                .map(|s| (s.id.clone(), s.sector.clone()))
                .collect(),
            re_params: d
                .re_params
                .iter()
                .map(|(a, p)| (a.clone(), hex::encode(p.to_bytes())))
                .collect(),
            actors: d
                .actors
                .iter()
                .map(|(id, a)| {
                    (
                        id.clone(),
                        ActorRecord {
                            role: a.role,
                            trust: a.trust,
                            dss_pk: hex::encode(a.dss_pk.to_bytes()),
                            pke_pk: a.pke_pk.map(|p| hex::encode(p.to_bytes())),
                        },
                    )
                })
                .collect(),
        };
        write_atomic(&dir.join("world.json"), &to_json(&file))?;
        write_atomic(&dir.join("scenario.toml"), self.scenario.source.as_bytes())?;
        for ring in self.rings.values() {
            let kf = KeyFile {
                version: KEYSTORE_VERSION,
                owner: ring.owner.clone(),
                role: ring.role,
                trust: ring.trust,
                entries: ring.entries(),
            };
            write_atomic(&dir.join("keys").join(format!("{}.json", ring.owner)), &to_json(&kf))?;
        }
        let regs = dir.join("registers");
        write_atomic(&regs.join("crr.json"), &to_json(&self.registers.crr))?;
        write_atomic(&regs.join("cr.json"), &to_json(&self.registers.cr))?;
        write_atomic(&regs.join("sr.json"), &to_json(&self.registers.sr))?;
        write_atomic(&regs.join("fidp.json"), &to_json(&self.registers.fidp))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, WorldIoError> {
        let wpath = dir.join("world.json");
        let file: WorldFile = read_json(&wpath)?;
        if file.version != WORLD_VERSION {
            return Err(fmt_err(&wpath, format!("unsupported world version {}", file.version)));
        }
        let scenario = Scenario::load(&dir.join("scenario.toml"))?;
        let backend: Backend = file.backend.parse().map_err(|e: String| fmt_err(&wpath, e))?;
        let mut re_params = BTreeMap::new();
        for (a, h) in &file.re_params {
            let bytes = hex::decode(h).map_err(|e| fmt_err(&wpath, e))?;
            re_params.insert(a.clone(), ReParams::from_bytes(&bytes).map_err(|e| fmt_err(&wpath, e))?);
        }
        let mut actors = BTreeMap::new();
        for (id, r) in &file.actors {
            let pk = hex::decode(&r.dss_pk).map_err(|e| fmt_err(&wpath, e))?;
            let pke_pk = match &r.pke_pk {
                Some(h) => {
                    let b = hex::decode(h).map_err(|e| fmt_err(&wpath, e))?;
                    Some(PkePublicKey::from_bytes(&b).map_err(|e| fmt_err(&wpath, e))?)
                }
                None => None,
            };
            actors.insert(
                id.clone(),
                ActorInfo {
                    id: id.clone(),
                    role: r.role,
                    trust: r.trust,
                    dss_pk: VerifyingKey::from_bytes(&pk).map_err(|e| fmt_err(&wpath, e))?,
                    pke_pk,
                },
            );
        }
        let mut rings = BTreeMap::new();
        for id in actors.keys() {
            let kpath = dir.join("keys").join(format!("{id}.json"));
            let kf: KeyFile = read_json(&kpath)?;
            if kf.version != KEYSTORE_VERSION {
                return Err(fmt_err(&kpath, format!("unsupported key store version {}", kf.version)));
            }
            if &kf.owner != id {
                return Err(fmt_err(&kpath, format!("key store belongs to {}", kf.owner)));
            }
            let ring = KeyRing::from_entries(&kf).map_err(|e| fmt_err(&kpath, e))?;
            rings.insert(id.clone(), ring);
        }
        let regs = dir.join("registers");
        let registers = Registers {
            crr: read_json(&regs.join("crr.json"))?,
            cr: read_json(&regs.join("cr.json"))?,
            sr: read_json(&regs.join("sr.json"))?,
            fidp: read_json(&regs.join("fidp.json"))?,
        };
        Ok(World {
            scenario,
            directory: Directory {
                seed: file.seed,
                backend,
                actors,
                re_params,
            },
            rings,
            registers,
        })
    }
}
