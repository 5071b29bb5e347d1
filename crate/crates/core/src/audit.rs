//! Privacy auditor over observation logs.
//!
//! Each readable observation is mapped to one disclosure category and the
//! categories seen per cloud-hosted actor are compared with a policy that
//! mirrors the disclosure table: the current-mode rows list what the legacy
//! deployment reveals, the cloud rows what remains after the redesign.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::eid::{
    derive_sspin, label_sector, Certificate, ForeignCitizenData, IdentityLink, Mandate,
    SupplementaryRegister,
};
use crate::harness::{Observation, RunOutput, Visibility};
use crate::pre::Backend;
use crate::scenario::{Mode, UseCase};
use crate::world::{World, CLOUD_HOSTED, MIS, PEPS, SPR_GW, SRA};
use crate::eid::MOA_ID;

/// Observation category. The first eight are personal data and appear in
/// the disclosure table; the rest are reported separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    IdentityLink,
    SsPin,
    SigningCertificate,
    MandateInfo,
    MandateId,
    HomeCountry,
    RequestedData,
    GovernmentalSector,
    Routing,
    PseudonymousCertificate,
    Uncategorized,
}

impl Category {
    pub const PERSONAL: [Category; 8] = [
        Category::IdentityLink,
        Category::SsPin,
        Category::SigningCertificate,
        Category::MandateInfo,
        Category::MandateId,
        Category::HomeCountry,
        Category::RequestedData,
        Category::GovernmentalSector,
    ];

    pub fn is_personal(self) -> bool {
        Self::PERSONAL.contains(&self)
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::IdentityLink => "Identity Link (name, date of birth, sourcePIN)",
            Category::SsPin => "ssPIN",
            Category::SigningCertificate => "Signing certificate",
            Category::MandateInfo => "All information of the mandate",
            Category::MandateId => "MandateID",
            Category::HomeCountry => "Citizen's home country",
            Category::RequestedData => "All requested citizen data",
            Category::GovernmentalSector => "Governmental sector",
            Category::Routing => "routing metadata",
            Category::PseudonymousCertificate => "pseudonymous certificate",
            Category::Uncategorized => "uncategorized",
        }
    }

    /// Precedence when one value belongs to several categories.
    fn rank(self) -> u8 {
        match self {
            Category::IdentityLink => 0,
            Category::SsPin => 1,
            Category::MandateInfo => 2,
            Category::SigningCertificate => 3,
            Category::RequestedData => 4,
            Category::MandateId => 5,
            Category::HomeCountry => 6,
            Category::GovernmentalSector => 7,
            _ => 8,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Minimum length of a registry value searched as a substring.
const SUBSTRING_MIN: usize = 8;

/// Every scenario value the auditor can attribute, with its category.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    values: BTreeMap<Vec<u8>, Category>,
}

impl Registry {
    pub fn insert(&mut self, value: impl Into<Vec<u8>>, cat: Category) {
        let value = value.into();
        if value.is_empty() {
            return;
        }
        match self.values.get(&value) {
            Some(old) if old.rank() <= cat.rank() => {}
            _ => {
                self.values.insert(value, cat);
            }
        }
    }

    pub fn get(&self, value: &[u8]) -> Option<Category> {
        self.values.get(value).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Collects identifiers, attributes, certificates, mandates and sectors
    /// of everyone in the world.
    pub fn from_world(world: &World) -> Self {
        let mut r = Registry::default();
        let s = &world.scenario;
        let pin_key = world.ring(SRA).pin_key;
        for sector in &s.sectors {
            r.insert(sector.as_bytes(), Category::GovernmentalSector);
        }
        for c in &s.citizens {
            let e = &c.entry;
            for v in [e.full_name(), e.given_name.clone(), e.family_name.clone(), e.date_of_birth.clone(), e.crr_number.clone()] {
                r.insert(v, Category::IdentityLink);
            }
            if let Some(key) = &pin_key {
                if let Ok(sp) = world.registers.crr.source_pin(key, &e.id) {
                    r.insert(sp.as_bytes(), Category::IdentityLink);
                    r.insert(sp.value().as_bytes(), Category::IdentityLink);
                    for sector in &s.sectors {
                        if let Ok(pin) = derive_sspin(&sp, sector) {
                            r.insert(pin.value().to_vec(), Category::SsPin);
                            r.insert(pin.to_hex(), Category::SsPin);
                        }
                    }
                }
            }
        }
        for f in &s.foreign_citizens {
            let d = &f.data;
            for v in [d.full_name(), d.given_name.clone(), d.family_name.clone(), d.date_of_birth.clone(), d.identifier.clone()] {
                r.insert(v, Category::RequestedData);
            }
            r.insert(d.to_bytes(), Category::RequestedData);
            r.insert(d.country.as_bytes(), Category::HomeCountry);
            if let Some(key) = &pin_key {
                let (row, _) = SupplementaryRegister::default().register(key, d);
                r.insert(row.source_pin.as_bytes(), Category::IdentityLink);
                for sector in &s.sectors {
                    if let Ok(pin) = derive_sspin(&row.source_pin, sector) {
                        r.insert(pin.value().to_vec(), Category::SsPin);
                        r.insert(pin.to_hex(), Category::SsPin);
                    }
                }
            }
        }
        for ring in world.rings.values() {
            if let Some(card) = &ring.card {
                r.insert(card.certificate.to_bytes(), Category::SigningCertificate);
                if let Some(il) = &card.identity_link {
                    r.insert(il.to_bytes(), Category::IdentityLink);
                }
            }
        }
        for m in world.registers.cr.mandates.values() {
            r.insert(m.to_bytes(), Category::MandateInfo);
            r.insert(m.empowerment.as_bytes(), Category::MandateInfo);
            r.insert(m.mandator.name.as_bytes(), Category::MandateInfo);
            r.insert(m.mandator.register_number.as_bytes(), Category::MandateInfo);
            r.insert(m.mand_id.as_bytes(), Category::MandateId);
        }
        r
    }

    /// Category of a readable observation.
    pub fn classify(&self, class: Visibility, value: &[u8]) -> Category {
        if let Some(c) = structural(value) {
            return c;
        }
        if let Some(c) = self.get(value) {
            return c;
        }
        if let Some(sector) = std::str::from_utf8(value).ok().and_then(label_sector) {
            if self.get(sector.as_bytes()) == Some(Category::GovernmentalSector) {
                return Category::GovernmentalSector;
            }
        }
        let hit = self
            .values
            .iter()
            .filter(|(v, _)| v.len() >= SUBSTRING_MIN && contains(value, v))
            .map(|(_, c)| *c)
            .min_by_key(|c| c.rank());
        if let Some(c) = hit {
            return c;
        }
        match class {
            Visibility::Metadata => Category::Routing,
            _ => Category::Uncategorized,
        }
    }
}

/// Recognizes serialized protocol objects by decoding them.
fn structural(value: &[u8]) -> Option<Category> {
    if IdentityLink::from_bytes(value).is_ok() {
        return Some(Category::IdentityLink);
    }
    if let Ok(c) = Certificate::from_bytes(value) {
        return Some(if c.is_pseudonymous() {
            Category::PseudonymousCertificate
        } else {
            Category::SigningCertificate
        });
    }
    if Mandate::from_bytes(value).is_ok() {
        return Some(Category::MandateInfo);
    }
    if ForeignCitizenData::from_bytes(value).is_ok() {
        return Some(Category::RequestedData);
    }
    None
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    needle.len() <= hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Disclosure table cell for `actor`.
pub fn disclosure_cell(use_case: UseCase, mode: Mode, actor: &str) -> BTreeSet<Category> {
    use Category::*;
    let v: &[Category] = match (mode, use_case, actor) {
        (Mode::Current, UseCase::Austrian, MOA_ID) => &[IdentityLink, SsPin, SigningCertificate, GovernmentalSector],
        (Mode::Current, UseCase::Representation, MOA_ID | MIS) => &[
            IdentityLink,
            SsPin,
            SigningCertificate,
            MandateInfo,
            MandateId,
            GovernmentalSector,
        ],
        (Mode::Current, UseCase::Foreign, MOA_ID) => &[
            HomeCountry,
            RequestedData,
            SigningCertificate,
            IdentityLink,
            SsPin,
            GovernmentalSector,
        ],
        (Mode::Current, UseCase::Foreign, SPR_GW) => &[HomeCountry, RequestedData, SigningCertificate, IdentityLink],
        (Mode::Current, UseCase::Foreign, PEPS) => &[RequestedData, SigningCertificate],
        (Mode::Cloud, _, MOA_ID) => &[GovernmentalSector],
        (Mode::Cloud, UseCase::Representation, MIS) => &[MandateId],
        _ => &[],
    };
    v.iter().copied().collect()
}

/// Categories allowed beyond the table cell, each with its justification.
pub fn annotations(use_case: UseCase, mode: Mode, actor: &str) -> BTreeMap<Category, &'static str> {
    let mut m = BTreeMap::new();
    if mode == Mode::Cloud && use_case == UseCase::Foreign {
        match actor {
            SPR_GW => {
                m.insert(
                    Category::GovernmentalSector,
                    "the registration request carries the sector so the SR can select the ssPIN block",
                );
            }
            MOA_ID => {
                m.insert(
                    Category::HomeCountry,
                    "MOA-ID needs the home country to route the citizen to the right PEPS",
                );
            }
            _ => {}
        }
    }
    m
}

/// Allowed personal categories per instrumented actor for one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosurePolicy {
    pub use_case: UseCase,
    pub mode: Mode,
    pub allowed: BTreeMap<String, BTreeSet<Category>>,
    pub annotated: BTreeMap<String, BTreeMap<Category, String>>,
}

impl DisclosurePolicy {
    pub fn for_run(use_case: UseCase, mode: Mode) -> Self {
        let mut allowed = BTreeMap::new();
        let mut annotated = BTreeMap::new();
        for actor in CLOUD_HOSTED {
            let notes: BTreeMap<Category, String> = annotations(use_case, mode, actor)
                .into_iter()
                .map(|(c, s)| (c, s.to_owned()))
                .collect();
            let mut set = disclosure_cell(use_case, mode, actor);
            set.extend(notes.keys().copied());
            allowed.insert(actor.to_owned(), set);
            annotated.insert(actor.to_owned(), notes);
        }
        Self {
            use_case,
            mode,
            allowed,
            annotated,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub session: String,
    pub step: String,
    pub field: String,
    pub category: Category,
    #[serde(with = "crate::hexser::bytes")]
    pub value: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorReport {
    pub actor: String,
    /// Personal-data categories seen in plaintext.
    pub observed: BTreeSet<Category>,
    /// Non-personal readable items by category.
    pub other: BTreeMap<Category, usize>,
    /// Allowed categories outside the table cell that were observed.
    pub annotations: BTreeMap<Category, String>,
    pub violations: Vec<Violation>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub use_case: UseCase,
    pub mode: Mode,
    pub seed: u64,
    pub actors: Vec<ActorReport>,
    pub verdict: Verdict,
}

impl AuditReport {
    pub fn actor(&self, id: &str) -> Option<&ActorReport> {
        self.actors.iter().find(|a| a.actor == id)
    }

    pub fn violations(&self) -> impl Iterator<Item = (&str, &Violation)> {
        self.actors
            .iter()
            .flat_map(|a| a.violations.iter().map(move |v| (a.actor.as_str(), v)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AuditError {
    /// Privacy claims are never certified on the trusted-dealer double.
    Refused(Backend),
    Mismatch { expected: UseCase, found: UseCase },
    ModeMismatch { expected: Mode, found: Mode },
}

impl fmt::Display for AuditError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuditError::Refused(b) => write!(
                f,
                "refusing to audit a run on the {} backend: it holds every key and proves nothing about confidentiality",
                b.label()
            ),
            AuditError::Mismatch { expected, found } => {
                write!(f, "policy is for {expected} but the run contains a {found} session")
            }
            AuditError::ModeMismatch { expected, found } => {
                write!(f, "policy is for {expected} mode but the run used {found} mode")
            }
        }
    }
}

impl std::error::Error for AuditError {}

fn audit_actor(
    actor: &str,
    entries: &[Observation],
    registry: &Registry,
    policy: &DisclosurePolicy,
) -> ActorReport {
    let allowed = policy.allowed.get(actor).cloned().unwrap_or_default();
    let notes = policy.annotated.get(actor).cloned().unwrap_or_default();
    let mut observed = BTreeSet::new();
    let mut other: BTreeMap<Category, usize> = BTreeMap::new();
    let mut violations = Vec::new();
    for o in entries {
        let Some(value) = o.value.as_deref() else {
            continue;
        };
        let cat = registry.classify(o.class, value);
        if cat.is_personal() {
            observed.insert(cat);
        } else {
            *other.entry(cat).or_default() += 1;
        }
        let bad = cat == Category::Uncategorized || (cat.is_personal() && !allowed.contains(&cat));
        if bad {
            violations.push(Violation {
                session: o.session.clone(),
                step: o.step.clone(),
                field: o.field.clone(),
                category: cat,
                value: value.to_vec(),
            });
        }
    }
    let annotations = notes
        .into_iter()
        .filter(|(c, _)| observed.contains(c))
        .collect();
    let verdict = if violations.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    ActorReport {
        actor: actor.to_owned(),
        observed,
        other,
        annotations,
        violations,
        verdict,
    }
}

/// Audits the logs of `run` against `policy`.
pub fn audit_run(
    run: &RunOutput,
    registry: &Registry,
    policy: &DisclosurePolicy,
) -> Result<AuditReport, AuditError> {
    if !run.backend.is_sound() {
        return Err(AuditError::Refused(run.backend));
    }
    if run.mode != policy.mode {
        return Err(AuditError::ModeMismatch {
            expected: policy.mode,
            found: run.mode,
        });
    }
    if let Some(s) = run.sessions.iter().find(|s| s.use_case != policy.use_case) {
        return Err(AuditError::Mismatch {
            expected: policy.use_case,
            found: s.use_case,
        });
    }
    let empty = Vec::new();
    let actors: Vec<ActorReport> = CLOUD_HOSTED
        .iter()
        .map(|a| {
            let entries = run.logs.get(*a).map(|l| &l.entries).unwrap_or(&empty);
            audit_actor(a, entries, registry, policy)
        })
        .collect();
    let verdict = if actors.iter().all(|a| a.verdict == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(AuditReport {
        use_case: policy.use_case,
        mode: policy.mode,
        seed: run.seed,
        actors,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_cells_for_cloud_keep_only_sector_and_mandate_id() {
        for u in UseCase::ALL {
            assert_eq!(disclosure_cell(u, Mode::Cloud, MOA_ID), [Category::GovernmentalSector].into());
            assert!(disclosure_cell(u, Mode::Cloud, PEPS).is_empty());
            assert!(disclosure_cell(u, Mode::Cloud, SPR_GW).is_empty());
        }
        assert_eq!(disclosure_cell(UseCase::Representation, Mode::Cloud, MIS), [Category::MandateId].into());
        assert!(disclosure_cell(UseCase::Austrian, Mode::Cloud, MIS).is_empty());
    }

    #[test]
    fn registry_keeps_the_highest_precedence_category() {
        let mut r = Registry::default();
        r.insert("x", Category::GovernmentalSector);
        r.insert("x", Category::IdentityLink);
        r.insert("x", Category::MandateId);
        assert_eq!(r.get(b"x"), Some(Category::IdentityLink));
    }

    #[test]
    fn metadata_without_a_match_is_routing_and_plaintext_is_uncategorized() {
        let r = Registry::default();
        assert_eq!(r.classify(Visibility::Metadata, b"3"), Category::Routing);
        assert_eq!(r.classify(Visibility::Plaintext, b"3"), Category::Uncategorized);
    }

    #[test]
    fn sector_labels_are_sectors() {
        let mut r = Registry::default();
        r.insert("tax", Category::GovernmentalSector);
        assert_eq!(r.classify(Visibility::Metadata, b"ssPIN:tax"), Category::GovernmentalSector);
    }
}
