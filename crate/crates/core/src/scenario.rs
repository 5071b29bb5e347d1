//! Scenario files (TOML): citizens, companies and mandates, foreign
//! citizens, online applications, sectors, consent policy and the sessions
//! to run.
//!
//! ```toml
//! sectors = ["tax", "health", "economy"]
//!
//! [mandate_register]
//! sector = "economy"
//!
//! [[citizens]]
//! id = "C_1"
//! given_name = "Maria"
//! family_name = "Huber"
//! date_of_birth = "1980-04-12"
//! crr_number = "000123456789"
//! consent = "approve"            # or deny-identity-link, deny-signature
//!
//! [[service_providers]]
//! id = "S_1"
//! sector = "tax"
//!
//! [[sessions]]
//! use_case = "austrian"          # representation, foreign
//! subject = "C_1"
//! sp = "S_1"
//! ```
//!
//! Companies (`register_number`, `name`), mandates (`id`, `mandator`,
//! `representative`, `empowerment`) and foreign citizens (`id`, names,
//! `date_of_birth`, `identifier`, `country`, `consent` of `approve` or
//! `fail-authentication`) follow the same pattern. An optional `mode` sets
//! the default deployment mode and an optional `[leak]` table makes one
//! instrumented actor disclose a citizen attribute, for auditor checks.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::eid::{CitizenEntry, ForeignCitizenData};
use crate::pre::{DEFAULT_MAX_LEVELS, MIN_MAX_LEVELS};

pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

/// Infrastructure actors present in every world.
pub const INFRASTRUCTURE: [&str; 8] = ["SRA", "EC", "MOA-ID", "MIS", "CR", "SPR-GW", "SR", "PEPS"];
pub const FOREIGN_IDP: &str = "F-IdP";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UseCase {
    Austrian,
    Representation,
    Foreign,
}

impl UseCase {
    pub const ALL: [UseCase; 3] = [UseCase::Austrian, UseCase::Representation, UseCase::Foreign];

    pub fn as_str(self) -> &'static str {
        match self {
            UseCase::Austrian => "austrian",
            UseCase::Representation => "representation",
            UseCase::Foreign => "foreign",
        }
    }
}

impl fmt::Display for UseCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UseCase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "austrian" => Ok(UseCase::Austrian),
            "representation" => Ok(UseCase::Representation),
            "foreign" => Ok(UseCase::Foreign),
            other => Err(format!(
                "unknown use case {other:?} (expected austrian, representation or foreign)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Current,
    Cloud,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Current, Mode::Cloud];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Current => "current",
            Mode::Cloud => "cloud",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "current" => Ok(Mode::Current),
            "cloud" => Ok(Mode::Cloud),
            other => Err(format!("unknown mode {other:?} (expected current or cloud)")),
        }
    }
}

/// Scripted decision of the citizen (or their foreign IdP login).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Consent {
    #[default]
    Approve,
    DenyIdentityLink,
    DenySignature,
    FailAuthentication,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CitizenSpec {
    pub entry: CitizenEntry,
    pub consent: Consent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForeignCitizenSpec {
    pub id: String,
    pub data: ForeignCitizenData,
    pub consent: Consent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServiceProviderSpec {
    pub id: String,
    pub sector: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompanySpec {
    pub register_number: String,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MandateSpec {
    pub id: String,
    pub mandator: String,
    pub representative: String,
    pub empowerment: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionSpec {
    pub id: String,
    pub use_case: UseCase,
    pub subject: String,
    pub sp: String,
    pub mandate: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakAttribute {
    Name,
    DateOfBirth,
    SourcePin,
}

/// Instrumented actor that records a citizen attribute it should never see.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeakSpec {
    pub actor: String,
    pub attribute: LeakAttribute,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub max_levels: u8,
    pub mode: Option<Mode>,
    pub sectors: Vec<String>,
    pub cr_sector: String,
    pub citizens: Vec<CitizenSpec>,
    pub companies: Vec<CompanySpec>,
    pub mandates: Vec<MandateSpec>,
    pub foreign_citizens: Vec<ForeignCitizenSpec>,
    pub service_providers: Vec<ServiceProviderSpec>,
    pub sessions: Vec<SessionSpec>,
    pub leak: Option<LeakSpec>,
    /// Original file text, kept so a world directory can reproduce it.
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    max_levels: Option<Spanned<u8>>,
    #[serde(default)]
    mode: Option<Spanned<String>>,
    sectors: Spanned<Vec<Spanned<String>>>,
    mandate_register: Option<RawMandateRegister>,
    #[serde(default)]
    citizens: Vec<RawCitizen>,
    #[serde(default)]
    companies: Vec<RawCompany>,
    #[serde(default)]
    mandates: Vec<RawMandate>,
    #[serde(default)]
    foreign_citizens: Vec<RawForeign>,
    #[serde(default)]
    service_providers: Vec<RawSp>,
    #[serde(default)]
    sessions: Vec<RawSession>,
    #[serde(default)]
    leak: Option<RawLeak>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMandateRegister {
    sector: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCitizen {
    id: Spanned<String>,
    given_name: String,
    family_name: String,
    date_of_birth: String,
    crr_number: String,
    #[serde(default)]
    consent: Consent,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompany {
    register_number: Spanned<String>,
    name: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMandate {
    id: Spanned<String>,
    mandator: Spanned<String>,
    representative: Spanned<String>,
    empowerment: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForeign {
    id: Spanned<String>,
    given_name: String,
    family_name: String,
    date_of_birth: String,
    identifier: Spanned<String>,
    country: String,
    #[serde(default)]
    consent: Consent,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSp {
    id: Spanned<String>,
    sector: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSession {
    use_case: Spanned<String>,
    subject: Spanned<String>,
    sp: Spanned<String>,
    #[serde(default)]
    mandate: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLeak {
    actor: Spanned<String>,
    attribute: LeakAttribute,
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn line_of(&self, offset: usize) -> usize {
        self.src[..offset.min(self.src.len())]
            .bytes()
            .filter(|&b| b == b'\n')
            .count()
            + 1
    }

    fn err<T>(&self, at: &Spanned<T>, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            line: Some(self.line_of(at.span().start)),
            message: message.into(),
        }
    }
}

fn plain(message: impl Into<String>) -> ScenarioError {
    ScenarioError {
        line: None,
        message: message.into(),
    }
}

impl Scenario {
    pub fn default_scenario() -> Self {
        Self::parse(DEFAULT_SCENARIO).expect("bundled default scenario is valid")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| plain(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|mut e| {
            e.message = format!("{}: {}", path.display(), e.message);
            e
        })
    }

    pub fn parse(src: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario = toml::from_str(src).map_err(|e| ScenarioError {
            line: e.span().map(|s| Ctx { src }.line_of(s.start)),
            message: e.message().trim().to_owned(),
        })?;
        let cx = Ctx { src };

        let max_levels = match &raw.max_levels {
            Some(m) if *m.get_ref() < MIN_MAX_LEVELS => {
                return Err(cx.err(m, format!("max_levels must be at least {MIN_MAX_LEVELS}")))
            }
            Some(m) => *m.get_ref(),
            None => DEFAULT_MAX_LEVELS,
        };
        let mode = match &raw.mode {
            Some(m) => Some(m.get_ref().parse::<Mode>().map_err(|e| cx.err(m, e))?),
            None => None,
        };

        if raw.sectors.get_ref().is_empty() {
            return Err(cx.err(&raw.sectors, "at least one governmental sector is required"));
        }
        let mut sectors = Vec::new();
        for s in raw.sectors.get_ref() {
            if s.get_ref().is_empty() {
                return Err(cx.err(s, "sector labels must be non-empty"));
            }
            if sectors.contains(s.get_ref()) {
                return Err(cx.err(s, format!("duplicate sector {:?}", s.get_ref())));
            }
            sectors.push(s.get_ref().clone());
        }
        let known_sector = |s: &Spanned<String>| -> Result<String, ScenarioError> {
            if sectors.contains(s.get_ref()) {
                Ok(s.get_ref().clone())
            } else {
                Err(cx.err(s, format!("unknown sector {:?}", s.get_ref())))
            }
        };
        let cr_sector = match &raw.mandate_register {
            Some(r) => known_sector(&r.sector)?,
            None => return Err(plain("missing [mandate_register] table with the register's sector")),
        };

        let mut actor_ids: BTreeSet<String> = INFRASTRUCTURE.iter().map(|s| s.to_string()).collect();
        actor_ids.insert(FOREIGN_IDP.to_owned());
        let mut claim = |id: &Spanned<String>| -> Result<String, ScenarioError> {
            let v = id.get_ref();
            if v.is_empty() {
                return Err(cx.err(id, "actor ids must be non-empty"));
            }
            if !actor_ids.insert(v.clone()) {
                return Err(cx.err(id, format!("duplicate actor id {v:?}")));
            }
            Ok(v.clone())
        };

        let mut citizens = Vec::new();
        for c in &raw.citizens {
            citizens.push(CitizenSpec {
                entry: CitizenEntry {
                    id: claim(&c.id)?,
                    given_name: c.given_name.clone(),
                    family_name: c.family_name.clone(),
                    date_of_birth: c.date_of_birth.clone(),
                    crr_number: c.crr_number.clone(),
                },
                consent: c.consent,
            });
        }
        let mut foreign_citizens = Vec::new();
        let mut identifiers = BTreeSet::new();
        for f in &raw.foreign_citizens {
            if f.identifier.get_ref().is_empty() || !identifiers.insert(f.identifier.get_ref().clone()) {
                return Err(cx.err(&f.identifier, "foreign identifiers must be unique and non-empty"));
            }
            foreign_citizens.push(ForeignCitizenSpec {
                id: claim(&f.id)?,
                data: ForeignCitizenData {
                    given_name: f.given_name.clone(),
                    family_name: f.family_name.clone(),
                    date_of_birth: f.date_of_birth.clone(),
                    identifier: f.identifier.get_ref().clone(),
                    country: f.country.clone(),
                },
                consent: f.consent,
            });
        }
        let mut service_providers = Vec::new();
        for sp in &raw.service_providers {
            service_providers.push(ServiceProviderSpec {
                id: claim(&sp.id)?,
                sector: known_sector(&sp.sector)?,
            });
        }

        let mut companies = Vec::new();
        for c in &raw.companies {
            if companies.iter().any(|x: &CompanySpec| &x.register_number == c.register_number.get_ref()) {
                return Err(cx.err(&c.register_number, "duplicate company register number"));
            }
            companies.push(CompanySpec {
                register_number: c.register_number.get_ref().clone(),
                name: c.name.clone(),
            });
        }
        let is_citizen = |id: &str| citizens.iter().any(|c| c.entry.id == id);
        let mut mandates: Vec<MandateSpec> = Vec::new();
        for m in &raw.mandates {
            if mandates.iter().any(|x| &x.id == m.id.get_ref()) {
                return Err(cx.err(&m.id, format!("duplicate mandate id {:?}", m.id.get_ref())));
            }
            if !companies.iter().any(|c| &c.register_number == m.mandator.get_ref()) {
                return Err(cx.err(&m.mandator, format!("unknown company {:?}", m.mandator.get_ref())));
            }
            if !is_citizen(m.representative.get_ref()) {
                return Err(cx.err(
                    &m.representative,
                    format!("unknown citizen {:?}", m.representative.get_ref()),
                ));
            }
            mandates.push(MandateSpec {
                id: m.id.get_ref().clone(),
                mandator: m.mandator.get_ref().clone(),
                representative: m.representative.get_ref().clone(),
                empowerment: m.empowerment.clone(),
            });
        }

        let mut sessions = Vec::new();
        for (i, s) in raw.sessions.iter().enumerate() {
            let use_case: UseCase = s.use_case.get_ref().parse().map_err(|e| cx.err(&s.use_case, e))?;
            let subject = s.subject.get_ref();
            let subject_ok = match use_case {
                UseCase::Foreign => foreign_citizens.iter().any(|f| &f.id == subject),
                _ => is_citizen(subject),
            };
            if !subject_ok {
                return Err(cx.err(
                    &s.subject,
                    format!("unknown {} subject {subject:?}", use_case),
                ));
            }
            if !service_providers.iter().any(|p| &p.id == s.sp.get_ref()) {
                return Err(cx.err(&s.sp, format!("unknown service provider {:?}", s.sp.get_ref())));
            }
            if let Some(m) = &s.mandate {
                if use_case != UseCase::Representation {
                    return Err(cx.err(m, "only representation sessions select a mandate"));
                }
            }
            sessions.push(SessionSpec {
                id: format!("s{:02}", i + 1),
                use_case,
                subject: subject.clone(),
                sp: s.sp.get_ref().clone(),
                mandate: s.mandate.as_ref().map(|m| m.get_ref().clone()),
            });
        }

        let leak = match &raw.leak {
            Some(l) => {
                if !matches!(l.actor.get_ref().as_str(), "MOA-ID" | "MIS" | "SPR-GW" | "PEPS") {
                    return Err(cx.err(&l.actor, "leak actor must be a cloud-hosted actor"));
                }
                Some(LeakSpec {
                    actor: l.actor.get_ref().clone(),
                    attribute: l.attribute,
                })
            }
            None => None,
        };

        Ok(Self {
            name: raw.name.unwrap_or_else(|| "unnamed".into()),
            max_levels,
            mode,
            sectors,
            cr_sector,
            citizens,
            companies,
            mandates,
            foreign_citizens,
            service_providers,
            sessions,
            leak,
            source: src.to_owned(),
        })
    }

    pub fn sector_of(&self, sp: &str) -> Option<&str> {
        self.service_providers
            .iter()
            .find(|p| p.id == sp)
            .map(|p| p.sector.as_str())
    }

    pub fn sessions_for(&self, use_case: UseCase) -> Vec<SessionSpec> {
        self.sessions
            .iter()
            .filter(|s| s.use_case == use_case)
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_matches_its_description() {
        let s = Scenario::default_scenario();
        assert_eq!(s.citizens.len(), 1);
        assert_eq!(s.companies.len(), 1);
        assert_eq!(s.mandates.len(), 2);
        assert_eq!(s.foreign_citizens.len(), 1);
        assert_eq!(s.service_providers.len(), 3);
        let sectors: BTreeSet<_> = s.service_providers.iter().map(|p| &p.sector).collect();
        assert_eq!(sectors.len(), 2);
        assert_eq!(s.sectors.len(), 10);
        assert_eq!(s.sessions.len(), 3);
    }

    #[test]
    fn bad_sector_reference_names_the_line() {
        let src = DEFAULT_SCENARIO.replace("sector = \"health\"", "sector = \"wellness\"");
        let err = Scenario::parse(&src).unwrap_err();
        assert!(err.message.contains("wellness"), "{err}");
        let line = src.lines().position(|l| l.contains("wellness")).unwrap() + 1;
        assert_eq!(err.line, Some(line));
    }

    #[test]
    fn duplicate_actor_ids_are_rejected() {
        let src = DEFAULT_SCENARIO.replace("id = \"S_3\"", "id = \"S_1\"");
        let err = Scenario::parse(&src).unwrap_err();
        assert!(err.message.contains("duplicate actor id"), "{err}");
        let src = DEFAULT_SCENARIO.replace("id = \"S_3\"", "id = \"MOA-ID\"");
        assert!(Scenario::parse(&src).is_err());
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = Scenario::parse("sectors = [\"tax\"\n[mandate_register]\n").unwrap_err();
        assert!(err.line.is_some());
    }

    #[test]
    fn unknown_mandate_references_are_rejected() {
        let src = DEFAULT_SCENARIO.replacen("mandator = \"FN 204815k\"", "mandator = \"FN 1\"", 1);
        assert!(Scenario::parse(&src).unwrap_err().message.contains("unknown company"));
    }
}
