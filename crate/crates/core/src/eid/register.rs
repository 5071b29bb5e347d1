//! Trusted-domain registers: CRR, SR, the company register and the foreign
//! IdP's citizen records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{derive_source_pin, EidError, PinKey, PinOrigin, SourcePin, SsPin};
use crate::codec::{Reader, Writer};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitizenEntry {
    pub id: String,
    pub given_name: String,
    pub family_name: String,
    pub date_of_birth: String,
    pub crr_number: String,
}

impl CitizenEntry {
    pub fn full_name(&self) -> String {
        format!("{} {}", self.given_name, self.family_name)
    }
}

/// Central Register of Residents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentralRegister {
    pub citizens: BTreeMap<String, CitizenEntry>,
}

impl CentralRegister {
    pub fn insert(&mut self, entry: CitizenEntry) {
        self.citizens.insert(entry.id.clone(), entry);
    }

    pub fn get(&self, id: &str) -> Result<&CitizenEntry, EidError> {
        self.citizens
            .get(id)
            .ok_or_else(|| EidError::UnknownCitizen(id.to_owned()))
    }

    pub fn source_pin(&self, pin_key: &PinKey, id: &str) -> Result<SourcePin, EidError> {
        let c = self.get(id)?;
        Ok(derive_source_pin(pin_key, PinOrigin::Crr, &c.id, &c.crr_number))
    }
}

/// Identification data a foreign IdP releases (`fc_data`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignCitizenData {
    pub given_name: String,
    pub family_name: String,
    pub date_of_birth: String,
    /// Stable identifier issued by the home country, e.g. `DE/AT/123456789`.
    pub identifier: String,
    pub country: String,
}

impl ForeignCitizenData {
    pub fn full_name(&self) -> String {
        format!("{} {}", self.given_name, self.family_name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(b"eid-cloud/fc-data/v1");
        w.str(&self.given_name)
            .str(&self.family_name)
            .str(&self.date_of_birth)
            .str(&self.identifier)
            .str(&self.country);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EidError> {
        let parse = || -> Result<Self, crate::codec::DecodeError> {
            let mut r = Reader::new(bytes);
            r.expect_tag(b"eid-cloud/fc-data/v1")?;
            let d = Self {
                given_name: r.str()?.to_owned(),
                family_name: r.str()?.to_owned(),
                date_of_birth: r.str()?.to_owned(),
                identifier: r.str()?.to_owned(),
                country: r.str()?.to_owned(),
            };
            r.finish()?;
            Ok(d)
        };
        let d = parse().map_err(|_| EidError::MalformedForeignData)?;
        if d.identifier.is_empty() {
            return Err(EidError::MalformedForeignData);
        }
        Ok(d)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrEntry {
    pub identifier: String,
    pub name: String,
    pub date_of_birth: String,
    pub country: String,
    pub source_pin: SourcePin,
}

/// Supplementary Register for natural persons without Austrian residence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplementaryRegister {
    pub rows: BTreeMap<String, SrEntry>,
}

impl SupplementaryRegister {
    /// Registers `fc` unless a row for its identifier exists. Returns the row
    /// and whether it was created.
    pub fn register(&mut self, pin_key: &PinKey, fc: &ForeignCitizenData) -> (SrEntry, bool) {
        if let Some(row) = self.rows.get(&fc.identifier) {
            return (row.clone(), false);
        }
        let row = SrEntry {
            identifier: fc.identifier.clone(),
            name: fc.full_name(),
            date_of_birth: fc.date_of_birth.clone(),
            country: fc.country.clone(),
            source_pin: derive_source_pin(pin_key, PinOrigin::Sr, &fc.identifier, &fc.identifier),
        };
        self.rows.insert(fc.identifier.clone(), row.clone());
        (row, true)
    }

    pub fn get(&self, identifier: &str) -> Option<&SrEntry> {
        self.rows.get(identifier)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalPerson {
    pub register_number: String,
    pub name: String,
}

/// Empowerment of a representative to act for a legal person.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mandate {
    pub mand_id: String,
    pub mandator: LegalPerson,
    /// Representative's name as recorded in the register.
    pub representative: String,
    /// Scenario id of the representative, used to address them.
    pub representative_ref: String,
    pub empowerment: String,
    pub register: String,
}

impl Mandate {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(b"eid-cloud/mandate/v1");
        w.str(&self.mand_id)
            .str(&self.mandator.register_number)
            .str(&self.mandator.name)
            .str(&self.representative)
            .str(&self.representative_ref)
            .str(&self.empowerment)
            .str(&self.register);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EidError> {
        let mut r = Reader::new(bytes);
        r.expect_tag(b"eid-cloud/mandate/v1")?;
        let m = Self {
            mand_id: r.str()?.to_owned(),
            mandator: LegalPerson {
                register_number: r.str()?.to_owned(),
                name: r.str()?.to_owned(),
            },
            representative: r.str()?.to_owned(),
            representative_ref: r.str()?.to_owned(),
            empowerment: r.str()?.to_owned(),
            register: r.str()?.to_owned(),
        };
        r.finish()?;
        Ok(m)
    }
}

/// Company register (CR). Mandate rows are keyed by the representative's
/// ssPIN for the register's sector.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanyRegister {
    pub sector: String,
    pub companies: BTreeMap<String, LegalPerson>,
    pub mandates: BTreeMap<String, Mandate>,
    /// Hex ssPIN to mandate ids.
    pub by_sspin: BTreeMap<String, Vec<String>>,
}

impl CompanyRegister {
    pub fn new(sector: &str) -> Self {
        Self {
            sector: sector.to_owned(),
            ..Self::default()
        }
    }

    pub fn add_mandate(&mut self, sspin: &SsPin, mandate: Mandate) -> Result<(), EidError> {
        if self.mandates.contains_key(&mandate.mand_id) {
            return Err(EidError::DuplicateMandate(mandate.mand_id));
        }
        self.by_sspin
            .entry(sspin.to_hex())
            .or_default()
            .push(mandate.mand_id.clone());
        self.mandates.insert(mandate.mand_id.clone(), mandate);
        Ok(())
    }

    /// All mandates whose representative holds `sspin_cr`.
    pub fn cr_find_mandates(&self, sspin_cr: &SsPin) -> Vec<Mandate> {
        self.by_sspin
            .get(&sspin_cr.to_hex())
            .into_iter()
            .flatten()
            .filter_map(|id| self.mandates.get(id).cloned())
            .collect()
    }

    pub fn cr_fetch_mandate(&self, mand_id: &str) -> Result<Mandate, EidError> {
        self.mandates
            .get(mand_id)
            .cloned()
            .ok_or_else(|| EidError::UnknownMandate(mand_id.to_owned()))
    }
}

/// Citizens a foreign IdP can authenticate.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignIdpRegister {
    pub citizens: BTreeMap<String, ForeignCitizenData>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eid::derive_sspin;

    fn mandate(id: &str) -> Mandate {
        Mandate {
            mand_id: id.into(),
            mandator: LegalPerson {
                register_number: "FN 123456a".into(),
                name: "Holzbau Huber GmbH".into(),
            },
            representative: "Maria Huber".into(),
            representative_ref: "C_1".into(),
            empowerment: "general power of attorney".into(),
            register: "CR".into(),
        }
    }

    fn sspin(tag: &str) -> SsPin {
        derive_sspin(&SourcePin::new("C", tag), "economy").unwrap()
    }

    #[test]
    fn find_returns_all_and_only_the_representatives_mandates() {
        let mut cr = CompanyRegister::new("economy");
        cr.add_mandate(&sspin("a"), mandate("M-1")).unwrap();
        cr.add_mandate(&sspin("a"), mandate("M-2")).unwrap();
        cr.add_mandate(&sspin("b"), mandate("M-3")).unwrap();
        let found: Vec<_> = cr.cr_find_mandates(&sspin("a")).into_iter().map(|m| m.mand_id).collect();
        assert_eq!(found, ["M-1", "M-2"]);
        assert!(cr.cr_find_mandates(&sspin("c")).is_empty());
        assert_eq!(cr.cr_fetch_mandate("M-2").unwrap(), mandate("M-2"));
        assert_eq!(
            cr.cr_fetch_mandate("M-9"),
            Err(EidError::UnknownMandate("M-9".into()))
        );
        assert!(cr.add_mandate(&sspin("b"), mandate("M-1")).is_err());
    }

    #[test]
    fn fetched_record_equals_found_record() {
        let mut cr = CompanyRegister::new("economy");
        cr.add_mandate(&sspin("a"), mandate("M-1")).unwrap();
        let found = cr.cr_find_mandates(&sspin("a"));
        assert_eq!(found[0], cr.cr_fetch_mandate(&found[0].mand_id).unwrap());
    }

    #[test]
    fn mandate_and_foreign_data_encodings_round_trip() {
        let m = mandate("M-1");
        assert_eq!(Mandate::from_bytes(&m.to_bytes()).unwrap(), m);
        let fc = ForeignCitizenData {
            given_name: "Erika".into(),
            family_name: "Mustermann".into(),
            date_of_birth: "1964-08-12".into(),
            identifier: "DE/AT/123456789".into(),
            country: "DE".into(),
        };
        assert_eq!(ForeignCitizenData::from_bytes(&fc.to_bytes()).unwrap(), fc);
        assert_eq!(
            ForeignCitizenData::from_bytes(b"garbage"),
            Err(EidError::MalformedForeignData)
        );
    }

    #[test]
    fn supplementary_registration_is_idempotent() {
        let key = [7u8; 32];
        let fc = ForeignCitizenData {
            given_name: "Erika".into(),
            family_name: "Mustermann".into(),
            date_of_birth: "1964-08-12".into(),
            identifier: "DE/AT/123456789".into(),
            country: "DE".into(),
        };
        let mut sr = SupplementaryRegister::default();
        let (a, fresh_a) = sr.register(&key, &fc);
        let (b, fresh_b) = sr.register(&key, &fc);
        assert!(fresh_a && !fresh_b);
        assert_eq!(a, b);
        assert_eq!(sr.rows.len(), 1);
    }
}
