#![allow(dead_code)]

use eid_cloud::pre::Backend;
use eid_cloud::scenario::Scenario;
use eid_cloud::world::{sra_setup, World};
use sha2::{Digest, Sha256};

pub const SEED: u64 = 20_130_901;

pub fn world() -> World {
    sra_setup(&Scenario::default_scenario(), SEED, Backend::Pairing).expect("default world")
}

pub fn world_from(src: &str) -> World {
    let s = Scenario::parse(src).expect("scenario parses");
    sra_setup(&s, SEED, Backend::Pairing).expect("world")
}

/// ssPIN recomputed without the library: SHA-256 over
/// `sourcePIN ":" sector`.
pub fn sspin_oracle(source_pin: &[u8], sector: &str) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(source_pin);
    h.update(b":");
    h.update(sector.as_bytes());
    h.finalize().to_vec()
}

pub fn contains(hay: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && needle.len() <= hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Raw values no cloud-hosted actor may read in cloud mode, built from the
/// scenario and the SRA's pin key without the auditor's registry.
pub fn sensitive_values(w: &World) -> Vec<(String, Vec<u8>)> {
    let s = &w.scenario;
    let key = w.ring(eid_cloud::world::SRA).pin_key.expect("pin key");
    let mut out: Vec<(String, Vec<u8>)> = Vec::new();
    let mut pins = Vec::new();
    for c in &s.citizens {
        let e = &c.entry;
        for v in [&e.given_name, &e.family_name, &e.date_of_birth, &e.crr_number] {
            out.push((format!("{} attribute", e.id), v.as_bytes().to_vec()));
        }
        pins.push((e.id.clone(), w.registers.crr.source_pin(&key, &e.id).unwrap().as_bytes().to_vec()));
    }
    for f in &s.foreign_citizens {
        let d = &f.data;
        for v in [&d.given_name, &d.family_name, &d.date_of_birth, &d.identifier] {
            out.push((format!("{} attribute", f.id), v.as_bytes().to_vec()));
        }
        let (row, _) = eid_cloud::eid::SupplementaryRegister::default().register(&key, d);
        pins.push((f.id.clone(), row.source_pin.as_bytes().to_vec()));
    }
    for (id, pin) in pins {
        for sector in &s.sectors {
            let ss = sspin_oracle(&pin, sector);
            out.push((format!("{id} ssPIN {sector}"), ss.clone()));
            out.push((format!("{id} ssPIN hex {sector}"), hex::encode(&ss).into_bytes()));
        }
        out.push((format!("{id} sourcePIN"), pin));
    }
    for c in &s.companies {
        out.push(("company name".into(), c.name.as_bytes().to_vec()));
        out.push(("company number".into(), c.register_number.as_bytes().to_vec()));
    }
    for m in &s.mandates {
        out.push((format!("{} empowerment", m.id), m.empowerment.as_bytes().to_vec()));
    }
    out
}
