//! Identity data model: sourcePIN and ssPIN derivation, Identity Links in
//! their current and modified form, certificates, registers, mandates and
//! service-provider registration.

mod cert;
mod link;
mod pin;
mod register;

use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

pub use cert::{pseudonym_for, Certificate};
pub use link::{
    issue_identity_link, issue_modified_identity_link, label_sector, register_foreign_citizen,
    sspin_label, IdentityLink, IssuerContext, LinkBlock, ModifiedIdentityLink, ATTR_CERT_REF,
    ATTR_DOB, ATTR_NAME, ATTR_SOURCE_PIN,
};
pub use pin::{derive_source_pin, derive_sspin, PinKey, PinOrigin, SourcePin, SsPin};
pub use register::{
    CentralRegister, CitizenEntry, CompanyRegister, ForeignCitizenData, ForeignIdpRegister,
    LegalPerson, Mandate, SrEntry, SupplementaryRegister,
};

use crate::codec::DecodeError;
use crate::crypto::CryptoError;
use crate::pre::{re_keygen, re_rkgen, PreError, ReEncKey, ReIdentityKey, ReMasterKey, ReParams};
use crate::redactable::RsError;

/// Identity the SRA encrypts Identity Link attributes to.
pub const MOA_ID: &str = "MOA-ID";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EidError {
    #[error("unknown citizen {0}")]
    UnknownCitizen(String),
    #[error("sector label must be non-empty")]
    EmptySector,
    #[error("unknown sector {0}")]
    UnknownSector(String),
    #[error("no sectors configured")]
    NoSectors,
    #[error("service provider {0} is already registered")]
    DuplicateServiceProvider(String),
    #[error("mandate {0} is already registered")]
    DuplicateMandate(String),
    #[error("unknown mandate {0}")]
    UnknownMandate(String),
    #[error("malformed foreign citizen data")]
    MalformedForeignData,
    #[error("redactable signature: {0}")]
    Rs(#[from] RsError),
    #[error("re-encryption: {0}")]
    Pre(#[from] PreError),
    #[error("crypto: {0}")]
    Crypto(#[from] CryptoError),
    #[error("decode: {0}")]
    Decode(#[from] DecodeError),
}

/// SRA-side record of registered online applications.
#[derive(Clone, Debug, Default)]
pub struct ServiceRegistry {
    registered: BTreeSet<String>,
}

impl ServiceRegistry {
    pub fn is_registered(&self, sp_id: &str) -> bool {
        self.registered.contains(sp_id)
    }

    /// `register_service_provider`: `sk_{S_j}` for the provider and
    /// `rk_{MOA-ID → S_j}` for MOA-ID.
    pub fn register<R: RngCore + CryptoRng>(
        &mut self,
        msk: &ReMasterKey,
        params: &ReParams,
        sk_moa: &ReIdentityKey,
        sp_id: &str,
        rng: &mut R,
    ) -> Result<(ReIdentityKey, ReEncKey), EidError> {
        if self.registered.contains(sp_id) {
            return Err(EidError::DuplicateServiceProvider(sp_id.to_owned()));
        }
        let sk = re_keygen(msk, sp_id)?;
        let rk = re_rkgen(params, sk_moa, MOA_ID, sp_id, rng)?;
        self.registered.insert(sp_id.to_owned());
        Ok((sk, rk))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pre::{re_decrypt, re_encrypt, re_reencrypt, re_setup_seeded, Backend};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn registration_keys_are_confined_to_their_provider() {
        let (params, msk) = re_setup_seeded("SRA", 128, 4, Backend::Pairing, 5).unwrap();
        let sk_moa = re_keygen(&msk, MOA_ID).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut reg = ServiceRegistry::default();
        let sps = ["S_1", "S_2", "S_3"];
        let keys: Vec<_> = sps
            .iter()
            .map(|id| reg.register(&msk, &params, &sk_moa, id, &mut rng).unwrap())
            .collect();
        assert_eq!(
            reg.register(&msk, &params, &sk_moa, "S_1", &mut rng).unwrap_err(),
            EidError::DuplicateServiceProvider("S_1".into())
        );
        let c = re_encrypt(&params, MOA_ID, b"ssPIN", &mut rng).unwrap();
        for (i, (_, rk)) in keys.iter().enumerate() {
            let out = re_reencrypt(&c, rk, &mut rng).unwrap();
            for (j, (sk, _)) in keys.iter().enumerate() {
                let mut probe = out.clone();
                probe.relabel(sk.id());
                let res = re_decrypt(sk, &probe);
                if i == j {
                    assert_eq!(res.unwrap(), b"ssPIN");
                } else {
                    assert!(res.is_err(), "rk for {} opened by {}", sps[i], sps[j]);
                }
            }
        }
    }
}
