use crate::codec::{Reader, Writer};
use crate::crypto::{dss_sign, dss_verify, sha256, SigKeyPair, Signature, VerifyingKey};

use super::EidError;

const CERT_TAG: &[u8] = b"eid-cloud/cert/v1";

/// Signature creation certificate binding a subject to a verification key.
///
/// In the cloud deployment the subject is a pseudonym derived from the key,
/// so the certificate carries no identifying information.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    serial: String,
    subject: String,
    country: String,
    public_key: VerifyingKey,
    issuer: String,
    signature: Signature,
}

impl Certificate {
    pub fn issue(
        issuer: &SigKeyPair,
        serial: &str,
        subject: &str,
        country: &str,
        public_key: VerifyingKey,
    ) -> Self {
        let tbs = tbs_bytes(serial, subject, country, &public_key, &issuer.owner);
        Self {
            serial: serial.to_owned(),
            subject: subject.to_owned(),
            country: country.to_owned(),
            public_key,
            issuer: issuer.owner.clone(),
            signature: dss_sign(&issuer.sk, &tbs),
        }
    }

    /// A certificate whose subject is a pseudonym of `public_key`.
    pub fn issue_pseudonymous(issuer: &SigKeyPair, serial: &str, public_key: VerifyingKey) -> Self {
        let subject = pseudonym_for(&public_key);
        Self::issue(issuer, serial, &subject, "", public_key)
    }

    pub fn serial(&self) -> &str {
        &self.serial
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn public_key(&self) -> &VerifyingKey {
        &self.public_key
    }

    pub fn issuer(&self) -> &str {
        &self.issuer
    }

    pub fn is_pseudonymous(&self) -> bool {
        self.subject == pseudonym_for(&self.public_key)
    }

    pub fn verify(&self, issuer_pk: &VerifyingKey) -> bool {
        let tbs = tbs_bytes(
            &self.serial,
            &self.subject,
            &self.country,
            &self.public_key,
            &self.issuer,
        );
        dss_verify(issuer_pk, &tbs, &self.signature)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(CERT_TAG);
        w.str(&self.serial)
            .str(&self.subject)
            .str(&self.country)
            .fixed(&self.public_key.to_bytes())
            .str(&self.issuer)
            .fixed(&self.signature.to_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EidError> {
        let mut r = Reader::new(bytes);
        r.expect_tag(CERT_TAG)?;
        let serial = r.str()?.to_owned();
        let subject = r.str()?.to_owned();
        let country = r.str()?.to_owned();
        let public_key = VerifyingKey::from_bytes(&r.fixed::<32>()?)?;
        let issuer = r.str()?.to_owned();
        let signature = Signature::from_bytes(&r.fixed::<{ crate::crypto::SIGNATURE_LEN }>()?)?;
        r.finish()?;
        Ok(Self {
            serial,
            subject,
            country,
            public_key,
            issuer,
            signature,
        })
    }
}

pub fn pseudonym_for(pk: &VerifyingKey) -> String {
    let h = sha256(&[b"eid-cloud/pseudonym/v1", &pk.to_bytes()]);
    format!("pseudonym-{}", hex::encode(&h[..8]))
}

fn tbs_bytes(
    serial: &str,
    subject: &str,
    country: &str,
    pk: &VerifyingKey,
    issuer: &str,
) -> Vec<u8> {
    let mut w = Writer::with_tag(b"eid-cloud/cert/tbs/v1");
    w.str(serial)
        .str(subject)
        .str(country)
        .fixed(&pk.to_bytes())
        .str(issuer);
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::dss_keygen;

    #[test]
    fn certificates_verify_and_round_trip() {
        let ca = dss_keygen("SRA", Some(1));
        let holder = dss_keygen("C_1", Some(1));
        let named = Certificate::issue(&ca, "AT-0001", "Maria Huber", "AT", holder.pk);
        let pseudo = Certificate::issue_pseudonymous(&ca, "AT-0002", holder.pk);
        for c in [&named, &pseudo] {
            assert!(c.verify(&ca.pk));
            assert_eq!(&Certificate::from_bytes(&c.to_bytes()).unwrap(), c);
        }
        assert!(!named.is_pseudonymous());
        assert!(pseudo.is_pseudonymous());
        assert!(!pseudo.to_bytes().windows(5).any(|w| w == b"Maria"));
    }

    #[test]
    fn altered_subject_fails_verification() {
        let ca = dss_keygen("SRA", Some(1));
        let holder = dss_keygen("C_1", Some(1));
        let mut c = Certificate::issue(&ca, "AT-0001", "Maria Huber", "AT", holder.pk);
        c.subject = "Mario Huber".into();
        assert!(!c.verify(&ca.pk));
    }
}
