use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};

use super::{derive_sspin, CentralRegister, EidError, ForeignCitizenData, PinKey, SourcePin, SsPin};
use super::register::SupplementaryRegister;
use crate::codec::{Reader, Writer};
use crate::crypto::{dss_sign, dss_verify, SigKeyPair, Signature, SigningKey, VerifyingKey, SIGNATURE_LEN};
use crate::pre::{re_encrypt, ReCiphertext, ReParams};
use crate::redactable::{
    decode_signed, encode_signed, rs_redact, rs_sign, rs_verify, Block, BlockMessage,
    RedactableSignature,
};

pub const ATTR_NAME: &str = "name";
pub const ATTR_DOB: &str = "date_of_birth";
pub const ATTR_SOURCE_PIN: &str = "source_pin";
pub const ATTR_CERT_REF: &str = "cert_ref";

const IL_TAG: &[u8] = b"eid-cloud/identity-link/v1";
const BLOCK_TAG: &[u8] = b"eid-cloud/mil-block/v1";

pub fn sspin_label(sector: &str) -> String {
    format!("ssPIN:{sector}")
}

/// The sector of an `ssPIN:<sector>` label.
pub fn label_sector(label: &str) -> Option<&str> {
    label.strip_prefix("ssPIN:")
}

/// Key material and secrets of the issuing authority.
#[derive(Clone, Copy)]
pub struct IssuerContext<'a> {
    pub signing: &'a SigKeyPair,
    pub pin_key: &'a PinKey,
    pub re_params: &'a ReParams,
}

/// Current-mode Identity Link: `((A_1, a_1), …, (A_k, a_k))` signed by the SRA.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityLink {
    attributes: Vec<(String, Vec<u8>)>,
    issuer_sig: Signature,
}

impl IdentityLink {
    pub fn sign(issuer: &SigningKey, attributes: Vec<(String, Vec<u8>)>) -> Self {
        let issuer_sig = dss_sign(issuer, &attributes_bytes(&attributes));
        Self {
            attributes,
            issuer_sig,
        }
    }

    /// Link for `name`, `dob` and `source_pin` with certificate reference `cert_ref`.
    pub fn issue(
        issuer: &SigningKey,
        name: &str,
        dob: &str,
        source_pin: &SourcePin,
        cert_ref: &str,
    ) -> Self {
        Self::sign(
            issuer,
            vec![
                (ATTR_NAME.into(), name.as_bytes().to_vec()),
                (ATTR_DOB.into(), dob.as_bytes().to_vec()),
                (ATTR_SOURCE_PIN.into(), source_pin.as_bytes().to_vec()),
                (ATTR_CERT_REF.into(), cert_ref.as_bytes().to_vec()),
            ],
        )
    }

    pub fn attributes(&self) -> &[(String, Vec<u8>)] {
        &self.attributes
    }

    pub fn get(&self, label: &str) -> Option<&[u8]> {
        self.attributes
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_slice())
    }

    pub fn source_pin(&self, subject: &str) -> Option<SourcePin> {
        let v = self.get(ATTR_SOURCE_PIN)?;
        Some(SourcePin::new(subject, std::str::from_utf8(v).ok()?))
    }

    pub fn verify(&self, pk: &VerifyingKey) -> bool {
        let pins = self
            .attributes
            .iter()
            .filter(|(l, _)| l == ATTR_SOURCE_PIN)
            .count();
        pins == 1 && dss_verify(pk, &attributes_bytes(&self.attributes), &self.issuer_sig)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&attributes_bytes(&self.attributes))
            .fixed(&self.issuer_sig.to_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EidError> {
        let mut r = Reader::new(bytes);
        let mut inner = Reader::new(r.bytes()?);
        inner.expect_tag(IL_TAG)?;
        let n = inner.u32()? as usize;
        let mut attributes = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let label = inner.str()?.to_owned();
            attributes.push((label, inner.bytes()?.to_vec()));
        }
        inner.finish()?;
        let issuer_sig = Signature::from_bytes(&r.fixed::<SIGNATURE_LEN>()?)?;
        r.finish()?;
        Ok(Self {
            attributes,
            issuer_sig,
        })
    }
}

fn attributes_bytes(attributes: &[(String, Vec<u8>)]) -> Vec<u8> {
    let mut w = Writer::with_tag(IL_TAG);
    w.u32(attributes.len() as u32);
    for (label, value) in attributes {
        w.str(label).bytes(value);
    }
    w.finish()
}

/// `issue_identity_link`: current-mode link for a CRR citizen.
pub fn issue_identity_link(
    issuer: &IssuerContext<'_>,
    crr: &CentralRegister,
    citizen_id: &str,
    cert_ref: &str,
) -> Result<IdentityLink, EidError> {
    let c = crr.get(citizen_id)?;
    let sp = crr.source_pin(issuer.pin_key, citizen_id)?;
    Ok(IdentityLink::issue(
        &issuer.signing.sk,
        &c.full_name(),
        &c.date_of_birth,
        &sp,
        cert_ref,
    ))
}

/// One block of a modified Identity Link: a label and the ciphertext of the
/// attribute value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkBlock {
    pub label: String,
    pub ciphertext: ReCiphertext,
}

impl LinkBlock {
    pub fn encode(label: &str, ciphertext: &ReCiphertext) -> Vec<u8> {
        let mut w = Writer::with_tag(BLOCK_TAG);
        w.str(label).bytes(&ciphertext.to_bytes());
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, EidError> {
        let mut r = Reader::new(bytes);
        r.expect_tag(BLOCK_TAG)?;
        let label = r.str()?.to_owned();
        let ciphertext = ReCiphertext::from_bytes(r.bytes()?)?;
        r.finish()?;
        Ok(Self { label, ciphertext })
    }
}

/// Cloud-mode Identity Link `I'`: encrypted ssPINs for every sector plus
/// encrypted name and date of birth, under a redactable signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModifiedIdentityLink {
    message: BlockMessage,
    signature: RedactableSignature,
}

impl ModifiedIdentityLink {
    /// Encrypts each ssPIN, then name and date of birth, to `holder` and signs
    /// the block sequence.
    pub fn issue<R: RngCore + CryptoRng>(
        issuer: &IssuerContext<'_>,
        holder: &str,
        sspins: &[SsPin],
        name: &str,
        dob: &str,
        rng: &mut R,
    ) -> Result<Self, EidError> {
        if sspins.is_empty() {
            return Err(EidError::NoSectors);
        }
        let mut blocks = Vec::with_capacity(sspins.len() + 2);
        for pin in sspins {
            let c = re_encrypt(issuer.re_params, holder, pin.value(), rng)?;
            blocks.push(LinkBlock::encode(&sspin_label(pin.sector()), &c));
        }
        for (label, value) in [(ATTR_NAME, name), (ATTR_DOB, dob)] {
            let c = re_encrypt(issuer.re_params, holder, value.as_bytes(), rng)?;
            blocks.push(LinkBlock::encode(label, &c));
        }
        let message = BlockMessage::new(blocks);
        let signature = rs_sign(&issuer.signing.sk, &message, rng)?;
        Ok(Self { message, signature })
    }

    pub fn from_parts(message: BlockMessage, signature: RedactableSignature) -> Self {
        Self { message, signature }
    }

    pub fn message(&self) -> &BlockMessage {
        &self.message
    }

    pub fn signature(&self) -> &RedactableSignature {
        &self.signature
    }

    pub fn verify(&self, pk: &VerifyingKey) -> bool {
        rs_verify(pk, &self.message, &self.signature)
    }

    /// Decoded visible blocks with their 1-based indices.
    pub fn visible_blocks(&self) -> Result<Vec<(usize, LinkBlock)>, EidError> {
        self.message
            .visible()
            .map(|(i, c)| LinkBlock::decode(c).map(|b| (i, b)))
            .collect()
    }

    pub fn visible_labels(&self) -> Result<BTreeSet<String>, EidError> {
        Ok(self
            .visible_blocks()?
            .into_iter()
            .map(|(_, b)| b.label)
            .collect())
    }

    /// Redacts every visible block whose label is not in `keep`.
    pub fn retain(&self, pk: &VerifyingKey, keep: &BTreeSet<String>) -> Result<Self, EidError> {
        let drop: Vec<usize> = self
            .visible_blocks()?
            .into_iter()
            .filter(|(_, b)| !keep.contains(&b.label))
            .map(|(i, _)| i)
            .collect();
        let (message, signature) = rs_redact(&self.message, pk, &self.signature, &drop)?;
        Ok(Self { message, signature })
    }

    pub fn redacted_count(&self) -> usize {
        self.message
            .blocks()
            .iter()
            .filter(|b| matches!(b, Block::Redacted))
            .count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_signed(&self.message, &self.signature)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EidError> {
        let (message, signature) = decode_signed(bytes)?;
        Ok(Self { message, signature })
    }
}

/// `issue_modified_identity_link`: cloud-mode link for a CRR citizen,
/// addressed to `holder` (MOA-ID).
pub fn issue_modified_identity_link<R: RngCore + CryptoRng>(
    issuer: &IssuerContext<'_>,
    crr: &CentralRegister,
    citizen_id: &str,
    sectors: &[String],
    holder: &str,
    rng: &mut R,
) -> Result<ModifiedIdentityLink, EidError> {
    let c = crr.get(citizen_id)?;
    let sp = crr.source_pin(issuer.pin_key, citizen_id)?;
    let pins = sectors
        .iter()
        .map(|s| derive_sspin(&sp, s))
        .collect::<Result<Vec<_>, _>>()?;
    ModifiedIdentityLink::issue(issuer, holder, &pins, &c.full_name(), &c.date_of_birth, rng)
}

/// `register_foreign_citizen`: registers the citizen in the SR (idempotently)
/// and issues a link with only the ssPIN for `sector` visible.
pub fn register_foreign_citizen<R: RngCore + CryptoRng>(
    sr: &mut SupplementaryRegister,
    issuer: &IssuerContext<'_>,
    fc_data: &[u8],
    sector: &str,
    sectors: &[String],
    holder: &str,
    rng: &mut R,
) -> Result<(ModifiedIdentityLink, SourcePin), EidError> {
    let fc = ForeignCitizenData::from_bytes(fc_data)?;
    if !sectors.iter().any(|s| s == sector) {
        return Err(EidError::UnknownSector(sector.to_owned()));
    }
    let (row, _) = sr.register(issuer.pin_key, &fc);
    let pins = sectors
        .iter()
        .map(|s| derive_sspin(&row.source_pin, s))
        .collect::<Result<Vec<_>, _>>()?;
    let full = ModifiedIdentityLink::issue(issuer, holder, &pins, &row.name, &row.date_of_birth, rng)?;
    let keep: BTreeSet<String> = [sspin_label(sector), ATTR_NAME.into(), ATTR_DOB.into()].into();
    let link = full.retain(&issuer.signing.pk, &keep)?;
    Ok((link, row.source_pin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eid::CitizenEntry;
    use crate::pre::{re_decrypt, re_keygen, re_setup_seeded, Backend};
    use crate::redactable::rs_keygen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sectors() -> Vec<String> {
        ["tax", "health", "education", "justice", "social", "transport", "environment", "economy", "security", "culture"]
            .map(String::from)
            .to_vec()
    }

    fn crr() -> CentralRegister {
        let mut crr = CentralRegister::default();
        crr.insert(CitizenEntry {
            id: "C_1".into(),
            given_name: "Maria".into(),
            family_name: "Huber".into(),
            date_of_birth: "1980-04-12".into(),
            crr_number: "000123456789".into(),
        });
        crr
    }

    fn contains(h: &[u8], n: &[u8]) -> bool {
        h.windows(n.len()).any(|w| w == n)
    }

    #[test]
    fn identity_link_issues_verifies_and_detects_tampering() {
        let sra = rs_keygen("SRA", Some(1));
        let (params, _) = re_setup_seeded("SRA", 128, 4, Backend::TrustedDealer, 1).unwrap();
        let key = [9u8; 32];
        let ctx = IssuerContext { signing: &sra, pin_key: &key, re_params: &params };
        let il = issue_identity_link(&ctx, &crr(), "C_1", "AT-0001").unwrap();
        assert!(il.verify(&sra.pk));
        assert_eq!(il.get(ATTR_NAME).unwrap(), b"Maria Huber");
        assert_eq!(IdentityLink::from_bytes(&il.to_bytes()).unwrap(), il);

        let mut attrs = il.attributes().to_vec();
        attrs[0].1 = b"Mario Huber".to_vec();
        let forged = IdentityLink { attributes: attrs, issuer_sig: il.issuer_sig.clone() };
        assert!(!forged.verify(&sra.pk));

        assert_eq!(
            issue_identity_link(&ctx, &crr(), "C_9", "AT-0009"),
            Err(EidError::UnknownCitizen("C_9".into()))
        );
    }

    #[test]
    fn modified_link_has_one_block_per_sector_and_survives_redaction() {
        let sra = rs_keygen("SRA", Some(1));
        let (params, msk) = re_setup_seeded("SRA", 128, 4, Backend::Pairing, 1).unwrap();
        let key = [9u8; 32];
        let ctx = IssuerContext { signing: &sra, pin_key: &key, re_params: &params };
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let link = issue_modified_identity_link(&ctx, &crr(), "C_1", &sectors(), "MOA-ID", &mut rng).unwrap();
        assert_eq!(link.message().len(), 12);
        assert!(link.verify(&sra.pk));

        let keep: BTreeSet<String> = [sspin_label("tax"), ATTR_NAME.into(), ATTR_DOB.into()].into();
        let redacted = link.retain(&sra.pk, &keep).unwrap();
        assert!(redacted.verify(&sra.pk));
        assert_eq!(redacted.visible_labels().unwrap(), keep);
        assert_eq!(redacted.redacted_count(), 9);

        let sk = re_keygen(&msk, "MOA-ID").unwrap();
        let sp = crr().source_pin(&key, "C_1").unwrap();
        let (_, tax) = redacted
            .visible_blocks()
            .unwrap()
            .into_iter()
            .find(|(_, b)| b.label == "ssPIN:tax")
            .unwrap();
        assert_eq!(
            re_decrypt(&sk, &tax.ciphertext).unwrap(),
            derive_sspin(&sp, "tax").unwrap().value()
        );

        let bytes = redacted.to_bytes();
        assert_eq!(ModifiedIdentityLink::from_bytes(&bytes).unwrap(), redacted);
        assert!(!contains(&bytes, sp.as_bytes()));
        assert!(!contains(&bytes, b"Maria"));
    }

    #[test]
    fn foreign_registration_leaves_only_the_requested_sector() {
        let sra = rs_keygen("SRA", Some(1));
        let (params, _) = re_setup_seeded("SRA", 128, 4, Backend::TrustedDealer, 1).unwrap();
        let key = [9u8; 32];
        let ctx = IssuerContext { signing: &sra, pin_key: &key, re_params: &params };
        let fc = ForeignCitizenData {
            given_name: "Erika".into(),
            family_name: "Mustermann".into(),
            date_of_birth: "1964-08-12".into(),
            identifier: "DE/AT/123456789".into(),
            country: "DE".into(),
        };
        let mut sr = SupplementaryRegister::default();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (link, sp1) =
            register_foreign_citizen(&mut sr, &ctx, &fc.to_bytes(), "health", &sectors(), "SPR-GW", &mut rng)
                .unwrap();
        assert!(link.verify(&sra.pk));
        let expected: BTreeSet<String> =
            [sspin_label("health"), ATTR_NAME.into(), ATTR_DOB.into()].into();
        assert_eq!(link.visible_labels().unwrap(), expected);
        let (_, sp2) =
            register_foreign_citizen(&mut sr, &ctx, &fc.to_bytes(), "health", &sectors(), "SPR-GW", &mut rng)
                .unwrap();
        assert_eq!(sp1, sp2);
        assert_eq!(sr.rows.len(), 1);
        assert!(matches!(
            register_foreign_citizen(&mut sr, &ctx, b"junk", "health", &sectors(), "SPR-GW", &mut rng),
            Err(EidError::MalformedForeignData)
        ));
    }
}
