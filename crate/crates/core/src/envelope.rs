//! Internal message format standing in for the SAML, STORK and CCS messages.
//!
//! Every field carries a visibility tag. Observers record a field according
//! to its tag, so tags must be accurate: `Re` and `Hybrid` slots always hold
//! an encoded ciphertext. The sender signs the canonical encoding of all
//! header values and fields.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{DecodeError, Reader, Writer};
use crate::crypto::{dss_sign, dss_verify, HybridCiphertext, Signature, SigningKey, VerifyingKey};
use crate::pre::ReCiphertext;

const ENVELOPE_TAG: &[u8] = b"eid-cloud/envelope/v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgType {
    AccessRequest,
    AuthRequest,
    IlRequest,
    IlResponse,
    SigRequest,
    SigResponse,
    MandateQuery,
    RegisterQuery,
    RegisterResponse,
    SelectionPage,
    MandateSelection,
    MandateFetch,
    MandateRecord,
    MandateResponse,
    CountryPage,
    CountrySelection,
    StorkRequest,
    StorkForward,
    QsRequest,
    QsResponse,
    IdpResponse,
    StorkResponse,
    SprRequest,
    SrRegister,
    SrResponse,
    IlForward,
    SamlResponse,
}

impl MsgType {
    pub const ALL: [MsgType; 27] = [
        MsgType::AccessRequest,
        MsgType::AuthRequest,
        MsgType::IlRequest,
        MsgType::IlResponse,
        MsgType::SigRequest,
        MsgType::SigResponse,
        MsgType::MandateQuery,
        MsgType::RegisterQuery,
        MsgType::RegisterResponse,
        MsgType::SelectionPage,
        MsgType::MandateSelection,
        MsgType::MandateFetch,
        MsgType::MandateRecord,
        MsgType::MandateResponse,
        MsgType::CountryPage,
        MsgType::CountrySelection,
        MsgType::StorkRequest,
        MsgType::StorkForward,
        MsgType::QsRequest,
        MsgType::QsResponse,
        MsgType::IdpResponse,
        MsgType::StorkResponse,
        MsgType::SprRequest,
        MsgType::SrRegister,
        MsgType::SrResponse,
        MsgType::IlForward,
        MsgType::SamlResponse,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MsgType::AccessRequest => "access_request",
            MsgType::AuthRequest => "auth_request",
            MsgType::IlRequest => "il_request",
            MsgType::IlResponse => "il_response",
            MsgType::SigRequest => "sig_request",
            MsgType::SigResponse => "sig_response",
            MsgType::MandateQuery => "mandate_query",
            MsgType::RegisterQuery => "register_query",
            MsgType::RegisterResponse => "register_response",
            MsgType::SelectionPage => "selection_page",
            MsgType::MandateSelection => "mandate_selection",
            MsgType::MandateFetch => "mandate_fetch",
            MsgType::MandateRecord => "mandate_record",
            MsgType::MandateResponse => "mandate_response",
            MsgType::CountryPage => "country_page",
            MsgType::CountrySelection => "country_selection",
            MsgType::StorkRequest => "stork_request",
            MsgType::StorkForward => "stork_forward",
            MsgType::QsRequest => "qs_request",
            MsgType::QsResponse => "qs_response",
            MsgType::IdpResponse => "idp_response",
            MsgType::StorkResponse => "stork_response",
            MsgType::SprRequest => "spr_request",
            MsgType::SrRegister => "sr_register",
            MsgType::SrResponse => "sr_response",
            MsgType::IlForward => "il_forward",
            MsgType::SamlResponse => "saml_response",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s)
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Visibility tag of a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    /// Plaintext payload data.
    Plain,
    /// Plaintext protocol metadata (labels, request ids, consent texts).
    Meta,
    /// Encoded [`ReCiphertext`].
    Re,
    /// Encoded [`HybridCiphertext`].
    Hybrid,
    /// Signature value.
    Sig,
    /// Position of a redacted Identity Link block; carries no bytes.
    Redacted,
}

impl SlotKind {
    fn tag(self) -> u8 {
        match self {
            SlotKind::Plain => 1,
            SlotKind::Meta => 2,
            SlotKind::Re => 3,
            SlotKind::Hybrid => 4,
            SlotKind::Sig => 5,
            SlotKind::Redacted => 6,
        }
    }

    fn from_tag(t: u8) -> Result<Self, DecodeError> {
        Ok(match t {
            1 => SlotKind::Plain,
            2 => SlotKind::Meta,
            3 => SlotKind::Re,
            4 => SlotKind::Hybrid,
            5 => SlotKind::Sig,
            6 => SlotKind::Redacted,
            _ => return Err(DecodeError::Invalid("slot kind")),
        })
    }

    /// Whether an observer sees the field's bytes as plaintext.
    pub fn is_plaintext(self) -> bool {
        matches!(self, SlotKind::Plain | SlotKind::Meta)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub kind: SlotKind,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub session: String,
    pub step: String,
    pub msg_type: MsgType,
    pub sender: String,
    pub receiver: String,
    pub fields: Vec<Field>,
    pub signature: Vec<u8>,
}

/// A field was missing or did not decode as its tag promises.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub reason: &'static str,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "field {}: {}", self.field, self.reason)
    }
}

impl Envelope {
    pub fn new(session: &str, step: &str, msg_type: MsgType, sender: &str, receiver: &str) -> Self {
        Self {
            session: session.to_owned(),
            step: step.to_owned(),
            msg_type,
            sender: sender.to_owned(),
            receiver: receiver.to_owned(),
            fields: Vec::new(),
            signature: Vec::new(),
        }
    }

    pub fn field(mut self, name: impl Into<String>, kind: SlotKind, bytes: impl Into<Vec<u8>>) -> Self {
        self.fields.push(Field {
            name: name.into(),
            kind,
            bytes: bytes.into(),
        });
        self
    }

    pub fn plain(self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        self.field(name, SlotKind::Plain, bytes)
    }

    pub fn meta(self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        self.field(name, SlotKind::Meta, bytes)
    }

    pub fn re(self, name: impl Into<String>, c: &ReCiphertext) -> Self {
        self.field(name, SlotKind::Re, c.to_bytes())
    }

    pub fn hybrid(self, name: impl Into<String>, c: &HybridCiphertext) -> Self {
        self.field(name, SlotKind::Hybrid, c.to_bytes())
    }

    pub fn sig(self, name: impl Into<String>, s: &Signature) -> Self {
        self.field(name, SlotKind::Sig, s.to_bytes().to_vec())
    }

    pub fn redacted(self, name: impl Into<String>) -> Self {
        self.field(name, SlotKind::Redacted, Vec::new())
    }

    pub fn get(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    fn typed(&self, name: &str, kind: SlotKind) -> Result<&[u8], FieldError> {
        match self.get(name) {
            Some(f) if f.kind == kind => Ok(&f.bytes),
            Some(_) => Err(FieldError {
                field: name.to_owned(),
                reason: "unexpected visibility tag",
            }),
            None => Err(FieldError {
                field: name.to_owned(),
                reason: "missing",
            }),
        }
    }

    pub fn plain_bytes(&self, name: &str) -> Result<&[u8], FieldError> {
        self.typed(name, SlotKind::Plain)
    }

    pub fn plain_str(&self, name: &str) -> Result<&str, FieldError> {
        std::str::from_utf8(self.plain_bytes(name)?).map_err(|_| FieldError {
            field: name.to_owned(),
            reason: "not UTF-8",
        })
    }

    pub fn meta_str(&self, name: &str) -> Result<&str, FieldError> {
        std::str::from_utf8(self.typed(name, SlotKind::Meta)?).map_err(|_| FieldError {
            field: name.to_owned(),
            reason: "not UTF-8",
        })
    }

    pub fn re_ct(&self, name: &str) -> Result<ReCiphertext, FieldError> {
        ReCiphertext::from_bytes(self.typed(name, SlotKind::Re)?).map_err(|_| FieldError {
            field: name.to_owned(),
            reason: "malformed re-encryption ciphertext",
        })
    }

    pub fn hybrid_ct(&self, name: &str) -> Result<HybridCiphertext, FieldError> {
        HybridCiphertext::from_bytes(self.typed(name, SlotKind::Hybrid)?).map_err(|_| FieldError {
            field: name.to_owned(),
            reason: "malformed hybrid ciphertext",
        })
    }

    pub fn signature_field(&self, name: &str) -> Result<Signature, FieldError> {
        Signature::from_bytes(self.typed(name, SlotKind::Sig)?).map_err(|_| FieldError {
            field: name.to_owned(),
            reason: "malformed signature",
        })
    }

    /// Raw bytes of a signature-tagged field that is not a DSS signature
    /// (e.g. a redactable signature).
    pub fn sig_bytes(&self, name: &str) -> Result<&[u8], FieldError> {
        self.typed(name, SlotKind::Sig)
    }

    pub fn is_redacted(&self, name: &str) -> bool {
        self.get(name).is_some_and(|f| f.kind == SlotKind::Redacted)
    }

    /// Canonical encoding of everything the signature covers.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(ENVELOPE_TAG);
        w.str(&self.session)
            .str(&self.step)
            .str(self.msg_type.label())
            .str(&self.sender)
            .str(&self.receiver)
            .u32(self.fields.len() as u32);
        for f in &self.fields {
            w.str(&f.name).u8(f.kind.tag()).bytes(&f.bytes);
        }
        w.finish()
    }

    pub fn sign(mut self, sk: &SigningKey) -> Self {
        self.signature = dss_sign(sk, &self.signing_bytes()).to_bytes().to_vec();
        self
    }

    pub fn verify(&self, pk: &VerifyingKey) -> bool {
        match Signature::from_bytes(&self.signature) {
            Ok(sig) => dss_verify(pk, &self.signing_bytes(), &sig),
            Err(_) => false,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&self.signing_bytes()).bytes(&self.signature);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut outer = Reader::new(bytes);
        let mut r = Reader::new(outer.bytes()?);
        let signature = outer.bytes()?.to_vec();
        outer.finish()?;
        r.expect_tag(ENVELOPE_TAG)?;
        let session = r.str()?.to_owned();
        let step = r.str()?.to_owned();
        let msg_type = MsgType::from_label(r.str()?).ok_or(DecodeError::Invalid("message type"))?;
        let sender = r.str()?.to_owned();
        let receiver = r.str()?.to_owned();
        let n = r.u32()? as usize;
        let mut fields = Vec::with_capacity(n.min(256));
        for _ in 0..n {
            let name = r.str()?.to_owned();
            let kind = SlotKind::from_tag(r.u8()?)?;
            fields.push(Field {
                name,
                kind,
                bytes: r.bytes()?.to_vec(),
            });
        }
        r.finish()?;
        Ok(Self {
            session,
            step,
            msg_type,
            sender,
            receiver,
            fields,
            signature,
        })
    }
}
