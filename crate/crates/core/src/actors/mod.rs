//! Protocol parties as per-session state machines.
//!
//! Every party handles one envelope at a time and answers with at most one
//! envelope, so a session has a single message in flight. The dispatcher
//! verifies the sender's envelope signature before any handler sees the
//! payload; a failed check aborts the session at the step where the
//! receiver verifies that message.

mod ccs;
mod cr;
mod mis;
mod moa;
mod sp;
mod stork;
mod sprgw;

use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::VerifyingKey;
use crate::eid::{LinkBlock, ModifiedIdentityLink, MOA_ID};
use crate::envelope::{Envelope, FieldError, MsgType, SlotKind};
use crate::harness::{Recorder, Visibility};
use crate::redactable::{Block, BlockMessage, RedactableSignature};
use crate::scenario::{Mode, SessionSpec, UseCase};
use crate::world::{KeyRing, Role, World, CR, F_IDP, MIS, PEPS, SPR_GW, SR};

/// Identity data the online application ends up with. Keys: `ssPIN` (raw
/// 32 bytes), `name`, `date_of_birth` and, on behalf of a company, `mandate`.
pub type Identity = BTreeMap<String, Vec<u8>>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FlowOutcome {
    Granted {
        #[serde(with = "crate::hexser::map")]
        identity: Identity,
    },
    Denied { step: String, reason: String },
    Aborted { step: String, reason: String },
}

impl FlowOutcome {
    pub fn is_granted(&self) -> bool {
        matches!(self, FlowOutcome::Granted { .. })
    }

    pub fn identity(&self) -> Option<&Identity> {
        match self {
            FlowOutcome::Granted { identity } => Some(identity),
            _ => None,
        }
    }

    /// Step named by a denial or abort.
    pub fn step(&self) -> Option<&str> {
        match self {
            FlowOutcome::Granted { .. } => None,
            FlowOutcome::Denied { step, .. } | FlowOutcome::Aborted { step, .. } => Some(step),
        }
    }
}

impl fmt::Display for FlowOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowOutcome::Granted { identity } => {
                let keys: Vec<_> = identity.keys().map(String::as_str).collect();
                write!(f, "granted ({})", keys.join(", "))
            }
            FlowOutcome::Denied { step, reason } => write!(f, "denied at step {step}: {reason}"),
            FlowOutcome::Aborted { step, reason } => write!(f, "aborted at step {step}: {reason}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HaltKind {
    Denied,
    Aborted,
}

/// A session ended before access was granted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Halt {
    pub kind: HaltKind,
    pub step: String,
    pub reason: String,
}

impl Halt {
    pub fn abort(step: &str, reason: impl fmt::Display) -> Self {
        Self {
            kind: HaltKind::Aborted,
            step: step.to_owned(),
            reason: reason.to_string(),
        }
    }

    pub fn deny(step: &str, reason: impl fmt::Display) -> Self {
        Self {
            kind: HaltKind::Denied,
            step: step.to_owned(),
            reason: reason.to_string(),
        }
    }

    pub fn into_outcome(self) -> FlowOutcome {
        match self.kind {
            HaltKind::Denied => FlowOutcome::Denied {
                step: self.step,
                reason: self.reason,
            },
            HaltKind::Aborted => FlowOutcome::Aborted {
                step: self.step,
                reason: self.reason,
            },
        }
    }
}

/// Maps a field or crypto error to an abort at `step`.
pub(crate) trait OrAbort<T> {
    fn or_abort(self, step: &str) -> Result<T, Halt>;
}

impl<T, E: fmt::Display> OrAbort<T> for Result<T, E> {
    fn or_abort(self, step: &str) -> Result<T, Halt> {
        self.map_err(|e| Halt::abort(step, e))
    }
}

pub(crate) fn check(ok: bool, step: &str, reason: &str) -> Result<(), Halt> {
    if ok {
        Ok(())
    } else {
        Err(Halt::abort(step, reason))
    }
}

pub enum Next {
    Send(Envelope),
    Done(FlowOutcome),
}

/// Step at which the receiver of `msg_type` verifies it.
pub fn verify_step(use_case: UseCase, mode: Mode, msg_type: MsgType) -> Option<&'static str> {
    use MsgType::*;
    let cloud = mode == Mode::Cloud;
    Some(match (use_case, msg_type) {
        (_, AccessRequest) => "1",
        (_, AuthRequest) => "2",
        (UseCase::Austrian, IlRequest) => "3a",
        (UseCase::Austrian, IlResponse) => "3d",
        (UseCase::Austrian, SigRequest) => "4a",
        (UseCase::Austrian, SigResponse) => "4c",
        (UseCase::Austrian, SamlResponse) => "7a",
        (UseCase::Representation, IlRequest) => "3a",
        (UseCase::Representation, IlResponse) => "3c",
        (UseCase::Representation, SigRequest | SigResponse) => "4",
        (UseCase::Representation, MandateQuery) => {
            if cloud {
                "7b"
            } else {
                "7a"
            }
        }
        (UseCase::Representation, RegisterQuery) => "8a",
        (UseCase::Representation, RegisterResponse) => "8c",
        (UseCase::Representation, SelectionPage) => {
            if cloud {
                "9b"
            } else {
                "9a"
            }
        }
        (UseCase::Representation, MandateSelection) => "9c",
        (UseCase::Representation, MandateFetch) if cloud => "11a",
        (UseCase::Representation, MandateRecord) if cloud => "12",
        (UseCase::Representation, MandateResponse) => "13",
        (UseCase::Representation, SamlResponse) => "16a",
        (UseCase::Foreign, CountryPage) => "3",
        (UseCase::Foreign, CountrySelection) => "4",
        (UseCase::Foreign, StorkRequest) => "5",
        (UseCase::Foreign, StorkForward) => "6",
        (UseCase::Foreign, QsRequest) => "7",
        (UseCase::Foreign, QsResponse) => "8",
        (UseCase::Foreign, IdpResponse) => "9",
        (UseCase::Foreign, StorkResponse) => "11",
        (UseCase::Foreign, SprRequest) => "13",
        (UseCase::Foreign, SrRegister) => {
            if cloud {
                "15b"
            } else {
                "15a"
            }
        }
        (UseCase::Foreign, SrResponse) => "15c",
        (UseCase::Foreign, IlForward) => "17",
        (UseCase::Foreign, SamlResponse) => "20",
        _ => return None,
    })
}

/// Role that receives `msg_type`.
fn receiver_role(msg_type: MsgType) -> Role {
    use MsgType::*;
    match msg_type {
        AccessRequest => Role::Sp,
        IlRequest | SigRequest | SelectionPage | CountryPage | QsRequest => Role::Ccs,
        AuthRequest | IlResponse | SigResponse | StorkResponse | IlForward | CountrySelection => Role::MoaId,
        MandateQuery | RegisterResponse | MandateSelection | MandateRecord => Role::Mis,
        RegisterQuery | MandateFetch => Role::Cr,
        MandateResponse => Role::MoaId,
        StorkRequest | IdpResponse => Role::Peps,
        StorkForward | QsResponse => Role::FIdp,
        SprRequest | SrResponse => Role::SprGw,
        SrRegister => Role::Sr,
        SamlResponse => Role::Sp,
    }
}

/// Per-session execution context handed to a handler.
pub struct Cx<'a> {
    pub world: &'a mut World,
    pub spec: &'a SessionSpec,
    pub mode: Mode,
    pub rng: &'a mut ChaCha20Rng,
    /// Logical time of the current delivery.
    pub clock: u64,
    /// Actor currently executing.
    pub actor: String,
    pub(crate) steps: &'a mut Vec<String>,
    pub(crate) recorder: &'a mut Recorder,
}

impl Cx<'_> {
    pub fn cloud(&self) -> bool {
        self.mode == Mode::Cloud
    }

    /// Records that `label` is being executed.
    pub fn step(&mut self, label: &str) {
        if self.steps.last().map(String::as_str) != Some(label) {
            self.steps.push(label.to_owned());
        }
    }

    fn current_step(&self) -> String {
        self.steps.last().cloned().unwrap_or_default()
    }

    /// Records a value the current actor materializes internally. No-op for
    /// actors without an observer.
    pub fn observe(&mut self, field: &str, class: Visibility, value: &[u8]) {
        let step = self.current_step();
        let actor = self.actor.clone();
        self.recorder
            .internal(&self.spec.id, &step, &actor, field, class, value);
    }

    pub fn ring(&self) -> &KeyRing {
        self.world.ring(&self.actor)
    }

    pub fn pk(&self, actor: &str) -> Option<VerifyingKey> {
        self.world.directory.actor(actor).map(|a| a.dss_pk)
    }

    pub fn sector(&self) -> String {
        self.world
            .scenario
            .sector_of(&self.spec.sp)
            .unwrap_or_default()
            .to_owned()
    }

    pub fn envelope(&self, step: &str, msg_type: MsgType, to: &str) -> Envelope {
        Envelope::new(&self.spec.id, step, msg_type, &self.actor, to)
    }

    pub fn sign(&self, env: Envelope) -> Envelope {
        env.sign(&self.ring().signing.sk)
    }

    pub fn send(&self, env: Envelope) -> Result<Next, Halt> {
        Ok(Next::Send(self.sign(env)))
    }
}

#[derive(Default)]
pub(crate) struct MoaState {
    pub sector: String,
    pub consent: Vec<u8>,
    pub cert: Option<crate::eid::Certificate>,
    pub il: Option<crate::eid::IdentityLink>,
    /// Visible blocks of the link, by label.
    pub blocks: BTreeMap<String, crate::pre::ReCiphertext>,
    pub country: String,
}

#[derive(Default)]
pub(crate) struct MisState {
    pub sector: String,
    pub il: Vec<u8>,
    pub cert: Vec<u8>,
    pub offered: Vec<crate::eid::Mandate>,
}

#[derive(Default)]
pub(crate) struct CrState {
    pub representative: Option<String>,
    pub offered: Vec<String>,
}

#[derive(Default)]
pub(crate) struct CcsState {
    pub offered: Vec<String>,
}

#[derive(Default)]
pub(crate) struct ForeignState {
    pub challenge: Vec<u8>,
}

/// All party state belonging to one session.
pub struct Flow {
    pub(crate) moa: MoaState,
    pub(crate) mis: MisState,
    pub(crate) cr: CrState,
    pub(crate) ccs: CcsState,
    pub(crate) foreign: ForeignState,
}

impl Default for Flow {
    fn default() -> Self {
        Self::new()
    }
}

impl Flow {
    pub fn new() -> Self {
        Self {
            moa: MoaState::default(),
            mis: MisState::default(),
            cr: CrState::default(),
            ccs: CcsState::default(),
            foreign: ForeignState::default(),
        }
    }

    /// Step 1: the subject asks the online application for the resource.
    pub fn start(&mut self, cx: &mut Cx<'_>) -> Result<Next, Halt> {
        ccs::access_request(cx)
    }

    /// Verifies `env` and runs the receiver's handler.
    pub fn deliver(&mut self, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
        let at = verify_step(cx.spec.use_case, cx.mode, env.msg_type)
            .ok_or_else(|| Halt::abort(&env.step, format!("unexpected {} message", env.msg_type)))?;
        let receiver = cx
            .world
            .directory
            .actor(&env.receiver)
            .ok_or_else(|| Halt::abort(&env.step, format!("unknown receiver {}", env.receiver)))?;
        check(
            receiver.role == receiver_role(env.msg_type) && env.session == cx.spec.id,
            at,
            "misrouted message",
        )?;
        let sender_pk = cx
            .pk(&env.sender)
            .ok_or_else(|| Halt::abort(at, format!("unknown sender {}", env.sender)))?;
        cx.step(&env.step);
        cx.step(at);
        check(env.verify(&sender_pk), at, "envelope signature invalid")?;

        use MsgType::*;
        match env.msg_type {
            AccessRequest => sp::access_request(cx, env),
            AuthRequest => moa::auth_request(self, cx, env),
            IlRequest => ccs::il_request(cx, env),
            IlResponse => moa::il_response(self, cx, env),
            SigRequest => ccs::sig_request(cx, env),
            SigResponse => moa::sig_response(self, cx, env),
            MandateQuery => mis::mandate_query(self, cx, env),
            RegisterQuery => cr::register_query(self, cx, env),
            RegisterResponse => mis::register_response(self, cx, env),
            SelectionPage => ccs::selection_page(self, cx, env),
            MandateSelection => mis::mandate_selection(self, cx, env),
            MandateFetch => cr::mandate_fetch(self, cx, env),
            MandateRecord => mis::mandate_record(cx, env),
            MandateResponse => moa::mandate_response(self, cx, env),
            CountryPage => ccs::country_page(cx, env),
            CountrySelection => moa::country_selection(self, cx, env),
            StorkRequest => stork::stork_request(cx, env),
            StorkForward => stork::stork_forward(self, cx, env),
            QsRequest => ccs::qs_request(cx, env),
            QsResponse => stork::qs_response(self, cx, env),
            IdpResponse => stork::idp_response(cx, env),
            StorkResponse => moa::stork_response(self, cx, env),
            SprRequest => sprgw::spr_request(self, cx, env),
            SrRegister => sprgw::sr_register(cx, env),
            SrResponse => sprgw::sr_response(self, cx, env),
            IlForward => moa::il_forward(self, cx, env),
            SamlResponse => sp::saml_response(cx, env),
        }
    }
}

/// Parties that take part in a use case (besides citizen and SP).
pub fn participants(use_case: UseCase) -> &'static [&'static str] {
    match use_case {
        UseCase::Austrian => &[MOA_ID],
        UseCase::Representation => &[MOA_ID, MIS, CR],
        UseCase::Foreign => &[MOA_ID, PEPS, F_IDP, SPR_GW, SR],
    }
}

/// Writes a modified Identity Link into envelope fields: `il.count`, per
/// visible block `il.<i>.label` and `il.<i>`, per redacted block a redacted
/// `il.<i>`, and `il.sig`.
pub(crate) fn put_link(mut env: Envelope, link: &ModifiedIdentityLink) -> Result<Envelope, Halt> {
    let blocks = link.message().blocks();
    env = env.meta("il.count", blocks.len().to_string());
    for (i, block) in blocks.iter().enumerate() {
        let name = format!("il.{}", i + 1);
        env = match block {
            Block::Visible(bytes) => {
                let b = LinkBlock::decode(bytes).or_abort(&env.step)?;
                env.meta(format!("{name}.label"), b.label.clone())
                    .re(name, &b.ciphertext)
            }
            Block::Redacted => env.redacted(name),
        };
    }
    Ok(env.field("il.sig", SlotKind::Sig, link.signature().to_bytes()))
}

/// Inverse of [`put_link`].
pub(crate) fn take_link(env: &Envelope) -> Result<ModifiedIdentityLink, FieldError> {
    let bad = |field: &str, reason| FieldError {
        field: field.to_owned(),
        reason,
    };
    let n: usize = env
        .meta_str("il.count")?
        .parse()
        .map_err(|_| bad("il.count", "not a number"))?;
    if n > 64 {
        return Err(bad("il.count", "too many blocks"));
    }
    let mut blocks = Vec::with_capacity(n);
    for i in 1..=n {
        let name = format!("il.{i}");
        if env.is_redacted(&name) {
            blocks.push(Block::Redacted);
        } else {
            let label = env.meta_str(&format!("{name}.label"))?;
            let c = env.re_ct(&name)?;
            blocks.push(Block::Visible(LinkBlock::encode(label, &c)));
        }
    }
    let sig = RedactableSignature::from_bytes(env.sig_bytes("il.sig")?)
        .map_err(|_| bad("il.sig", "malformed redactable signature"))?;
    Ok(ModifiedIdentityLink::from_parts(BlockMessage::from_blocks(blocks), sig))
}

/// Writes labelled ciphertexts as `blk.<i>.label` / `blk.<i>` fields.
pub(crate) fn put_blocks(
    mut env: Envelope,
    blocks: &BTreeMap<String, crate::pre::ReCiphertext>,
) -> Envelope {
    env = env.meta("blk.count", blocks.len().to_string());
    for (i, (label, c)) in blocks.iter().enumerate() {
        env = env
            .meta(format!("blk.{}.label", i + 1), label.clone())
            .re(format!("blk.{}", i + 1), c);
    }
    env
}

pub(crate) fn take_blocks(
    env: &Envelope,
) -> Result<BTreeMap<String, crate::pre::ReCiphertext>, FieldError> {
    let n: usize = env.meta_str("blk.count")?.parse().map_err(|_| FieldError {
        field: "blk.count".into(),
        reason: "not a number",
    })?;
    let mut out = BTreeMap::new();
    for i in 1..=n.min(64) {
        let label = env.meta_str(&format!("blk.{i}.label"))?.to_owned();
        out.insert(label, env.re_ct(&format!("blk.{i}"))?);
    }
    Ok(out)
}

/// Re-encrypts `c` from the current actor to `to`.
pub(crate) fn forward(
    cx: &mut Cx<'_>,
    to: &str,
    c: &crate::pre::ReCiphertext,
    step: &str,
) -> Result<crate::pre::ReCiphertext, Halt> {
    let rk = cx
        .ring()
        .re_key(&cx.actor, to)
        .cloned()
        .ok_or_else(|| Halt::abort(step, format!("{} holds no re-encryption key to {to}", cx.actor)))?;
    crate::pre::re_reencrypt(c, &rk, &mut *cx.rng).or_abort(step)
}

/// Whether the session's subject is an Austrian citizen (has a CRR entry).
pub(crate) fn subject_is_resident(cx: &Cx<'_>) -> bool {
    cx.world.registers.crr.citizens.contains_key(&cx.spec.subject)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_message_type_has_a_verification_step_in_some_use_case() {
        for m in MsgType::ALL {
            let any = UseCase::ALL
                .iter()
                .flat_map(|u| Mode::ALL.iter().map(move |md| (*u, *md)))
                .any(|(u, md)| verify_step(u, md, m).is_some());
            assert!(any, "{m}");
        }
    }

    #[test]
    fn cloud_only_messages_have_no_current_step() {
        let u = UseCase::Representation;
        assert_eq!(verify_step(u, Mode::Current, MsgType::MandateFetch), None);
        assert_eq!(verify_step(u, Mode::Current, MsgType::MandateRecord), None);
        assert_eq!(verify_step(u, Mode::Cloud, MsgType::MandateRecord), Some("12"));
    }
}
