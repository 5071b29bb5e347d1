//! Deterministic in-process message bus.
//!
//! Sessions interleave round-robin in session-id order, one envelope per
//! session per round, so a (scenario, seed) pair fixes the whole trace. Every
//! cloud-hosted actor has an honest-but-curious observer that logs each
//! envelope field it sends or receives and every plaintext it materializes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::actors::{verify_step, Cx, Flow, FlowOutcome, HaltKind, Next};
use crate::crypto::{seed_bytes, sha256};
use crate::eid::{derive_source_pin, PinOrigin};
use crate::envelope::{Envelope, SlotKind};
use crate::pre::Backend;
use crate::scenario::{LeakAttribute, Mode, Scenario, SessionSpec, UseCase};
use crate::world::{sra_setup, SetupError, World, CLOUD_HOSTED, SRA};

/// What an observer can read from a recorded item.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Plaintext,
    Metadata,
    Ciphertext,
    Signature,
    Redacted,
}

impl Visibility {
    /// Whether the observer learns the value itself.
    pub fn exposes_value(self) -> bool {
        matches!(self, Visibility::Plaintext | Visibility::Metadata)
    }
}

impl From<SlotKind> for Visibility {
    fn from(k: SlotKind) -> Self {
        match k {
            SlotKind::Plain => Visibility::Plaintext,
            SlotKind::Meta => Visibility::Metadata,
            SlotKind::Re | SlotKind::Hybrid => Visibility::Ciphertext,
            SlotKind::Sig => Visibility::Signature,
            SlotKind::Redacted => Visibility::Redacted,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Sent,
    Received,
    Internal,
}

/// One observed item. `value` is present only when the class exposes it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub seq: u64,
    pub session: String,
    pub step: String,
    pub actor: String,
    pub source: Source,
    pub field: String,
    pub class: Visibility,
    /// SHA-256 of the bytes, hex.
    pub digest: String,
    #[serde(with = "crate::hexser::opt", default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Vec<u8>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLog {
    pub actor: String,
    pub entries: Vec<Observation>,
}

impl ObservationLog {
    /// Entries that carry a readable value.
    pub fn readable(&self) -> impl Iterator<Item = (&Observation, &[u8])> {
        self.entries
            .iter()
            .filter_map(|o| o.value.as_deref().map(|v| (o, v)))
    }
}

/// Observers for a fixed set of instrumented actors.
#[derive(Clone, Debug)]
pub struct Recorder {
    instrumented: BTreeSet<String>,
    logs: BTreeMap<String, ObservationLog>,
    seq: u64,
}

impl Default for Recorder {
    fn default() -> Self {
        Self::new(CLOUD_HOSTED)
    }
}

impl Recorder {
    pub fn new<I, S>(actors: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let instrumented: BTreeSet<String> = actors.into_iter().map(Into::into).collect();
        let logs = instrumented
            .iter()
            .map(|a| {
                (
                    a.clone(),
                    ObservationLog {
                        actor: a.clone(),
                        entries: Vec::new(),
                    },
                )
            })
            .collect();
        Self {
            instrumented,
            logs,
            seq: 0,
        }
    }

    pub fn is_instrumented(&self, actor: &str) -> bool {
        self.instrumented.contains(actor)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        session: &str,
        step: &str,
        actor: &str,
        source: Source,
        field: &str,
        class: Visibility,
        value: &[u8],
    ) {
        let Some(log) = self.logs.get_mut(actor) else {
            return;
        };
        self.seq += 1;
        log.entries.push(Observation {
            seq: self.seq,
            session: session.to_owned(),
            step: step.to_owned(),
            actor: actor.to_owned(),
            source,
            field: field.to_owned(),
            class,
            digest: hex::encode(sha256(&[value])),
            value: class.exposes_value().then(|| value.to_vec()),
        });
    }

    /// A value the actor holds in memory (decrypted, derived or parsed).
    pub fn internal(
        &mut self,
        session: &str,
        step: &str,
        actor: &str,
        field: &str,
        class: Visibility,
        value: &[u8],
    ) {
        self.push(session, step, actor, Source::Internal, field, class, value);
    }

    /// One entry per envelope field, classified by the field's tag.
    pub fn envelope(&mut self, actor: &str, source: Source, env: &Envelope) {
        for f in &env.fields {
            self.push(&env.session, &env.step, actor, source, &f.name, f.kind.into(), &f.bytes);
        }
    }

    pub fn logs(&self) -> &BTreeMap<String, ObservationLog> {
        &self.logs
    }

    pub fn into_logs(self) -> BTreeMap<String, ObservationLog> {
        self.logs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delivery {
    Delivered,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seq: u64,
    /// Logical time of delivery.
    pub clock: u64,
    pub session: String,
    pub step: String,
    pub msg_type: String,
    pub sender: String,
    pub receiver: String,
    pub status: Delivery,
    #[serde(with = "crate::hexser::bytes")]
    pub envelope: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusTrace {
    pub records: Vec<TraceRecord>,
}

impl BusTrace {
    pub fn session<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a TraceRecord> + 'a {
        self.records.iter().filter(move |r| r.session == id)
    }

    pub fn sent(&self) -> usize {
        self.records.len()
    }

    pub fn delivered(&self) -> usize {
        self.count(Delivery::Delivered)
    }

    pub fn rejected(&self) -> usize {
        self.count(Delivery::Rejected)
    }

    fn count(&self, status: Delivery) -> usize {
        self.records.iter().filter(|r| r.status == status).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RoutingError {
    UnknownReceiver(String),
}

impl fmt::Display for RoutingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoutingError::UnknownReceiver(r) => write!(f, "unknown receiver {r}"),
        }
    }
}

impl std::error::Error for RoutingError {}

/// Handle for an envelope accepted by [`Bus::post`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Receipt {
    pub clock: u64,
}

/// Trace and observers shared by all sessions of one run.
#[derive(Debug, Default)]
pub struct Bus {
    pub recorder: Recorder,
    pub trace: BusTrace,
    clock: u64,
}

impl Bus {
    pub fn new(recorder: Recorder) -> Self {
        Self {
            recorder,
            trace: BusTrace::default(),
            clock: 0,
        }
    }

    /// The sender's observer records the outgoing envelope.
    pub fn sent(&mut self, env: &Envelope) {
        self.recorder.envelope(&env.sender, Source::Sent, env);
    }

    /// Accepts `env` for delivery; the receiver's observer records it.
    pub fn post(&mut self, world: &World, env: &Envelope) -> Result<Receipt, RoutingError> {
        self.clock += 1;
        if world.directory.actor(&env.receiver).is_none() {
            self.finish(Receipt { clock: self.clock }, env, Delivery::Rejected);
            return Err(RoutingError::UnknownReceiver(env.receiver.clone()));
        }
        self.recorder.envelope(&env.receiver, Source::Received, env);
        Ok(Receipt { clock: self.clock })
    }

    pub fn finish(&mut self, receipt: Receipt, env: &Envelope, status: Delivery) {
        self.trace.records.push(TraceRecord {
            seq: self.trace.records.len() as u64 + 1,
            clock: receipt.clock,
            session: env.session.clone(),
            step: env.step.clone(),
            msg_type: env.msg_type.label().to_owned(),
            sender: env.sender.clone(),
            receiver: env.receiver.clone(),
            status,
            envelope: env.to_bytes(),
        });
    }
}

/// Result of one session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session: String,
    pub use_case: UseCase,
    pub mode: Mode,
    pub subject: String,
    pub sp: String,
    #[serde(flatten)]
    pub outcome: FlowOutcome,
    /// Protocol steps in execution order.
    pub steps: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub mode: Mode,
    pub backend: Backend,
    pub seed: u64,
    pub trace: BusTrace,
    pub logs: BTreeMap<String, ObservationLog>,
    pub sessions: Vec<SessionRecord>,
}

impl RunOutput {
    pub fn outcome(&self, session: &str) -> Option<&FlowOutcome> {
        self.sessions
            .iter()
            .find(|s| s.session == session)
            .map(|s| &s.outcome)
    }

    /// Bus trace, one JSON object per line.
    pub fn trace_jsonl(&self) -> String {
        jsonl(&self.trace.records)
    }

    /// All observations of all instrumented actors in recording order.
    pub fn logs_jsonl(&self) -> String {
        let mut all: Vec<&Observation> = self.logs.values().flat_map(|l| &l.entries).collect();
        all.sort_by_key(|o| o.seq);
        jsonl(&all)
    }

    pub fn outcomes_jsonl(&self) -> String {
        jsonl(&self.sessions)
    }

    /// Serialized envelopes sent to or from a cloud-hosted actor.
    pub fn cloud_bound_envelopes(&self) -> impl Iterator<Item = &TraceRecord> {
        self.trace.records.iter().filter(|r| {
            CLOUD_HOSTED.contains(&r.sender.as_str()) || CLOUD_HOSTED.contains(&r.receiver.as_str())
        })
    }
}

pub fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Tampering hook: called with the session id, the per-session envelope
/// index and the signed envelope before it is delivered.
pub type Interceptor<'a> = dyn FnMut(&str, usize, &mut Envelope) + 'a;

struct Live {
    spec: SessionSpec,
    flow: Flow,
    rng: ChaCha20Rng,
    steps: Vec<String>,
    pending: Option<Envelope>,
    outcome: Option<FlowOutcome>,
    sent: usize,
    leaked: bool,
}

fn leak_value(world: &World, subject: &str, attr: LeakAttribute) -> Option<Vec<u8>> {
    if let Ok(c) = world.registers.crr.get(subject) {
        return Some(match attr {
            LeakAttribute::Name => c.full_name().into_bytes(),
            LeakAttribute::DateOfBirth => c.date_of_birth.clone().into_bytes(),
            LeakAttribute::SourcePin => {
                let key = world.ring(SRA).pin_key?;
                world.registers.crr.source_pin(&key, subject).ok()?.as_bytes().to_vec()
            }
        });
    }
    let f = world.registers.fidp.citizens.get(subject)?;
    Some(match attr {
        LeakAttribute::Name => f.full_name().into_bytes(),
        LeakAttribute::DateOfBirth => f.date_of_birth.clone().into_bytes(),
        LeakAttribute::SourcePin => {
            let key = world.ring(SRA).pin_key?;
            derive_source_pin(&key, PinOrigin::Sr, &f.identifier, &f.identifier)
                .as_bytes()
                .to_vec()
        }
    })
}

fn settle(live: &mut Live, bus: &mut Bus, r: Result<Next, crate::actors::Halt>, hook: &mut Option<&mut Interceptor<'_>>) {
    match r {
        Ok(Next::Send(mut env)) => {
            bus.sent(&env);
            if let Some(h) = hook.as_mut() {
                h(&live.spec.id, live.sent, &mut env);
            }
            live.sent += 1;
            live.pending = Some(env);
        }
        Ok(Next::Done(o)) => live.outcome = Some(o),
        Err(h) => live.outcome = Some(h.into_outcome()),
    }
}

/// Runs `sessions` to completion in `mode`.
pub fn run_sessions(world: &mut World, sessions: &[SessionSpec], mode: Mode) -> RunOutput {
    run_sessions_with(world, sessions, mode, None)
}

pub fn run_sessions_with(
    world: &mut World,
    sessions: &[SessionSpec],
    mode: Mode,
    mut hook: Option<&mut Interceptor<'_>>,
) -> RunOutput {
    let seed = world.seed();
    let mut specs = sessions.to_vec();
    specs.sort_by(|a, b| a.id.cmp(&b.id));
    let mut lives: Vec<Live> = specs
        .into_iter()
        .map(|spec| Live {
            rng: ChaCha20Rng::from_seed(seed_bytes("session", &format!("{}/{mode}", spec.id), seed)),
            spec,
            flow: Flow::new(),
            steps: Vec::new(),
            pending: None,
            outcome: None,
            sent: 0,
            leaked: false,
        })
        .collect();
    let mut bus = Bus::new(Recorder::default());
    let leak = world.scenario.leak.clone();

    for live in &mut lives {
        let mut cx = Cx {
            world: &mut *world,
            spec: &live.spec,
            mode,
            rng: &mut live.rng,
            clock: 0,
            actor: live.spec.subject.clone(),
            steps: &mut live.steps,
            recorder: &mut bus.recorder,
        };
        let r = live.flow.start(&mut cx);
        settle(live, &mut bus, r, &mut hook);
    }

    loop {
        let mut progressed = false;
        for live in &mut lives {
            let Some(env) = live.pending.take() else {
                continue;
            };
            progressed = true;
            let receipt = match bus.post(world, &env) {
                Ok(r) => r,
                Err(e) => {
                    live.outcome = Some(FlowOutcome::Aborted {
                        step: env.step.clone(),
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            if let Some(l) = &leak {
                if l.actor == env.receiver && !live.leaked {
                    live.leaked = true;
                    if let Some(v) = leak_value(world, &live.spec.subject, l.attribute) {
                        let step = verify_step(live.spec.use_case, mode, env.msg_type).unwrap_or(&env.step);
                        let field = format!("leaked {:?}", l.attribute).to_lowercase();
                        bus.recorder
                            .internal(&live.spec.id, step, &l.actor, &field, Visibility::Plaintext, &v);
                    }
                }
            }
            let mut cx = Cx {
                world: &mut *world,
                spec: &live.spec,
                mode,
                rng: &mut live.rng,
                clock: receipt.clock,
                actor: env.receiver.clone(),
                steps: &mut live.steps,
                recorder: &mut bus.recorder,
            };
            let r = live.flow.deliver(&mut cx, &env);
            let status = match &r {
                Err(h) if h.kind == HaltKind::Aborted => Delivery::Rejected,
                _ => Delivery::Delivered,
            };
            bus.finish(receipt, &env, status);
            settle(live, &mut bus, r, &mut hook);
        }
        if !progressed {
            break;
        }
    }

    let sessions = lives
        .into_iter()
        .map(|l| SessionRecord {
            session: l.spec.id.clone(),
            use_case: l.spec.use_case,
            mode,
            subject: l.spec.subject.clone(),
            sp: l.spec.sp.clone(),
            outcome: l.outcome.unwrap_or(FlowOutcome::Aborted {
                step: l.steps.last().cloned().unwrap_or_default(),
                reason: "session stalled".into(),
            }),
            steps: l.steps,
        })
        .collect();
    RunOutput {
        mode,
        backend: world.backend(),
        seed,
        trace: bus.trace,
        logs: bus.recorder.into_logs(),
        sessions,
    }
}

/// Sets up the scenario's world and runs all its sessions. The mode defaults
/// to the scenario's, then to cloud.
pub fn run_scenario(
    scenario: &Scenario,
    seed: u64,
    backend: Backend,
    mode: Option<Mode>,
) -> Result<RunOutput, SetupError> {
    let mut world = sra_setup(scenario, seed, backend)?;
    let mode = mode.or(scenario.mode).unwrap_or(Mode::Cloud);
    let sessions = scenario.sessions.clone();
    Ok(run_sessions(&mut world, &sessions, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::MsgType;

    #[test]
    fn trusted_to_trusted_envelopes_are_not_observed() {
        let mut r = Recorder::default();
        let env = Envelope::new("s", "8a", MsgType::RegisterQuery, "C_1", "CR").plain("x", b"y".to_vec());
        r.envelope("CR", Source::Received, &env);
        assert!(r.logs().values().all(|l| l.entries.is_empty()));
    }

    #[test]
    fn ciphertext_fields_keep_only_a_digest() {
        let mut r = Recorder::default();
        let env = Envelope::new("s", "1", MsgType::MandateRecord, "CR", "MIS")
            .field("c", SlotKind::Re, b"opaque".to_vec())
            .plain("p", b"seen".to_vec());
        r.envelope("MIS", Source::Received, &env);
        let log = &r.logs()["MIS"];
        assert_eq!(log.entries.len(), 2);
        assert_eq!(log.entries[0].value, None);
        assert_eq!(log.entries[0].digest, hex::encode(sha256(&[b"opaque"])));
        assert_eq!(log.entries[1].value.as_deref(), Some(&b"seen"[..]));
    }
}
