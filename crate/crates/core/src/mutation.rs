//! Fail-closed sweep: corrupt one signed field (or the signature) of one
//! envelope per run and check that the receiver aborts where it verifies.

use serde::Serialize;

use crate::actors::{verify_step, FlowOutcome};
use crate::batch;
use crate::envelope::{Envelope, MsgType};
use crate::harness::run_sessions_with;
use crate::scenario::{Mode, UseCase};
use crate::world::World;

/// What a case corrupts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Target {
    Field(usize),
    Signature,
}

#[derive(Clone, Debug, Serialize)]
pub struct MutationCase {
    pub session: String,
    pub index: usize,
    pub msg_type: MsgType,
    pub target: Target,
    pub field: String,
    /// Step at which the receiver verifies this message.
    pub expected_step: String,
    pub outcome: FlowOutcome,
}

impl MutationCase {
    /// Aborted at the receiver's verification step.
    pub fn caught(&self) -> bool {
        matches!(&self.outcome, FlowOutcome::Aborted { step, .. } if *step == self.expected_step)
    }
}

/// Flips the low bit of the first byte, or appends a byte to an empty value.
pub fn corrupt(bytes: &mut Vec<u8>) {
    match bytes.first_mut() {
        Some(b) => *b ^= 1,
        None => bytes.push(1),
    }
}

fn apply(env: &mut Envelope, target: &Target) {
    match target {
        Target::Field(i) => corrupt(&mut env.fields[*i].bytes),
        Target::Signature => corrupt(&mut env.signature),
    }
}

/// Envelopes of an untouched run, in per-session order.
pub fn baseline(world: &World, use_case: UseCase, mode: Mode) -> Vec<(String, usize, Envelope)> {
    let mut w = world.clone();
    let sessions = w.scenario.sessions_for(use_case);
    let mut seen = Vec::new();
    let mut hook = |s: &str, i: usize, env: &mut Envelope| seen.push((s.to_owned(), i, env.clone()));
    run_sessions_with(&mut w, &sessions, mode, Some(&mut hook));
    seen
}

/// One run per (envelope, target) pair of the baseline.
pub fn sweep(world: &World, use_case: UseCase, mode: Mode) -> Vec<MutationCase> {
    let mut plan = Vec::new();
    for (session, index, env) in baseline(world, use_case, mode) {
        let expected = verify_step(use_case, mode, env.msg_type).unwrap_or("?").to_owned();
        for (i, f) in env.fields.iter().enumerate() {
            plan.push((session.clone(), index, env.msg_type, Target::Field(i), f.name.clone(), expected.clone()));
        }
        plan.push((session, index, env.msg_type, Target::Signature, "signature".into(), expected));
    }
    batch::map(&plan, |(session, index, msg_type, target, field, expected)| {
        let mut w = world.clone();
        let sessions = w.scenario.sessions_for(use_case);
        let mut hook = |s: &str, i: usize, env: &mut Envelope| {
            if s == session && i == *index {
                apply(env, target);
            }
        };
        let run = run_sessions_with(&mut w, &sessions, mode, Some(&mut hook));
        let outcome = run
            .outcome(session)
            .cloned()
            .unwrap_or(FlowOutcome::Aborted {
                step: String::new(),
                reason: "session missing".into(),
            });
        MutationCase {
            session: session.clone(),
            index: *index,
            msg_type: *msg_type,
            target: target.clone(),
            field: field.clone(),
            expected_step: expected.clone(),
            outcome,
        }
    })
}
