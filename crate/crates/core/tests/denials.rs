mod common;

use eid_cloud::actors::FlowOutcome;
use eid_cloud::harness::run_sessions;
use eid_cloud::scenario::{Mode, UseCase, DEFAULT_SCENARIO};

use common::{contains, world_from};

fn outcome(src: &str, use_case: UseCase, mode: Mode) -> (FlowOutcome, eid_cloud::harness::RunOutput) {
    let mut w = world_from(src);
    let sessions = w.scenario.sessions_for(use_case);
    let run = run_sessions(&mut w, &sessions, mode);
    (run.sessions[0].outcome.clone(), run)
}

fn with_consent(consent: &str) -> String {
    DEFAULT_SCENARIO.replace(
        "crr_number = \"000123456789\"",
        &format!("crr_number = \"000123456789\"\nconsent = \"{consent}\""),
    )
}

fn foreign_with_consent(consent: &str) -> String {
    DEFAULT_SCENARIO.replace("country = \"DE\"", &format!("country = \"DE\"\nconsent = \"{consent}\""))
}

fn denied_at(o: &FlowOutcome) -> Option<&str> {
    match o {
        FlowOutcome::Denied { step, .. } => Some(step),
        _ => None,
    }
}

fn aborted_at(o: &FlowOutcome) -> Option<&str> {
    match o {
        FlowOutcome::Aborted { step, .. } => Some(step),
        _ => None,
    }
}

#[test]
fn refusing_the_identity_link_denies_at_consent() {
    let src = with_consent("deny-identity-link");
    for mode in Mode::ALL {
        assert_eq!(denied_at(&outcome(&src, UseCase::Austrian, mode).0), Some("3b"));
        assert_eq!(denied_at(&outcome(&src, UseCase::Representation, mode).0), Some("3c"));
    }
}

#[test]
fn refusing_to_sign_denies_at_the_signature_step() {
    let src = with_consent("deny-signature");
    for mode in Mode::ALL {
        assert_eq!(denied_at(&outcome(&src, UseCase::Austrian, mode).0), Some("4b"));
        assert_eq!(denied_at(&outcome(&src, UseCase::Representation, mode).0), Some("4"));
    }
}

#[test]
fn a_wrong_signing_key_aborts_where_the_signature_is_checked() {
    let src = with_consent("fail-authentication");
    for mode in Mode::ALL {
        assert_eq!(aborted_at(&outcome(&src, UseCase::Austrian, mode).0), Some("4c"));
    }
    let src = foreign_with_consent("fail-authentication");
    for mode in Mode::ALL {
        assert_eq!(aborted_at(&outcome(&src, UseCase::Foreign, mode).0), Some("8"));
    }
    let src = foreign_with_consent("deny-signature");
    assert_eq!(denied_at(&outcome(&src, UseCase::Foreign, Mode::Cloud).0), Some("7"));
}

/// Drops every `[[mandates]]` table.
fn without_mandates() -> String {
    let mut out = Vec::new();
    let mut skip = false;
    for line in DEFAULT_SCENARIO.lines() {
        if line.starts_with('[') {
            skip = line == "[[mandates]]";
        }
        if !skip {
            out.push(line);
        }
    }
    out.join("\n").replace("mandate = \"MAND-0002\"\n", "")
}

#[test]
fn zero_mandates_end_after_step_9a_with_no_mandate_data_observed() {
    let src = without_mandates();
    for mode in Mode::ALL {
        let (o, run) = outcome(&src, UseCase::Representation, mode);
        assert_eq!(denied_at(&o), Some("9a"), "{mode}: {o}");
        let steps = &run.sessions[0].steps;
        assert_eq!(steps.last().map(String::as_str), Some("9a"));
        for log in run.logs.values() {
            for e in &log.entries {
                let v = e.value.as_deref().unwrap_or_default();
                for needle in [&b"MAND-"[..], b"Holzbau", b"FN 204815k", b"power of attorney"] {
                    assert!(!contains(v, needle), "{mode} {} {}", log.actor, e.field);
                }
            }
        }
    }
}
