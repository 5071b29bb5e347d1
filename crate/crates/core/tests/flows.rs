mod common;

use eid_cloud::actors::FlowOutcome;
use eid_cloud::eid::Mandate;
use eid_cloud::harness::run_sessions;
use eid_cloud::scenario::{Mode, UseCase};
use eid_cloud::world::SRA;

use common::{sspin_oracle, world};

fn granted(use_case: UseCase, mode: Mode) -> (eid_cloud::world::World, eid_cloud::actors::Identity) {
    let mut w = world();
    let sessions = w.scenario.sessions_for(use_case);
    let run = run_sessions(&mut w, &sessions, mode);
    assert_eq!(run.sessions.len(), 1);
    match &run.sessions[0].outcome {
        FlowOutcome::Granted { identity } => (w, identity.clone()),
        other => panic!("{use_case}/{mode}: {other}"),
    }
}

#[test]
fn austrian_identity_is_equal_in_both_modes_and_matches_the_oracle() {
    let (w, current) = granted(UseCase::Austrian, Mode::Current);
    let (_, cloud) = granted(UseCase::Austrian, Mode::Cloud);
    assert_eq!(current, cloud);
    let key = w.ring(SRA).pin_key.unwrap();
    let sp = w.registers.crr.source_pin(&key, "C_1").unwrap();
    assert_eq!(cloud["ssPIN"], sspin_oracle(sp.as_bytes(), "tax"));
    assert_eq!(cloud["name"], b"Maria Huber");
    assert_eq!(cloud["date_of_birth"], b"1980-04-12");
}

#[test]
fn representation_delivers_the_selected_mandate() {
    let (_, current) = granted(UseCase::Representation, Mode::Current);
    let (_, cloud) = granted(UseCase::Representation, Mode::Cloud);
    assert_eq!(current, cloud);
    let m = Mandate::from_bytes(&cloud["mandate"]).unwrap();
    assert_eq!(m.mand_id, "MAND-0002");
    assert_eq!(m.empowerment, "tax filing on behalf of the company");
    assert_eq!(m.mandator.name, "Holzbau Huber GmbH");
}

#[test]
fn foreign_citizen_gets_a_supplementary_register_sspin() {
    let (w, current) = granted(UseCase::Foreign, Mode::Current);
    let (wc, cloud) = granted(UseCase::Foreign, Mode::Cloud);
    assert_eq!(current, cloud);
    let row = w.registers.sr.get("DE/AT/123456789").expect("registered");
    assert_eq!(wc.registers.sr.get("DE/AT/123456789"), Some(row));
    assert_eq!(cloud["ssPIN"], sspin_oracle(row.source_pin.as_bytes(), "health"));
    assert_eq!(cloud["name"], b"Erika Mustermann");
}

#[test]
fn sessions_of_all_use_cases_run_together() {
    let mut w = world();
    let sessions = w.scenario.sessions.clone();
    for mode in Mode::ALL {
        let run = run_sessions(&mut w.clone(), &sessions, mode);
        assert!(run.sessions.iter().all(|s| s.outcome.is_granted()), "{mode}");
        let ids: Vec<_> = run.sessions.iter().map(|s| s.session.as_str()).collect();
        for id in &ids {
            let sub: Vec<_> = run.trace.session(id).collect();
            assert!(!sub.is_empty());
            assert!(sub.iter().all(|r| r.session == *id));
        }
        let total: usize = ids.iter().map(|id| run.trace.session(id).count()).sum();
        assert_eq!(total, run.trace.sent());
    }
    let _ = &mut w;
}

#[test]
fn cloud_step_sequences_are_fixed() {
    let mut w = world();
    let sessions = w.scenario.sessions.clone();
    let run = run_sessions(&mut w, &sessions, Mode::Cloud);
    let steps = |id: &str| run.sessions.iter().find(|s| s.session == id).unwrap().steps.join(" ");
    assert_eq!(steps("s01"), "1 2 3a 3b 3c 3d 4a 4b 4c 5b 5c 6 7a 7b 8");
    assert_eq!(
        steps("s02"),
        "1 2 3a 3b 3c 4 5 6 7b 8a 8b 8c 9a 9b 9c 11a 11b 11c 12 13 14 15 16a 16b 17"
    );
    assert_eq!(
        steps("s03"),
        "1 2 3 4 5 6 7 8 9 10 11 12 13 14 15a 15b 15c 16 17 18b 18c 19 20 21"
    );
}
