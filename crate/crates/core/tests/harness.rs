mod common;

use eid_cloud::batch;
use eid_cloud::envelope::{Envelope, MsgType};
use eid_cloud::harness::{run_sessions, Bus, Delivery, Recorder, RoutingError, Source};
use eid_cloud::pre::Backend;
use eid_cloud::scenario::{Mode, Scenario};
use eid_cloud::world::{sra_setup, CLOUD_HOSTED};

use common::world;

#[test]
fn identical_seeds_give_identical_bytes() {
    for mode in Mode::ALL {
        let mut a = world();
        let mut b = world();
        let sessions = a.scenario.sessions.clone();
        let ra = run_sessions(&mut a, &sessions, mode);
        let rb = run_sessions(&mut b, &sessions, mode);
        assert_eq!(ra.trace_jsonl(), rb.trace_jsonl());
        assert_eq!(ra.logs_jsonl(), rb.logs_jsonl());
        assert_eq!(ra.outcomes_jsonl(), rb.outcomes_jsonl());
    }
}

#[test]
fn another_seed_changes_the_cloud_trace() {
    let s = Scenario::default_scenario();
    let mut a = sra_setup(&s, 1, Backend::Pairing).unwrap();
    let mut b = sra_setup(&s, 2, Backend::Pairing).unwrap();
    let sessions = s.sessions.clone();
    let ra = run_sessions(&mut a, &sessions, Mode::Cloud);
    let rb = run_sessions(&mut b, &sessions, Mode::Cloud);
    assert_ne!(ra.trace_jsonl(), rb.trace_jsonl());
    let steps = |r: &eid_cloud::harness::RunOutput| r.sessions.iter().map(|s| s.steps.clone()).collect::<Vec<_>>();
    assert_eq!(steps(&ra), steps(&rb));
}

#[test]
fn every_sent_envelope_is_delivered_or_rejected_once() {
    let mut w = world();
    let sessions = w.scenario.sessions.clone();
    for mode in Mode::ALL {
        let run = run_sessions(&mut w.clone(), &sessions, mode);
        let t = &run.trace;
        assert_eq!(t.sent(), t.delivered() + t.rejected());
        assert_eq!(t.rejected(), 0);
        for (i, r) in t.records.iter().enumerate() {
            assert_eq!(r.seq, i as u64 + 1);
            let env = Envelope::from_bytes(&r.envelope).unwrap();
            assert_eq!((env.sender.as_str(), env.receiver.as_str()), (r.sender.as_str(), r.receiver.as_str()));
            assert_eq!(env.step, r.step);
        }
        assert!(t.records.windows(2).all(|p| p[0].clock < p[1].clock));
    }
    let _ = &mut w;
}

#[test]
fn an_unknown_receiver_is_a_routing_error() {
    let w = world();
    let mut bus = Bus::new(Recorder::default());
    let env = Envelope::new("s", "1", MsgType::AccessRequest, "C_1", "S_9");
    bus.sent(&env);
    assert_eq!(bus.post(&w, &env), Err(RoutingError::UnknownReceiver("S_9".into())));
    assert_eq!(bus.trace.rejected(), 1);
    assert_eq!(bus.trace.records[0].status, Delivery::Rejected);
}

#[test]
fn cloud_hosted_actors_log_every_field_they_send_or_receive() {
    let mut w = world();
    let sessions = w.scenario.sessions.clone();
    for mode in Mode::ALL {
        let run = run_sessions(&mut w.clone(), &sessions, mode);
        assert_eq!(run.logs.keys().map(String::as_str).collect::<Vec<_>>().len(), CLOUD_HOSTED.len());
        for actor in CLOUD_HOSTED {
            let log = &run.logs[actor];
            for (role, source) in [(true, Source::Sent), (false, Source::Received)] {
                let records = run.trace.records.iter().filter(|r| if role { r.sender == actor } else { r.receiver == actor });
                let expected: usize = records.map(|r| Envelope::from_bytes(&r.envelope).unwrap().fields.len()).sum();
                let got = log.entries.iter().filter(|e| e.source == source).count();
                assert_eq!(got, expected, "{mode} {actor} {source:?}");
            }
        }
        assert!(!run.logs.contains_key("CR") && !run.logs.contains_key("C_1"));
    }
    let _ = &mut w;
}

#[cfg(feature = "parallel")]
#[test]
fn sequential_and_parallel_batches_agree() {
    let w = world();
    let jobs = batch::matrix();
    let a = batch::run_sequential(&w, &jobs);
    let b = batch::run_parallel(&w, &jobs);
    assert_eq!(a.len(), 6);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.trace_jsonl(), y.trace_jsonl());
        assert_eq!(x.logs_jsonl(), y.logs_jsonl());
        assert_eq!(x.outcomes_jsonl(), y.outcomes_jsonl());
    }
}

#[test]
fn the_batch_matrix_covers_each_combination_once() {
    let m = batch::matrix();
    assert_eq!(m.len(), 6);
    let set: std::collections::BTreeSet<_> = m.iter().collect();
    assert_eq!(set.len(), 6);
    assert_eq!(m[0].1, Mode::Current);
}
