mod common;

use std::collections::BTreeSet;

use eid_cloud::audit::{annotations, audit_run, disclosure_cell, AuditError, Category, DisclosurePolicy, Registry, Verdict};
use eid_cloud::compare::{compare, render_comparison, RenderError};
use eid_cloud::harness::run_sessions;
use eid_cloud::pre::Backend;
use eid_cloud::scenario::{Mode, Scenario, UseCase, DEFAULT_SCENARIO};
use eid_cloud::world::{sra_setup, CLOUD_HOSTED};

use common::{contains, sensitive_values, world, world_from, SEED};

#[test]
fn observed_categories_equal_the_disclosure_table() {
    let w = world();
    let cmp = compare(&w).unwrap();
    assert_eq!(cmp.reports.len(), 6);
    assert_eq!(cmp.verdict(), Verdict::Pass);
    for r in &cmp.reports {
        for a in &r.actors {
            let cell = disclosure_cell(r.use_case, r.mode, &a.actor);
            let notes = annotations(r.use_case, r.mode, &a.actor);
            let extra: BTreeSet<Category> = a.observed.difference(&cell).copied().collect();
            let noted: BTreeSet<Category> = a.annotations.keys().copied().collect();
            let ctx = format!("{} {} {}", r.use_case, r.mode, a.actor);
            assert!(cell.is_subset(&a.observed), "{ctx}: missing {:?}", cell.difference(&a.observed));
            assert!(extra.iter().all(|c| notes.contains_key(c)), "{ctx}: unannotated {extra:?}");
            assert_eq!(extra, noted, "{ctx}");
            assert!(a.violations.is_empty());
        }
    }
    let moa = cmp.report(UseCase::Foreign, Mode::Cloud).unwrap().actor("MOA-ID").unwrap();
    assert!(moa.annotations.contains_key(&Category::HomeCountry));
}

#[test]
fn cloud_actors_never_read_a_sensitive_value() {
    let w = world();
    let needles = sensitive_values(&w);
    for use_case in UseCase::ALL {
        let mut wc = w.clone();
        let sessions = wc.scenario.sessions_for(use_case);
        let run = run_sessions(&mut wc, &sessions, Mode::Cloud);
        for actor in CLOUD_HOSTED {
            let Some(log) = run.logs.get(actor) else { continue };
            for (o, v) in log.readable() {
                for (what, n) in &needles {
                    assert!(!contains(v, n), "{use_case}: {actor} read {what} at {} ({})", o.step, o.field);
                }
            }
        }
        for rec in run.cloud_bound_envelopes() {
            for (what, n) in &needles {
                assert!(!contains(&rec.envelope, n), "{use_case}: {what} in envelope {} {}", rec.step, rec.msg_type);
            }
        }
    }
}

#[test]
fn the_same_scan_finds_values_in_current_mode() {
    let w = world();
    let needles = sensitive_values(&w);
    let mut wc = w.clone();
    let sessions = wc.scenario.sessions_for(UseCase::Austrian);
    let run = run_sessions(&mut wc, &sessions, Mode::Current);
    let moa = &run.logs["MOA-ID"];
    let hits = needles
        .iter()
        .filter(|(_, n)| moa.readable().any(|(_, v)| contains(v, n)))
        .count();
    assert!(hits >= 4, "scan is blind: {hits} hits");
}

fn leak_source(actor: &str, attribute: &str) -> String {
    format!("{DEFAULT_SCENARIO}\n[leak]\nactor = \"{actor}\"\nattribute = \"{attribute}\"\n")
}

#[test]
fn an_injected_leak_fails_the_audit_at_the_named_step() {
    let w = world_from(&leak_source("MOA-ID", "name"));
    let mut wc = w.clone();
    let sessions = wc.scenario.sessions_for(UseCase::Austrian);
    let run = run_sessions(&mut wc, &sessions, Mode::Cloud);
    assert!(run.sessions[0].outcome.is_granted());
    let report = audit_run(&run, &Registry::from_world(&w), &DisclosurePolicy::for_run(UseCase::Austrian, Mode::Cloud)).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    let moa = report.actor("MOA-ID").unwrap();
    assert_eq!(moa.verdict, Verdict::Fail);
    let v = &moa.violations[0];
    assert_eq!(v.step, "2");
    assert_eq!(v.field, "leaked name");
    assert_eq!(v.category, Category::IdentityLink);
    assert_eq!(v.value, b"Maria Huber");
    for other in ["MIS", "SPR-GW", "PEPS"] {
        assert_eq!(report.actor(other).unwrap().verdict, Verdict::Pass);
    }
}

#[test]
fn every_actor_and_attribute_leak_is_detected() {
    let cases = [
        ("MOA-ID", UseCase::Austrian),
        ("MIS", UseCase::Representation),
        ("SPR-GW", UseCase::Foreign),
        ("PEPS", UseCase::Foreign),
    ];
    for (actor, use_case) in cases {
        for attr in ["name", "date_of_birth", "source_pin"] {
            let w = world_from(&leak_source(actor, attr));
            let mut wc = w.clone();
            let sessions = wc.scenario.sessions_for(use_case);
            let run = run_sessions(&mut wc, &sessions, Mode::Cloud);
            let r = audit_run(&run, &Registry::from_world(&w), &DisclosurePolicy::for_run(use_case, Mode::Cloud)).unwrap();
            let a = r.actor(actor).unwrap();
            assert_eq!(a.verdict, Verdict::Fail, "{actor} {attr}");
            assert!(a.violations.iter().any(|v| v.field.starts_with("leaked")), "{actor} {attr}");
        }
    }
}

#[test]
fn runs_on_the_test_double_are_refused() {
    let s = Scenario::default_scenario();
    let mut w = sra_setup(&s, SEED, Backend::TrustedDealer).unwrap();
    let sessions = w.scenario.sessions_for(UseCase::Austrian);
    let run = run_sessions(&mut w, &sessions, Mode::Cloud);
    assert!(run.sessions[0].outcome.is_granted());
    let err = audit_run(&run, &Registry::from_world(&w), &DisclosurePolicy::for_run(UseCase::Austrian, Mode::Cloud));
    assert_eq!(err.unwrap_err(), AuditError::Refused(Backend::TrustedDealer));
    assert_eq!(compare(&w).unwrap_err(), AuditError::Refused(Backend::TrustedDealer));
}

#[test]
fn a_policy_for_another_run_is_an_error() {
    let w = world();
    let mut wc = w.clone();
    let sessions = wc.scenario.sessions_for(UseCase::Austrian);
    let run = run_sessions(&mut wc, &sessions, Mode::Cloud);
    let reg = Registry::from_world(&w);
    assert_eq!(
        audit_run(&run, &reg, &DisclosurePolicy::for_run(UseCase::Foreign, Mode::Cloud)).unwrap_err(),
        AuditError::Mismatch { expected: UseCase::Foreign, found: UseCase::Austrian }
    );
    assert_eq!(
        audit_run(&run, &reg, &DisclosurePolicy::for_run(UseCase::Austrian, Mode::Current)).unwrap_err(),
        AuditError::ModeMismatch { expected: Mode::Current, found: Mode::Cloud }
    );
}

#[test]
fn the_table_needs_all_six_runs() {
    let cmp = compare(&world()).unwrap();
    let table = render_comparison(&cmp.reports).unwrap();
    assert!(table.contains("Cloud-based approach"));
    assert!(table.contains("Current approach"));
    let partial: Vec<_> = cmp.reports.iter().filter(|r| r.mode == Mode::Current).cloned().collect();
    assert_eq!(
        render_comparison(&partial).unwrap_err(),
        RenderError::Missing { use_case: UseCase::Austrian, mode: Mode::Cloud }
    );
}
