use std::sync::Arc;

use fsa_core::scenario::{chest_pain, parse_transcript, TranscriptError};
use fsa_core::store::{Durability, FileStore};
use fsa_core::supervisor::{logged_decisions, Session, Supervisor};

const ESCALATION: &str = include_str!("../../../transcripts/chest_pain_escalation.jsonl");
const GOOD_STUDENT: &str = include_str!("../../../transcripts/chest_pain_good_student.jsonl");

const RELEVANCE_HINT: &str =
    "Consider focusing your questions on symptoms related to chest pain and cardiovascular risk factors.";
const CONSENT_HINT: &str =
    "Before proceeding, ensure you have explained the procedure and obtained the patient's consent.";

#[test]
fn escalation_has_one_high_then_one_very_high() {
    let sup = Supervisor::default();
    let steps = sup.replay_events(Arc::new(chest_pain()), &parse_transcript(ESCALATION).unwrap()).unwrap();
    let hinted: Vec<(&str, &str)> = steps
        .iter()
        .filter_map(|s| s.decision.hint.as_deref().map(|h| (s.decision.assistance.label.as_str(), h)))
        .collect();
    assert_eq!(hinted, [("High", RELEVANCE_HINT), ("Very High", CONSENT_HINT)]);
    let high = &steps[2].decision.assistance;
    assert_eq!(high.label, "High");
    assert!(high.crisp > 0.5 && high.crisp < 0.7, "crisp {} outside the High-dominant region", high.crisp);
}

#[test]
fn good_student_never_rises_above_low() {
    let sup = Supervisor::default();
    let steps = sup.replay_events(Arc::new(chest_pain()), &parse_transcript(GOOD_STUDENT).unwrap()).unwrap();
    for (i, s) in steps.iter().enumerate() {
        assert!(s.decision.assistance.severity <= 1, "event {} got {}", i + 1, s.decision.assistance.label);
        assert!(s.decision.hint.is_none());
    }
    let last = steps.last().unwrap();
    assert_eq!(last.reply.payload.as_ref().unwrap()["performed"], true);
}

#[test]
fn live_run_and_replay_agree() {
    let dir = tempfile::tempdir().unwrap();
    let store = FileStore::open_with(dir.path(), Durability::Buffered).unwrap();
    let sup = Supervisor::default();
    let scenario = Arc::new(chest_pain());
    let events = parse_transcript(ESCALATION).unwrap();

    let record = store.create_session(&scenario.id, events[0].ts).unwrap();
    let mut session = Session::new(&record.session_id, scenario.clone());
    for e in &events {
        sup.handle_event(&mut session, &store, e).unwrap();
    }
    let live_report = sup.finalize_session(&mut session, &store, events.last().unwrap().ts).unwrap();
    let entries = store.read_log(&record.session_id).unwrap().entries;
    assert_eq!(entries.len(), events.len() * 4 + 1);

    let replayed = sup.replay_events(scenario.clone(), &events).unwrap();
    let live = logged_decisions(&entries).unwrap();
    assert_eq!(replayed.iter().map(|s| s.decision.clone()).collect::<Vec<_>>(), live);
    for (a, b) in replayed.iter().zip(&live) {
        assert_eq!(a.decision.assistance.crisp.to_bits(), b.assistance.crisp.to_bits());
    }

    let other = store.create_session(&scenario.id, events[0].ts).unwrap();
    let mut second = Session::new(&other.session_id, scenario);
    for e in &events {
        sup.handle_event(&mut second, &store, e).unwrap();
    }
    let replay_report = sup.finalize_session(&mut second, &store, events.last().unwrap().ts).unwrap();
    assert_eq!(live_report, replay_report);
    assert_eq!(live_report.metrics.event_count as usize, live.len());
    assert_eq!(live_report.metrics.total_interventions(), 2);
}

#[test]
fn single_event_histogram() {
    let sup = Supervisor::default();
    let dir = tempfile::tempdir().unwrap();
    let store = FileStore::open_with(dir.path(), Durability::Buffered).unwrap();
    let events = parse_transcript(GOOD_STUDENT).unwrap();
    let record = store.create_session("chest_pain", events[0].ts).unwrap();
    let mut session = Session::new(&record.session_id, Arc::new(chest_pain()));
    sup.handle_event(&mut session, &store, &events[0]).unwrap();
    let report = sup.finalize_session(&mut session, &store, events[0].ts).unwrap();
    for counts in report.histogram.values() {
        assert_eq!(counts.values().sum::<u64>(), 1);
    }
}

#[test]
fn transcript_errors_name_the_line() {
    assert_eq!(parse_transcript("\n\n"), Err(TranscriptError::Empty));
    let bad = format!("{}\n{{\"target\":\"nurse\",\"ts\":\"2025-01-01T00:00:00Z\"}}\n", GOOD_STUDENT.lines().next().unwrap());
    assert!(matches!(parse_transcript(&bad), Err(TranscriptError::Line { line: 2, .. })));
}
