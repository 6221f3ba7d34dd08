//! Text output for the `replay`, `infer` and `rules check` commands.

use std::fmt::Write as _;
use std::sync::Arc;

use serde_json::json;

use fsa_core::fuzzy::{AssistanceDecision, FuzzyEngine};
use fsa_core::rules::{self, parse_rules, render_rule, Diagnostic, Severity};
use fsa_core::scenario::{ScenarioDefinition, StudentEvent};
use fsa_core::supervisor::{Step, Supervisor, SupervisorError};

/// Runs a transcript through a fresh session.
pub fn replay(
    supervisor: &Supervisor,
    scenario: Arc<ScenarioDefinition>,
    events: &[StudentEvent],
) -> Result<Vec<Step>, SupervisorError> {
    supervisor.replay_events(scenario, events)
}

/// Fixed-width table, one row per event with its hint underneath.
pub fn trace_table(events: &[StudentEvent], steps: &[Step]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:>3}  {:<20}  {:<12}  {:>5}  {:>5}  {:>5}  {:>5}  {:>6}  {:<9}  scores",
        "#", "time", "agent", "prof", "rel", "eth", "dist", "crisp", "label"
    )
    .unwrap();
    for (i, (event, step)) in events.iter().zip(steps).enumerate() {
        let s = &step.scores;
        let d = &step.decision.assistance;
        let provenance = serde_json::to_value(s.provenance).unwrap();
        writeln!(
            out,
            "{:>3}  {:<20}  {:<12}  {:>5.3}  {:>5.3}  {:>5.3}  {:>5.3}  {:>6.4}  {:<9}  {}",
            i + 1,
            event.ts.format("%Y-%m-%dT%H:%M:%SZ"),
            event.target.to_string(),
            s.professionalism,
            s.medical_relevance,
            s.ethical_behavior,
            s.contextual_distraction,
            d.crisp,
            d.label,
            provenance.as_str().unwrap_or_default(),
        )
        .unwrap();
        if let Some(hint) = &step.decision.hint {
            writeln!(out, "     hint ({}): {hint}", step.decision.deficient).unwrap();
        }
    }
    out
}

/// One JSON object per event.
pub fn trace_json(events: &[StudentEvent], steps: &[Step]) -> String {
    let mut out = String::new();
    for (i, (event, step)) in events.iter().zip(steps).enumerate() {
        let line = json!({
            "event": i + 1,
            "ts": event.ts,
            "target": event.target,
            "scores": step.scores,
            "decision": step.decision,
            "reply": step.reply,
        });
        writeln!(out, "{line}").unwrap();
    }
    out
}

pub fn describe_decision(engine: &FuzzyEngine, d: &AssistanceDecision) -> String {
    let mut out = String::new();
    let i = &d.inputs;
    writeln!(
        out,
        "inputs: professionalism={:.3} medical_relevance={:.3} ethical_behavior={:.3} contextual_distraction={:.3}",
        i.professionalism, i.medical_relevance, i.ethical_behavior, i.contextual_distraction
    )
    .unwrap();
    if d.fired.is_empty() {
        writeln!(out, "fired: none (fallback value used)").unwrap();
    } else {
        writeln!(out, "fired:").unwrap();
        for f in &d.fired {
            let text = engine.rules().get(f.rule_id).map(render_rule).unwrap_or_default();
            writeln!(out, "  rule {:>2} ({:.3}): {text}", f.rule_id, f.strength).unwrap();
        }
    }
    writeln!(out, "defuzzifier: {}", engine.defuzzifier()).unwrap();
    writeln!(out, "crisp: {:.4}", d.crisp).unwrap();
    writeln!(out, "label: {}", d.label).unwrap();
    writeln!(out, "intervene: {}", if d.intervene { "yes" } else { "no" }).unwrap();
    out
}

/// Parses and validates rule text. Returns the report and whether any
/// diagnostic is an error.
pub fn check_rules(text: &str) -> (String, bool) {
    let registry = fsa_core::fuzzy::default_registry();
    let (count, diags): (usize, Vec<Diagnostic>) = match parse_rules(text) {
        Ok(rb) => (rb.len(), rules::validate(&rb, &registry)),
        Err(diags) => (0, diags),
    };
    let mut out = String::new();
    for d in &diags {
        writeln!(out, "{d}").unwrap();
    }
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    let warnings = diags.len() - errors;
    writeln!(out, "{count} rule(s), {errors} error(s), {warnings} warning(s)").unwrap();
    (out, errors > 0)
}
