//! Declarative clinical cases and the scripted agents that act them out.
//!
//! A scenario is a JSON document (`schema_version` 1). Agents are
//! deterministic pattern matchers over it, so a session replays exactly.

mod agents;
mod definition;

pub use agents::{route, AgentReply, AgentRole, AgentState, InterventionAttempt, StudentEvent, UnknownRole};
pub(crate) use agents::resolve;
pub use definition::{
    load_scenario, DiagnosticTest, ExamFinding, FieldError, HintOverride, Intervention, PatientProfile, QaIntent,
    ScenarioDefinition, ScenarioError, SCHEMA_VERSION,
};

/// The bundled chest-pain case.
pub const CHEST_PAIN: &str = include_str!("../../../../scenarios/chest_pain.json");
/// A minimal case used by smoke tests.
pub const SMOKE: &str = include_str!("../../../../scenarios/smoke.json");

pub fn chest_pain() -> ScenarioDefinition {
    load_scenario(CHEST_PAIN).expect("bundled chest-pain scenario is valid")
}

/// Every bundled scenario.
pub fn bundled() -> Vec<ScenarioDefinition> {
    vec![chest_pain(), load_scenario(SMOKE).expect("bundled smoke scenario is valid")]
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranscriptError {
    #[error("transcript is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Parses a transcript: one JSON [`StudentEvent`] per line, blank lines
/// skipped.
pub fn parse_transcript(text: &str) -> Result<Vec<StudentEvent>, TranscriptError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(line)
            .map_err(|e| TranscriptError::Line { line: i + 1, message: e.to_string() })?;
        events.push(event);
    }
    if events.is_empty() {
        return Err(TranscriptError::Empty);
    }
    Ok(events)
}
