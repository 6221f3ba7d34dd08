use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::definition::ScenarioDefinition;
use crate::text;

/// The clinical agents a student can address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Patient,
    Exam,
    Diagnostic,
    Intervention,
}

impl AgentRole {
    pub const ALL: [AgentRole; 4] = [AgentRole::Patient, AgentRole::Exam, AgentRole::Diagnostic, AgentRole::Intervention];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Patient => "patient",
            AgentRole::Exam => "exam",
            AgentRole::Diagnostic => "diagnostic",
            AgentRole::Intervention => "intervention",
        }
    }

    /// Exam, diagnostic and intervention requests name a catalog item.
    pub fn is_structured(self) -> bool {
        self != AgentRole::Patient
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown agent role `{0}` (expected patient, exam, diagnostic or intervention)")]
pub struct UnknownRole(pub String);

impl FromStr for AgentRole {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "patient" => Ok(AgentRole::Patient),
            "exam" | "physical_exam" => Ok(AgentRole::Exam),
            "diagnostic" | "diagnostics" | "test" | "tests" => Ok(AgentRole::Diagnostic),
            "intervention" | "interventions" => Ok(AgentRole::Intervention),
            _ => Err(UnknownRole(s.to_string())),
        }
    }
}

/// One student action as ingested at the boundary. `ts` is assigned there and
/// is the only clock the pipeline sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentEvent {
    pub target: AgentRole,
    #[serde(default)]
    pub text: String,
    /// Catalog id for exam sites, tests and interventions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    pub ts: DateTime<Utc>,
}

impl StudentEvent {
    pub fn message(target: AgentRole, text: impl Into<String>, ts: DateTime<Utc>) -> Self {
        Self { target, text: text.into(), action: None, ts }
    }

    pub fn action(target: AgentRole, action: impl Into<String>, ts: DateTime<Utc>) -> Self {
        Self { target, text: String::new(), action: Some(action.into()), ts }
    }

    /// No text and no structured action.
    pub fn is_empty(&self) -> bool {
        self.text.trim().is_empty() && self.action.as_deref().is_none_or(|a| a.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionAttempt {
    pub id: String,
    pub performed: bool,
}

/// Per-session agent state. Flags and histories only ever grow.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub flags: BTreeSet<String>,
    pub tests_ordered: Vec<String>,
    pub exams_performed: Vec<String>,
    pub interventions: Vec<InterventionAttempt>,
    /// Rotates through the scenario's default answers.
    pub default_cursor: usize,
}

impl AgentState {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.contains(flag)
    }

    /// Prerequisites of `intervention_id` not yet satisfied.
    pub fn missing_prerequisites(&self, scenario: &ScenarioDefinition, intervention_id: &str) -> Vec<String> {
        scenario
            .intervention(intervention_id)
            .map(|iv| iv.requires.iter().filter(|f| !self.has_flag(f)).cloned().collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReply {
    pub agent: AgentRole,
    pub text: String,
    /// False when the request named nothing this case provides.
    pub available: bool,
    /// Flags newly set by this reply.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub effects: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<serde_json::Value>,
}

impl AgentReply {
    fn new(agent: AgentRole, text: impl Into<String>) -> Self {
        Self { agent, text: text.into(), available: true, effects: Vec::new(), payload: None }
    }

    fn not_available(agent: AgentRole, what: &str) -> Self {
        Self {
            agent,
            text: format!("{what} is not available in this case."),
            available: false,
            effects: Vec::new(),
            payload: Some(json!({ "available": false })),
        }
    }
}

/// Index of the catalog entry the event refers to. An explicit `action` must
/// match an id or alias; free text picks the entry sharing the most tokens
/// with it, first entry on ties.
pub(crate) fn resolve<'a, I>(event: &StudentEvent, names: I) -> Option<usize>
where
    I: IntoIterator<Item = Vec<&'a str>>,
{
    let names: Vec<Vec<&str>> = names.into_iter().collect();
    if let Some(action) = event.action.as_deref().filter(|a| !a.trim().is_empty()) {
        let action = action.trim();
        return names.iter().position(|ns| ns.iter().any(|n| n.eq_ignore_ascii_case(action)));
    }
    let tokens = text::token_set(&event.text);
    let mut best: Option<(usize, usize)> = None;
    for (i, ns) in names.iter().enumerate() {
        let vocab: BTreeSet<String> = ns.iter().flat_map(|n| text::tokenize(n)).collect();
        let overlap = vocab.intersection(&tokens).count();
        if overlap > 0 && best.is_none_or(|(_, b)| overlap > b) {
            best = Some((i, overlap));
        }
    }
    best.map(|(i, _)| i)
}

/// Index of the patient intent with the largest keyword overlap.
pub(crate) fn match_intent(scenario: &ScenarioDefinition, text_in: &str) -> Option<usize> {
    let tokens = text::token_set(text_in);
    let mut best: Option<(usize, usize)> = None;
    for (i, intent) in scenario.qa_intents.iter().enumerate() {
        let keywords: BTreeSet<String> = intent.keywords.iter().flat_map(|k| text::tokenize(k)).collect();
        let overlap = keywords.intersection(&tokens).count();
        if overlap >= 1 && best.is_none_or(|(_, b)| overlap > b) {
            best = Some((i, overlap));
        }
    }
    best.map(|(i, _)| i)
}

fn set_flags(state: &mut AgentState, flags: &[String], reply: &mut AgentReply) {
    for flag in flags {
        if state.flags.insert(flag.clone()) {
            reply.effects.push(flag.clone());
        }
    }
}

/// Sends `event` to its target agent. Never fails: requests the case cannot
/// serve get a "not available" reply.
pub fn route(event: &StudentEvent, scenario: &ScenarioDefinition, state: &mut AgentState) -> AgentReply {
    match event.target {
        AgentRole::Patient => route_patient(event, scenario, state),
        AgentRole::Exam => route_exam(event, scenario, state),
        AgentRole::Diagnostic => route_diagnostic(event, scenario, state),
        AgentRole::Intervention => route_intervention(event, scenario, state),
    }
}

fn route_patient(event: &StudentEvent, scenario: &ScenarioDefinition, state: &mut AgentState) -> AgentReply {
    match match_intent(scenario, &event.text) {
        Some(i) => {
            let intent = &scenario.qa_intents[i];
            let mut reply = AgentReply::new(AgentRole::Patient, intent.answer.clone());
            reply.payload = Some(json!({ "intent": intent.id }));
            set_flags(state, &intent.sets, &mut reply);
            reply
        }
        None => {
            let answers = &scenario.default_answers;
            let text = answers[state.default_cursor % answers.len()].clone();
            state.default_cursor += 1;
            AgentReply::new(AgentRole::Patient, text)
        }
    }
}

fn route_exam(event: &StudentEvent, scenario: &ScenarioDefinition, state: &mut AgentState) -> AgentReply {
    let names = scenario
        .exam_findings
        .iter()
        .map(|e| std::iter::once(e.site.as_str()).chain(e.aliases.iter().map(String::as_str)).collect());
    match resolve(event, names) {
        Some(i) => {
            let exam = &scenario.exam_findings[i];
            state.exams_performed.push(exam.site.clone());
            let mut reply = AgentReply::new(AgentRole::Exam, exam.finding.clone());
            reply.payload = Some(json!({ "site": exam.site, "finding": exam.finding }));
            reply
        }
        None => {
            let site = event.action.clone().unwrap_or_else(|| event.text.trim().to_string());
            state.exams_performed.push(site.clone());
            let mut reply = AgentReply::new(AgentRole::Exam, "Examination is unremarkable.");
            reply.payload = Some(json!({ "site": site, "finding": "unremarkable" }));
            reply
        }
    }
}

fn route_diagnostic(event: &StudentEvent, scenario: &ScenarioDefinition, state: &mut AgentState) -> AgentReply {
    let names = scenario.tests.iter().map(|t| vec![t.id.as_str(), t.name.as_str()]);
    match resolve(event, names) {
        Some(i) => {
            let test = &scenario.tests[i];
            state.tests_ordered.push(test.id.clone());
            let mut reply = AgentReply::new(AgentRole::Diagnostic, format!("{}: {}", test.name, test.result));
            reply.payload = Some(json!({
                "test": test.id,
                "name": test.name,
                "result": test.result,
                "turnaround": test.turnaround,
            }));
            reply
        }
        None => AgentReply::not_available(AgentRole::Diagnostic, "That test"),
    }
}

fn route_intervention(event: &StudentEvent, scenario: &ScenarioDefinition, state: &mut AgentState) -> AgentReply {
    let names = scenario.interventions.iter().map(|iv| vec![iv.id.as_str(), iv.name.as_str()]);
    let Some(i) = resolve(event, names) else {
        return AgentReply::not_available(AgentRole::Intervention, "That intervention");
    };
    let iv = &scenario.interventions[i];
    let missing = state.missing_prerequisites(scenario, &iv.id);
    let performed = missing.is_empty();
    state.interventions.push(InterventionAttempt { id: iv.id.clone(), performed });
    if performed {
        let mut reply = AgentReply::new(AgentRole::Intervention, iv.outcome.clone());
        reply.payload = Some(json!({ "intervention": iv.id, "performed": true }));
        set_flags(state, &iv.sets, &mut reply);
        reply
    } else {
        let mut reply = AgentReply::new(
            AgentRole::Intervention,
            format!("{} was not carried out. Prerequisites not met: {}.", iv.name, missing.join(", ")),
        );
        reply.payload = Some(json!({ "intervention": iv.id, "performed": false, "missing": missing }));
        reply
    }
}
