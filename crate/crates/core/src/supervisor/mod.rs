//! The per-event pipeline: score, route, infer, decide, hint, persist.
//!
//! An event is processed against a copy of the session state. The copy
//! replaces the live state only after all of its log entries are on disk, so
//! a failed write leaves the session as it was.

mod hints;
mod metrics;
mod report;

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hints::{default_templates, deficient_criterion, select_hint, HintTemplate, SeverityBand};
pub use metrics::{update_metrics, NonMonotonicTime, RunningStat, SessionMetrics};
pub use report::{metrics_by_decision, report_from_log, FinalReport, TimelineEntry};

use crate::criteria::{Criterion, CriterionScores, Provenance};
use crate::fuzzy::{default_engine, AssistanceDecision, FuzzyEngine, FuzzyError};
use crate::scenario::{route, AgentReply, AgentState, ScenarioDefinition, StudentEvent};
use crate::scoring::{KeywordSet, Scorer, ScoringContext};
use crate::store::{EntryKind, FileStore, LogEntry, NewEntry, StoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisorDecision {
    pub assistance: AssistanceDecision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    pub deficient: Criterion,
    pub ts: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum SupervisorError {
    #[error("session `{0}` is closed")]
    Closed(String),
    #[error("session has no events")]
    EmptySession,
    #[error(transparent)]
    Clock(#[from] NonMonotonicTime),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("session log is inconsistent: {0}")]
    CorruptLog(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisorConfig {
    /// Suppress a hint identical to one given within this many events.
    /// `None` emits every qualifying hint.
    pub hint_cooldown: Option<usize>,
    /// Student messages passed to the external classifier as context.
    pub context_excerpt: usize,
    /// Extra templates consulted before the built-in ones.
    pub templates: Vec<HintTemplate>,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self { hint_cooldown: None, context_excerpt: 3, templates: Vec::new() }
    }
}

/// Mutable state of one live session. Cloning is cheap enough to do per
/// event.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    scenario: Arc<ScenarioDefinition>,
    keywords: KeywordSet,
    agents: AgentState,
    metrics: SessionMetrics,
    window: VecDeque<f64>,
    excerpt: VecDeque<String>,
    /// Event index at which each hint text was last given.
    hints_given: BTreeMap<String, usize>,
    closed: bool,
}

impl Session {
    pub fn new(id: impl Into<String>, scenario: Arc<ScenarioDefinition>) -> Self {
        Self {
            id: id.into(),
            keywords: KeywordSet::new(&scenario.topic_keywords),
            scenario,
            agents: AgentState::default(),
            metrics: SessionMetrics::default(),
            window: VecDeque::new(),
            excerpt: VecDeque::new(),
            hints_given: BTreeMap::new(),
            closed: false,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn scenario(&self) -> &Arc<ScenarioDefinition> {
        &self.scenario
    }

    pub fn agents(&self) -> &AgentState {
        &self.agents
    }

    pub fn metrics(&self) -> &SessionMetrics {
        &self.metrics
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    fn context(&self, ts: DateTime<Utc>) -> ScoringContext {
        let elapsed_secs = self
            .metrics
            .last_ts
            .map_or(0.0, |prev| ((ts - prev).num_microseconds().unwrap_or(0) as f64 / 1e6).max(0.0));
        ScoringContext {
            topic_keywords: self.keywords.clone(),
            window: self.window.iter().copied().collect(),
            flags: self.agents.flags.clone(),
            elapsed_secs,
            excerpt: self.excerpt.iter().cloned().collect(),
        }
    }
}

/// Everything one event produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub reply: AgentReply,
    pub scores: CriterionScores,
    pub decision: SupervisorDecision,
}

/// A processed event and the sequence numbers of its four log entries.
#[derive(Debug, Clone, PartialEq)]
pub struct EventOutcome {
    pub step: Step,
    pub metrics: SessionMetrics,
    pub seqs: [u64; 4],
}

#[derive(Debug, Clone)]
pub struct Supervisor {
    engine: Arc<FuzzyEngine>,
    scorer: Arc<Scorer>,
    config: SupervisorConfig,
}

impl Default for Supervisor {
    fn default() -> Self {
        Self::new(default_engine(), Scorer::default())
    }
}

impl Supervisor {
    pub fn new(engine: FuzzyEngine, scorer: Scorer) -> Self {
        Self { engine: Arc::new(engine), scorer: Arc::new(scorer), config: SupervisorConfig::default() }
    }

    pub fn with_config(mut self, config: SupervisorConfig) -> Self {
        self.config = config;
        self
    }

    pub fn engine(&self) -> &FuzzyEngine {
        &self.engine
    }

    pub fn scorer(&self) -> &Scorer {
        &self.scorer
    }

    /// Runs the pipeline on `session` in place without persisting anything.
    /// `recorded` scores, when given, replace scoring.
    pub fn step(
        &self,
        session: &mut Session,
        event: &StudentEvent,
        recorded: Option<CriterionScores>,
    ) -> Result<Step, SupervisorError> {
        if session.closed {
            return Err(SupervisorError::Closed(session.id.clone()));
        }
        let scoring = self.scorer.config();
        let ctx = session.context(event.ts);
        let scores = match recorded {
            Some(s) => s,
            None => self.scorer.score(&session.id, event, &ctx, &session.scenario),
        };
        session.metrics = update_metrics(&session.metrics, event.ts, &scores, scoring.off_topic_below)?;
        let reply = route(event, &session.scenario, &mut session.agents);
        let assistance = self.engine.evaluate(&scores)?;
        let deficient = deficient_criterion(&scores);
        let mut hint = select_hint(&assistance, &scores, &session.scenario, &self.config.templates);
        let index = session.metrics.event_count as usize;
        if let (Some(text), Some(cooldown)) = (&hint, self.config.hint_cooldown) {
            if session.hints_given.get(text).is_some_and(|&last| index - last <= cooldown) {
                hint = None;
            }
        }
        if let Some(text) = &hint {
            session.hints_given.insert(text.clone(), index);
        }
        if assistance.intervene {
            session.metrics.record_intervention(&assistance.label);
        }

        session.window.push_back(scores.medical_relevance);
        while session.window.len() > scoring.window.max(1) {
            session.window.pop_front();
        }
        if !event.text.trim().is_empty() {
            session.excerpt.push_back(event.text.clone());
            while session.excerpt.len() > self.config.context_excerpt {
                session.excerpt.pop_front();
            }
        }
        let decision = SupervisorDecision { assistance, hint, deficient, ts: event.ts };
        Ok(Step { reply, scores, decision })
    }

    /// Processes one event and persists its four entries. The session state
    /// changes only if the write succeeds.
    pub fn handle_event(
        &self,
        session: &mut Session,
        store: &FileStore,
        event: &StudentEvent,
    ) -> Result<EventOutcome, SupervisorError> {
        let mut next = session.clone();
        let step = self.step(&mut next, event, None)?;
        let entries = vec![
            NewEntry::new(EntryKind::StudentEvent, event.ts, json(event)),
            NewEntry::new(EntryKind::AgentReply, event.ts, json(&step.reply)),
            NewEntry::new(EntryKind::Scores, event.ts, json(&step.scores)),
            NewEntry::new(EntryKind::Decision, event.ts, json(&step.decision)),
        ];
        let seqs = store.append_all(&session.id, entries)?;
        *session = next;
        Ok(EventOutcome { step, metrics: session.metrics.clone(), seqs: [seqs[0], seqs[1], seqs[2], seqs[3]] })
    }

    /// Builds the report from the persisted log, appends it, and closes the
    /// session.
    pub fn finalize_session(
        &self,
        session: &mut Session,
        store: &FileStore,
        ts: DateTime<Utc>,
    ) -> Result<FinalReport, SupervisorError> {
        if session.closed {
            return Err(SupervisorError::Closed(session.id.clone()));
        }
        let log = store.read_log(&session.id)?;
        let report = self.report(&session.scenario.id, &log.entries)?;
        let payload = serde_json::to_value(&report).expect("report serializes");
        store.append(&session.id, NewEntry::new(EntryKind::Report, ts, payload))?;
        store.close_session(&session.id, ts)?;
        session.closed = true;
        Ok(report)
    }

    pub fn report(&self, scenario_id: &str, entries: &[LogEntry]) -> Result<FinalReport, SupervisorError> {
        report_from_log(scenario_id, entries, self.engine.registry(), self.scorer.config().off_topic_below)
    }

    /// Runs `events` through a fresh in-memory session.
    pub fn replay_events(
        &self,
        scenario: Arc<ScenarioDefinition>,
        events: &[StudentEvent],
    ) -> Result<Vec<Step>, SupervisorError> {
        let mut session = Session::new("replay", scenario);
        events.iter().map(|e| self.step(&mut session, e, None)).collect()
    }

    /// Re-runs a persisted log. Scores that came from the external classifier
    /// are reused as recorded; heuristic scores are recomputed.
    pub fn replay_log(
        &self,
        session_id: &str,
        scenario: Arc<ScenarioDefinition>,
        entries: &[LogEntry],
    ) -> Result<Vec<Step>, SupervisorError> {
        Ok(self.restore(session_id, scenario, entries)?.1)
    }

    /// Rebuilds a session's in-memory state from its log, for example after
    /// a restart. A logged report marks the session closed.
    pub fn restore(
        &self,
        session_id: &str,
        scenario: Arc<ScenarioDefinition>,
        entries: &[LogEntry],
    ) -> Result<(Session, Vec<Step>), SupervisorError> {
        let mut session = Session::new(session_id, scenario);
        let mut steps = Vec::new();
        for (i, entry) in entries.iter().enumerate() {
            match entry.kind {
                EntryKind::StudentEvent => {}
                EntryKind::Report => {
                    session.closed = true;
                    continue;
                }
                _ => continue,
            }
            let event: StudentEvent = serde_json::from_value(entry.payload.clone())
                .map_err(|e| SupervisorError::CorruptLog(format!("student_event at seq {}: {e}", entry.seq)))?;
            let recorded = entries[i + 1..]
                .iter()
                .take_while(|e| e.kind != EntryKind::StudentEvent)
                .find(|e| e.kind == EntryKind::Scores)
                .and_then(|e| serde_json::from_value::<CriterionScores>(e.payload.clone()).ok())
                .filter(|s| s.provenance == Provenance::External);
            steps.push(self.step(&mut session, &event, recorded)?);
        }
        Ok((session, steps))
    }
}

/// Decisions recorded in a log, in order.
pub fn logged_decisions(entries: &[LogEntry]) -> Result<Vec<SupervisorDecision>, SupervisorError> {
    entries
        .iter()
        .filter(|e| e.kind == EntryKind::Decision)
        .map(|e| {
            serde_json::from_value(e.payload.clone())
                .map_err(|err| SupervisorError::CorruptLog(format!("decision at seq {}: {err}", e.seq)))
        })
        .collect()
}

fn json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("log payloads serialize")
}
