use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::metrics::{update_metrics, SessionMetrics};
use super::{SupervisorDecision, SupervisorError};
use crate::criteria::{Criterion, CriterionScores};
use crate::fuzzy::VariableRegistry;
use crate::store::{EntryKind, LogEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    /// 1-based event number.
    pub event: usize,
    pub ts: DateTime<Utc>,
    pub label: String,
    pub crisp: f64,
    pub intervene: bool,
    pub deficient: Criterion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

/// End-of-session summary, computed from the persisted log alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub scenario_id: String,
    pub metrics: SessionMetrics,
    pub timeline: Vec<TimelineEntry>,
    /// Per criterion, how many events had each label as their dominant one.
    pub histogram: BTreeMap<Criterion, BTreeMap<String, u64>>,
    pub summary: Vec<String>,
}

/// Walks the log event by event. Each student event contributes the first
/// scores and decision entries that follow it; `visit` sees the decision
/// entry, the event time, its scores, the decision and the metrics after it.
fn fold_decisions<F>(entries: &[LogEntry], off_topic_below: f64, mut visit: F) -> Result<SessionMetrics, SupervisorError>
where
    F: FnMut(&LogEntry, DateTime<Utc>, &CriterionScores, &SupervisorDecision, &SessionMetrics) -> Result<(), SupervisorError>,
{
    let mut metrics = SessionMetrics::default();
    let mut current: Option<(DateTime<Utc>, Option<CriterionScores>)> = None;
    for entry in entries {
        match entry.kind {
            EntryKind::StudentEvent => current = Some((entry.ts, None)),
            EntryKind::Scores => {
                if let Some((_, slot)) = current.as_mut() {
                    *slot = Some(parse(entry)?);
                }
            }
            EntryKind::Decision => {
                let Some((ts, Some(scores))) = current.take() else {
                    return Err(SupervisorError::CorruptLog(format!(
                        "decision at seq {} has no preceding event and scores",
                        entry.seq
                    )));
                };
                let decision: SupervisorDecision = parse(entry)?;
                metrics = update_metrics(&metrics, ts, &scores, off_topic_below)?;
                if decision.assistance.intervene {
                    metrics.record_intervention(&decision.assistance.label);
                }
                visit(entry, ts, &scores, &decision, &metrics)?;
            }
            EntryKind::AgentReply | EntryKind::Report => {}
        }
    }
    Ok(metrics)
}

/// Metrics as they stood after each decision, keyed by the decision's
/// sequence number.
pub fn metrics_by_decision(
    entries: &[LogEntry],
    off_topic_below: f64,
) -> Result<Vec<(u64, SessionMetrics)>, SupervisorError> {
    let mut out = Vec::new();
    fold_decisions(entries, off_topic_below, |entry, _, _, _, m| {
        out.push((entry.seq, m.clone()));
        Ok(())
    })?;
    Ok(out)
}

/// Rebuilds the report from log entries.
pub fn report_from_log(
    scenario_id: &str,
    entries: &[LogEntry],
    registry: &VariableRegistry,
    off_topic_below: f64,
) -> Result<FinalReport, SupervisorError> {
    let mut timeline = Vec::new();
    let mut histogram: BTreeMap<Criterion, BTreeMap<String, u64>> = BTreeMap::new();
    let metrics = fold_decisions(entries, off_topic_below, |_, ts, scores, decision, _| {
        for (c, x) in scores.iter() {
            let var = registry
                .input(c.variable_name())
                .ok_or_else(|| SupervisorError::CorruptLog(format!("no variable for {c}")))?;
            let label = var.fuzzify(x)?.dominant().to_string();
            *histogram.entry(c).or_default().entry(label).or_default() += 1;
        }
        timeline.push(TimelineEntry {
            event: timeline.len() + 1,
            ts,
            label: decision.assistance.label.clone(),
            crisp: decision.assistance.crisp,
            intervene: decision.assistance.intervene,
            deficient: decision.deficient,
            hint: decision.hint.clone(),
        });
        Ok(())
    })?;
    if timeline.is_empty() {
        return Err(SupervisorError::EmptySession);
    }
    let summary = narrative(&metrics, &timeline, registry);
    Ok(FinalReport { scenario_id: scenario_id.to_string(), metrics, timeline, histogram, summary })
}

fn parse<T: serde::de::DeserializeOwned>(entry: &LogEntry) -> Result<T, SupervisorError> {
    serde_json::from_value(entry.payload.clone())
        .map_err(|e| SupervisorError::CorruptLog(format!("{} entry at seq {}: {e}", entry.kind, entry.seq)))
}

fn narrative(metrics: &SessionMetrics, timeline: &[TimelineEntry], registry: &VariableRegistry) -> Vec<String> {
    let mut lines = Vec::new();
    let span: f64 = metrics.elapsed_secs.iter().sum();
    lines.push(format!(
        "{} events over {:.0} s with {} intervention(s).",
        metrics.event_count,
        span,
        metrics.total_interventions()
    ));
    if metrics.total_interventions() > 0 {
        let out = registry.output();
        let mut levels: Vec<(&String, &u64)> = metrics.interventions.iter().collect();
        levels.sort_by_key(|(label, _)| out.label_index(label));
        let parts: Vec<String> = levels.iter().map(|(l, n)| format!("{l} x{n}")).collect();
        lines.push(format!("Interventions by level: {}.", parts.join(", ")));
    }
    if let Some((c, stat)) = metrics.weakest() {
        lines.push(format!("Weakest criterion: {c} (mean {:.2}, min {:.2}).", stat.mean, stat.min));
    }
    lines.push(format!("Off-task events: {}.", metrics.off_task_count));
    if let Some(peak) = timeline.iter().max_by(|a, b| a.crisp.total_cmp(&b.crisp).then(b.event.cmp(&a.event))) {
        lines.push(format!("Peak assistance: {} at event {}.", peak.label, peak.event));
    }
    lines
}
