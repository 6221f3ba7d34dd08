use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{Criterion, CriterionScores};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningStat {
    pub mean: f64,
    pub min: f64,
    pub count: u64,
}

impl RunningStat {
    fn push(self, x: f64) -> Self {
        let count = self.count + 1;
        Self { mean: self.mean + (x - self.mean) / count as f64, min: self.min.min(x), count }
    }
}

impl Default for RunningStat {
    fn default() -> Self {
        Self { mean: 0.0, min: 1.0, count: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub event_count: u64,
    pub criteria: BTreeMap<Criterion, RunningStat>,
    /// Seconds between consecutive events.
    pub elapsed_secs: Vec<f64>,
    pub off_task_count: u64,
    /// Interventions per assistance label.
    pub interventions: BTreeMap<String, u64>,
    pub last_ts: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event time {got} is earlier than the previous event at {previous}")]
pub struct NonMonotonicTime {
    pub previous: DateTime<Utc>,
    pub got: DateTime<Utc>,
}

impl SessionMetrics {
    pub fn total_interventions(&self) -> u64 {
        self.interventions.values().sum()
    }

    pub fn stat(&self, criterion: Criterion) -> RunningStat {
        self.criteria.get(&criterion).copied().unwrap_or_default()
    }

    pub fn record_intervention(&mut self, label: &str) {
        *self.interventions.entry(label.to_string()).or_default() += 1;
    }

    /// Lowest mean score, ties to the criterion listed first.
    pub fn weakest(&self) -> Option<(Criterion, RunningStat)> {
        let mut best: Option<(Criterion, RunningStat)> = None;
        for (c, s) in &self.criteria {
            if best.is_none_or(|(_, b)| s.mean < b.mean) {
                best = Some((*c, *s));
            }
        }
        best
    }
}

/// Folds one event into the metrics. Relevance below `off_topic_below`
/// counts as off-task.
pub fn update_metrics(
    metrics: &SessionMetrics,
    ts: DateTime<Utc>,
    scores: &CriterionScores,
    off_topic_below: f64,
) -> Result<SessionMetrics, NonMonotonicTime> {
    let mut next = metrics.clone();
    if let Some(previous) = metrics.last_ts {
        if ts < previous {
            return Err(NonMonotonicTime { previous, got: ts });
        }
        let micros = (ts - previous).num_microseconds().unwrap_or(i64::MAX);
        next.elapsed_secs.push(micros as f64 / 1e6);
    }
    next.last_ts = Some(ts);
    next.event_count += 1;
    if scores.medical_relevance < off_topic_below {
        next.off_task_count += 1;
    }
    for (c, x) in scores.iter() {
        let stat = next.criteria.entry(c).or_default();
        *stat = stat.push(x);
    }
    Ok(next)
}
