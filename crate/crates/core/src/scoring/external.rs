//! Client side of the external classifier contract. The HTTP transport is
//! supplied by the caller; this module owns the wire format, clamping and the
//! circuit breaker.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{Criterion, CriterionScores, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRequest {
    pub session_id: String,
    pub text: String,
    pub target_agent: String,
    pub context: Vec<String>,
    pub criteria: Vec<String>,
}

impl ClassifierRequest {
    pub fn new(session_id: &str, text: &str, target_agent: &str, context: Vec<String>) -> Self {
        Self {
            session_id: session_id.to_string(),
            text: text.to_string(),
            target_agent: target_agent.to_string(),
            context,
            criteria: Criterion::ALL.iter().map(|c| c.key().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierResponse {
    pub scores: CriterionScores,
    pub labels: Option<serde_json::Map<String, serde_json::Value>>,
    pub latency: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifierError {
    #[error("classifier timed out")]
    Timeout,
    #[error("classifier transport error: {0}")]
    Transport(String),
    #[error("classifier returned HTTP {0}")]
    Status(u16),
    #[error("classifier response is malformed: {0}")]
    Malformed(String),
    #[error("classifier disabled until the circuit breaker cools down")]
    CircuitOpen,
}

/// Parses a response body. Scores outside `[0, 1]` are clamped with a
/// warning; anything else unexpected is a failure.
pub fn parse_response(body: &[u8]) -> Result<(CriterionScores, Option<serde_json::Map<String, serde_json::Value>>), ClassifierError> {
    let value: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| ClassifierError::Malformed(e.to_string()))?;
    let scores = value
        .get("scores")
        .and_then(|s| s.as_object())
        .ok_or_else(|| ClassifierError::Malformed("missing `scores` object".into()))?;
    let mut out = [0.0; 4];
    for (slot, criterion) in out.iter_mut().zip(Criterion::ALL) {
        let raw = scores
            .get(criterion.key())
            .and_then(|v| v.as_f64())
            .ok_or_else(|| ClassifierError::Malformed(format!("missing numeric score `{}`", criterion.key())))?;
        if !(0.0..=1.0).contains(&raw) {
            tracing::warn!(criterion = criterion.key(), value = raw, "classifier score out of range, clamping");
        }
        *slot = raw.clamp(0.0, 1.0);
    }
    let labels = value.get("labels").and_then(|l| l.as_object()).cloned();
    let scores = CriterionScores::new(out[0], out[1], out[2], out[3])
        .map_err(|e| ClassifierError::Malformed(e.to_string()))?
        .with_provenance(Provenance::External);
    Ok((scores, labels))
}

/// Sends a request and returns the raw body of a 200 response.
pub trait ClassifierTransport: Send + Sync {
    fn post(&self, request: &ClassifierRequest, timeout: Duration) -> Result<Vec<u8>, ClassifierError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakerConfig {
    pub threshold: u32,
    pub cooldown: Duration,
}

impl Default for BreakerConfig {
    fn default() -> Self {
        Self { threshold: 3, cooldown: Duration::from_secs(60) }
    }
}

/// Opens after `threshold` consecutive failures and stays open for
/// `cooldown`. The first call after the cool-down is a trial: success closes
/// the breaker, failure reopens it.
#[derive(Debug, Clone)]
pub struct CircuitBreaker {
    config: BreakerConfig,
    failures: u32,
    open_until: Option<Instant>,
}

impl CircuitBreaker {
    pub fn new(config: BreakerConfig) -> Self {
        Self { config, failures: 0, open_until: None }
    }

    pub fn allows(&self, now: Instant) -> bool {
        self.open_until.is_none_or(|until| now >= until)
    }

    pub fn is_open(&self, now: Instant) -> bool {
        !self.allows(now)
    }

    pub fn record_success(&mut self) {
        self.failures = 0;
        self.open_until = None;
    }

    pub fn record_failure(&mut self, now: Instant) {
        self.failures += 1;
        if self.failures >= self.config.threshold.max(1) {
            self.open_until = Some(now + self.config.cooldown);
        }
    }

    pub fn consecutive_failures(&self) -> u32 {
        self.failures
    }
}

type Clock = Box<dyn Fn() -> Instant + Send + Sync>;

pub struct ClassifierClient {
    transport: Box<dyn ClassifierTransport>,
    timeout: Duration,
    breaker: Mutex<CircuitBreaker>,
    clock: Clock,
}

impl std::fmt::Debug for ClassifierClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClassifierClient").field("timeout", &self.timeout).finish_non_exhaustive()
    }
}

impl ClassifierClient {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(2000);

    pub fn new(transport: impl ClassifierTransport + 'static, timeout: Duration, breaker: BreakerConfig) -> Self {
        Self {
            transport: Box::new(transport),
            timeout,
            breaker: Mutex::new(CircuitBreaker::new(breaker)),
            clock: Box::new(Instant::now),
        }
    }

    /// Replaces the monotonic clock the breaker reads.
    pub fn with_clock(mut self, clock: impl Fn() -> Instant + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn breaker_open(&self) -> bool {
        self.breaker.lock().expect("breaker lock").is_open((self.clock)())
    }

    pub fn request_scores(&self, request: &ClassifierRequest) -> Result<ClassifierResponse, ClassifierError> {
        if !self.breaker.lock().expect("breaker lock").allows((self.clock)()) {
            return Err(ClassifierError::CircuitOpen);
        }
        let started = Instant::now();
        let result = self.transport.post(request, self.timeout).and_then(|body| parse_response(&body));
        let mut breaker = self.breaker.lock().expect("breaker lock");
        match result {
            Ok((scores, labels)) => {
                breaker.record_success();
                Ok(ClassifierResponse { scores, labels, latency: started.elapsed() })
            }
            Err(e) => {
                breaker.record_failure((self.clock)());
                tracing::warn!(error = %e, failures = breaker.consecutive_failures(), "classifier request failed");
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
    use std::sync::Arc;

    #[test]
    fn pass_through_and_clamping() {
        let body = br#"{"scores":{"professionalism":0.9,"medical_relevance":0.8,"ethical_behavior":1.0,"contextual_distraction":0.7}}"#;
        let (s, _) = parse_response(body).unwrap();
        assert_eq!((s.professionalism, s.medical_relevance, s.ethical_behavior, s.contextual_distraction), (0.9, 0.8, 1.0, 0.7));
        assert_eq!(s.provenance, Provenance::External);

        let body = br#"{"scores":{"professionalism":1.7,"medical_relevance":-2,"ethical_behavior":1,"contextual_distraction":0}}"#;
        let (s, _) = parse_response(body).unwrap();
        assert_eq!((s.professionalism, s.medical_relevance), (1.0, 0.0));
    }

    #[test]
    fn malformed_bodies_fail() {
        for body in [&b"not json"[..], br#"{"scores":{}}"#, br#"{"scores":{"professionalism":"high"}}"#, b"[]"] {
            assert!(matches!(parse_response(body), Err(ClassifierError::Malformed(_))));
        }
    }

    struct Flaky {
        calls: Arc<AtomicU32>,
        fail: bool,
    }

    impl ClassifierTransport for Flaky {
        fn post(&self, _: &ClassifierRequest, _: Duration) -> Result<Vec<u8>, ClassifierError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.fail {
                Err(ClassifierError::Timeout)
            } else {
                Ok(br#"{"scores":{"professionalism":1,"medical_relevance":1,"ethical_behavior":1,"contextual_distraction":1}}"#.to_vec())
            }
        }
    }

    #[test]
    fn breaker_opens_after_threshold_and_recovers() {
        let calls = Arc::new(AtomicU32::new(0));
        let offset = Arc::new(AtomicU64::new(0));
        let base = Instant::now();
        let clock_offset = offset.clone();
        let client = ClassifierClient::new(
            Flaky { calls: calls.clone(), fail: true },
            Duration::from_millis(10),
            BreakerConfig::default(),
        )
        .with_clock(move || base + Duration::from_secs(clock_offset.load(Ordering::SeqCst)));
        let req = ClassifierRequest::new("s", "hi", "patient", vec![]);
        for _ in 0..3 {
            assert_eq!(client.request_scores(&req), Err(ClassifierError::Timeout));
        }
        assert_eq!(client.request_scores(&req), Err(ClassifierError::CircuitOpen));
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        offset.store(61, Ordering::SeqCst);
        assert_eq!(client.request_scores(&req), Err(ClassifierError::Timeout));
        assert_eq!(calls.load(Ordering::SeqCst), 4);
        assert!(client.breaker_open());
    }

    #[test]
    fn success_resets_failures() {
        let mut b = CircuitBreaker::new(BreakerConfig::default());
        let now = Instant::now();
        b.record_failure(now);
        b.record_failure(now);
        b.record_success();
        b.record_failure(now);
        assert!(b.allows(now));
        assert_eq!(b.consecutive_failures(), 1);
    }
}
