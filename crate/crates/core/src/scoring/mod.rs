//! Turning a student event into four crisp criterion scores.
//!
//! The built-in scorers are lexical and flag based. An external classifier can
//! be attached; when it fails or its breaker is open the heuristic scores are
//! used instead, so scoring itself never fails.

mod external;
mod heuristic;

use std::collections::BTreeSet;

pub use external::{
    parse_response, BreakerConfig, CircuitBreaker, ClassifierClient, ClassifierError, ClassifierRequest,
    ClassifierResponse, ClassifierTransport,
};
pub use heuristic::{
    conversational_ethics, distraction_score, ethics_score, professionalism_score, relevance_score, KeywordSet,
    Pattern, UnknownAction, K_CAP, RELEVANCE_SATURATION,
};

use crate::criteria::{CriterionScores, Provenance};
use crate::scenario::{ScenarioDefinition, StudentEvent};

/// Scores assigned to an event with neither text nor an action.
pub const EMPTY_EVENT_SCORES: [f64; 4] = [1.0, 0.5, 1.0, 1.0];
/// Relevance of a structured request for something the case does not define.
pub const UNKNOWN_ITEM_RELEVANCE: f64 = 0.5;

/// What the scorers know about the session when an event arrives.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoringContext {
    pub topic_keywords: KeywordSet,
    /// Relevance of up to the last W prior events, oldest first.
    pub window: Vec<f64>,
    /// Flags set so far in the session, e.g. `consent_obtained`.
    pub flags: BTreeSet<String>,
    /// Seconds since the previous event, 0 for the first.
    pub elapsed_secs: f64,
    /// Recent student messages, sent to the external classifier.
    pub excerpt: Vec<String>,
}

impl ScoringContext {
    pub fn for_scenario(scenario: &ScenarioDefinition) -> Self {
        Self { topic_keywords: KeywordSet::new(&scenario.topic_keywords), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScoringConfig {
    pub window: usize,
    pub distraction_penalty: f64,
    /// Relevance below this counts as off-task.
    pub off_topic_below: f64,
    pub lexicon: Vec<Pattern>,
    pub danger_patterns: Vec<Pattern>,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        let p = Pattern::new;
        Self {
            window: 10,
            distraction_penalty: 0.15,
            off_topic_below: 0.25,
            lexicon: vec![
                p("shut up", 1.0),
                p("idiot", 1.0),
                p("fuck", 1.0),
                p("stupid", 0.8),
                p("shit", 0.8),
                p("are you single", 0.8),
                p("dumb", 0.7),
                p("babe", 0.6),
                p("stop complaining", 0.6),
                p("youre overreacting", 0.6),
                p("your phone number", 0.6),
                p("damn", 0.5),
                p("sweetheart", 0.5),
                p("honey", 0.5),
                p("hurry up", 0.4),
                p("calm down", 0.3),
                p("whatever", 0.3),
            ],
            danger_patterns: vec![
                p("double the dose", 0.0),
                p("dont tell your doctor", 0.25),
                p("without telling", 0.25),
                p("skip your medication", 0.25),
                p("ignore the pain", 0.5),
                p("its nothing serious", 0.5),
                p("just go home", 0.5),
            ],
        }
    }
}

/// Heuristic scores for `event`.
pub fn score_event(
    event: &StudentEvent,
    ctx: &ScoringContext,
    scenario: &ScenarioDefinition,
    config: &ScoringConfig,
) -> CriterionScores {
    if event.is_empty() {
        let [p, r, e, d] = EMPTY_EVENT_SCORES;
        return CriterionScores::new(p, r, e, d).expect("constant scores in range");
    }
    let relevance = if event.target.is_structured() {
        if heuristic::resolves_in_catalog(event, scenario) {
            1.0
        } else {
            UNKNOWN_ITEM_RELEVANCE
        }
    } else {
        relevance_score(&event.text, &ctx.topic_keywords)
    };
    let professionalism = professionalism_score(&event.text, &config.lexicon);
    let ethics = ethics_score(event, scenario, &ctx.flags, &config.danger_patterns)
        .unwrap_or_else(|_| conversational_ethics(&event.text, &config.danger_patterns));
    let distraction = distraction_score(relevance, &ctx.window, config.distraction_penalty, config.off_topic_below);
    CriterionScores::new(professionalism, relevance, ethics, distraction).expect("scorers are total on [0, 1]")
}

/// Heuristic scoring with an optional external classifier in front.
#[derive(Debug, Default)]
pub struct Scorer {
    config: ScoringConfig,
    classifier: Option<ClassifierClient>,
}

impl Scorer {
    pub fn new(config: ScoringConfig) -> Self {
        Self { config, classifier: None }
    }

    pub fn with_classifier(mut self, client: ClassifierClient) -> Self {
        self.classifier = Some(client);
        self
    }

    pub fn config(&self) -> &ScoringConfig {
        &self.config
    }

    pub fn has_classifier(&self) -> bool {
        self.classifier.is_some()
    }

    pub fn heuristic(&self, event: &StudentEvent, ctx: &ScoringContext, scenario: &ScenarioDefinition) -> CriterionScores {
        score_event(event, ctx, scenario, &self.config)
    }

    /// External scores when a classifier is attached and answers, heuristic
    /// scores otherwise.
    pub fn score(
        &self,
        session_id: &str,
        event: &StudentEvent,
        ctx: &ScoringContext,
        scenario: &ScenarioDefinition,
    ) -> CriterionScores {
        if let Some(client) = &self.classifier {
            let request = ClassifierRequest::new(session_id, &event_text(event), event.target.as_str(), ctx.excerpt.clone());
            if let Ok(response) = client.request_scores(&request) {
                return response.scores;
            }
        }
        let scores = self.heuristic(event, ctx, scenario);
        debug_assert_eq!(scores.provenance, Provenance::Heuristic);
        scores
    }
}

/// Text sent to the classifier: the message, or the structured action.
fn event_text(event: &StudentEvent) -> String {
    match (&event.action, event.text.trim().is_empty()) {
        (Some(action), true) => format!("[{}] {action}", event.target),
        _ => event.text.clone(),
    }
}
