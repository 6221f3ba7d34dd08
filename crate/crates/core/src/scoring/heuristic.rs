use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::scenario::{resolve, AgentRole, ScenarioDefinition, StudentEvent};
use crate::text;

/// Tokens considered when normalizing keyword overlap.
pub const K_CAP: usize = 4;
/// Overlap ratio at which relevance saturates to 1.
pub const RELEVANCE_SATURATION: f64 = 0.5;

/// A phrase with the weight it carries when found in a message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub pattern: String,
    /// Severity in `(0, 1]` for the professionalism lexicon, resulting score
    /// in `[0, 1]` for danger patterns.
    pub weight: f64,
}

impl Pattern {
    pub fn new(pattern: impl Into<String>, weight: f64) -> Self {
        Self { pattern: pattern.into(), weight }
    }

    fn tokens(&self) -> Vec<String> {
        text::tokenize(&self.pattern)
    }
}

/// Lowercased, punctuation-free keyword tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeywordSet(BTreeSet<String>);

impl KeywordSet {
    pub fn new<I, S>(keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(keywords.into_iter().flat_map(|k| text::tokenize(k.as_ref())).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }
}

/// Share of a message's distinct tokens that are topic keywords, with the
/// denominator capped at [`K_CAP`] and ramped so that half coverage is
/// already fully relevant. Text with no tokens scores 0.
pub fn relevance_score(message: &str, keywords: &KeywordSet) -> f64 {
    let tokens = text::token_set(message);
    if tokens.is_empty() || keywords.is_empty() {
        return 0.0;
    }
    let hits = tokens.iter().filter(|t| keywords.contains(t)).count();
    let ratio = hits as f64 / tokens.len().min(K_CAP) as f64;
    (ratio / RELEVANCE_SATURATION).min(1.0)
}

/// `1 - max severity` over lexicon entries found in the message.
pub fn professionalism_score(message: &str, lexicon: &[Pattern]) -> f64 {
    let tokens = text::tokenize(message);
    let worst = lexicon
        .iter()
        .filter(|p| text::contains_phrase(&tokens, &p.tokens()))
        .map(|p| p.weight)
        .fold(0.0_f64, f64::max);
    (1.0 - worst).clamp(0.0, 1.0)
}

/// Lowest score among danger patterns found in the message, 1 if none.
pub fn conversational_ethics(message: &str, danger: &[Pattern]) -> f64 {
    let tokens = text::tokenize(message);
    danger
        .iter()
        .filter(|p| text::contains_phrase(&tokens, &p.tokens()))
        .map(|p| p.weight)
        .fold(1.0_f64, f64::min)
        .clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("action `{0}` is not defined by this scenario")]
pub struct UnknownAction(pub String);

/// Ethical-behavior score of an event given the flags set so far.
///
/// Intervention requests resolve to a catalog entry: always-dangerous entries
/// score 0, entries with every prerequisite met score 1, the rest score the
/// entry's `unmet_ethics`. Any other event is scored by danger patterns.
pub fn ethics_score(
    event: &StudentEvent,
    scenario: &ScenarioDefinition,
    flags: &BTreeSet<String>,
    danger: &[Pattern],
) -> Result<f64, UnknownAction> {
    let conversational = conversational_ethics(&event.text, danger);
    if event.target != AgentRole::Intervention {
        return Ok(conversational);
    }
    let names = scenario.interventions.iter().map(|iv| vec![iv.id.as_str(), iv.name.as_str()]);
    let Some(i) = resolve(event, names) else {
        let asked = event.action.clone().unwrap_or_else(|| event.text.clone());
        return Err(UnknownAction(asked));
    };
    let iv = &scenario.interventions[i];
    let action = if iv.dangerous {
        0.0
    } else if iv.requires.iter().all(|f| flags.contains(f)) {
        1.0
    } else {
        iv.unmet_ethics
    };
    Ok(action.min(conversational))
}

/// `relevance - penalty * (prior window events below the off-topic
/// threshold)`, clamped to `[0, 1]`.
pub fn distraction_score(relevance: f64, window: &[f64], penalty: f64, off_topic_below: f64) -> f64 {
    let off_topic = window.iter().filter(|&&r| r < off_topic_below).count();
    (relevance - penalty * off_topic as f64).clamp(0.0, 1.0)
}

/// Whether a structured request names something in the case catalog.
pub(crate) fn resolves_in_catalog(event: &StudentEvent, scenario: &ScenarioDefinition) -> bool {
    match event.target {
        AgentRole::Patient => false,
        AgentRole::Exam => resolve(
            event,
            scenario
                .exam_findings
                .iter()
                .map(|e| std::iter::once(e.site.as_str()).chain(e.aliases.iter().map(String::as_str)).collect()),
        )
        .is_some(),
        AgentRole::Diagnostic => {
            resolve(event, scenario.tests.iter().map(|t| vec![t.id.as_str(), t.name.as_str()])).is_some()
        }
        AgentRole::Intervention => {
            resolve(event, scenario.interventions.iter().map(|t| vec![t.id.as_str(), t.name.as_str()])).is_some()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::chest_pain;

    fn keywords() -> KeywordSet {
        KeywordSet::new(&chest_pain().topic_keywords)
    }

    /// Independent count of keyword hits for the oracle.
    fn overlap_oracle(msg: &str, kw: &[&str]) -> f64 {
        let words: Vec<String> = msg
            .to_lowercase()
            .replace('\'', "")
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(String::from)
            .collect();
        let mut distinct = words.clone();
        distinct.sort();
        distinct.dedup();
        let hits = distinct.iter().filter(|w| kw.contains(&w.as_str())).count() as f64;
        (hits / distinct.len().min(4) as f64 * 2.0).min(1.0)
    }

    #[test]
    fn relevance_matches_overlap_oracle() {
        let sc = chest_pain();
        let kw: Vec<&str> = sc.topic_keywords.iter().map(String::as_str).collect();
        let kws = keywords();
        for msg in [
            "Does the pain radiate to your left arm?",
            "What's your favorite football team?",
            "Did you eat anything unusual before the pain?",
            "Hello, I'm a medical student, may I ask you some questions?",
        ] {
            assert_eq!(relevance_score(msg, &kws), overlap_oracle(msg, &kw), "{msg}");
        }
        assert!(relevance_score("Does the pain radiate to your left arm?", &kws) >= 0.75);
        assert!(relevance_score("What's your favorite football team?", &kws) <= 0.25);
        assert_eq!(relevance_score(&sc.topic_keywords.join(" "), &kws), 1.0);
    }

    #[test]
    fn professionalism_takes_the_worst_match() {
        let lex = vec![Pattern::new("whatever", 0.3), Pattern::new("shut up", 1.0), Pattern::new("calm down", 0.5)];
        assert_eq!(professionalism_score("How are you feeling?", &lex), 1.0);
        assert_eq!(professionalism_score("Calm down, please.", &lex), 0.5);
        assert_eq!(professionalism_score("Whatever. Shut up.", &lex), 0.0);
    }

    #[test]
    fn distraction_examples() {
        assert_eq!(distraction_score(1.0, &[1.0, 0.9], 0.15, 0.25), 1.0);
        assert_eq!(distraction_score(0.1, &[0.0, 0.1], 0.15, 0.25), 0.0);
        assert!((distraction_score(1.0, &[0.1], 0.15, 0.25) - 0.85).abs() < 1e-12);
    }
}
