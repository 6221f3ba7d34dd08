use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::Criterion;
use crate::supervisor::SeverityBand;
use crate::text;

pub const SCHEMA_VERSION: u32 = 1;

/// A declarative clinical case: patient script, exam findings, test catalog,
/// interventions and their prerequisites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDefinition {
    pub schema_version: u32,
    pub id: String,
    pub title: String,
    pub chief_complaint: String,
    /// Words that mark a message as on-topic for this case.
    pub topic_keywords: Vec<String>,
    pub patient: PatientProfile,
    /// State flags agents may set, e.g. `consent_obtained`.
    #[serde(default)]
    pub flags: Vec<String>,
    pub qa_intents: Vec<QaIntent>,
    pub default_answers: Vec<String>,
    #[serde(default)]
    pub exam_findings: Vec<ExamFinding>,
    #[serde(default)]
    pub tests: Vec<DiagnosticTest>,
    #[serde(default)]
    pub interventions: Vec<Intervention>,
    #[serde(default)]
    pub hints: Vec<HintOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientProfile {
    pub name: String,
    pub age: u32,
    #[serde(default)]
    pub sex: Option<String>,
    #[serde(default)]
    pub history: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaIntent {
    pub id: String,
    pub keywords: Vec<String>,
    pub answer: String,
    /// Flags set when this intent is matched.
    #[serde(default)]
    pub sets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamFinding {
    pub site: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub finding: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticTest {
    pub id: String,
    pub name: String,
    pub result: String,
    #[serde(default = "default_turnaround")]
    pub turnaround: String,
}

fn default_turnaround() -> String {
    "immediate".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intervention {
    pub id: String,
    pub name: String,
    /// Flags that must be set before the intervention is carried out.
    #[serde(default)]
    pub requires: Vec<String>,
    pub outcome: String,
    #[serde(default)]
    pub sets: Vec<String>,
    /// Ethical-behavior score when attempted with prerequisites unmet.
    #[serde(default = "default_unmet_ethics")]
    pub unmet_ethics: f64,
    /// Always scored as dangerous, prerequisites or not.
    #[serde(default)]
    pub dangerous: bool,
}

/// Unsafe label center.
fn default_unmet_ethics() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintOverride {
    pub criterion: Criterion,
    pub band: SeverityBand,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario document is malformed at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("scenario is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
}

impl ScenarioError {
    pub fn field_errors(&self) -> Vec<FieldError> {
        match self {
            ScenarioError::Schema { path, message } => vec![FieldError { path: path.clone(), message: message.clone() }],
            ScenarioError::Invalid(errors) => errors.clone(),
        }
    }
}

/// Parses and validates a scenario JSON document.
pub fn load_scenario(document: &str) -> Result<ScenarioDefinition, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let scenario: ScenarioDefinition = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Schema { path, message: e.into_inner().to_string() }
    })?;
    let errors = scenario.check();
    if errors.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(errors))
    }
}

impl ScenarioDefinition {
    /// Every invariant violation, with the path of the offending field.
    pub fn check(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        let mut err = |path: String, message: String| errors.push(FieldError { path, message });

        if self.schema_version != SCHEMA_VERSION {
            err(
                "schema_version".into(),
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            );
        }
        if self.id.trim().is_empty() {
            err("id".into(), "must not be empty".into());
        }
        if self.topic_keywords.iter().all(|k| text::tokenize(k).is_empty()) {
            err("topic_keywords".into(), "at least one keyword is required".into());
        }
        if self.default_answers.is_empty() {
            err("default_answers".into(), "at least one default answer is required".into());
        }

        let flags: HashSet<&str> = self.flags.iter().map(String::as_str).collect();
        for (i, flag) in self.flags.iter().enumerate() {
            if self.flags[..i].contains(flag) {
                err(format!("flags[{i}]"), format!("duplicate flag {flag:?}"));
            }
        }
        let mut check_flags = |path: &str, list: &[String]| {
            for (j, flag) in list.iter().enumerate() {
                if !flags.contains(flag.as_str()) {
                    errors.push(FieldError {
                        path: format!("{path}[{j}]"),
                        message: format!("references undefined flag {flag:?}"),
                    });
                }
            }
        };
        for (i, intent) in self.qa_intents.iter().enumerate() {
            check_flags(&format!("qa_intents[{i}].sets"), &intent.sets);
        }
        for (i, iv) in self.interventions.iter().enumerate() {
            check_flags(&format!("interventions[{i}].requires"), &iv.requires);
            check_flags(&format!("interventions[{i}].sets"), &iv.sets);
        }
        let mut err = |path: String, message: String| errors.push(FieldError { path, message });

        for (i, intent) in self.qa_intents.iter().enumerate() {
            if intent.keywords.iter().all(|k| text::tokenize(k).is_empty()) {
                err(format!("qa_intents[{i}].keywords"), "at least one keyword is required".into());
            }
        }
        for (i, iv) in self.interventions.iter().enumerate() {
            if !(0.0..=1.0).contains(&iv.unmet_ethics) {
                err(format!("interventions[{i}].unmet_ethics"), format!("{} is outside [0, 1]", iv.unmet_ethics));
            }
        }

        let mut unique = |catalog: &str, ids: Vec<String>| {
            let mut seen = BTreeSet::new();
            for (i, id) in ids.into_iter().enumerate() {
                let key = id.to_lowercase();
                if key.trim().is_empty() {
                    err(format!("{catalog}[{i}]"), "id must not be empty".into());
                } else if !seen.insert(key) {
                    err(format!("{catalog}[{i}]"), format!("duplicate id {id:?}"));
                }
            }
        };
        unique("qa_intents", self.qa_intents.iter().map(|q| q.id.clone()).collect());
        unique("exam_findings", self.exam_findings.iter().map(|e| e.site.clone()).collect());
        unique("tests", self.tests.iter().map(|t| t.id.clone()).collect());
        unique("interventions", self.interventions.iter().map(|t| t.id.clone()).collect());
        unique("hints", self.hints.iter().map(|h| format!("{}/{:?}", h.criterion, h.band)).collect());

        errors
    }

    pub fn intervention(&self, id: &str) -> Option<&Intervention> {
        self.interventions.iter().find(|i| i.id.eq_ignore_ascii_case(id))
    }

    pub fn test(&self, id: &str) -> Option<&DiagnosticTest> {
        self.tests.iter().find(|t| t.id.eq_ignore_ascii_case(id))
    }

    pub fn exam(&self, site: &str) -> Option<&ExamFinding> {
        self.exam_findings
            .iter()
            .find(|e| e.site.eq_ignore_ascii_case(site) || e.aliases.iter().any(|a| a.eq_ignore_ascii_case(site)))
    }

    pub fn hint_override(&self, criterion: Criterion, band: SeverityBand) -> Option<&str> {
        self.hints.iter().find(|h| h.criterion == criterion && h.band == band).map(|h| h.text.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CHEST_PAIN, SMOKE};

    #[test]
    fn bundled_fixtures_load_cleanly() {
        let chest = load_scenario(CHEST_PAIN).unwrap();
        assert_eq!(chest.id, "chest_pain");
        assert!(chest.check().is_empty());
        assert!(load_scenario(SMOKE).is_ok());
    }

    fn chest_json() -> serde_json::Value {
        serde_json::from_str(CHEST_PAIN).unwrap()
    }

    #[test]
    fn undefined_prerequisite_flag_is_named() {
        let mut doc = chest_json();
        doc["interventions"][0]["requires"] = serde_json::json!(["signed_waiver"]);
        let err = load_scenario(&doc.to_string()).unwrap_err();
        let fields = err.field_errors();
        assert_eq!(fields.len(), 1);
        assert_eq!(fields[0].path, "interventions[0].requires[0]");
        assert!(fields[0].message.contains("signed_waiver"));
    }

    #[test]
    fn empty_keywords_are_rejected() {
        let mut doc = chest_json();
        doc["topic_keywords"] = serde_json::json!([]);
        let err = load_scenario(&doc.to_string()).unwrap_err();
        assert_eq!(err.field_errors()[0].path, "topic_keywords");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut doc = chest_json();
        let first = doc["tests"][0].clone();
        doc["tests"].as_array_mut().unwrap().push(first);
        let err = load_scenario(&doc.to_string()).unwrap_err();
        assert!(err.field_errors().iter().any(|f| f.path.starts_with("tests[") && f.message.contains("duplicate")));
    }

    #[test]
    fn schema_violations_carry_a_path() {
        let mut doc = chest_json();
        doc["patient"]["age"] = serde_json::json!("fifty-eight");
        match load_scenario(&doc.to_string()).unwrap_err() {
            ScenarioError::Schema { path, .. } => assert_eq!(path, "patient.age"),
            other => panic!("unexpected {other:?}"),
        }
        let mut doc = chest_json();
        doc["schema_version"] = serde_json::json!(2);
        assert!(load_scenario(&doc.to_string()).is_err());
    }
}
