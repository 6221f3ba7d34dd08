//! Mamdani fuzzy inference over linguistic variables.
//!
//! Connectives are `AND = min` and `OR = max`; implication clips each
//! consequent label at its rule's activation and aggregation takes the
//! pointwise maximum. Everything here is a pure function of its inputs.

mod inference;
mod membership;
mod variable;

use thiserror::Error;

pub use inference::{
    classify, defuzzify, defuzzify_centroid, infer, infer_env, rule_activation, AssistanceDecision, Defuzzifier,
    Env, FiredRule, FuzzyEngine, Inference, OutputFuzzySet,
};
pub use membership::{membership, MembershipFunction};
pub use variable::{fuzzify, Fuzzified, LinguisticVariable};

use crate::rules::Diagnostic;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzyError {
    #[error("value {0} is outside the domain [0, 1]")]
    Domain(f64),
    #[error("invalid membership function: {0}")]
    InvalidShape(String),
    #[error("invalid linguistic variable `{variable}`: {message}")]
    InvalidVariable { variable: String, message: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown label \"{label}\" for variable `{variable}`")]
    UnknownLabel { variable: String, label: String },
    #[error("no rule fired")]
    NoRuleFired,
    #[error("rule base failed validation: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidRuleBase(Vec<Diagnostic>),
}

/// Input variables plus the single output variable a rule base is checked
/// against.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableRegistry {
    inputs: Vec<LinguisticVariable>,
    output: LinguisticVariable,
}

impl VariableRegistry {
    pub fn new(inputs: Vec<LinguisticVariable>, output: LinguisticVariable) -> Result<Self, FuzzyError> {
        for (i, var) in inputs.iter().enumerate() {
            if inputs[..i].iter().any(|v| v.name() == var.name()) || var.name() == output.name() {
                return Err(FuzzyError::InvalidVariable {
                    variable: var.name().to_string(),
                    message: "variable names must be unique".into(),
                });
            }
        }
        Ok(Self { inputs, output })
    }

    pub fn inputs(&self) -> &[LinguisticVariable] {
        &self.inputs
    }

    pub fn input(&self, name: &str) -> Option<&LinguisticVariable> {
        self.inputs.iter().find(|v| v.name() == name)
    }

    pub fn input_names(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(LinguisticVariable::name)
    }

    pub fn output(&self) -> &LinguisticVariable {
        &self.output
    }

    /// Every variable, inputs first.
    pub fn all(&self) -> impl Iterator<Item = &LinguisticVariable> {
        self.inputs.iter().chain(std::iter::once(&self.output))
    }
}

pub const PROFESSIONALISM_LABELS: [&str; 3] = ["Unprofessional", "Borderline", "Appropriate"];
pub const RELEVANCE_LABELS: [&str; 3] = ["Irrelevant", "Partially relevant", "Relevant"];
pub const ETHICS_LABELS: [&str; 5] = ["Dangerous", "Unsafe", "Questionable", "Mostly safe", "Safe"];
pub const DISTRACTION_LABELS: [&str; 4] =
    ["Highly distracting", "Moderately distracting", "Questionable", "Not distracting"];
pub const ASSISTANCE_LABELS: [&str; 6] = ["Minimal", "Low", "Medium", "High", "Very High", "Highest"];
pub const ASSISTANCE_VARIABLE: &str = "Assistance";

/// The four criteria and the assistance output, each a uniform triangular
/// partition of `[0, 1]`.
pub fn default_registry() -> VariableRegistry {
    use crate::criteria::Criterion;
    let var = |name: &str, labels: &[&str]| LinguisticVariable::uniform(name, labels).expect("static partition");
    VariableRegistry::new(
        vec![
            var(Criterion::Professionalism.variable_name(), &PROFESSIONALISM_LABELS),
            var(Criterion::MedicalRelevance.variable_name(), &RELEVANCE_LABELS),
            var(Criterion::EthicalBehavior.variable_name(), &ETHICS_LABELS),
            var(Criterion::ContextualDistraction.variable_name(), &DISTRACTION_LABELS),
        ],
        var(ASSISTANCE_VARIABLE, &ASSISTANCE_LABELS),
    )
    .expect("static registry")
}

/// Engine over [`default_registry`] and the bundled rule file.
pub fn default_engine() -> FuzzyEngine {
    FuzzyEngine::new(crate::rules::default_rule_base(), default_registry()).expect("bundled rules validate")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_variables_are_ordered_as_printed() {
        let reg = default_registry();
        let names: Vec<_> = reg.all().map(|v| v.name().to_string()).collect();
        assert_eq!(
            names,
            ["Professionalism", "MedicalRelevance", "EthicalBehavior", "ContextualDistraction", "Assistance"]
        );
        let ethics = reg.input("EthicalBehavior").unwrap();
        assert_eq!(ethics.labels().collect::<Vec<_>>(), ETHICS_LABELS);
        assert_eq!(ethics.center("Unsafe"), Some(0.25));
        let out = reg.output();
        let centers: Vec<f64> = ASSISTANCE_LABELS.iter().map(|l| out.center(l).unwrap()).collect();
        assert_eq!(centers, [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    }

    #[test]
    fn registry_rejects_duplicate_names() {
        let a = LinguisticVariable::uniform("A", &["lo", "hi"]).unwrap();
        assert!(VariableRegistry::new(vec![a.clone(), a.clone()], a).is_err());
    }
}
