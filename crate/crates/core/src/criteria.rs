use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fuzzy::FuzzyError;

/// The four assessment criteria fed to the inference system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Professionalism,
    MedicalRelevance,
    EthicalBehavior,
    ContextualDistraction,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::Professionalism,
        Criterion::MedicalRelevance,
        Criterion::EthicalBehavior,
        Criterion::ContextualDistraction,
    ];

    /// Identifier of the matching linguistic variable in rule files.
    pub fn variable_name(self) -> &'static str {
        match self {
            Criterion::Professionalism => "Professionalism",
            Criterion::MedicalRelevance => "MedicalRelevance",
            Criterion::EthicalBehavior => "EthicalBehavior",
            Criterion::ContextualDistraction => "ContextualDistraction",
        }
    }

    /// snake_case key used on the wire.
    pub fn key(self) -> &'static str {
        match self {
            Criterion::Professionalism => "professionalism",
            Criterion::MedicalRelevance => "medical_relevance",
            Criterion::EthicalBehavior => "ethical_behavior",
            Criterion::ContextualDistraction => "contextual_distraction",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.key() == key)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Heuristic,
    External,
}

/// One crisp score per criterion for a single student event, each in `[0, 1]`
/// with 1 the best level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionScores {
    pub professionalism: f64,
    pub medical_relevance: f64,
    pub ethical_behavior: f64,
    pub contextual_distraction: f64,
    pub provenance: Provenance,
}

impl CriterionScores {
    pub fn new(
        professionalism: f64,
        medical_relevance: f64,
        ethical_behavior: f64,
        contextual_distraction: f64,
    ) -> Result<Self, FuzzyError> {
        let scores = Self {
            professionalism,
            medical_relevance,
            ethical_behavior,
            contextual_distraction,
            provenance: Provenance::Heuristic,
        };
        scores.check()?;
        Ok(scores)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn get(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Professionalism => self.professionalism,
            Criterion::MedicalRelevance => self.medical_relevance,
            Criterion::EthicalBehavior => self.ethical_behavior,
            Criterion::ContextualDistraction => self.contextual_distraction,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Criterion, f64)> + '_ {
        Criterion::ALL.into_iter().map(|c| (c, self.get(c)))
    }

    pub fn check(&self) -> Result<(), FuzzyError> {
        for (_, v) in self.iter() {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(FuzzyError::Domain(v));
            }
        }
        Ok(())
    }
}
