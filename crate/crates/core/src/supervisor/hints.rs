use serde::{Deserialize, Serialize};

use crate::criteria::{Criterion, CriterionScores};
use crate::fuzzy::AssistanceDecision;
use crate::scenario::ScenarioDefinition;

/// Assistance levels that carry a hint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityBand {
    High,
    #[serde(alias = "very high")]
    VeryHigh,
    Highest,
}

impl SeverityBand {
    pub const ALL: [SeverityBand; 3] = [SeverityBand::High, SeverityBand::VeryHigh, SeverityBand::Highest];

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "High" => Some(SeverityBand::High),
            "Very High" => Some(SeverityBand::VeryHigh),
            "Highest" => Some(SeverityBand::Highest),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SeverityBand::High => "High",
            SeverityBand::VeryHigh => "Very High",
            SeverityBand::Highest => "Highest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintTemplate {
    pub criterion: Criterion,
    pub band: SeverityBand,
    /// May contain `{chief_complaint}`, `{patient_name}` and `{title}`.
    pub text: String,
}

/// One template per criterion and band.
pub fn default_templates() -> Vec<HintTemplate> {
    use Criterion::*;
    use SeverityBand::*;
    let t = |criterion, band, text: &str| HintTemplate { criterion, band, text: text.to_string() };
    vec![
        t(Professionalism, High, "Keep your tone courteous and professional; {patient_name} should feel respected."),
        t(Professionalism, VeryHigh, "Pause and rephrase: your last message crossed a professional boundary with the patient."),
        t(Professionalism, Highest, "Stop and reset the conversation. Address the patient respectfully before continuing."),
        t(MedicalRelevance, High, "Consider focusing your questions on symptoms related to {chief_complaint}."),
        t(MedicalRelevance, VeryHigh, "Your recent questions are drifting from the case. Return to the history of the {chief_complaint}."),
        t(MedicalRelevance, Highest, "Refocus now: ask about the presenting complaint ({chief_complaint}) before anything else."),
        t(EthicalBehavior, High, "Reconsider whether this action respects the patient's safety and autonomy."),
        t(EthicalBehavior, VeryHigh, "Before proceeding, ensure you have explained the procedure and obtained the patient's consent."),
        t(EthicalBehavior, Highest, "Stop: this action could harm the patient. Review its risks and indications before going further."),
        t(ContextualDistraction, High, "Try to keep each message connected to the ongoing conversation about {chief_complaint}."),
        t(ContextualDistraction, VeryHigh, "Several of your recent messages were off-task. Bring the conversation back to the patient's problem."),
        t(ContextualDistraction, Highest, "The conversation has gone off track. Return to the clinical encounter."),
    ]
}

/// The lowest-scoring criterion. Ties go to ethics, then professionalism,
/// then relevance, then distraction.
pub fn deficient_criterion(scores: &CriterionScores) -> Criterion {
    const PRIORITY: [Criterion; 4] = [
        Criterion::EthicalBehavior,
        Criterion::Professionalism,
        Criterion::MedicalRelevance,
        Criterion::ContextualDistraction,
    ];
    let mut best = PRIORITY[0];
    for c in &PRIORITY[1..] {
        if scores.get(*c) < scores.get(best) {
            best = *c;
        }
    }
    best
}

fn fill(template: &str, scenario: &ScenarioDefinition) -> String {
    template
        .replace("{chief_complaint}", &scenario.chief_complaint)
        .replace("{patient_name}", &scenario.patient.name)
        .replace("{title}", &scenario.title)
}

/// Hint text for the deficient criterion at the decision's band. Scenario
/// overrides win over the defaults. `None` when the decision does not
/// intervene.
pub fn select_hint(
    decision: &AssistanceDecision,
    scores: &CriterionScores,
    scenario: &ScenarioDefinition,
    templates: &[HintTemplate],
) -> Option<String> {
    if !decision.intervene {
        return None;
    }
    let band = SeverityBand::from_label(&decision.label).unwrap_or(SeverityBand::High);
    let criterion = deficient_criterion(scores);
    let text = scenario.hint_override(criterion, band).map(str::to_string).or_else(|| {
        templates
            .iter()
            .chain(default_templates().iter())
            .find(|t| t.criterion == criterion && t.band == band)
            .map(|t| t.text.clone())
    })?;
    Some(fill(&text, scenario))
}
