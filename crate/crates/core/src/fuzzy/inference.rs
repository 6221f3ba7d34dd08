use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::membership::MembershipFunction;
use super::variable::{Fuzzified, LinguisticVariable};
use super::{FuzzyError, VariableRegistry};
use crate::criteria::CriterionScores;
use crate::rules::{self, Expr, Rule, RuleBase};

/// Heights or memberships closer than this are treated as equal when
/// breaking ties.
const TIE_EPSILON: f64 = 1e-12;

/// Fuzzified inputs keyed by variable name.
pub type Env = BTreeMap<String, Fuzzified>;

/// Activation strength of a rule's antecedent under `env`.
///
/// `AND` takes the minimum of its operands and `OR` the maximum.
pub fn rule_activation(rule: &Rule, env: &Env) -> Result<f64, FuzzyError> {
    eval_expr(&rule.antecedent, env)
}

fn eval_expr(expr: &Expr, env: &Env) -> Result<f64, FuzzyError> {
    match expr {
        Expr::Atom(atom) => {
            let degrees = env
                .get(&atom.variable)
                .ok_or_else(|| FuzzyError::UnknownVariable(atom.variable.clone()))?;
            degrees.get(&atom.label).ok_or_else(|| FuzzyError::UnknownLabel {
                variable: atom.variable.clone(),
                label: atom.label.clone(),
            })
        }
        Expr::And(children) => children.iter().try_fold(1.0_f64, |acc, c| Ok(acc.min(eval_expr(c, env)?))),
        Expr::Or(children) => children.iter().try_fold(0.0_f64, |acc, c| Ok(acc.max(eval_expr(c, env)?))),
    }
}

/// Aggregated output: each consequent label with the height it was clipped
/// at. The membership of the set at `x` is `max_k min(height_k, mf_k(x))`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputFuzzySet {
    clips: Vec<(String, f64)>,
}

impl OutputFuzzySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from `(label, height)` pairs, max-merging repeated labels.
    pub fn from_clips<I, S>(clips: I) -> Result<Self, FuzzyError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut set = Self::new();
        for (label, height) in clips {
            set.insert(label, height)?;
        }
        Ok(set)
    }

    /// Adds a clipped label; an existing entry keeps the larger height.
    pub fn insert(&mut self, label: impl Into<String>, height: f64) -> Result<(), FuzzyError> {
        if !(height.is_finite() && (0.0..=1.0).contains(&height)) {
            return Err(FuzzyError::Domain(height));
        }
        let label = label.into();
        match self.clips.iter_mut().find(|(l, _)| *l == label) {
            Some((_, h)) => *h = h.max(height),
            None => self.clips.push((label, height)),
        }
        Ok(())
    }

    pub fn height(&self, label: &str) -> Option<f64> {
        self.clips.iter().find(|(l, _)| l == label).map(|(_, h)| *h)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.clips.iter().map(|(l, h)| (l.as_str(), *h))
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn max_height(&self) -> f64 {
        self.clips.iter().map(|(_, h)| *h).fold(0.0, f64::max)
    }

    fn sort_by(&mut self, out: &LinguisticVariable) {
        self.clips.sort_by_key(|(l, _)| out.label_index(l).unwrap_or(usize::MAX));
    }

    fn resolve<'a>(&self, out: &'a LinguisticVariable) -> Result<Vec<(usize, &'a MembershipFunction, f64)>, FuzzyError> {
        self.clips
            .iter()
            .filter(|(_, h)| *h > 0.0)
            .map(|(label, h)| {
                let idx = out.label_index(label).ok_or_else(|| FuzzyError::UnknownLabel {
                    variable: out.name().to_string(),
                    label: label.clone(),
                })?;
                Ok((idx, out.membership_function(idx), *h))
            })
            .collect()
    }

    /// Membership of the aggregated set at `x`.
    pub fn degree(&self, out: &LinguisticVariable, x: f64) -> Result<f64, FuzzyError> {
        super::membership::check_domain(x)?;
        Ok(self.resolve(out)?.iter().map(|(_, mf, h)| mf.eval(x).min(*h)).fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiredRule {
    pub rule_id: usize,
    pub strength: f64,
    pub consequent: String,
}

/// Result of running the rule base: the aggregated output set and every rule
/// with non-zero activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub output: OutputFuzzySet,
    pub fired: Vec<FiredRule>,
}

/// Runs every rule against the four criterion scores.
pub fn infer(rules: &RuleBase, registry: &VariableRegistry, inputs: &CriterionScores) -> Result<Inference, FuzzyError> {
    let mut env = Env::new();
    for (criterion, value) in inputs.iter() {
        let name = criterion.variable_name();
        let var = registry.input(name).ok_or_else(|| FuzzyError::UnknownVariable(name.to_string()))?;
        env.insert(name.to_string(), var.fuzzify(value)?);
    }
    infer_env(rules, registry.output(), &env)
}

/// Runs every rule against already-fuzzified inputs.
pub fn infer_env(rules: &RuleBase, output: &LinguisticVariable, env: &Env) -> Result<Inference, FuzzyError> {
    let mut set = OutputFuzzySet::new();
    let mut fired = Vec::new();
    for rule in rules.rules() {
        let strength = rule_activation(rule, env)?;
        if strength > 0.0 {
            set.insert(rule.consequent.label.clone(), strength)?;
            fired.push(FiredRule { rule_id: rule.id, strength, consequent: rule.consequent.label.clone() });
        }
    }
    set.sort_by(output);
    Ok(Inference { output: set, fired })
}

/// Centroid of the aggregated set, computed exactly.
///
/// The aggregate is piecewise linear. Its kinks lie at label breakpoints, at
/// the points where a label ramp crosses its clip height, and where two
/// clipped labels intersect. Between consecutive kinks the area and first
/// moment integrate in closed form.
pub fn defuzzify_centroid(set: &OutputFuzzySet, out: &LinguisticVariable) -> Result<f64, FuzzyError> {
    let clipped = set.resolve(out)?;
    if clipped.is_empty() {
        return Err(FuzzyError::NoRuleFired);
    }

    let mut knots = vec![0.0, 1.0];
    for (_, mf, h) in &clipped {
        knots.extend(mf.breakpoints());
        if *h < 1.0 {
            let (lo, hi) = mf.alpha_cut(*h);
            knots.push(lo);
            knots.push(hi);
        }
    }
    sort_dedup(&mut knots);

    let value = |x: f64| clipped.iter().map(|(_, mf, h)| mf.eval(x).min(*h)).fold(0.0, f64::max);

    // Each clipped label is linear between adjacent knots; add the crossings
    // of every pair so the upper envelope is linear between points too.
    let mut points = knots.clone();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ends: Vec<(f64, f64)> =
            clipped.iter().map(|(_, mf, h)| (mf.eval(a).min(*h), mf.eval(b).min(*h))).collect();
        for i in 0..ends.len() {
            for j in (i + 1)..ends.len() {
                let da = ends[i].0 - ends[j].0;
                let db = ends[i].1 - ends[j].1;
                if da * db < 0.0 {
                    let t = da / (da - db);
                    points.push(a + t * (b - a));
                }
            }
        }
    }
    sort_dedup(&mut points);

    let mut area = 0.0;
    let mut moment = 0.0;
    let mut prev = (points[0], value(points[0]));
    for &x in &points[1..] {
        let (x0, y0) = prev;
        let y1 = value(x);
        let dx = x - x0;
        area += dx * (y0 + y1) / 2.0;
        moment += dx * (x0 * (2.0 * y0 + y1) + x * (y0 + 2.0 * y1)) / 6.0;
        prev = (x, y1);
    }
    if area <= 0.0 {
        return Err(FuzzyError::NoRuleFired);
    }
    Ok((moment / area).clamp(0.0, 1.0))
}

fn sort_dedup(xs: &mut Vec<f64>) {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
}

/// How an aggregated output set collapses to a crisp value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Defuzzifier {
    /// Prototype of the label clipped at the greatest height; among equally
    /// high labels the most severe one wins. A rule firing at full strength
    /// therefore always carries the decision to at least its own consequent.
    #[default]
    PriorityMaximum,
    /// Area centroid of the aggregate.
    Centroid,
}

impl std::fmt::Display for Defuzzifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Defuzzifier::PriorityMaximum => "priority-maximum",
            Defuzzifier::Centroid => "centroid",
        })
    }
}

impl std::str::FromStr for Defuzzifier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "priority-maximum" | "priority-max" => Ok(Defuzzifier::PriorityMaximum),
            "centroid" => Ok(Defuzzifier::Centroid),
            other => Err(format!("unknown defuzzifier {other:?} (expected `priority-maximum` or `centroid`)")),
        }
    }
}

pub fn defuzzify(set: &OutputFuzzySet, out: &LinguisticVariable, method: Defuzzifier) -> Result<f64, FuzzyError> {
    match method {
        Defuzzifier::Centroid => defuzzify_centroid(set, out),
        Defuzzifier::PriorityMaximum => {
            let clipped = set.resolve(out)?;
            let top = clipped.iter().map(|(_, _, h)| *h).fold(0.0, f64::max);
            clipped
                .iter()
                .filter(|(_, _, h)| *h >= top - TIE_EPSILON)
                .max_by_key(|(idx, _, _)| *idx)
                .map(|(_, mf, _)| mf.prototype())
                .ok_or(FuzzyError::NoRuleFired)
        }
    }
}

/// Label with the greatest membership at `crisp`; ties go to the earlier
/// (less severe) label.
pub fn classify(out: &LinguisticVariable, crisp: f64) -> Result<String, FuzzyError> {
    classify_index(out, crisp).map(|i| out.label_name(i).to_string())
}

fn classify_index(out: &LinguisticVariable, crisp: f64) -> Result<usize, FuzzyError> {
    let degrees = out.fuzzify(crisp)?;
    let mut best = 0;
    let mut best_degree = f64::NEG_INFINITY;
    for (i, (_, d)) in degrees.iter().enumerate() {
        if d > best_degree + TIE_EPSILON {
            best = i;
            best_degree = d;
        }
    }
    Ok(best)
}

/// Outcome of one inference pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistanceDecision {
    pub crisp: f64,
    pub label: String,
    /// Index of `label` in the output variable, 0 = least severe.
    pub severity: usize,
    pub intervene: bool,
    pub fired: Vec<FiredRule>,
    pub inputs: CriterionScores,
    /// True when no rule fired and the engine's fallback value was used.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fallback {
    /// Whatever the rule base concludes for all inputs at their best level.
    Baseline,
    Fixed(f64),
}

/// A validated rule base bound to its variables, plus the decision policy.
#[derive(Debug, Clone)]
pub struct FuzzyEngine {
    rules: RuleBase,
    registry: VariableRegistry,
    defuzzifier: Defuzzifier,
    fallback: Fallback,
    fallback_crisp: f64,
    intervene_from: usize,
}

impl FuzzyEngine {
    /// Validates `rules` against `registry`. Warnings are accepted, errors are
    /// not. Intervention starts at the output label `High` when present,
    /// otherwise at the most severe label.
    pub fn new(rules: RuleBase, registry: VariableRegistry) -> Result<Self, FuzzyError> {
        let diags = rules::validate(&rules, &registry);
        if rules::has_errors(&diags) {
            return Err(FuzzyError::InvalidRuleBase(diags.into_iter().filter(|d| d.is_error()).collect()));
        }
        let out = registry.output();
        let intervene_from = out.label_index("High").unwrap_or(out.len() - 1);
        let mut engine = Self {
            rules,
            registry,
            defuzzifier: Defuzzifier::default(),
            fallback: Fallback::Baseline,
            fallback_crisp: 0.0,
            intervene_from,
        };
        engine.refresh_fallback();
        Ok(engine)
    }

    pub fn with_defuzzifier(mut self, defuzzifier: Defuzzifier) -> Self {
        self.defuzzifier = defuzzifier;
        self.refresh_fallback();
        self
    }

    /// Use a fixed crisp value when no rule fires instead of the baseline.
    pub fn with_fixed_fallback(mut self, crisp: f64) -> Result<Self, FuzzyError> {
        super::membership::check_domain(crisp)?;
        self.fallback = Fallback::Fixed(crisp);
        self.refresh_fallback();
        Ok(self)
    }

    /// Intervene when the classified label is `label` or more severe.
    pub fn with_intervention_label(mut self, label: &str) -> Result<Self, FuzzyError> {
        let out = self.registry.output();
        self.intervene_from = out.label_index(label).ok_or_else(|| FuzzyError::UnknownLabel {
            variable: out.name().to_string(),
            label: label.to_string(),
        })?;
        Ok(self)
    }

    fn refresh_fallback(&mut self) {
        self.fallback_crisp = match self.fallback {
            Fallback::Fixed(x) => x,
            Fallback::Baseline => {
                let env: Env = self
                    .registry
                    .inputs()
                    .iter()
                    .map(|v| (v.name().to_string(), v.fuzzify(1.0).expect("1 is in the domain")))
                    .collect();
                infer_env(&self.rules, self.registry.output(), &env)
                    .ok()
                    .and_then(|inf| defuzzify(&inf.output, self.registry.output(), self.defuzzifier).ok())
                    .unwrap_or(0.0)
            }
        };
    }

    pub fn rules(&self) -> &RuleBase {
        &self.rules
    }

    pub fn registry(&self) -> &VariableRegistry {
        &self.registry
    }

    pub fn defuzzifier(&self) -> Defuzzifier {
        self.defuzzifier
    }

    /// Crisp value used when no rule fires.
    pub fn fallback_crisp(&self) -> f64 {
        self.fallback_crisp
    }

    pub fn intervention_label(&self) -> &str {
        self.registry.output().label_name(self.intervene_from)
    }

    pub fn infer(&self, inputs: &CriterionScores) -> Result<Inference, FuzzyError> {
        infer(&self.rules, &self.registry, inputs)
    }

    /// Infer, defuzzify and classify.
    pub fn evaluate(&self, inputs: &CriterionScores) -> Result<AssistanceDecision, FuzzyError> {
        let inference = self.infer(inputs)?;
        let out = self.registry.output();
        let (crisp, fallback) = match defuzzify(&inference.output, out, self.defuzzifier) {
            Ok(x) => (x, false),
            Err(FuzzyError::NoRuleFired) => (self.fallback_crisp, true),
            Err(e) => return Err(e),
        };
        let severity = classify_index(out, crisp)?;
        Ok(AssistanceDecision {
            crisp,
            label: out.label_name(severity).to_string(),
            severity,
            intervene: severity >= self.intervene_from,
            fired: inference.fired,
            inputs: *inputs,
            fallback,
        })
    }
}
