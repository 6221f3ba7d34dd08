use std::collections::HashMap;

use super::ast::RuleBase;
use super::diagnostic::Diagnostic;
use crate::fuzzy::VariableRegistry;

/// Checks a parsed rule base against a variable registry.
///
/// Errors: unknown variables or labels, antecedents that mention the output
/// variable, consequents that target an input variable. Warnings: a rule whose
/// antecedent repeats an earlier rule's (with a different consequent, or with
/// the same one, in which case it is shadowed).
pub fn validate(rules: &RuleBase, registry: &VariableRegistry) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let output = registry.output();

    for rule in rules.rules() {
        for atom in rule.antecedent.atoms() {
            let at = |msg: String| Diagnostic::error(msg, atom.span.line, atom.span.column).for_rule(rule.id);
            if atom.variable == output.name() {
                diags.push(at(format!(
                    "antecedent refers to output variable `{}`; conditions must use input variables",
                    atom.variable
                )));
                continue;
            }
            match registry.input(&atom.variable) {
                None => diags.push(at(format!(
                    "unknown variable `{}` (known inputs: {})",
                    atom.variable,
                    registry.input_names().collect::<Vec<_>>().join(", ")
                ))),
                Some(var) if var.label_index(&atom.label).is_none() => diags.push(at(format!(
                    "unknown label \"{}\" for variable `{}` (expected one of: {})",
                    atom.label,
                    atom.variable,
                    quoted_labels(var.labels())
                ))),
                Some(_) => {}
            }
        }

        let cons = &rule.consequent;
        let at = |msg: String| Diagnostic::error(msg, cons.span.line, cons.span.column).for_rule(rule.id);
        if cons.variable != output.name() {
            if registry.input(&cons.variable).is_some() {
                diags.push(at(format!(
                    "consequent must target output variable `{}`, found input variable `{}`",
                    output.name(),
                    cons.variable
                )));
            } else {
                diags.push(at(format!(
                    "unknown consequent variable `{}` (expected `{}`)",
                    cons.variable,
                    output.name()
                )));
            }
        } else if output.label_index(&cons.label).is_none() {
            diags.push(at(format!(
                "unknown label \"{}\" for output variable `{}` (expected one of: {})",
                cons.label,
                output.name(),
                quoted_labels(output.labels())
            )));
        }
    }

    let mut first_seen: HashMap<String, usize> = HashMap::new();
    for rule in rules.rules() {
        let key = rule.antecedent.canonical_key();
        match first_seen.get(&key) {
            None => {
                first_seen.insert(key, rule.id);
            }
            Some(&earlier_id) => {
                let earlier = rules.get(earlier_id).expect("ids index the rule list");
                let message = if earlier.consequent == rule.consequent {
                    format!("rule {} repeats rule {earlier_id} exactly and is shadowed by it", rule.id)
                } else {
                    format!(
                        "rule {} has the same antecedent as rule {earlier_id} but a different consequent (\"{}\" vs \"{}\"); both will fire together",
                        rule.id, rule.consequent.label, earlier.consequent.label
                    )
                };
                diags.push(Diagnostic::warning(message, rule.span.line, rule.span.column).for_rule(rule.id));
            }
        }
    }

    diags.sort_by_key(|d| (d.line, d.column, d.rule_id));
    diags
}

fn quoted_labels<'a>(labels: impl Iterator<Item = &'a str>) -> String {
    labels.map(|l| format!("\"{l}\"")).collect::<Vec<_>>().join(", ")
}
