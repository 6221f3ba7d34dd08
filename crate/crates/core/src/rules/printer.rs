use sha2::{Digest, Sha256};

use super::ast::{Expr, Rule, RuleBase};
use super::lexer::{is_ident_char, keyword};

/// Canonical text: one rule per line, conjunctions under a disjunction (and
/// disjunctions under a conjunction) wrapped in parentheses, shorthand label
/// lists expanded, keywords upper-case.
pub fn pretty_print(rules: &RuleBase) -> String {
    render(rules.rules())
}

pub(crate) fn render(rules: &[Rule]) -> String {
    let mut out = String::new();
    for rule in rules {
        out.push_str(&render_rule(rule));
        out.push('\n');
    }
    out
}

pub fn render_rule(rule: &Rule) -> String {
    format!(
        "IF {} THEN {} IS {}",
        render_expr(&rule.antecedent, false),
        rule.consequent.variable,
        render_label(&rule.consequent.label)
    )
}

pub fn render_expr(expr: &Expr, nested: bool) -> String {
    match expr {
        Expr::Atom(atom) => format!("{} IS {}", atom.variable, render_label(&atom.label)),
        Expr::And(children) | Expr::Or(children) => {
            let sep = if matches!(expr, Expr::And(_)) { " AND " } else { " OR " };
            let body = children.iter().map(|c| render_expr(c, true)).collect::<Vec<_>>().join(sep);
            if nested {
                format!("({body})")
            } else {
                body
            }
        }
    }
}

fn render_label(label: &str) -> String {
    let bare = !label.is_empty() && label.chars().all(is_ident_char) && keyword(label).is_none();
    if bare {
        label.to_string()
    } else {
        let escaped = label.replace('\\', "\\\\").replace('"', "\\\"");
        format!("\"{escaped}\"")
    }
}

pub(crate) fn digest(rules: &[Rule]) -> String {
    hex::encode(Sha256::digest(render(rules).as_bytes()))
}
