use serde::{Deserialize, Serialize};

/// Source position of a token. Positions never take part in equality, so a
/// rule base compares equal to its re-parsed canonical text.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

/// `variable IS label`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub variable: String,
    pub label: String,
    #[serde(skip)]
    pub span: Span,
}

impl Atom {
    pub fn new(variable: impl Into<String>, label: impl Into<String>) -> Self {
        Self { variable: variable.into(), label: label.into(), span: Span::default() }
    }
}

/// Antecedent expression. Trees built through [`Expr::and`] / [`Expr::or`] are
/// normalized: nested nodes of the same connective are flattened and
/// single-child nodes collapse to the child.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Atom(Atom),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    pub fn atom(variable: impl Into<String>, label: impl Into<String>) -> Self {
        Expr::Atom(Atom::new(variable, label))
    }

    pub fn and(children: Vec<Expr>) -> Self {
        Self::join(children, true)
    }

    pub fn or(children: Vec<Expr>) -> Self {
        Self::join(children, false)
    }

    fn join(children: Vec<Expr>, conjunction: bool) -> Self {
        let mut flat = Vec::with_capacity(children.len());
        for child in children {
            match child {
                Expr::And(inner) if conjunction => flat.extend(inner),
                Expr::Or(inner) if !conjunction => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            return flat.pop().expect("one element");
        }
        if conjunction {
            Expr::And(flat)
        } else {
            Expr::Or(flat)
        }
    }

    /// All atoms in left-to-right order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Expr::Atom(a) => out.push(a),
            Expr::And(children) | Expr::Or(children) => {
                children.iter().for_each(|c| c.collect_atoms(out));
            }
        }
    }

    /// Order-insensitive form used to detect duplicate antecedents.
    pub(crate) fn canonical_key(&self) -> String {
        match self {
            Expr::Atom(a) => format!("{}={}", a.variable, a.label),
            Expr::And(children) | Expr::Or(children) => {
                let mut keys: Vec<String> = children.iter().map(Expr::canonical_key).collect();
                keys.sort();
                keys.dedup();
                let op = if matches!(self, Expr::And(_)) { "&" } else { "|" };
                format!("{op}({})", keys.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consequent {
    pub variable: String,
    pub label: String,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    /// 1-based position in the source file.
    pub id: usize,
    pub antecedent: Expr,
    pub consequent: Consequent,
    #[serde(skip)]
    pub span: Span,
}

impl Rule {
    pub fn new(id: usize, antecedent: Expr, variable: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id,
            antecedent,
            consequent: Consequent { variable: variable.into(), label: label.into(), span: Span::default() },
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleBase {
    rules: Vec<Rule>,
    source_hash: String,
}

impl PartialEq for RuleBase {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
    }
}

impl RuleBase {
    /// Wraps parsed rules, renumbering ids by position and hashing the
    /// canonical text.
    pub fn new(mut rules: Vec<Rule>) -> Self {
        for (i, rule) in rules.iter_mut().enumerate() {
            rule.id = i + 1;
        }
        let source_hash = super::printer::digest(&rules);
        Self { rules, source_hash }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Rule> {
        id.checked_sub(1).and_then(|i| self.rules.get(i))
    }

    /// SHA-256 of the canonical pretty-printed text, hex encoded.
    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_flatten_and_collapse() {
        let nested = Expr::or(vec![
            Expr::atom("A", "x"),
            Expr::or(vec![Expr::atom("B", "y"), Expr::atom("C", "z")]),
        ]);
        assert_eq!(
            nested,
            Expr::Or(vec![Expr::atom("A", "x"), Expr::atom("B", "y"), Expr::atom("C", "z")])
        );
        assert_eq!(Expr::and(vec![Expr::atom("A", "x")]), Expr::atom("A", "x"));
    }

    #[test]
    fn canonical_key_ignores_order() {
        let ab = Expr::and(vec![Expr::atom("A", "x"), Expr::atom("B", "y")]);
        let ba = Expr::and(vec![Expr::atom("B", "y"), Expr::atom("A", "x")]);
        assert_eq!(ab.canonical_key(), ba.canonical_key());
        let or = Expr::or(vec![Expr::atom("A", "x"), Expr::atom("B", "y")]);
        assert_ne!(ab.canonical_key(), or.canonical_key());
    }
}
