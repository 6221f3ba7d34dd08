//! Textual fuzzy rule language.
//!
//! ```text
//! file  := { rule | comment } ;
//! rule  := "IF" expr "THEN" ident "IS" label ";"? NEWLINE ;
//! expr  := conj { "OR" conj } ;
//! conj  := atom { "AND" atom } ;
//! atom  := ident "IS" label { "OR" label } | "(" expr ")" ;
//! label := ident | quoted-string ;
//! ```
//!
//! Keywords are case-insensitive, `#` starts a comment, and multi-word labels
//! are written as quoted strings.

mod ast;
mod diagnostic;
mod lexer;
mod parser;
mod printer;
mod validate;

pub use ast::{Atom, Consequent, Expr, Rule, RuleBase, Span};
pub use diagnostic::{has_errors, Diagnostic, Severity};
pub use parser::parse_rules;
pub use printer::{pretty_print, render_expr, render_rule};
pub use validate::validate;

/// The default rule base: the twelve assistance rules, shipped as text.
pub const DEFAULT_RULES: &str = include_str!("../../rules/default.frl");

/// Parses [`DEFAULT_RULES`].
pub fn default_rule_base() -> RuleBase {
    parse_rules(DEFAULT_RULES).expect("bundled rule file parses")
}
