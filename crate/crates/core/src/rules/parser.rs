use super::ast::{Atom, Consequent, Expr, Rule, RuleBase, Span};
use super::diagnostic::Diagnostic;
use super::lexer::{tokenize, Token, TokenKind};

/// Parses rule text. Either every line is consumed into a [`RuleBase`] or at
/// least one error diagnostic comes back; nothing is silently dropped.
pub fn parse_rules(text: &str) -> Result<RuleBase, Vec<Diagnostic>> {
    let (tokens, mut diagnostics) = tokenize(text);
    let mut parser = Parser { tokens, pos: 0 };
    let mut rules = Vec::new();

    loop {
        parser.skip_newlines();
        if parser.at(&TokenKind::Eof) {
            break;
        }
        match parser.rule(rules.len() + 1) {
            Ok(rule) => rules.push(rule),
            Err(diag) => {
                diagnostics.push(diag);
                parser.recover();
            }
        }
    }

    if !diagnostics.is_empty() {
        diagnostics.sort_by_key(|d| (d.line, d.column));
        return Err(diagnostics);
    }
    if rules.is_empty() {
        return Err(vec![Diagnostic::error("empty rule file: no rules found", 1, 1)]);
    }
    Ok(RuleBase::new(rules))
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type ParseResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_kind(&self, offset: usize) -> &TokenKind {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn at(&self, kind: &TokenKind) -> bool {
        &self.peek().kind == kind
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn skip_newlines(&mut self) {
        while self.at(&TokenKind::Newline) {
            self.bump();
        }
    }

    fn recover(&mut self) {
        while !matches!(self.peek().kind, TokenKind::Newline | TokenKind::Eof) {
            self.bump();
        }
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        let tok = self.peek();
        let message = match tok.kind {
            TokenKind::Newline | TokenKind::Eof => {
                format!("unterminated rule: expected {expected}, found {}", tok.kind.describe())
            }
            _ => format!("expected {expected}, found {}", tok.kind.describe()),
        };
        Diagnostic::error(message, tok.line, tok.column)
    }

    fn expect(&mut self, kind: TokenKind) -> ParseResult<Token> {
        if self.at(&kind) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&kind.describe()))
        }
    }

    fn rule(&mut self, id: usize) -> ParseResult<Rule> {
        let start = self.expect(TokenKind::If)?;
        let antecedent = self.expr()?;
        self.expect(TokenKind::Then)?;
        let (variable, var_span) = self.ident("output variable name")?;
        self.expect(TokenKind::Is)?;
        let (label, _) = self.label()?;
        if self.at(&TokenKind::Semi) {
            self.bump();
        }
        if !matches!(self.peek().kind, TokenKind::Newline | TokenKind::Eof) {
            return Err(self.unexpected("end of line after rule"));
        }
        Ok(Rule {
            id,
            antecedent,
            consequent: Consequent { variable, label, span: var_span },
            span: Span { line: start.line, column: start.column },
        })
    }

    fn expr(&mut self) -> ParseResult<Expr> {
        let mut terms = vec![self.conj()?];
        while self.at(&TokenKind::Or) {
            self.bump();
            terms.push(self.conj()?);
        }
        Ok(Expr::or(terms))
    }

    fn conj(&mut self) -> ParseResult<Expr> {
        let mut factors = vec![self.atom()?];
        while self.at(&TokenKind::And) {
            self.bump();
            factors.push(self.atom()?);
        }
        Ok(Expr::and(factors))
    }

    fn atom(&mut self) -> ParseResult<Expr> {
        if self.at(&TokenKind::LParen) {
            self.bump();
            let inner = self.expr()?;
            self.expect(TokenKind::RParen)?;
            return Ok(inner);
        }
        let (variable, span) = self.ident("variable name or `(`")?;
        self.expect(TokenKind::Is)?;
        let (label, _) = self.label()?;
        let mut atoms = vec![Expr::Atom(Atom { variable: variable.clone(), label, span })];
        // `X IS A OR B` shorthand: an OR followed by a bare label rather than
        // the start of a new `Y IS ...` atom.
        while self.at(&TokenKind::Or) && self.shorthand_label_follows() {
            self.bump();
            let (label, _) = self.label()?;
            atoms.push(Expr::Atom(Atom { variable: variable.clone(), label, span }));
        }
        Ok(Expr::or(atoms))
    }

    fn shorthand_label_follows(&self) -> bool {
        match self.peek_kind(1) {
            TokenKind::Str(_) => true,
            TokenKind::Ident(_) => !matches!(self.peek_kind(2), TokenKind::Is),
            _ => false,
        }
    }

    fn ident(&mut self, expected: &str) -> ParseResult<(String, Span)> {
        match &self.peek().kind {
            TokenKind::Ident(name) => {
                let name = name.clone();
                let tok = self.bump();
                Ok((name, Span { line: tok.line, column: tok.column }))
            }
            _ => Err(self.unexpected(expected)),
        }
    }

    fn label(&mut self) -> ParseResult<(String, Span)> {
        match &self.peek().kind {
            TokenKind::Ident(name) | TokenKind::Str(name) => {
                let name = name.trim().to_string();
                let tok = self.bump();
                if name.is_empty() {
                    return Err(Diagnostic::error("empty label", tok.line, tok.column));
                }
                Ok((name, Span { line: tok.line, column: tok.column }))
            }
            _ => Err(self.unexpected("label")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn or_of_two_atoms() {
        let rb = parse_rules(
            "IF Professionalism IS Unprofessional OR EthicalBehavior IS Dangerous THEN Assistance IS VeryHigh",
        )
        .unwrap();
        assert_eq!(rb.len(), 1);
        let rule = &rb.rules()[0];
        assert!(matches!(rule.antecedent, Expr::Or(ref c) if c.len() == 2));
        assert_eq!(rule.antecedent.atoms().len(), 2);
        assert_eq!(rule.consequent.label, "VeryHigh");
    }

    #[test]
    fn label_shorthand_expands_on_same_variable() {
        let rb = parse_rules("IF EthicalBehavior IS Unsafe OR Dangerous THEN Assistance IS VeryHigh\n").unwrap();
        let atoms = rb.rules()[0].antecedent.atoms();
        assert_eq!(atoms.len(), 2);
        assert!(atoms.iter().all(|a| a.variable == "EthicalBehavior"));
        assert_eq!(atoms[1].label, "Dangerous");
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let rb = parse_rules("IF A IS x OR B IS y AND C IS z THEN Out IS hi").unwrap();
        assert_eq!(
            rb.rules()[0].antecedent,
            Expr::Or(vec![
                Expr::atom("A", "x"),
                Expr::And(vec![Expr::atom("B", "y"), Expr::atom("C", "z")]),
            ])
        );
    }

    #[test]
    fn parentheses_group() {
        let rb = parse_rules("IF (A IS x OR B IS y) AND C IS z THEN Out IS hi").unwrap();
        assert_eq!(
            rb.rules()[0].antecedent,
            Expr::And(vec![
                Expr::Or(vec![Expr::atom("A", "x"), Expr::atom("B", "y")]),
                Expr::atom("C", "z"),
            ])
        );
    }

    #[test]
    fn quoted_labels_keep_spaces_and_are_trimmed() {
        let rb = parse_rules("if MedicalRelevance is \" Partially relevant \" then Assistance is \"Very High\";").unwrap();
        let rule = &rb.rules()[0];
        assert_eq!(rule.antecedent.atoms()[0].label, "Partially relevant");
        assert_eq!(rule.consequent.label, "Very High");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# header\n\nIF A IS x THEN O IS y # why\n   \n# end\nIF B IS z THEN O IS w\n";
        let rb = parse_rules(text).unwrap();
        assert_eq!(rb.len(), 2);
        assert_eq!(rb.rules()[1].id, 2);
        assert_eq!(rb.rules()[1].span.line, 6);
    }

    #[test]
    fn empty_file_is_an_error() {
        let errs = parse_rules("").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("empty"));
        assert!(parse_rules("# only a comment\n\n").is_err());
    }

    #[test]
    fn unterminated_rule_reports_position() {
        let errs = parse_rules("IF A IS x THEN O IS y\nIF B IS z\n").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.starts_with("unterminated rule"), "{}", errs[0].message);
        assert_eq!((errs[0].line, errs[0].column), (2, 10));
    }

    #[test]
    fn reports_every_bad_line() {
        let errs = parse_rules("IF A x THEN O IS y\nIF A IS x THEN O IS y\nIF (A IS x THEN O IS y\n").unwrap_err();
        assert_eq!(errs.iter().map(|d| d.line).collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let errs = parse_rules("IF A IS x THEN O IS y z").unwrap_err();
        assert!(errs[0].message.contains("end of line"));
    }
}
