use super::diagnostic::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TokenKind {
    If,
    Then,
    Is,
    And,
    Or,
    Ident(String),
    Str(String),
    LParen,
    RParen,
    Semi,
    Newline,
    Eof,
}

impl TokenKind {
    pub(crate) fn describe(&self) -> String {
        match self {
            TokenKind::If => "`IF`".into(),
            TokenKind::Then => "`THEN`".into(),
            TokenKind::Is => "`IS`".into(),
            TokenKind::And => "`AND`".into(),
            TokenKind::Or => "`OR`".into(),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Str(s) => format!("string \"{s}\""),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Semi => "`;`".into(),
            TokenKind::Newline => "end of line".into(),
            TokenKind::Eof => "end of file".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub(crate) fn keyword(word: &str) -> Option<TokenKind> {
    match word.to_ascii_uppercase().as_str() {
        "IF" => Some(TokenKind::If),
        "THEN" => Some(TokenKind::Then),
        "IS" => Some(TokenKind::Is),
        "AND" => Some(TokenKind::And),
        "OR" => Some(TokenKind::Or),
        _ => None,
    }
}

/// Splits rule text into tokens. Lexical errors are reported and the
/// offending character skipped, so parsing can still report later problems.
pub(crate) fn tokenize(text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let mut line = 1;
    let mut column = 1;
    let mut chars = text.chars().peekable();

    while let Some(&c) = chars.peek() {
        let (start_line, start_col) = (line, column);
        let push = |tokens: &mut Vec<Token>, kind| tokens.push(Token { kind, line: start_line, column: start_col });
        match c {
            '\n' => {
                chars.next();
                push(&mut tokens, TokenKind::Newline);
                line += 1;
                column = 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    column += 1;
                }
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            '(' | ')' | ';' => {
                chars.next();
                column += 1;
                let kind = match c {
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    _ => TokenKind::Semi,
                };
                push(&mut tokens, kind);
            }
            '"' => {
                chars.next();
                column += 1;
                let mut value = String::new();
                let mut closed = false;
                while let Some(&c) = chars.peek() {
                    match c {
                        '\n' => break,
                        '"' => {
                            chars.next();
                            column += 1;
                            closed = true;
                            break;
                        }
                        '\\' => {
                            chars.next();
                            column += 1;
                            match chars.peek() {
                                Some(&esc @ ('"' | '\\')) => {
                                    value.push(esc);
                                    chars.next();
                                    column += 1;
                                }
                                _ => {
                                    errors.push(Diagnostic::error(
                                        "invalid escape in string (only \\\" and \\\\ are allowed)",
                                        line,
                                        column - 1,
                                    ));
                                }
                            }
                        }
                        other => {
                            value.push(other);
                            chars.next();
                            column += 1;
                        }
                    }
                }
                if closed {
                    push(&mut tokens, TokenKind::Str(value.trim().to_string()));
                } else {
                    errors.push(Diagnostic::error("unterminated string", start_line, start_col));
                }
            }
            c if is_ident_char(c) => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_ident_char(c) {
                        break;
                    }
                    word.push(c);
                    chars.next();
                    column += 1;
                }
                let kind = keyword(&word).unwrap_or(TokenKind::Ident(word));
                push(&mut tokens, kind);
            }
            other => {
                chars.next();
                column += 1;
                errors.push(Diagnostic::error(format!("unexpected character {other:?}"), start_line, start_col));
            }
        }
    }
    tokens.push(Token { kind: TokenKind::Eof, line, column });
    (tokens, errors)
}
