//! Token normalization shared by the scorers and the scripted agents:
//! lowercase, drop apostrophes, treat any other punctuation as a separator.

use std::collections::BTreeSet;

pub fn tokenize(text: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars() {
        if c.is_alphanumeric() {
            cleaned.extend(c.to_lowercase());
        } else if c == '\'' || c == '\u{2019}' {
            continue;
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Distinct tokens of `text`.
pub fn token_set(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

/// True when `phrase` occurs in `tokens` as a contiguous token run.
pub fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_case_and_punctuation() {
        assert_eq!(tokenize("What's your  favorite\tfootball-team?"), ["whats", "your", "favorite", "football", "team"]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
        assert_eq!(tokenize("I’m fine."), ["im", "fine"]);
    }

    #[test]
    fn phrase_matching() {
        let tokens = tokenize("please just shut up and listen");
        assert!(contains_phrase(&tokens, &tokenize("shut up")));
        assert!(!contains_phrase(&tokens, &tokenize("up shut")));
        assert!(!contains_phrase(&tokens, &[]));
    }
}
