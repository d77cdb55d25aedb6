//! Case folding, whitespace normalization and word tokens shared by the
//! cleaning rules and the frame extractors.

/// Lowercases and collapses every run of whitespace into a single space.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Strips leading and trailing punctuation from a whitespace token and
/// case-folds it. Interior apostrophes and hyphens survive ("he'll").
pub fn word(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .flat_map(char::to_lowercase)
        .collect()
}

/// Whitespace tokens of `s` as case-folded words, empty words dropped.
pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(word).filter(|w| !w.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_folds_case_and_space() {
        assert_eq!(normalize("  A \t Cake\n"), "a cake");
        assert_eq!(normalize(""), "");
    }

    #[test]
    fn word_strips_edge_punctuation() {
        assert_eq!(word("Stop!"), "stop");
        assert_eq!(word("\"he'll"), "he'll");
        assert_eq!(word("..."), "");
        assert_eq!(
            words("While running, she tripped."),
            ["while", "running", "she", "tripped"]
        );
    }
}
