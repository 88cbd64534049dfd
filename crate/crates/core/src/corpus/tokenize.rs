//! Whitespace tokenizer with end-punctuation stripping.
//!
//! The token definition is fixed so corpus statistics are reproducible:
//! split on Unicode whitespace, strip non-alphanumeric characters from both
//! ends of each piece (interior characters such as the hyphen in
//! "co-construct" survive), and drop pieces that end up empty.

/// Tokenize `text`, keeping the original case.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|piece| piece.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|piece| !piece.is_empty())
        .map(str::to_string)
        .collect()
}

/// Lowercased tokens, for feature extraction.
pub fn tokenize_lower(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| t.to_lowercase()).collect()
}
