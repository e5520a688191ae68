//! Payload tokenization and token vocabularies.
//!
//! Sequence payloads (amino acids, molecular strings) tokenize per
//! character; text payloads tokenize per whitespace-separated word,
//! lowercased. Vocabularies reserve BOS at index 0 and UNK at index 1 and
//! are built deterministically from the training attribute payloads.

use serde::{Deserialize, Serialize};

use std::collections::HashMap;

pub const BOS_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    /// One token per character.
    Chars,
    /// Whitespace-separated words, lowercased.
    Words,
}

pub fn tokenize(kind: TokenizerKind, payload: &str) -> Vec<String> {
    match kind {
        TokenizerKind::Chars => payload.chars().filter(|c| !c.is_whitespace()).map(String::from).collect(),
        TokenizerKind::Words => payload.split_whitespace().map(|w| w.to_lowercase()).collect(),
    }
}

/// Modality-specific token -> index map with reserved BOS and UNK entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenVocabulary {
    kind: TokenizerKind,
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TokenVocabulary {
    /// Build from payloads in the order given; callers must present payloads
    /// in a deterministic order (e.g. by entity index).
    pub fn build<'a>(kind: TokenizerKind, payloads: impl IntoIterator<Item = &'a str>) -> Self {
        let mut tokens = vec!["<bos>".to_string(), "<unk>".to_string()];
        let mut index: HashMap<String, usize> = HashMap::new();
        index.insert(tokens[0].clone(), BOS_INDEX);
        index.insert(tokens[1].clone(), UNK_INDEX);
        for payload in payloads {
            for tok in tokenize(kind, payload) {
                if !index.contains_key(&tok) {
                    index.insert(tok.clone(), tokens.len());
                    tokens.push(tok);
                }
            }
        }
        Self { kind, tokens, index }
    }

    /// Restore the derived index after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn kind(&self) -> TokenizerKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token index, UNK for unseen tokens.
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_INDEX)
    }

    /// Tokenize a payload and map to indices (without BOS).
    pub fn encode(&self, payload: &str) -> Vec<usize> {
        tokenize(self.kind, payload).iter().map(|t| self.lookup(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chars_tokenizer_splits_per_character() {
        assert_eq!(tokenize(TokenizerKind::Chars, "MKV"), vec!["M", "K", "V"]);
    }

    #[test]
    fn words_tokenizer_lowercases() {
        assert_eq!(
            tokenize(TokenizerKind::Words, "A Rare  Disease"),
            vec!["a", "rare", "disease"]
        );
    }

    #[test]
    fn reserved_indices_are_fixed() {
        let v = TokenVocabulary::build(TokenizerKind::Chars, ["AB"]);
        assert_eq!(v.lookup("<bos>"), BOS_INDEX);
        assert_eq!(v.lookup("<unk>"), UNK_INDEX);
        assert_eq!(v.lookup("A"), 2);
        assert_eq!(v.lookup("B"), 3);
        assert_eq!(v.lookup("Z"), UNK_INDEX);
    }

    #[test]
    fn construction_is_deterministic() {
        let a = TokenVocabulary::build(TokenizerKind::Words, ["b a", "c a"]);
        let b = TokenVocabulary::build(TokenizerKind::Words, ["b a", "c a"]);
        assert_eq!(a, b);
    }
}
