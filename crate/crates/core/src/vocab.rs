//! Integer coding of linearized discourse tokens.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::rst::{
    RelationVocab, TokenSequence, CLOSE, EDU_CLOSE, EDU_OPEN, NUC_LEFT, NUC_RIGHT, OPEN, REL_PREFIX,
};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const BOS_ID: usize = 2;
pub const EOS_ID: usize = 3;

/// Token ↔ id table. Ids 0..4 are the reserved tokens, followed by the
/// structural grammar tokens, one `REL:` token per relation label, then
/// words in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct TokenVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for TokenVocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TokenVocab { tokens, index }
    }
}

impl From<TokenVocab> for Vec<String> {
    fn from(v: TokenVocab) -> Self {
        v.tokens
    }
}

impl TokenVocab {
    pub fn build<'a>(
        relations: &RelationVocab,
        sequences: impl IntoIterator<Item = &'a TokenSequence>,
    ) -> Self {
        let mut tokens: Vec<String> = [
            PAD, UNK, BOS, EOS, OPEN, CLOSE, EDU_OPEN, EDU_CLOSE, NUC_LEFT, NUC_RIGHT,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        tokens.extend(relations.labels().map(|l| format!("{REL_PREFIX}{l}")));
        let fixed: BTreeSet<String> = tokens.iter().cloned().collect();
        let words: BTreeSet<String> = sequences
            .into_iter()
            .flat_map(|s| s.tokens().iter())
            .filter(|t| !fixed.contains(*t))
            .cloned()
            .collect();
        tokens.extend(words);
        TokenVocab::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map(String::as_str).unwrap_or(UNK)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `<s>` + ids + `</s>`; unknown tokens map to `<unk>`.
    pub fn encode(&self, seq: &TokenSequence) -> Vec<usize> {
        let mut ids = Vec::with_capacity(seq.len() + 2);
        ids.push(BOS_ID);
        ids.extend(seq.tokens().iter().map(|t| self.id(t)));
        ids.push(EOS_ID);
        ids
    }

    /// Maps ids back to tokens, dropping `<s>`, `</s>` and `<pad>`.
    pub fn decode(&self, ids: &[usize]) -> TokenSequence {
        ids.iter()
            .filter(|&&id| !matches!(id, PAD_ID | BOS_ID | EOS_ID))
            .map(|&id| self.token(id).to_string())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_roundtrip() {
        let rel = RelationVocab::new(["Cause", "Joint"]).unwrap();
        let seq =
            TokenSequence::from_line("( REL:Cause NUC:LEFT <edu> b a </edu> <edu> a </edu> )");
        let v = TokenVocab::build(&rel, [&seq]);
        assert_eq!(v.id(PAD), PAD_ID);
        assert_eq!(v.id(EOS), EOS_ID);
        assert_eq!(&v.tokens()[10..], &["REL:Cause", "REL:Joint", "a", "b"]);
        let ids = v.encode(&seq);
        assert_eq!(ids[0], BOS_ID);
        assert_eq!(*ids.last().unwrap(), EOS_ID);
        assert_eq!(v.decode(&ids), seq);
        assert_eq!(v.id("zebra"), UNK_ID);
    }

    #[test]
    fn serde_as_token_list() {
        let v = TokenVocab::build(&RelationVocab::default(), []);
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.starts_with("[\"<pad>\""));
        let back: TokenVocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }
}
