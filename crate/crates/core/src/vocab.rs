//! Token vocabularies with a reserved UNK entry.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::error::{invalid, Result};
use crate::merges::MergeTable;
use crate::segment::{bpe_pieces, Piece};
use crate::token::{Token, TokenRef};
use crate::train::WordCounts;

/// Bidirectional token/id map. Id 0 is the UNK entry, which no token maps
/// to; real tokens take ids `1..len()`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    ids: HashMap<Token, u32>,
}

impl Vocabulary {
    pub const UNK_ID: u32 = 0;
    pub const UNK: &'static str = "<unk>";

    /// Assigns ids `1..` in iteration order. Duplicate tokens are an error.
    pub fn from_tokens<I>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = Token>,
    {
        let mut vocab = Self::default();
        for token in tokens {
            if !vocab.insert(token.clone()) {
                return Err(invalid(format!("duplicate vocabulary token {token}")));
            }
        }
        Ok(vocab)
    }

    /// Adds `token` with the next id unless already present.
    pub(crate) fn insert(&mut self, token: Token) -> bool {
        if self.ids.contains_key(&token) {
            return false;
        }
        let id = self.tokens.len() as u32 + 1;
        self.ids.insert(token.clone(), id);
        self.tokens.push(token);
        true
    }

    /// Observed characters plus every token that deterministic segmentation
    /// of the training words emits. Intermediate merge results that never
    /// survive to the final segmentation are left out, so dropout
    /// segmentation can produce UNKs even on training text.
    pub fn from_segmented_corpus(counts: &WordCounts, table: &MergeTable) -> Self {
        let mut chars = BTreeSet::new();
        let mut emitted = BTreeSet::new();
        let mut pieces: Vec<Piece> = Vec::new();
        for word in counts.words() {
            let mut it = word.char_indices().peekable();
            while let Some((start, _)) = it.next() {
                let end = it.peek().map_or(word.len(), |&(i, _)| i);
                chars.insert(Token::new(&word[start..end], end == word.len()).unwrap());
            }
            bpe_pieces(word, table, &mut pieces);
            for p in &pieces {
                emitted.insert(Token::new(&word[p.start..p.end], p.end == word.len()).unwrap());
            }
        }
        let mut vocab = Self::default();
        for token in sort_rendered(chars) {
            vocab.insert(token);
        }
        for token in sort_rendered(emitted) {
            vocab.insert(token);
        }
        vocab
    }

    pub fn unk_id(&self) -> u32 {
        Self::UNK_ID
    }

    pub fn id(&self, token: &Token) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub(crate) fn id_of(&self, text: &str, is_word_final: bool) -> Option<u32> {
        self.ids
            .get(&TokenRef {
                text,
                is_word_final,
            })
            .copied()
    }

    /// The token for `id`; `None` for the UNK id and out-of-range ids.
    pub fn token(&self, id: u32) -> Option<&Token> {
        id.checked_sub(1).and_then(|i| self.tokens.get(i as usize))
    }

    /// Number of entries including UNK.
    pub fn len(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Real tokens with their ids, id ascending.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &Token)> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (i as u32 + 1, t))
    }

    /// Longest token text, in scalar values.
    pub fn max_token_chars(&self) -> usize {
        self.tokens
            .iter()
            .map(|t| t.text().chars().count())
            .max()
            .unwrap_or(0)
    }
}

pub(crate) fn sort_rendered(tokens: impl IntoIterator<Item = Token>) -> Vec<Token> {
    let mut keyed: Vec<_> = tokens.into_iter().map(|t| (t.rendered(), t)).collect();
    keyed.sort();
    keyed.into_iter().map(|(_, t)| t).collect()
}
