//! Deterministic priority-driven BPE segmentation.

use alloc::vec::Vec;

use crate::error::Result;
use crate::merges::{MergeTable, PairMerge};
use crate::token::{check_word, Split, Token};
use crate::vocab::Vocabulary;

/// One working token: an interned symbol covering `word[start..end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Piece {
    pub sym: u32,
    pub start: usize,
    pub end: usize,
}

pub(crate) fn initial_pieces(word: &str, table: &MergeTable, out: &mut Vec<Piece>) {
    out.clear();
    let mut chars = word.char_indices().peekable();
    while let Some((start, c)) = chars.next() {
        let end = chars.peek().map_or(word.len(), |&(i, _)| i);
        let is_final = end == word.len();
        out.push(Piece {
            sym: table.char_symbol(c, is_final),
            start,
            end,
        });
    }
}

/// Replaces the pieces at `i` and `i + 1` by their merge result.
pub(crate) fn merge_at(pieces: &mut Vec<Piece>, i: usize, result: u32) {
    let right = pieces.remove(i + 1);
    let left = &mut pieces[i];
    left.sym = result;
    left.end = right.end;
}

/// Highest-priority adjacent merge, leftmost among equal priorities.
fn best_merge(pieces: &[Piece], table: &MergeTable) -> Option<(usize, PairMerge)> {
    let mut best: Option<(usize, PairMerge)> = None;
    for (i, w) in pieces.windows(2).enumerate() {
        if let Some(m) = table.pair(w[0].sym, w[1].sym) {
            if best.is_none_or(|(_, b)| m.priority < b.priority) {
                best = Some((i, m));
            }
        }
    }
    best
}

pub(crate) fn bpe_pieces(word: &str, table: &MergeTable, pieces: &mut Vec<Piece>) {
    initial_pieces(word, table, pieces);
    while let Some((i, m)) = best_merge(pieces, table) {
        merge_at(pieces, i, m.result);
    }
}

pub(crate) fn pieces_to_split(word: &str, pieces: &[Piece]) -> Split {
    let last = pieces.len().saturating_sub(1);
    let tokens = pieces
        .iter()
        .enumerate()
        .map(|(i, p)| Token::new(&word[p.start..p.end], i == last).expect("pieces are non-empty"))
        .collect();
    Split::from_tokens_unchecked(tokens)
}

/// Segments `word` by repeatedly applying the highest-priority merge
/// available in the current split (leftmost occurrence first) until no
/// adjacent pair is in the table. Characters never seen in a rule stay
/// single-character tokens.
pub fn segment_word(word: &str, table: &MergeTable) -> Result<Split> {
    check_word(word)?;
    let mut pieces = Vec::with_capacity(word.len());
    bpe_pieces(word, table, &mut pieces);
    Ok(pieces_to_split(word, &pieces))
}

/// Maps each token to its vocabulary id; unknown tokens map to the UNK id.
pub fn tokens_to_ids(split: &Split, vocab: &Vocabulary) -> Vec<u32> {
    split
        .tokens()
        .iter()
        .map(|t| vocab.id(t).unwrap_or(vocab.unk_id()))
        .collect()
}
