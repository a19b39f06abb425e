//! Text rendering of segmented lines.
//!
//! Words are maximal runs of non-whitespace; whitespace between words is
//! copied verbatim. Subwords of one word are joined by a single space and
//! every non-final subword carries an `@@` suffix:
//!
//! ```text
//! unrelated  ->  un@@ relat@@ ed
//! ```
//!
//! A word-final subword whose text ends in `@@` followed by zero or more
//! backslashes gets one extra backslash, so it cannot be read back as a
//! continuation. [`detokenize`] undoes both rules exactly.

use alloc::string::String;

use crate::error::{Error, Result};
use crate::merges::MergeTable;
use crate::segment::{bpe_pieces, Piece};
use crate::token::Split;
use crate::CONTINUATION;

/// A run of whitespace or a word inside a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part<'a> {
    Space(&'a str),
    Word(&'a str),
}

/// Splits a line into alternating whitespace and word runs, with the byte
/// offset of each run.
pub fn line_parts(line: &str) -> LineParts<'_> {
    LineParts { line, offset: 0 }
}

#[derive(Debug, Clone)]
pub struct LineParts<'a> {
    line: &'a str,
    offset: usize,
}

impl<'a> Iterator for LineParts<'a> {
    type Item = (usize, Part<'a>);

    fn next(&mut self) -> Option<Self::Item> {
        let rest = &self.line[self.offset..];
        let first = rest.chars().next()?;
        let space = first.is_whitespace();
        let len = rest
            .char_indices()
            .find(|&(_, c)| c.is_whitespace() != space)
            .map_or(rest.len(), |(i, _)| i);
        let start = self.offset;
        self.offset += len;
        let run = &rest[..len];
        Some((
            start,
            if space {
                Part::Space(run)
            } else {
                Part::Word(run)
            },
        ))
    }
}

/// Words of a line in order.
pub fn words(line: &str) -> impl Iterator<Item = &str> {
    line_parts(line).filter_map(|(_, part)| match part {
        Part::Word(w) => Some(w),
        Part::Space(_) => None,
    })
}

fn needs_escape(text: &str) -> bool {
    text.trim_end_matches('\\').ends_with(CONTINUATION)
}

fn push_final(out: &mut String, text: &str) {
    out.push_str(text);
    if needs_escape(text) {
        out.push('\\');
    }
}

pub(crate) fn render_pieces(word: &str, pieces: &[Piece], out: &mut String) {
    let last = pieces.len().saturating_sub(1);
    for (i, p) in pieces.iter().enumerate() {
        let text = &word[p.start..p.end];
        if i < last {
            out.push_str(text);
            out.push_str(CONTINUATION);
            out.push(' ');
        } else {
            push_final(out, text);
        }
    }
}

/// Renders one word's split, e.g. `un@@ relat@@ ed`.
pub fn render_split(split: &Split) -> String {
    let mut out = String::new();
    let last = split.len().saturating_sub(1);
    for (i, token) in split.tokens().iter().enumerate() {
        if i < last {
            out.push_str(token.text());
            out.push_str(CONTINUATION);
            out.push(' ');
        } else {
            push_final(&mut out, token.text());
        }
    }
    out
}

/// Rewrites every word of `line` with its rendering produced by `segment`,
/// keeping whitespace runs as they are. `segment` receives the word index.
pub(crate) fn rewrite_words<F>(line: &str, mut segment: F) -> String
where
    F: FnMut(usize, &str, &mut String),
{
    let mut out = String::with_capacity(line.len() + line.len() / 2);
    let mut word_index = 0;
    for (_, part) in line_parts(line) {
        match part {
            Part::Space(s) => out.push_str(s),
            Part::Word(w) => {
                segment(word_index, w, &mut out);
                word_index += 1;
            }
        }
    }
    out
}

/// Deterministic BPE segmentation of every word of a line.
pub fn segment_line(line: &str, table: &MergeTable) -> String {
    let mut pieces = alloc::vec::Vec::new();
    rewrite_words(line, |_, word, out| {
        bpe_pieces(word, table, &mut pieces);
        render_pieces(word, &pieces, out);
    })
}

/// Inverse of the rendering: joins `@@` continuations and removes escapes.
pub fn detokenize(line: &str) -> Result<String> {
    let mut out = String::with_capacity(line.len());
    let mut pending: Option<usize> = None;
    for (offset, part) in line_parts(line) {
        match part {
            Part::Space(s) => {
                if pending.is_some() {
                    if s != " " {
                        return Err(Error::Parse {
                            offset,
                            reason: "continuation must be followed by a single space",
                        });
                    }
                    continue;
                }
                out.push_str(s);
            }
            Part::Word(t) => {
                if let Some(body) = t.strip_suffix(CONTINUATION) {
                    if body.is_empty() {
                        return Err(Error::Parse {
                            offset,
                            reason: "empty subword before continuation marker",
                        });
                    }
                    out.push_str(body);
                    pending = Some(offset + t.len());
                } else {
                    pending = None;
                    match t.strip_suffix('\\') {
                        Some(body) if needs_escape(body) => out.push_str(body),
                        _ => out.push_str(t),
                    }
                }
            }
        }
    }
    if let Some(offset) = pending {
        return Err(Error::Parse {
            offset,
            reason: "continuation marker at end of line",
        });
    }
    Ok(out)
}
