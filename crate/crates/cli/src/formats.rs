//! On-disk formats.
//!
//! Merge table: UTF-8 text, first line `#version: subseg/1`, then one rule
//! per line as `left right` in priority order, word-final tokens carrying a
//! `</w>` suffix.
//!
//! Vocabulary: UTF-8 TSV `token<TAB>id`, ids ascending, `<unk>` at id 0.
//!
//! Analysis outputs are TSV as well: `token<TAB>ratio<TAB>substring_count`
//! and `length<TAB>count`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use subseg::analysis::TokenRatio;
use subseg::{MergeTable, Token, Vocabulary};

pub const MERGES_HEADER: &str = "#version: subseg/1";

/// A problem in an input file, with its 1-based line.
#[derive(Debug)]
pub struct FormatError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for FormatError {}

fn fail(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError {
        line,
        msg: msg.into(),
    }
}

fn read_lines(reader: impl BufRead) -> impl Iterator<Item = (usize, Result<String, FormatError>)> {
    reader.lines().enumerate().map(|(i, line)| {
        let n = i + 1;
        (n, line.map_err(|e| fail(n, e.to_string())))
    })
}

/// Tokens whose rendering would read back differently.
fn check_representable(token: &Token) -> io::Result<()> {
    if !token.is_word_final() && token.text().ends_with(subseg::END_OF_WORD) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!(
                "token {:?} cannot be written: text ends with the end-of-word marker",
                token.text()
            ),
        ));
    }
    Ok(())
}

pub fn write_merges(table: &MergeTable, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{MERGES_HEADER}")?;
    for rule in table.rules() {
        check_representable(rule.left())?;
        check_representable(rule.right())?;
        writeln!(out, "{} {}", rule.left(), rule.right())?;
    }
    out.flush()
}

pub fn read_merges(reader: impl BufRead) -> Result<MergeTable, FormatError> {
    let mut table = MergeTable::new();
    let mut saw_header = false;
    for (n, line) in read_lines(reader) {
        let line = line?;
        if !saw_header {
            if line != MERGES_HEADER {
                return Err(fail(n, format!("expected header `{MERGES_HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        let mut fields = line.split(' ');
        let (Some(left), Some(right), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(fail(n, "expected `left right`"));
        };
        let left = Token::parse_rendered(left).map_err(|e| fail(n, e.to_string()))?;
        let right = Token::parse_rendered(right).map_err(|e| fail(n, e.to_string()))?;
        table
            .push(left, right)
            .map_err(|e| fail(n, e.to_string()))?;
    }
    if !saw_header {
        return Err(fail(1, "empty merge table file"));
    }
    Ok(table)
}

pub fn write_vocab(vocab: &Vocabulary, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{}\t{}", Vocabulary::UNK, vocab.unk_id())?;
    for (id, token) in vocab.iter() {
        check_representable(token)?;
        writeln!(out, "{token}\t{id}")?;
    }
    out.flush()
}

pub fn read_vocab(reader: impl BufRead) -> Result<Vocabulary, FormatError> {
    let mut tokens = Vec::new();
    for (n, line) in read_lines(reader) {
        let line = line?;
        let (token, id) = line
            .rsplit_once('\t')
            .ok_or_else(|| fail(n, "expected `token<TAB>id`"))?;
        let id: u32 = id.parse().map_err(|_| fail(n, format!("bad id {id:?}")))?;
        if id as usize != n - 1 {
            return Err(fail(n, format!("expected id {}, found {id}", n - 1)));
        }
        if id == Vocabulary::UNK_ID {
            if token != Vocabulary::UNK {
                return Err(fail(n, format!("id 0 must be {}", Vocabulary::UNK)));
            }
            continue;
        }
        tokens.push(Token::parse_rendered(token).map_err(|e| fail(n, e.to_string()))?);
    }
    Vocabulary::from_tokens(tokens).map_err(|e| fail(0, e.to_string()))
}

pub fn write_ratios(ratios: &[TokenRatio], mut out: impl Write) -> io::Result<()> {
    for r in ratios {
        writeln!(out, "{}\t{:.6}\t{}", r.token, r.ratio, r.substring_count)?;
    }
    out.flush()
}

pub fn write_histogram(histogram: &BTreeMap<usize, u64>, mut out: impl Write) -> io::Result<()> {
    for (len, count) in histogram {
        writeln!(out, "{len}\t{count}")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use subseg::{train_bpe, WordCounts};

    fn trained() -> (MergeTable, Vocabulary) {
        let counts = WordCounts::from_lines(["low lower newest widest naïve <unk> a@@"]);
        train_bpe(&counts, 30).unwrap()
    }

    #[test]
    fn merges_round_trip() {
        let (table, _) = trained();
        let mut buf = Vec::new();
        write_merges(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("#version: subseg/1\n"));
        assert_eq!(read_merges(&buf[..]).unwrap(), table);
    }

    #[test]
    fn vocab_round_trip() {
        let (_, vocab) = trained();
        let mut buf = Vec::new();
        write_vocab(&vocab, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("<unk>\t0\n"));
        assert_eq!(read_vocab(&buf[..]).unwrap(), vocab);
    }

    #[test]
    fn merges_reject_duplicates_and_garbage() {
        let dup = "#version: subseg/1\na b\na b\n";
        let err = read_merges(dup.as_bytes()).unwrap_err();
        assert_eq!(err.line, 3);
        assert!(read_merges("a b\n".as_bytes()).is_err());
        assert!(read_merges("".as_bytes()).is_err());
        assert_eq!(
            read_merges("#version: subseg/1\nab\n".as_bytes())
                .unwrap_err()
                .line,
            2
        );
        assert_eq!(
            read_merges("#version: subseg/1\na</w> b\n".as_bytes())
                .unwrap_err()
                .line,
            2
        );
    }

    #[test]
    fn vocab_rejects_bad_ids() {
        assert!(read_vocab("<unk>\t0\na\t2\n".as_bytes()).is_err());
        assert!(read_vocab("a\t0\n".as_bytes()).is_err());
        assert!(read_vocab("<unk>\t0\na\tx\n".as_bytes()).is_err());
    }

    #[test]
    fn unrepresentable_token() {
        let table = MergeTable::from_pairs([(Token::inner("a</w>"), Token::last("b"))]).unwrap();
        assert!(write_merges(&table, Vec::new()).is_err());
    }
}
