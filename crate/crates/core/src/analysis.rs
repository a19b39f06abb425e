//! Corpus statistics of segmented text.
//!
//! Substring occurrences are counted inside words only, at every start
//! position (overlaps included), and respect the end-of-word marker: a
//! word-final token's text matches only at the end of a word and a
//! word-internal token's text only where it does not end the word. An
//! occurrence as an individual token is therefore always also a substring
//! occurrence.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::dropout::{dropout_pieces, DropoutConfig, Scratch};
use crate::error::{invalid, Result};
use crate::merges::MergeTable;
use crate::render::words;
use crate::rng::{pass_seed, RandomStream};
use crate::token::{Token, TokenRef};
use crate::vocab::Vocabulary;

/// Counts from one segmentation pass over (part of) a corpus. Partial
/// statistics of disjoint line ranges combine with [`CorpusStats::merge`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    token_counts: HashMap<Token, u64>,
    substring_counts: HashMap<Token, u64>,
    length_histogram: BTreeMap<usize, u64>,
    unk_tokens: u64,
    total_tokens: u64,
}

impl CorpusStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Segments line `line_index` with the streams of `seed` and records its
    /// tokens, length and UNKs (when a vocabulary is given).
    pub fn add_segmented_line(
        &mut self,
        line: &str,
        line_index: u64,
        table: &MergeTable,
        vocab: Option<&Vocabulary>,
        cfg: &DropoutConfig,
        seed: u64,
    ) {
        let mut scratch = Scratch::default();
        self.add_segmented_line_with(line, line_index, table, vocab, cfg, seed, &mut scratch);
    }

    #[allow(clippy::too_many_arguments)]
    fn add_segmented_line_with(
        &mut self,
        line: &str,
        line_index: u64,
        table: &MergeTable,
        vocab: Option<&Vocabulary>,
        cfg: &DropoutConfig,
        seed: u64,
        scratch: &mut Scratch,
    ) {
        let mut length = 0;
        for (j, word) in words(line).enumerate() {
            let mut rng = RandomStream::for_word(seed, line_index, j as u64);
            dropout_pieces(word, table, cfg, &mut rng, scratch);
            length += scratch.pieces.len();
            for p in &scratch.pieces {
                let key = TokenRef {
                    text: &word[p.start..p.end],
                    is_word_final: p.end == word.len(),
                };
                if let Some(vocab) = vocab {
                    if vocab.id_of(key.text, key.is_word_final).is_none() {
                        self.unk_tokens += 1;
                    }
                }
                match self.token_counts.get_mut(&key) {
                    Some(c) => *c += 1,
                    None => {
                        let token = Token::new(key.text, key.is_word_final).expect("non-empty");
                        self.token_counts.insert(token, 1);
                    }
                }
            }
        }
        self.total_tokens += length as u64;
        *self.length_histogram.entry(length).or_insert(0) += 1;
    }

    /// Counts occurrences of every vocabulary token's text in the raw words
    /// of `line`.
    pub fn add_substrings(&mut self, line: &str, vocab: &Vocabulary) {
        let max_chars = vocab.max_token_chars();
        let mut bounds: Vec<usize> = Vec::new();
        for word in words(line) {
            bounds.clear();
            bounds.extend(word.char_indices().map(|(i, _)| i));
            bounds.push(word.len());
            let n = bounds.len() - 1;
            for start in 0..n {
                for end in start + 1..=n.min(start + max_chars) {
                    let text = &word[bounds[start]..bounds[end]];
                    let is_word_final = end == n;
                    let key = TokenRef {
                        text,
                        is_word_final,
                    };
                    if let Some(c) = self.substring_counts.get_mut(&key) {
                        *c += 1;
                    } else if let Some(id) = vocab.id_of(text, is_word_final) {
                        let token = vocab.token(id).expect("id from lookup").clone();
                        self.substring_counts.insert(token, 1);
                    }
                }
            }
        }
    }

    /// Adds the counts of `other` (typically another line range).
    pub fn merge(&mut self, other: CorpusStats) {
        for (token, n) in other.token_counts {
            *self.token_counts.entry(token).or_insert(0) += n;
        }
        for (token, n) in other.substring_counts {
            *self.substring_counts.entry(token).or_insert(0) += n;
        }
        for (len, n) in other.length_histogram {
            *self.length_histogram.entry(len).or_insert(0) += n;
        }
        self.unk_tokens += other.unk_tokens;
        self.total_tokens += other.total_tokens;
    }

    pub fn token_count(&self, token: &Token) -> u64 {
        self.token_counts.get(token).copied().unwrap_or(0)
    }

    pub fn substring_count(&self, token: &Token) -> u64 {
        self.substring_counts.get(token).copied().unwrap_or(0)
    }

    /// Emitted tokens with their counts, in token order.
    pub fn token_counts(&self) -> BTreeMap<&Token, u64> {
        self.token_counts.iter().map(|(t, &n)| (t, n)).collect()
    }

    /// Vocabulary tokens with at least one substring occurrence.
    pub fn substring_counts(&self) -> BTreeMap<&Token, u64> {
        self.substring_counts.iter().map(|(t, &n)| (t, n)).collect()
    }

    /// Number of lines with each token count.
    pub fn length_histogram(&self) -> &BTreeMap<usize, u64> {
        &self.length_histogram
    }

    pub fn unk_tokens(&self) -> u64 {
        self.unk_tokens
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn lines(&self) -> u64 {
        self.length_histogram.values().sum()
    }
}

fn check_corpus<S: AsRef<str>>(lines: &[S]) -> Result<()> {
    if lines.is_empty() {
        return Err(invalid("corpus is empty"));
    }
    Ok(())
}

/// One segmentation pass over `lines` with base seed `seed`.
pub fn collect_pass<S: AsRef<str>>(
    lines: &[S],
    table: &MergeTable,
    vocab: Option<&Vocabulary>,
    cfg: &DropoutConfig,
    seed: u64,
) -> CorpusStats {
    let mut stats = CorpusStats::new();
    let mut scratch = Scratch::default();
    for (i, line) in lines.iter().enumerate() {
        stats.add_segmented_line_with(
            line.as_ref(),
            i as u64,
            table,
            vocab,
            cfg,
            seed,
            &mut scratch,
        );
    }
    stats
}

/// Token-to-substring ratio of one vocabulary token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenRatio {
    pub token: Token,
    pub ratio: f64,
    /// Individual-token occurrences summed over all passes.
    pub token_count: u64,
    pub substring_count: u64,
}

/// Which ratios to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatioSelection {
    /// The most frequent 10% of substrings (rounded up).
    #[default]
    TopDecile,
    All,
}

/// Ratios from accumulated token counts over `passes` passes and the raw
/// substring counts, ordered by descending substring count then rendered
/// token.
pub fn ratios_from_counts(
    token_counts: &CorpusStats,
    substrings: &CorpusStats,
    passes: u32,
    selection: RatioSelection,
) -> Vec<TokenRatio> {
    let mut out: Vec<(alloc::string::String, TokenRatio)> = substrings
        .substring_counts
        .iter()
        .filter(|(_, &sc)| sc > 0)
        .map(|(token, &sc)| {
            let tc = token_counts.token_count(token);
            let ratio = tc as f64 / (sc as f64 * f64::from(passes));
            (
                token.rendered(),
                TokenRatio {
                    token: token.clone(),
                    ratio,
                    token_count: tc,
                    substring_count: sc,
                },
            )
        })
        .collect();
    out.sort_by(|a, b| {
        b.1.substring_count
            .cmp(&a.1.substring_count)
            .then_with(|| a.0.cmp(&b.0))
    });
    if selection == RatioSelection::TopDecile {
        let keep = out.len().div_ceil(10);
        out.truncate(keep);
    }
    out.into_iter().map(|(_, r)| r).collect()
}

/// How often each vocabulary token is emitted as a token relative to how
/// often its text occurs, under the segmentation configured by `cfg`
/// (`p = 0` is plain BPE), averaged over `cfg.samples()` passes.
pub fn token_to_substring_ratios<S: AsRef<str>>(
    lines: &[S],
    table: &MergeTable,
    vocab: &Vocabulary,
    cfg: &DropoutConfig,
    selection: RatioSelection,
) -> Result<Vec<TokenRatio>> {
    check_corpus(lines)?;
    let mut substrings = CorpusStats::new();
    for line in lines {
        substrings.add_substrings(line.as_ref(), vocab);
    }
    let mut tokens = CorpusStats::new();
    for pass in 0..cfg.samples() {
        let seed = pass_seed(cfg.base_seed(), u64::from(pass));
        tokens.merge(collect_pass(lines, table, Some(vocab), cfg, seed));
    }
    Ok(ratios_from_counts(
        &tokens,
        &substrings,
        cfg.samples(),
        selection,
    ))
}

/// Mean ratio of a report; 0 for an empty report.
pub fn mean_ratio(ratios: &[TokenRatio]) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    ratios.iter().map(|r| r.ratio).sum::<f64>() / ratios.len() as f64
}

/// Histogram of per-line token counts for one pass seeded by
/// `cfg.base_seed()`.
pub fn length_distribution<S: AsRef<str>>(
    lines: &[S],
    table: &MergeTable,
    cfg: &DropoutConfig,
) -> Result<BTreeMap<usize, u64>> {
    check_corpus(lines)?;
    Ok(collect_pass(lines, table, None, cfg, cfg.base_seed()).length_histogram)
}

/// Fraction of emitted tokens missing from `vocab`, over `cfg.samples()`
/// passes. A corpus without words has rate 0.
pub fn unk_rate<S: AsRef<str>>(
    lines: &[S],
    table: &MergeTable,
    vocab: &Vocabulary,
    cfg: &DropoutConfig,
) -> f64 {
    let (mut unk, mut total) = (0u64, 0u64);
    for pass in 0..cfg.samples() {
        let seed = pass_seed(cfg.base_seed(), u64::from(pass));
        let stats = collect_pass(lines, table, Some(vocab), cfg, seed);
        unk += stats.unk_tokens;
        total += stats.total_tokens;
    }
    if total == 0 {
        0.0
    } else {
        unk as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::{train_bpe, WordCounts};

    fn ab_setup() -> (MergeTable, Vocabulary) {
        let table = MergeTable::from_pairs([
            (Token::inner("a"), Token::inner("b")),
            (Token::inner("ab"), Token::inner("ab")),
            (Token::inner("a"), Token::last("b")),
            (Token::inner("ab"), Token::last("ab")),
        ])
        .unwrap();
        let vocab = Vocabulary::from_tokens([
            Token::inner("a"),
            Token::inner("b"),
            Token::last("b"),
            Token::inner("ab"),
            Token::last("ab"),
            Token::inner("abab"),
            Token::last("abab"),
        ])
        .unwrap();
        (table, vocab)
    }

    #[test]
    fn merged_character_has_zero_ratio() {
        let (table, vocab) = ab_setup();
        let ratios = token_to_substring_ratios(
            &["abab"],
            &table,
            &vocab,
            &DropoutConfig::deterministic(),
            RatioSelection::All,
        )
        .unwrap();
        let a = ratios
            .iter()
            .find(|r| r.token == Token::inner("a"))
            .unwrap();
        assert_eq!(a.substring_count, 2);
        assert_eq!(a.token_count, 0);
        assert_eq!(a.ratio, 0.0);
        let whole = ratios
            .iter()
            .find(|r| r.token == Token::last("abab"))
            .unwrap();
        assert_eq!((whole.substring_count, whole.ratio), (1, 1.0));
        // "ab" word-final matches only at the end; "abab" internal never
        let ab_last = ratios
            .iter()
            .find(|r| r.token == Token::last("ab"))
            .unwrap();
        assert_eq!(ab_last.substring_count, 1);
        assert!(ratios.iter().all(|r| r.token != Token::inner("abab")));
    }

    #[test]
    fn standalone_token_has_unit_ratio() {
        let counts = WordCounts::from_lines(["the cat the dog"]);
        let (table, vocab) = train_bpe(&counts, 50).unwrap();
        let ratios = token_to_substring_ratios(
            &["the cat the dog"],
            &table,
            &vocab,
            &DropoutConfig::deterministic(),
            RatioSelection::All,
        )
        .unwrap();
        let the = ratios
            .iter()
            .find(|r| r.token == Token::last("the"))
            .unwrap();
        assert_eq!(the.ratio, 1.0);
        assert_eq!(the.substring_count, 2);
    }

    #[test]
    fn top_decile_rounds_up() {
        let (table, vocab) = ab_setup();
        let all = token_to_substring_ratios(
            &["abab ab b"],
            &table,
            &vocab,
            &DropoutConfig::deterministic(),
            RatioSelection::All,
        )
        .unwrap();
        let top = token_to_substring_ratios(
            &["abab ab b"],
            &table,
            &vocab,
            &DropoutConfig::deterministic(),
            RatioSelection::TopDecile,
        )
        .unwrap();
        assert_eq!(top.len(), all.len().div_ceil(10));
        assert_eq!(top[..], all[..top.len()]);
        for w in all.windows(2) {
            assert!(w[0].substring_count >= w[1].substring_count);
        }
    }

    #[test]
    fn length_histograms() {
        let table = MergeTable::new();
        let cfg = DropoutConfig::deterministic();
        let h = length_distribution(&["x"], &table, &cfg).unwrap();
        assert_eq!(h.into_iter().collect::<Vec<_>>(), [(1, 1)]);
        let h = length_distribution(&["ab c", "", "abc"], &table, &cfg).unwrap();
        assert_eq!(h.into_iter().collect::<Vec<_>>(), [(0, 1), (3, 2)]);
        let empty: [&str; 0] = [];
        assert!(length_distribution(&empty, &table, &cfg).is_err());
    }

    #[test]
    fn unk_rate_counts_unseen_characters() {
        let counts = WordCounts::from_lines(["ab ab"]);
        let (table, vocab) = train_bpe(&counts, 10).unwrap();
        let cfg = DropoutConfig::deterministic();
        assert_eq!(unk_rate(&["ab ab"], &table, &vocab, &cfg), 0.0);
        // q and z are unknown: 2 of 3 tokens
        assert_eq!(unk_rate(&["qab z"], &table, &vocab, &cfg), 2.0 / 3.0);
    }

    #[test]
    fn merge_is_partition_independent() {
        let (table, vocab) = ab_setup();
        let lines = ["abab ab", "b ab", "ba abab"];
        let cfg = DropoutConfig::new(0.3, 5, 1).unwrap();
        let whole = collect_pass(&lines, &table, Some(&vocab), &cfg, 5);
        let mut parts = CorpusStats::new();
        for (i, line) in lines.iter().enumerate() {
            let mut s = CorpusStats::new();
            s.add_segmented_line(line, i as u64, &table, Some(&vocab), &cfg, 5);
            parts.merge(s);
        }
        assert_eq!(whole, parts);
        assert_eq!(
            whole.token_counts().values().sum::<u64>(),
            whole.total_tokens()
        );
        assert_eq!(whole.lines(), 3);
    }
}
