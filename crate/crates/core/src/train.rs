//! Learning merge tables from word counts.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use hashbrown::HashMap;

use crate::error::{invalid, Result};
use crate::merges::MergeTable;
use crate::token::{check_word, initial_split, Token};
use crate::vocab::{sort_rendered, Vocabulary};

/// Word frequencies of a training corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordCounts {
    counts: BTreeMap<String, u64>,
}

impl WordCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, u64)>,
    {
        let mut counts = Self::new();
        for (word, n) in pairs {
            counts.add(word, n)?;
        }
        Ok(counts)
    }

    /// Counts the whitespace-separated words of each line.
    pub fn from_lines<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts = Self::new();
        for line in lines {
            counts.add_line(line.as_ref());
        }
        counts
    }

    pub fn add(&mut self, word: &str, n: u64) -> Result<()> {
        check_word(word)?;
        if n == 0 {
            return Err(invalid("word counts must be positive"));
        }
        match self.counts.get_mut(word) {
            Some(c) => *c += n,
            None => {
                self.counts.insert(String::from(word), n);
            }
        }
        Ok(())
    }

    pub fn add_line(&mut self, line: &str) {
        for word in line.split_whitespace() {
            self.add(word, 1).expect("whitespace-split words are valid");
        }
    }

    /// Adds all counts of `other` into `self`.
    pub fn merge(&mut self, other: WordCounts) {
        for (word, n) in other.counts {
            *self.counts.entry(word).or_insert(0) += n;
        }
    }

    pub fn get(&self, word: &str) -> Option<u64> {
        self.counts.get(word).copied()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &n)| (w.as_str(), n))
    }

    /// Number of distinct words.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of word occurrences.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Distinct character tokens of the initial splits, both word-final and
    /// word-internal variants as observed.
    pub fn character_tokens(&self) -> BTreeSet<Token> {
        let mut out = BTreeSet::new();
        for word in self.words() {
            for token in initial_split(word)
                .expect("stored words are valid")
                .into_tokens()
            {
                out.insert(token);
            }
        }
        out
    }
}

/// Result of merge learning.
#[derive(Debug, Clone)]
pub struct LearnedMerges {
    pub table: MergeTable,
    pub vocab: Vocabulary,
    /// Weighted pair count of each rule at the moment it was learned.
    pub frequencies: Vec<u64>,
}

/// Learns up to `num_merges` rules and the matching vocabulary (characters,
/// one token per rule, UNK).
pub fn train_bpe(counts: &WordCounts, num_merges: usize) -> Result<(MergeTable, Vocabulary)> {
    let learned = learn_merges(counts, num_merges)?;
    Ok((learned.table, learned.vocab))
}

#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    count: u64,
    left: Rc<str>,
    right: Rc<str>,
    pair: (u32, u32),
}

impl Ord for Candidate {
    // Highest count first; equal counts go to the lexicographically smallest
    // (left, right) rendering.
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Symbols {
    tokens: Vec<Token>,
    rendered: Vec<Rc<str>>,
    ids: HashMap<Token, u32>,
}

impl Symbols {
    fn intern(&mut self, token: Token) -> u32 {
        if let Some(&id) = self.ids.get(&token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.rendered.push(Rc::from(token.rendered()));
        self.ids.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }
}

/// Same as [`train_bpe`] but also reports the pair count behind each rule.
///
/// Pair counts are weighted by word frequency and kept up to date
/// incrementally: after a merge only the words that contained the pair are
/// re-counted.
pub fn learn_merges(counts: &WordCounts, num_merges: usize) -> Result<LearnedMerges> {
    if counts.is_empty() {
        return Err(invalid("training corpus is empty"));
    }

    let mut symbols = Symbols {
        tokens: Vec::new(),
        rendered: Vec::new(),
        ids: HashMap::new(),
    };
    let mut words: Vec<Vec<u32>> = Vec::with_capacity(counts.len());
    let mut freqs: Vec<u64> = Vec::with_capacity(counts.len());
    for (word, n) in counts.iter() {
        let split = initial_split(word)?;
        words.push(
            split
                .into_tokens()
                .into_iter()
                .map(|t| symbols.intern(t))
                .collect(),
        );
        freqs.push(n);
    }

    let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut pair_words: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
    for (i, syms) in words.iter().enumerate() {
        for w in syms.windows(2) {
            let pair = (w[0], w[1]);
            *pair_counts.entry(pair).or_insert(0) += freqs[i];
            let list = pair_words.entry(pair).or_default();
            if list.last() != Some(&(i as u32)) {
                list.push(i as u32);
            }
        }
    }

    let candidate = |symbols: &Symbols, pair: (u32, u32), count: u64| Candidate {
        count,
        left: symbols.rendered[pair.0 as usize].clone(),
        right: symbols.rendered[pair.1 as usize].clone(),
        pair,
    };
    let mut heap: BinaryHeap<Candidate> = pair_counts
        .iter()
        .map(|(&pair, &count)| candidate(&symbols, pair, count))
        .collect();

    let mut table = MergeTable::new();
    let mut frequencies = Vec::new();
    let mut delta: HashMap<(u32, u32), i64> = HashMap::new();

    while table.len() < num_merges {
        let Some(best) = heap.pop() else { break };
        let current = pair_counts.get(&best.pair).copied().unwrap_or(0);
        if current == 0 || current != best.count {
            continue;
        }
        let (a, b) = best.pair;
        let left = symbols.tokens[a as usize].clone();
        let right = symbols.tokens[b as usize].clone();
        let merged = symbols.intern(left.concat(&right));
        // A pair can reappear when two different rules yield the same token;
        // it is merged in the training splits but not listed twice.
        if table.priority(&left, &right).is_none() {
            table.push(left, right)?;
            frequencies.push(current);
        }

        let mut affected = pair_words.remove(&best.pair).unwrap_or_default();
        affected.dedup();
        delta.clear();
        for &wi in &affected {
            let f = freqs[wi as usize] as i64;
            let syms = &mut words[wi as usize];
            for w in syms.windows(2) {
                *delta.entry((w[0], w[1])).or_insert(0) -= f;
            }
            let mut j = 0;
            while j + 1 < syms.len() {
                if syms[j] == a && syms[j + 1] == b {
                    syms[j] = merged;
                    syms.remove(j + 1);
                }
                j += 1;
            }
            for w in syms.windows(2) {
                let pair = (w[0], w[1]);
                *delta.entry(pair).or_insert(0) += f;
                let list = pair_words.entry(pair).or_default();
                if list.last() != Some(&wi) {
                    list.push(wi);
                }
            }
        }

        let mut changed: Vec<((u32, u32), i64)> = delta
            .iter()
            .filter(|(_, &d)| d != 0)
            .map(|(&p, &d)| (p, d))
            .collect();
        changed.sort_unstable();
        for (pair, d) in changed {
            let count = pair_counts.entry(pair).or_insert(0);
            *count = (*count as i64 + d) as u64;
            if *count > 0 {
                heap.push(candidate(&symbols, pair, *count));
            } else {
                pair_counts.remove(&pair);
            }
        }
    }

    let mut vocab = Vocabulary::default();
    for token in sort_rendered(counts.character_tokens()) {
        vocab.insert(token);
    }
    for rule in table.rules() {
        vocab.insert(rule.result());
    }

    Ok(LearnedMerges {
        table,
        vocab,
        frequencies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::segment_word;

    fn toy() -> WordCounts {
        WordCounts::from_pairs([("low", 5), ("lower", 2), ("newest", 6), ("widest", 3)]).unwrap()
    }

    #[test]
    fn first_merge_is_es() {
        let learned = learn_merges(&toy(), 1).unwrap();
        let rule = &learned.table.rules()[0];
        assert_eq!(rule.left(), &Token::inner("e"));
        assert_eq!(rule.right(), &Token::inner("s"));
        assert_eq!(learned.frequencies, [9]);
    }

    #[test]
    fn zero_merges_gives_characters_only() {
        let (table, vocab) = train_bpe(&toy(), 0).unwrap();
        assert!(table.is_empty());
        let chars = toy().character_tokens();
        assert_eq!(vocab.len(), chars.len() + 1);
        for c in &chars {
            assert!(vocab.id(c).is_some());
        }
    }

    #[test]
    fn stops_when_pairs_run_out() {
        let counts = WordCounts::from_pairs([("aa", 4)]).unwrap();
        let learned = learn_merges(&counts, 3).unwrap();
        assert_eq!(learned.table.len(), 1);
        assert_eq!(learned.table.rules()[0].left(), &Token::inner("a"));
        assert_eq!(learned.table.rules()[0].right(), &Token::last("a"));
        assert_eq!(learned.frequencies, [4]);
    }

    #[test]
    fn rejects_empty_corpus() {
        assert!(train_bpe(&WordCounts::new(), 5).is_err());
    }

    #[test]
    fn ties_break_on_rendered_text() {
        // (a, b</w>) and (c, d</w>) both occur once
        let counts = WordCounts::from_pairs([("cd", 1), ("ab", 1)]).unwrap();
        let (table, _) = train_bpe(&counts, 2).unwrap();
        assert_eq!(table.rules()[0].left(), &Token::inner("a"));
        assert_eq!(table.rules()[1].left(), &Token::inner("c"));
    }

    #[test]
    fn vocabulary_covers_training_segmentation() {
        let counts = toy();
        let (table, vocab) = train_bpe(&counts, 10).unwrap();
        assert_eq!(
            vocab.len(),
            counts.character_tokens().len() + table.len() + 1
        );
        for word in counts.words() {
            for token in segment_word(word, &table).unwrap().tokens() {
                assert!(vocab.id(token).is_some(), "{token} missing");
            }
        }
    }

    #[test]
    fn word_counts_validate() {
        let mut counts = WordCounts::new();
        assert!(counts.add("", 1).is_err());
        assert!(counts.add("a b", 1).is_err());
        assert!(counts.add("a", 0).is_err());
        counts.add_line("  the cat  the\t");
        assert_eq!(counts.get("the"), Some(2));
        assert_eq!(counts.total(), 3);
    }
}
