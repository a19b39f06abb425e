//! Synthetic misspellings at edit distance 1.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::render::{rewrite_words, words};
use crate::rng::RandomStream;

/// One-character edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Remove,
    Insert,
    Substitute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    word_prob: f64,
    seed: u64,
    alphabet: Vec<char>,
}

impl NoiseConfig {
    pub const DEFAULT_WORD_PROB: f64 = 0.1;

    /// `alphabet` is deduplicated and sorted; whitespace is dropped.
    pub fn new(
        word_prob: f64,
        seed: u64,
        alphabet: impl IntoIterator<Item = char>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&word_prob) {
            return Err(Error::Config(alloc::format!(
                "word probability {word_prob} outside [0, 1]"
            )));
        }
        let alphabet: BTreeSet<char> = alphabet
            .into_iter()
            .filter(|c| !c.is_whitespace())
            .collect();
        if alphabet.is_empty() {
            return Err(Error::Config(String::from("noise alphabet is empty")));
        }
        Ok(Self {
            word_prob,
            seed,
            alphabet: alphabet.into_iter().collect(),
        })
    }

    pub fn word_prob(&self) -> f64 {
        self.word_prob
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }
}

/// Every non-whitespace scalar that occurs in `lines`, sorted.
pub fn corpus_alphabet<I, S>(lines: I) -> Vec<char>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut set = BTreeSet::new();
    for line in lines {
        set.extend(line.as_ref().chars().filter(|c| !c.is_whitespace()));
    }
    set.into_iter().collect()
}

/// Applies `op` at scalar position `pos` (insertion slots run `0..=len`).
pub fn apply_edit(word: &str, op: EditOp, pos: usize, ch: char) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    match op {
        EditOp::Remove => {
            chars.remove(pos);
        }
        EditOp::Insert => chars.insert(pos, ch),
        EditOp::Substitute => chars[pos] = ch,
    }
    chars.into_iter().collect()
}

/// Perturbs `word` by one removal, insertion or substitution, chosen
/// uniformly among the operations that can change it at distance exactly 1.
/// Removal needs at least two characters; a substituted character is
/// redrawn until it differs from the one it replaces.
pub fn misspell_word(word: &str, rng: &mut RandomStream, alphabet: &[char]) -> Result<String> {
    if word.is_empty() {
        return Err(invalid("word must be non-empty"));
    }
    if alphabet.is_empty() {
        return Err(Error::Config(String::from("noise alphabet is empty")));
    }
    let chars: Vec<char> = word.chars().collect();
    let len = chars.len();
    // with a one-letter alphabet only positions holding another letter can
    // be substituted
    let substitutable: Vec<usize> = if alphabet.len() > 1 {
        (0..len).collect()
    } else {
        (0..len).filter(|&i| chars[i] != alphabet[0]).collect()
    };

    let mut ops = Vec::with_capacity(3);
    if len >= 2 {
        ops.push(EditOp::Remove);
    }
    ops.push(EditOp::Insert);
    if !substitutable.is_empty() {
        ops.push(EditOp::Substitute);
    }

    let op = ops[rng.below(ops.len() as u32) as usize];
    let draw_char = |rng: &mut RandomStream| alphabet[rng.below(alphabet.len() as u32) as usize];
    Ok(match op {
        EditOp::Remove => apply_edit(word, op, rng.below(len as u32) as usize, '\0'),
        EditOp::Insert => {
            let pos = rng.below(len as u32 + 1) as usize;
            let ch = draw_char(rng);
            apply_edit(word, op, pos, ch)
        }
        EditOp::Substitute => {
            let pos = substitutable[rng.below(substitutable.len() as u32) as usize];
            let mut ch = draw_char(rng);
            while ch == chars[pos] {
                ch = draw_char(rng);
            }
            apply_edit(word, op, pos, ch)
        }
    })
}

/// Perturbs each word of line `line_index` with probability
/// `cfg.word_prob()`, using the stream of `(seed, line, word)`. Returns the
/// new line and the number of modified words.
pub fn augment_line(line: &str, line_index: u64, cfg: &NoiseConfig) -> (String, usize) {
    let mut modified = 0;
    let out = rewrite_words(line, |j, word, out| {
        let mut rng = RandomStream::for_word(cfg.seed, line_index, j as u64);
        if rng.bernoulli(cfg.word_prob) {
            let noisy =
                misspell_word(word, &mut rng, &cfg.alphabet).expect("valid word and alphabet");
            out.push_str(&noisy);
            modified += 1;
        } else {
            out.push_str(word);
        }
    });
    (out, modified)
}

/// [`augment_line`] over a whole corpus; also returns the modified-word
/// count and the total word count.
pub fn augment_corpus<S: AsRef<str>>(
    lines: &[S],
    cfg: &NoiseConfig,
) -> (Vec<String>, usize, usize) {
    let mut modified = 0;
    let mut total = 0;
    let out = lines
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let line = line.as_ref();
            total += words(line).count();
            let (noisy, m) = augment_line(line, i as u64, cfg);
            modified += m;
            noisy
        })
        .collect();
    (out, modified, total)
}
