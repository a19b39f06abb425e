//! BPE-dropout: stochastic segmentation with the learned merge table.
//!
//! Each iteration lists every applicable merge occurrence in the current
//! split, drops each one independently with probability `p` (one Bernoulli
//! draw per occurrence, left to right), and applies the surviving merge with
//! the highest priority, leftmost on ties. With [`ExitRule::AllDropped`] the
//! word is finished as soon as an iteration drops every candidate.
//!
//! `p = 0` reproduces deterministic BPE and `p = 1` leaves the word split
//! into characters.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::merges::{MergeRule, MergeTable, PairMerge};
use crate::render::{render_pieces, rewrite_words, words};
use crate::rng::{pass_seed, RandomStream};
use crate::segment::{bpe_pieces, initial_pieces, merge_at, pieces_to_split, Piece};
use crate::token::{check_word, Split};

/// When the sampling loop ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExitRule {
    /// Stop once an iteration keeps no candidate, even though undropped
    /// merges existed before the draws.
    #[default]
    AllDropped,
    /// Keep iterating while any merge is applicable; an iteration that drops
    /// everything is simply redrawn. At `p = 1` nothing can survive and the
    /// character split is returned.
    WhileCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutConfig {
    p: f64,
    base_seed: u64,
    samples: u32,
    exit: ExitRule,
}

impl DropoutConfig {
    pub fn new(p: f64, base_seed: u64, samples: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(alloc::format!(
                "dropout probability {p} outside [0, 1]"
            )));
        }
        if samples == 0 {
            return Err(Error::Config(String::from("samples must be at least 1")));
        }
        Ok(Self {
            p,
            base_seed,
            samples,
            exit: ExitRule::AllDropped,
        })
    }

    /// Deterministic BPE (`p = 0`), one sample.
    pub fn deterministic() -> Self {
        Self {
            p: 0.0,
            base_seed: 0,
            samples: 1,
            exit: ExitRule::AllDropped,
        }
    }

    pub fn with_exit_rule(mut self, exit: ExitRule) -> Self {
        self.exit = exit;
        self
    }

    pub fn with_p(self, p: f64) -> Result<Self> {
        Ok(Self::new(p, self.base_seed, self.samples)?.with_exit_rule(self.exit))
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn samples(&self) -> u32 {
        self.samples
    }

    pub fn exit_rule(&self) -> ExitRule {
        self.exit
    }
}

/// An applicable merge at `position` (index of the left token).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeCandidate {
    pub position: usize,
    pub rule: MergeRule,
}

/// Every adjacent pair of `split` that the table can merge, left to right.
/// Repeated occurrences of one rule are separate candidates.
pub fn enumerate_candidates(split: &Split, table: &MergeTable) -> Vec<MergeCandidate> {
    split
        .tokens()
        .windows(2)
        .enumerate()
        .filter_map(|(position, w)| {
            let priority = table.priority(&w[0], &w[1])?;
            Some(MergeCandidate {
                position,
                rule: table
                    .get(priority)
                    .expect("lookup agrees with rules")
                    .clone(),
            })
        })
        .collect()
}

/// Working buffers reused across words.
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    pub pieces: Vec<Piece>,
    candidates: Vec<(usize, PairMerge)>,
}

pub(crate) fn dropout_pieces(
    word: &str,
    table: &MergeTable,
    cfg: &DropoutConfig,
    rng: &mut RandomStream,
    scratch: &mut Scratch,
) {
    if cfg.p == 0.0 {
        bpe_pieces(word, table, &mut scratch.pieces);
        return;
    }
    let Scratch { pieces, candidates } = scratch;
    initial_pieces(word, table, pieces);
    loop {
        candidates.clear();
        for (i, w) in pieces.windows(2).enumerate() {
            if let Some(m) = table.pair(w[0].sym, w[1].sym) {
                candidates.push((i, m));
            }
        }
        if candidates.is_empty() {
            return;
        }
        let mut best: Option<(usize, PairMerge)> = None;
        for &(i, m) in candidates.iter() {
            if rng.bernoulli(cfg.p) {
                continue;
            }
            if best.is_none_or(|(_, b)| m.priority < b.priority) {
                best = Some((i, m));
            }
        }
        match best {
            Some((i, m)) => merge_at(pieces, i, m.result),
            None => match cfg.exit {
                ExitRule::AllDropped => return,
                ExitRule::WhileCandidates if cfg.p >= 1.0 => return,
                ExitRule::WhileCandidates => {}
            },
        }
    }
}

/// One BPE-dropout segmentation of `word`.
pub fn segment_word_dropout(
    word: &str,
    table: &MergeTable,
    cfg: &DropoutConfig,
    rng: &mut RandomStream,
) -> Result<Split> {
    check_word(word)?;
    let mut scratch = Scratch::default();
    dropout_pieces(word, table, cfg, rng, &mut scratch);
    Ok(pieces_to_split(word, &scratch.pieces))
}

/// `cfg.samples` draws from one stream, as distinct splits with their
/// counts, most frequent first (ties by split order).
pub fn sample_segmentations(
    word: &str,
    table: &MergeTable,
    cfg: &DropoutConfig,
    rng: &mut RandomStream,
) -> Result<Vec<(Split, u32)>> {
    check_word(word)?;
    let mut scratch = Scratch::default();
    let mut seen: hashbrown::HashMap<Vec<(usize, usize)>, u32> = hashbrown::HashMap::new();
    for _ in 0..cfg.samples {
        dropout_pieces(word, table, cfg, rng, &mut scratch);
        let key: Vec<(usize, usize)> = scratch.pieces.iter().map(|p| (p.start, p.end)).collect();
        *seen.entry(key).or_insert(0) += 1;
    }
    let mut out: Vec<(Split, u32)> = seen
        .into_iter()
        .map(|(spans, n)| {
            let pieces: Vec<Piece> = spans
                .into_iter()
                .map(|(start, end)| Piece { sym: 0, start, end })
                .collect();
            (pieces_to_split(word, &pieces), n)
        })
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// Dropout segmentation of one line. Word `j` of line `line_index` draws
/// from `RandomStream::for_word(cfg.base_seed(), line_index, j)`.
pub fn segment_line_dropout(
    line: &str,
    line_index: u64,
    table: &MergeTable,
    cfg: &DropoutConfig,
) -> String {
    let mut scratch = Scratch::default();
    rewrite_words(line, |j, word, out| {
        let mut rng = RandomStream::for_word(cfg.base_seed, line_index, j as u64);
        dropout_pieces(word, table, cfg, &mut rng, &mut scratch);
        render_pieces(word, &scratch.pieces, out);
    })
}

/// Token count of a line under dropout with the given base seed.
pub(crate) fn count_line_tokens(
    line: &str,
    line_index: u64,
    table: &MergeTable,
    cfg: &DropoutConfig,
    seed: u64,
    scratch: &mut Scratch,
) -> u64 {
    let mut total = 0;
    for (j, word) in words(line).enumerate() {
        let mut rng = RandomStream::for_word(seed, line_index, j as u64);
        dropout_pieces(word, table, cfg, &mut rng, scratch);
        total += scratch.pieces.len() as u64;
    }
    total
}

fn total_tokens<S: AsRef<str>>(
    lines: &[S],
    table: &MergeTable,
    cfg: &DropoutConfig,
    seed: u64,
    scratch: &mut Scratch,
) -> u64 {
    lines
        .iter()
        .enumerate()
        .map(|(i, line)| count_line_tokens(line.as_ref(), i as u64, table, cfg, seed, scratch))
        .sum()
}

/// Total tokens under dropout, averaged over `cfg.samples` passes, divided
/// by the total under deterministic BPE. Pass `s` uses
/// [`pass_seed`]`(base_seed, s)`.
pub fn expected_length_ratio<S: AsRef<str>>(
    lines: &[S],
    table: &MergeTable,
    cfg: &DropoutConfig,
) -> Result<f64> {
    let mut scratch = Scratch::default();
    let baseline = total_tokens(
        lines,
        table,
        &DropoutConfig::deterministic(),
        0,
        &mut scratch,
    );
    if baseline == 0 {
        return Err(invalid("corpus has no words"));
    }
    let mut sampled = 0u64;
    for pass in 0..cfg.samples {
        sampled += total_tokens(
            lines,
            table,
            cfg,
            pass_seed(cfg.base_seed, u64::from(pass)),
            &mut scratch,
        );
    }
    Ok(sampled as f64 / (baseline as f64 * f64::from(cfg.samples)))
}

/// Outcome of [`calibrate_p`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub p: f64,
    pub ratio: f64,
    pub iterations: u32,
}

pub const MAX_BISECTION_STEPS: u32 = 30;

/// Bisection over `p ∈ [0, 1]` for the dropout probability whose expected
/// length ratio is within `tol` of `target`. Every probe reuses the seeds in
/// `cfg`, which keeps the estimate a smooth function of `p`.
pub fn calibrate_p<S: AsRef<str>>(
    lines: &[S],
    table: &MergeTable,
    target: f64,
    tol: f64,
    cfg: &DropoutConfig,
) -> Result<Calibration> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Config(alloc::format!(
            "tolerance {tol} must be positive"
        )));
    }
    let ratio_at = |p: f64| expected_length_ratio(lines, table, &cfg.with_p(p)?);
    let low = ratio_at(0.0)?;
    let high = ratio_at(1.0)?;
    if !(target >= low - tol && target <= high + tol) {
        return Err(Error::Range {
            target,
            min: low,
            max: high,
        });
    }
    if (low - target).abs() <= tol {
        return Ok(Calibration {
            p: 0.0,
            ratio: low,
            iterations: 0,
        });
    }
    if (high - target).abs() <= tol {
        return Ok(Calibration {
            p: 1.0,
            ratio: high,
            iterations: 0,
        });
    }

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (0.0, low);
    for step in 1..=MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let ratio = ratio_at(mid)?;
        if (ratio - target).abs() < (best.1 - target).abs() {
            best = (mid, ratio);
        }
        if (ratio - target).abs() <= tol {
            return Ok(Calibration {
                p: mid,
                ratio,
                iterations: step,
            });
        }
        if ratio < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NotConverged {
        best_p: best.0,
        best_ratio: best.1,
    })
}
