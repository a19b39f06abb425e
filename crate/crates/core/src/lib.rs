//! Subword segmentation with byte pair encoding.
//!
//! This crate learns a BPE merge table from word counts, segments words
//! deterministically by merge priority, and samples stochastic segmentations
//! by dropping merge candidates (BPE-dropout). It also carries the corpus
//! statistics used to inspect segmentations (token-to-substring ratios,
//! length histograms, UNK rates) and an edit-distance-1 misspelling
//! generator.
//!
//! The crate is `no_std` and only needs `alloc`. Streaming IO, parallel
//! corpus processing, file formats and the command-line tool live in the
//! `subseg-cli` companion crate.
#![no_std]
#![forbid(unsafe_code)]
extern crate alloc;

pub mod analysis;
pub mod dropout;
pub mod error;
pub mod merges;
pub mod noise;
pub mod render;
pub mod rng;
pub mod segment;
pub mod token;
pub mod train;
pub mod vocab;

pub use analysis::{CorpusStats, TokenRatio};
pub use dropout::{DropoutConfig, ExitRule, MergeCandidate};
pub use error::{Error, Result};
pub use merges::{MergeRule, MergeTable};
pub use noise::{EditOp, NoiseConfig};
pub use rng::RandomStream;
pub use token::{Split, Token};
pub use train::{train_bpe, WordCounts};
pub use vocab::Vocabulary;

/// Marker appended to word-final tokens in merge-table and vocabulary files.
pub const END_OF_WORD: &str = "</w>";

/// Suffix marking a non-final subword in segmented text.
pub const CONTINUATION: &str = "@@";
