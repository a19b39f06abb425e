//! The `subseg` command.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data errors
//! (unreadable or malformed input, unreachable calibration targets).
//! Diagnostics go to standard error only.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rayon::ThreadPool;

use subseg::analysis::{ratios_from_counts, CorpusStats, RatioSelection};
use subseg::dropout::{calibrate_p, sample_segmentations, segment_line_dropout};
use subseg::noise::{augment_line, corpus_alphabet};
use subseg::render::{detokenize, render_split, segment_line, words};
use subseg::rng::pass_seed;
use subseg::train::learn_merges;
use subseg::{
    DropoutConfig, ExitRule, MergeTable, NoiseConfig, RandomStream, Vocabulary, WordCounts,
};

use crate::error::{Error, Result};
use crate::formats;
use crate::stream::{self, build_pool, map_lines, Framing, LineReader, CHUNK_LINES};

#[derive(Parser, Debug)]
#[command(
    name = "subseg",
    version,
    about = "BPE and BPE-dropout subword segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a merge table and vocabulary from whitespace-tokenized text
    Train(TrainArgs),
    /// Segment text with BPE (or BPE-dropout); --decode restores the original
    Encode(EncodeArgs),
    /// Print the distinct sampled segmentations of every word with counts
    Sample(SampleArgs),
    /// Corpus statistics of segmented text as TSV
    Analyze(AnalyzeArgs),
    /// Replace words by edit-distance-1 misspellings
    Augment(AugmentArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Input file [default: standard input]
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,

    /// Worker threads; output does not depend on it
    #[arg(long, value_name = "N", default_value_t = 1)]
    threads: usize,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file [default: standard output]
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DropoutArgs {
    /// Merge dropout probability (0.1 when the flag has no value)
    #[arg(long = "dropout", value_name = "P", num_args = 0..=1, default_missing_value = "0.1")]
    dropout: Option<f64>,

    /// Base seed of the per-word random streams
    #[arg(long, value_name = "U64", default_value_t = 0)]
    seed: u64,

    /// Redraw an iteration that drops every merge instead of stopping
    #[arg(long)]
    exit_while_candidates: bool,
}

impl DropoutArgs {
    fn config(&self, samples: u32) -> Result<DropoutConfig> {
        let cfg = DropoutConfig::new(self.dropout.unwrap_or(0.0), self.seed, samples)
            .map_err(|e| Error::Usage(e.to_string()))?;
        Ok(if self.exit_while_candidates {
            cfg.with_exit_rule(ExitRule::WhileCandidates)
        } else {
            cfg
        })
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Number of merges to learn
    #[arg(
        long,
        value_name = "N",
        conflicts_with = "vocab_size",
        required_unless_present = "vocab_size"
    )]
    num_merges: Option<usize>,

    /// Target vocabulary size (characters + merges + UNK)
    #[arg(long, value_name = "N")]
    vocab_size: Option<usize>,

    /// Where to write the merge table
    #[arg(long = "merges-out", visible_alias = "merges", value_name = "PATH")]
    merges_out: PathBuf,

    /// Where to write the vocabulary
    #[arg(long = "vocab-out", visible_alias = "vocab", value_name = "PATH")]
    vocab_out: Option<PathBuf>,

    /// Vocabulary = characters + tokens emitted by BPE on the training text
    #[arg(long)]
    segmented_vocab: bool,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    output: OutputArgs,

    /// Merge table written by `train`
    #[arg(long, value_name = "PATH", required_unless_present = "decode")]
    merges: Option<PathBuf>,

    /// Undo segmentation instead of applying it
    #[arg(long, conflicts_with_all = ["merges", "dropout"])]
    decode: bool,

    #[command(flatten)]
    dropout: DropoutArgs,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    output: OutputArgs,

    #[arg(long, value_name = "PATH")]
    merges: PathBuf,

    /// Segmentations drawn per word
    #[arg(long, value_name = "N", default_value_t = 1)]
    samples: u32,

    #[command(flatten)]
    dropout: DropoutArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum AnalysisKind {
    /// token<TAB>ratio<TAB>substring_count
    Ratios,
    /// length<TAB>count, or the calibrated p with --calibrate
    Lengths,
    /// fraction of tokens outside the vocabulary
    Unk,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    kind: AnalysisKind,

    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    output: OutputArgs,

    #[arg(long, value_name = "PATH")]
    merges: PathBuf,

    /// Vocabulary (needed for ratios and unk)
    #[arg(long, value_name = "PATH")]
    vocab: Option<PathBuf>,

    /// Segmentation passes for estimates
    #[arg(long, value_name = "N", default_value_t = 1)]
    samples: u32,

    /// Find the dropout probability giving this length ratio (lengths only)
    #[arg(long, value_name = "RATIO")]
    calibrate: Option<f64>,

    /// Accepted distance from the calibration target
    #[arg(long, value_name = "T", default_value_t = 0.01)]
    tolerance: f64,

    /// Report every token instead of the top 10% substrings (ratios only)
    #[arg(long)]
    all: bool,

    #[command(flatten)]
    dropout: DropoutArgs,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    output: OutputArgs,

    /// Probability of misspelling each word
    #[arg(long, value_name = "Q", default_value_t = NoiseConfig::DEFAULT_WORD_PROB)]
    word_prob: f64,

    #[arg(long, value_name = "U64", default_value_t = 0)]
    seed: u64,
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
                | ErrorKind::MissingSubcommand => {
                    let _ = e.print();
                    1
                }
                _ => {
                    eprintln!("subseg: {}", one_line(&e.render().to_string()));
                    1
                }
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("subseg: {e}");
            e.exit_code()
        }
    }
}

/// Clap's message without the usage block, folded onto one line.
fn one_line(rendered: &str) -> String {
    let message = rendered.split("\n\nUsage:").next().unwrap_or(rendered);
    let mut parts = message
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("For more information"));
    let mut out = parts
        .next()
        .unwrap_or("")
        .trim_start_matches("error: ")
        .to_owned();
    for part in parts {
        out.push_str(if part.starts_with("tip:") { "; " } else { " " });
        out.push_str(part);
    }
    out.push_str(" (see --help)");
    out
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => train(args),
        Command::Encode(args) => encode(args),
        Command::Sample(args) => sample(args),
        Command::Analyze(args) => analyze(args),
        Command::Augment(args) => augment(args),
    }
}

fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    match path {
        Some(path) => {
            let file = File::open(path).map_err(|source| Error::Open {
                path: path.to_owned(),
                source,
            })?;
            Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
        }
        None => Ok(Box::new(io::stdin().lock())),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(path) => {
            let file = File::create(path).map_err(|source| Error::Open {
                path: path.to_owned(),
                source,
            })?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn load_merges(path: &Path) -> Result<MergeTable> {
    formats::read_merges(open_input(Some(path))?).map_err(|e| Error::Format {
        path: path.to_owned(),
        line: e.line,
        msg: e.msg,
    })
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    formats::read_vocab(open_input(Some(path))?).map_err(|e| Error::Format {
        path: path.to_owned(),
        line: e.line,
        msg: e.msg,
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let mut out = open_output(Some(path))?;
    f(&mut out).map_err(Error::Write)?;
    out.flush().map_err(Error::Write)
}

fn train(args: TrainArgs) -> Result<()> {
    let pool = build_pool(args.input.threads)?;
    let lines = stream::read_all(open_input(args.input.input.as_deref())?)?;
    let counts = pool.install(|| {
        lines
            .par_chunks(CHUNK_LINES)
            .map(WordCounts::from_lines)
            .reduce(WordCounts::new, |mut a, b| {
                a.merge(b);
                a
            })
    });
    if counts.is_empty() {
        return Err(Error::Core(subseg::Error::InvalidInput(
            "training corpus has no words".into(),
        )));
    }
    let chars = counts.character_tokens().len();
    let num_merges = match (args.num_merges, args.vocab_size) {
        (Some(n), _) => n,
        (None, Some(size)) => size.checked_sub(chars + 1).ok_or_else(|| {
            Error::Usage(format!(
                "--vocab-size {size} is below the {} character tokens plus UNK",
                chars
            ))
        })?,
        (None, None) => unreachable!("clap requires one size flag"),
    };
    let learned = learn_merges(&counts, num_merges)?;
    let vocab = if args.segmented_vocab {
        Vocabulary::from_segmented_corpus(&counts, &learned.table)
    } else {
        learned.vocab
    };
    write_file(&args.merges_out, |out| {
        formats::write_merges(&learned.table, out)
    })?;
    if let Some(path) = &args.vocab_out {
        write_file(path, |out| formats::write_vocab(&vocab, out))?;
    }
    eprintln!(
        "subseg: {} words ({} distinct), {} characters, {} merges, vocabulary {}",
        counts.total(),
        counts.len(),
        chars,
        learned.table.len(),
        vocab.len()
    );
    Ok(())
}

fn encode(args: EncodeArgs) -> Result<()> {
    let pool = build_pool(args.input.threads)?;
    let input = open_input(args.input.input.as_deref())?;
    let output = open_output(args.output.output.as_deref())?;
    if args.decode {
        map_lines(input, output, &pool, Framing::SameLines, |l| {
            detokenize(&l.text)
        })?;
        return Ok(());
    }
    let cfg = args.dropout.config(1)?;
    let table = load_merges(args.merges.as_deref().expect("clap requires --merges"))?;
    if cfg.p() == 0.0 {
        map_lines(input, output, &pool, Framing::SameLines, |l| {
            Ok(segment_line(&l.text, &table))
        })?;
    } else {
        map_lines(input, output, &pool, Framing::SameLines, |l| {
            Ok(segment_line_dropout(&l.text, l.index, &table, &cfg))
        })?;
    }
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let pool = build_pool(args.input.threads)?;
    let cfg = args.dropout.config(args.samples)?;
    let table = load_merges(&args.merges)?;
    let input = open_input(args.input.input.as_deref())?;
    let output = open_output(args.output.output.as_deref())?;
    map_lines(input, output, &pool, Framing::Raw, |l| {
        let mut block = String::new();
        for (j, word) in words(&l.text).enumerate() {
            let mut rng = RandomStream::for_word(cfg.base_seed(), l.index, j as u64);
            for (split, count) in sample_segmentations(word, &table, &cfg, &mut rng)? {
                block.push_str(&format!("{count}\t{}\n", render_split(&split)));
            }
            block.push('\n');
        }
        Ok(block)
    })?;
    Ok(())
}

/// One segmentation pass over `lines`, in parallel chunks.
fn par_pass(
    pool: &ThreadPool,
    lines: &[String],
    table: &MergeTable,
    vocab: Option<&Vocabulary>,
    cfg: &DropoutConfig,
    seed: u64,
) -> CorpusStats {
    let parts: Vec<CorpusStats> = pool.install(|| {
        lines
            .par_chunks(CHUNK_LINES)
            .enumerate()
            .map(|(c, chunk)| {
                let mut stats = CorpusStats::new();
                for (k, line) in chunk.iter().enumerate() {
                    let index = (c * CHUNK_LINES + k) as u64;
                    stats.add_segmented_line(line, index, table, vocab, cfg, seed);
                }
                stats
            })
            .collect()
    });
    parts.into_iter().fold(CorpusStats::new(), |mut acc, s| {
        acc.merge(s);
        acc
    })
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    if args.calibrate.is_some() && args.kind != AnalysisKind::Lengths {
        return Err(Error::Usage(
            "--calibrate only applies to `analyze lengths`".into(),
        ));
    }
    if args.all && args.kind != AnalysisKind::Ratios {
        return Err(Error::Usage(
            "--all only applies to `analyze ratios`".into(),
        ));
    }
    let pool = build_pool(args.input.threads)?;
    let cfg = args.dropout.config(args.samples.max(1))?;
    if args.samples == 0 {
        return Err(Error::Usage("--samples must be at least 1".into()));
    }
    let vocab = match (&args.vocab, args.kind) {
        (Some(path), _) => Some(load_vocab(path)?),
        (None, AnalysisKind::Lengths) => None,
        (None, _) => {
            return Err(Error::Usage(
                "--vocab is required for ratios and unk".into(),
            ))
        }
    };
    let table = load_merges(&args.merges)?;
    let lines = stream::read_all(open_input(args.input.input.as_deref())?)?;
    if lines.is_empty() {
        return Err(Error::Core(subseg::Error::InvalidInput(
            "corpus is empty".into(),
        )));
    }
    let mut out = open_output(args.output.output.as_deref())?;

    match args.kind {
        AnalysisKind::Ratios => {
            let vocab = vocab.as_ref().expect("checked above");
            let substrings = pool.install(|| {
                lines
                    .par_chunks(CHUNK_LINES)
                    .map(|chunk| {
                        let mut s = CorpusStats::new();
                        for line in chunk {
                            s.add_substrings(line, vocab);
                        }
                        s
                    })
                    .collect::<Vec<_>>()
            });
            let substrings = substrings
                .into_iter()
                .fold(CorpusStats::new(), |mut acc, s| {
                    acc.merge(s);
                    acc
                });
            let mut tokens = CorpusStats::new();
            for pass in 0..cfg.samples() {
                let seed = pass_seed(cfg.base_seed(), u64::from(pass));
                tokens.merge(par_pass(&pool, &lines, &table, Some(vocab), &cfg, seed));
            }
            let selection = if args.all {
                RatioSelection::All
            } else {
                RatioSelection::TopDecile
            };
            let ratios = ratios_from_counts(&tokens, &substrings, cfg.samples(), selection);
            formats::write_ratios(&ratios, &mut out).map_err(Error::Write)?;
        }
        AnalysisKind::Lengths => match args.calibrate {
            Some(target) => {
                let found =
                    pool.install(|| calibrate_p(&lines, &table, target, args.tolerance, &cfg))?;
                writeln!(out, "p\t{}\nratio\t{:.6}", found.p, found.ratio).map_err(Error::Write)?;
            }
            None => {
                let stats = par_pass(&pool, &lines, &table, None, &cfg, cfg.base_seed());
                formats::write_histogram(stats.length_histogram(), &mut out)
                    .map_err(Error::Write)?;
            }
        },
        AnalysisKind::Unk => {
            let vocab = vocab.as_ref().expect("checked above");
            let (mut unk, mut total) = (0u64, 0u64);
            for pass in 0..cfg.samples() {
                let seed = pass_seed(cfg.base_seed(), u64::from(pass));
                let stats = par_pass(&pool, &lines, &table, Some(vocab), &cfg, seed);
                unk += stats.unk_tokens();
                total += stats.total_tokens();
            }
            let rate = if total == 0 {
                0.0
            } else {
                unk as f64 / total as f64
            };
            writeln!(out, "{rate:.8}").map_err(Error::Write)?;
        }
    }
    out.flush().map_err(Error::Write)
}

fn augment(args: AugmentArgs) -> Result<()> {
    let pool = build_pool(args.input.threads)?;
    let mut reader = LineReader::new(open_input(args.input.input.as_deref())?);
    let mut lines = Vec::new();
    while let Some(line) = reader.read_line()? {
        lines.push(line);
    }
    let alphabet = corpus_alphabet(lines.iter().map(|l| l.text.as_str()));
    if alphabet.is_empty() {
        // nothing to perturb; pass the input through
        let mut out = open_output(args.output.output.as_deref())?;
        for line in &lines {
            out.write_all(line.text.as_bytes()).map_err(Error::Write)?;
            if line.newline {
                out.write_all(b"\n").map_err(Error::Write)?;
            }
        }
        return out.flush().map_err(Error::Write);
    }
    let cfg = NoiseConfig::new(args.word_prob, args.seed, alphabet)
        .map_err(|e| Error::Usage(e.to_string()))?;
    let results: Vec<(String, usize)> = pool.install(|| {
        lines
            .par_iter()
            .map(|l| augment_line(&l.text, l.index, &cfg))
            .collect()
    });
    let mut out = open_output(args.output.output.as_deref())?;
    let mut modified = 0;
    for (line, (text, m)) in lines.iter().zip(results) {
        out.write_all(text.as_bytes()).map_err(Error::Write)?;
        if line.newline {
            out.write_all(b"\n").map_err(Error::Write)?;
        }
        modified += m;
    }
    out.flush().map_err(Error::Write)?;
    let total: usize = lines.iter().map(|l| words(&l.text).count()).sum();
    eprintln!("subseg: misspelled {modified} of {total} words");
    Ok(())
}
