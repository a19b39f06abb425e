//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.
//!
//!     cargo test --release -p subseg-cli --test acceptance

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use subseg::analysis::{
    mean_ratio, token_to_substring_ratios, unk_rate, CorpusStats, RatioSelection,
};
use subseg::dropout::{expected_length_ratio, sample_segmentations, segment_word_dropout};
use subseg::noise::{augment_corpus, corpus_alphabet};
use subseg::segment::segment_word;
use subseg::token::initial_split;
use subseg::train::learn_merges;
use subseg::{DropoutConfig, MergeTable, NoiseConfig, RandomStream, Token, Vocabulary, WordCounts};
use subseg_cli::formats::{read_merges, write_merges};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn corpus_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/english.txt")
}

fn corpus() -> Vec<String> {
    fs::read_to_string(corpus_path())
        .expect("english corpus")
        .lines()
        .map(str::to_owned)
        .collect()
}

fn within_3_sigma(hits: u64, n: u64, p: f64) -> bool {
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (hits as f64 - n as f64 * p).abs() <= 3.0 * sd
}

struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }
}

/// Rescans the full split each step and merges the lowest-priority pair,
/// leftmost first.
fn brute_force_segment(word: &str, table: &MergeTable) -> Vec<Token> {
    let mut split = initial_split(word).unwrap().into_tokens();
    loop {
        let mut best: Option<(u32, usize)> = None;
        for i in 0..split.len().saturating_sub(1) {
            if let Some(p) = table.priority(&split[i], &split[i + 1]) {
                if best.is_none_or(|(bp, _)| p < bp) {
                    best = Some((p, i));
                }
            }
        }
        let Some((_, i)) = best else { return split };
        let merged = split[i].concat(&split[i + 1]);
        split.splice(i..i + 2, [merged]);
    }
}

/// Random table whose rules are reachable from single characters.
fn random_table(seed: u64, rules: usize, alphabet: &[char]) -> MergeTable {
    let mut rng = SplitMix(seed);
    let mut reachable: Vec<Token> = alphabet
        .iter()
        .flat_map(|c| [Token::inner(&c.to_string()), Token::last(&c.to_string())])
        .collect();
    let mut table = MergeTable::new();
    while table.len() < rules {
        let inner: Vec<&Token> = reachable.iter().filter(|t| !t.is_word_final()).collect();
        let left = inner[rng.below(inner.len())].clone();
        let right = reachable[rng.below(reachable.len())].clone();
        if table.priority(&left, &right).is_some() || left.text().len() + right.text().len() > 5 {
            continue;
        }
        let result = left.concat(&right);
        table.push(left, right).unwrap();
        if !reachable.contains(&result) {
            reachable.push(result);
        }
    }
    table
}

fn all_words(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| alphabet.iter().map(move |c| format!("{w}{c}")))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn bpe_equivalence() -> Outcome {
    let start = Instant::now();
    let alphabet = ['a', 'b', 'c'];
    let words = all_words(&alphabet, 6);
    let mut mismatches = 0;
    for seed in 0..20 {
        let table = random_table(seed, 10, &alphabet);
        let p0 = DropoutConfig::new(0.0, seed, 1).unwrap();
        for word in &words {
            let split = segment_word(word, &table).unwrap();
            let mut rng = RandomStream::from_seed(seed);
            let dropped = segment_word_dropout(word, &table, &p0, &mut rng).unwrap();
            if split.tokens() != brute_force_segment(word, &table) || dropped != split {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        mismatches == 0 && elapsed < Duration::from_secs(60),
        format!(
            "{} words x 20 tables, {mismatches} mismatches, {:.2?}",
            words.len(),
            elapsed
        ),
    )
}

fn character_split_limit() -> Outcome {
    let pool: Vec<char> = "abcdeéñßжщдλπ中文字ア😀🎉٣ह".chars().collect();
    let mut rng = SplitMix(2024);
    let words: Vec<String> = (0..10_000)
        .map(|_| {
            (0..1 + rng.below(12))
                .map(|_| pool[rng.below(pool.len())])
                .collect()
        })
        .collect();
    let counts = WordCounts::from_lines(&words);
    let table = learn_merges(&counts, 300).unwrap().table;
    let p1 = DropoutConfig::new(1.0, 9, 1).unwrap();
    let mut merged_at_p0 = 0;
    let mut mismatches = 0;
    for (i, word) in words.iter().enumerate() {
        let mut rng = RandomStream::from_seed(i as u64);
        let split = segment_word_dropout(word, &table, &p1, &mut rng).unwrap();
        if split != initial_split(word).unwrap() {
            mismatches += 1;
        }
        if segment_word(word, &table).unwrap().len() < word.chars().count() {
            merged_at_p0 += 1;
        }
    }
    check(
        mismatches == 0 && merged_at_p0 > 0,
        format!("10000 words, {mismatches} mismatches ({merged_at_p0} merge at p=0)"),
    )
}

fn exit_probability() -> Outcome {
    let tables = [
        ("ab", vec![(Token::inner("a"), Token::last("b"))]),
        (
            "merger",
            vec![
                (Token::inner("e"), Token::inner("r")),
                (Token::inner("e"), Token::last("r")),
            ],
        ),
        (
            "abcd",
            vec![
                (Token::inner("a"), Token::inner("b")),
                (Token::inner("b"), Token::inner("c")),
                (Token::inner("c"), Token::last("d")),
            ],
        ),
    ];
    const TRIALS: u32 = 100_000;
    let mut ok = true;
    let mut details = Vec::new();
    for (k, (word, rules)) in tables.into_iter().enumerate() {
        let k = k as i32 + 1;
        let table = MergeTable::from_pairs(rules).unwrap();
        let chars = initial_split(word).unwrap();
        if subseg::dropout::enumerate_candidates(&chars, &table).len() != k as usize {
            return Err(format!("table for {word} does not have {k} candidates"));
        }
        for p in [0.1, 0.5] {
            let cfg = DropoutConfig::new(p, 0, TRIALS).unwrap();
            let mut rng = RandomStream::from_seed(1000 + k as u64);
            let samples = sample_segmentations(word, &table, &cfg, &mut rng).unwrap();
            let zero = samples
                .iter()
                .find(|(s, _)| *s == chars)
                .map_or(0, |(_, n)| *n);
            let expected = p.powi(k);
            ok &= within_3_sigma(u64::from(zero), u64::from(TRIALS), expected);
            details.push(format!(
                "k={k} p={p}: {:.4}/{expected:.4}",
                f64::from(zero) / f64::from(TRIALS)
            ));
        }
    }
    check(ok, details.join(", "))
}

fn length_ratio() -> Outcome {
    let start = Instant::now();
    let lines = corpus();
    let tokens: usize = lines.iter().map(|l| l.split_whitespace().count()).sum();
    let table = learn_merges(&WordCounts::from_lines(&lines), 4000)
        .unwrap()
        .table;
    let ratio = |p: f64| {
        expected_length_ratio(&lines, &table, &DropoutConfig::new(p, 1, 1).unwrap()).unwrap()
    };
    let at_01 = ratio(0.1);
    let grid: Vec<f64> = (0..=5).map(|i| ratio(f64::from(i) * 0.2)).collect();
    let monotone = grid.windows(2).all(|w| w[1] >= w[0]);
    let elapsed = start.elapsed();
    let shown: Vec<String> = grid.iter().map(|r| format!("{r:.3}")).collect();
    check(
        tokens >= 200_000
            && (1.10..=1.40).contains(&at_01)
            && monotone
            && elapsed < Duration::from_secs(600),
        format!(
            "{tokens} tokens, ratio at p=0.1 {at_01:.4}, p=0..1 step 0.2: [{}], {:.2?}",
            shown.join(" "),
            elapsed
        ),
    )
}

fn unk_ordering() -> Outcome {
    let lines = corpus();
    let counts = WordCounts::from_lines(&lines);
    let chars = counts.character_tokens().len();
    let cfg = DropoutConfig::new(0.1, 3, 1).unwrap();
    let mut rates = Vec::new();
    for vocab_size in [4000, 32000] {
        let learned = learn_merges(&counts, vocab_size - chars - 1).unwrap();
        let vocab = Vocabulary::from_segmented_corpus(&counts, &learned.table);
        let zero = unk_rate(
            &lines,
            &learned.table,
            &vocab,
            &DropoutConfig::deterministic(),
        );
        let rate = unk_rate(&lines, &learned.table, &vocab, &cfg);
        rates.push((vocab_size, learned.table.len(), vocab.len(), zero, rate));
    }
    let (small, large) = (rates[0], rates[1]);
    let shown: Vec<String> = rates
        .iter()
        .map(|(size, merges, vocab, zero, rate)| {
            format!(
                "vocab-size {size} ({merges} merges, {vocab} tokens): p=0 {zero}, p=0.1 {rate:.5}"
            )
        })
        .collect();
    check(
        small.4 < large.4 && small.4 < 0.01 && large.4 < 0.01 && small.3 == 0.0 && large.3 == 0.0,
        shown.join("; "),
    )
}

/// Occurrences of `token` inside the words of `lines`: word-final tokens
/// only at the end of a word, others only where they do not end it.
fn brute_force_substrings(lines: &[String], token: &Token) -> u64 {
    let needle: Vec<char> = token.text().chars().collect();
    let mut n = 0;
    for word in lines.iter().flat_map(|l| l.split_whitespace()) {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() < needle.len() {
            continue;
        }
        for start in 0..=chars.len() - needle.len() {
            let at_end = start + needle.len() == chars.len();
            if at_end == token.is_word_final() && chars[start..start + needle.len()] == needle[..] {
                n += 1;
            }
        }
    }
    n
}

fn ratio_shift() -> Outcome {
    let lines = corpus();
    let (table, vocab) = subseg::train_bpe(&WordCounts::from_lines(&lines), 4000).unwrap();
    let bpe = token_to_substring_ratios(
        &lines,
        &table,
        &vocab,
        &DropoutConfig::deterministic(),
        RatioSelection::TopDecile,
    )
    .unwrap();
    let dropout = token_to_substring_ratios(
        &lines,
        &table,
        &vocab,
        &DropoutConfig::new(0.1, 5, 1).unwrap(),
        RatioSelection::TopDecile,
    )
    .unwrap();
    let same_set = bpe
        .iter()
        .map(|r| &r.token)
        .eq(dropout.iter().map(|r| &r.token));

    // substring counter cross-check on a slice of the corpus
    let sample: Vec<String> = lines.iter().take(1500).cloned().collect();
    let mut stats = CorpusStats::new();
    for line in &sample {
        stats.add_substrings(line, &vocab);
    }
    let disagreements = bpe
        .iter()
        .filter(|r| stats.substring_count(&r.token) != brute_force_substrings(&sample, &r.token))
        .count();

    let (m0, m1) = (mean_ratio(&bpe), mean_ratio(&dropout));
    check(
        same_set && disagreements == 0 && m1 > m0 && m1 >= 1.5 * m0,
        format!(
            "{} top-decile tokens, mean ratio BPE {m0:.4}, dropout p=0.1 {m1:.4} ({:.2}x), substring counter disagreements {disagreements}",
            bpe.len(),
            m1 / m0
        ),
    )
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

fn noise_model() -> Outcome {
    let lines = corpus();
    let cfg = NoiseConfig::new(0.1, 77, corpus_alphabet(&lines)).unwrap();
    let (noisy, modified, total) = augment_corpus(&lines, &cfg);
    let mut changed = 0;
    let mut bad = 0;
    for (a, b) in lines.iter().zip(&noisy) {
        let (wa, wb): (Vec<&str>, Vec<&str>) = (
            a.split_whitespace().collect(),
            b.split_whitespace().collect(),
        );
        if wa.len() != wb.len() {
            bad += 1;
            continue;
        }
        for (x, y) in wa.iter().zip(&wb) {
            if x != y {
                changed += 1;
                if levenshtein(x, y) != 1 {
                    bad += 1;
                }
            }
        }
    }
    check(
        total >= 100_000
            && changed == modified
            && bad == 0
            && within_3_sigma(modified as u64, total as u64, 0.1),
        format!(
            "{modified} of {total} words modified ({:.4}), {bad} not at distance 1",
            modified as f64 / total as f64
        ),
    )
}

fn subseg(args: &[&str], stdin: &[u8]) -> Result<Vec<u8>, String> {
    let mut child = Command::new(env!("CARGO_BIN_EXE_subseg"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut pipe = child.stdin.take().unwrap();
    let input = stdin.to_vec();
    let writer = std::thread::spawn(move || {
        let _ = pipe.write_all(&input);
    });
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    writer.join().unwrap();
    if !out.status.success() {
        return Err(format!(
            "subseg {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn determinism_and_round_trips() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let text = fs::read_to_string(corpus_path()).unwrap();
    let head: String = text.split_inclusive('\n').take(10_000).collect();
    let input = dir.path().join("head.txt");
    fs::write(&input, &head).unwrap();
    let merges = dir.path().join("merges.txt");
    let vocab = dir.path().join("vocab.tsv");
    let (input, merges, vocab) = (
        input.to_str().unwrap(),
        merges.to_str().unwrap(),
        vocab.to_str().unwrap(),
    );

    subseg(
        &[
            "train",
            "--input",
            input,
            "--num-merges",
            "4000",
            "--merges-out",
            merges,
            "--vocab-out",
            vocab,
        ],
        b"",
    )?;

    let runs: [&[&str]; 5] = [
        &[
            "encode",
            "--input",
            input,
            "--merges",
            merges,
            "--dropout",
            "0.1",
            "--seed",
            "42",
        ],
        &["encode", "--input", input, "--merges", merges],
        &["augment", "--input", input, "--seed", "42"],
        &[
            "analyze",
            "ratios",
            "--input",
            input,
            "--merges",
            merges,
            "--vocab",
            vocab,
            "--dropout",
            "--samples",
            "2",
        ],
        &[
            "sample",
            "--input",
            input,
            "--merges",
            merges,
            "--dropout",
            "--samples",
            "4",
        ],
    ];
    let mut differing = Vec::new();
    let mut outputs = Vec::new();
    for args in runs {
        let one = subseg(&[args, &["--threads", "1"]].concat(), b"")?;
        let eight = subseg(&[args, &["--threads", "8"]].concat(), b"")?;
        if one != eight {
            differing.push(args[0]);
        }
        outputs.push(one);
    }

    let mut lossy = 0;
    for encoded in &outputs[..2] {
        if subseg(&["encode", "--decode", "--threads", "8"], encoded)? != head.as_bytes() {
            lossy += 1;
        }
    }

    let file = fs::read(merges).unwrap();
    let table = read_merges(&file[..]).map_err(|e| e.to_string())?;
    let mut again = Vec::new();
    write_merges(&table, &mut again).unwrap();
    let expected = learn_merges(&WordCounts::from_lines(head.lines()), 4000)
        .unwrap()
        .table;

    check(
        differing.is_empty() && lossy == 0 && again == file && table == expected,
        format!(
            "{} lines; thread-dependent outputs: {differing:?}; lossy round trips: {lossy}; merge file {} rules reproduced: {}",
            head.lines().count(),
            table.len(),
            again == file && table == expected
        ),
    )
}

/// Weighted counts of all adjacent pairs in the initial splits.
fn hand_count_pairs(counts: &[(&str, u64)]) -> BTreeMap<(String, String), u64> {
    let mut out = BTreeMap::new();
    for (word, n) in counts {
        let tokens: Vec<String> = initial_split(word)
            .unwrap()
            .tokens()
            .iter()
            .map(Token::rendered)
            .collect();
        for w in tokens.windows(2) {
            *out.entry((w[0].clone(), w[1].clone())).or_insert(0) += n;
        }
    }
    out
}

fn training_oracle() -> Outcome {
    let corpus = [("low", 5), ("lower", 2), ("newest", 6), ("widest", 3)];
    let pairs = hand_count_pairs(&corpus);
    let max = *pairs.values().max().unwrap();
    let (winner, _) = pairs.iter().find(|(_, &n)| n == max).unwrap();
    let counts = WordCounts::from_pairs(corpus).unwrap();
    let first = learn_merges(&counts, 1).unwrap();
    let rule = &first.table.rules()[0];
    let got = (rule.left().rendered(), rule.right().rendered());
    let full = learn_merges(&counts, 10).unwrap().table;
    let prefix_ok = (1..=10).all(|k| {
        let head = learn_merges(&counts, k).unwrap().table;
        head.rules() == &full.rules()[..k.min(full.len())]
    });
    check(
        &got == winner && first.frequencies[0] == max && max == 9 && prefix_ok,
        format!(
            "first merge ({} {}) count {}, hand count ({} {}) {max}, prefix property 1..10 {}",
            got.0,
            got.1,
            first.frequencies[0],
            winner.0,
            winner.1,
            if prefix_ok { "holds" } else { "broken" }
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("BPE-equivalence oracle", bpe_equivalence),
        ("character-split limit", character_split_limit),
        ("exit-probability law", exit_probability),
        ("length-ratio reproduction", length_ratio),
        ("UNK ordering", unk_ordering),
        ("ratio shift", ratio_shift),
        ("noise model", noise_model),
        ("determinism and round trips", determinism_and_round_trips),
        ("training oracle", training_oracle),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (status, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{status} {}. {name}: {detail} [{:.1?}]",
            i + 1,
            start.elapsed()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
