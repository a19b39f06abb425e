//! Line streams.
//!
//! Lines are read with their `\n` terminator tracked separately so output
//! can reproduce the input's framing byte for byte (a missing final newline
//! stays missing, `\r` stays part of the line). Corpus commands process
//! fixed-size chunks of lines on a rayon pool and write results in input
//! order, which keeps memory bounded and output independent of the thread
//! count.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

/// Lines per parallel chunk.
pub const CHUNK_LINES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    /// 0-based position in the stream.
    pub index: u64,
    pub text: String,
    pub newline: bool,
}

pub struct LineReader<R> {
    inner: R,
    next_index: u64,
    buf: Vec<u8>,
}

impl<R: BufRead> LineReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            next_index: 0,
            buf: Vec::new(),
        }
    }

    /// The next line, or `None` at end of input.
    pub fn read_line(&mut self) -> Result<Option<Line>> {
        self.buf.clear();
        let line_no = self.next_index + 1;
        let n = self
            .inner
            .read_until(b'\n', &mut self.buf)
            .map_err(|source| Error::Read {
                line: line_no,
                source,
            })?;
        if n == 0 {
            return Ok(None);
        }
        let newline = self.buf.last() == Some(&b'\n');
        if newline {
            self.buf.pop();
        }
        let text = String::from_utf8(std::mem::take(&mut self.buf))
            .map_err(|_| Error::Utf8 { line: line_no })?;
        let index = self.next_index;
        self.next_index += 1;
        Ok(Some(Line {
            index,
            text,
            newline,
        }))
    }

    /// Up to `max` lines; empty at end of input.
    pub fn read_chunk(&mut self, max: usize) -> Result<Vec<Line>> {
        let mut chunk = Vec::with_capacity(max.min(CHUNK_LINES));
        while chunk.len() < max {
            match self.read_line()? {
                Some(line) => chunk.push(line),
                None => break,
            }
        }
        Ok(chunk)
    }
}

/// All lines of `input` as strings (terminators dropped).
pub fn read_all(input: impl BufRead) -> Result<Vec<String>> {
    let mut reader = LineReader::new(input);
    let mut out = Vec::new();
    while let Some(line) = reader.read_line()? {
        out.push(line.text);
    }
    Ok(out)
}

pub fn build_pool(threads: usize) -> Result<ThreadPool> {
    if threads == 0 {
        return Err(Error::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} threads: {e}")))
}

/// How the result for one line is framed in the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Framing {
    /// Result replaces the line; the input's terminator is kept.
    SameLines,
    /// Result is written as is.
    Raw,
}

/// Applies `f` to every line and writes the results in input order.
/// Returns the number of lines processed.
pub fn map_lines<R, W, F>(
    input: R,
    mut output: W,
    pool: &ThreadPool,
    framing: Framing,
    f: F,
) -> Result<u64>
where
    R: BufRead,
    W: Write,
    F: Fn(&Line) -> std::result::Result<String, subseg::Error> + Sync,
{
    let mut reader = LineReader::new(input);
    let mut lines = 0;
    loop {
        let chunk = reader.read_chunk(CHUNK_LINES)?;
        if chunk.is_empty() {
            break;
        }
        let results: Vec<std::result::Result<String, subseg::Error>> =
            pool.install(|| chunk.par_iter().map(&f).collect());
        for (line, result) in chunk.iter().zip(results) {
            let text = result.map_err(|source| Error::Line {
                line: line.index + 1,
                source,
            })?;
            output.write_all(text.as_bytes()).map_err(Error::Write)?;
            if framing == Framing::SameLines && line.newline {
                output.write_all(b"\n").map_err(Error::Write)?;
            }
        }
        lines += chunk.len() as u64;
    }
    output.flush().map_err(Error::Write)?;
    Ok(lines)
}
