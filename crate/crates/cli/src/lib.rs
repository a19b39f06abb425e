//! Streaming front end for the `subseg` segmentation core: line-oriented
//! readers and writers with parallel, order-preserving processing, the
//! merge-table / vocabulary / TSV file formats, and the `subseg` command.

pub mod cli;
pub mod error;
pub mod formats;
pub mod stream;

pub use cli::run;
pub use error::{Error, Result};
