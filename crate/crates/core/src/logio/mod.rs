//! Log formats, writers, and post-processing.
//!
//! Every log is UTF-8 TSV with LF endings. The first line is the header:
//! the schema tag followed by the column names. Floats are written with
//! exactly six decimals and no exponent.

pub mod fixed;
pub mod proc;
pub mod records;
pub mod sink;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use fixed::Fixed6;
pub use proc::{concat_logs, downsample, export_geojson, split_logs, stats, StatsReport};
pub use records::{
    CheckinRecord, LogKind, Record, Relocation, RelocationRecord, SocialEdgeRecord, StateRecord, Status, TrajectoryRecord,
};
pub use sink::{write_records, LogSink, FLUSH_EVERY};

#[derive(Debug, Error)]
pub enum ProcError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: missing log file")]
    Missing { path: PathBuf },
    #[error("run `{run}`: {message}")]
    Schema { run: String, message: String },
    #[error("{path}, line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ProcError + '_ {
    move |source| ProcError::Io { path: path.to_path_buf(), source }
}

/// Opens a log, checks its header, and returns the remaining lines.
pub fn open_log(path: &Path, kind: LogKind) -> Result<impl Iterator<Item = Result<(usize, String), ProcError>>, ProcError> {
    if !path.exists() {
        return Err(ProcError::Missing { path: path.to_path_buf() });
    }
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose().map_err(io_err(path))?.unwrap_or_default();
    if header != kind.header() {
        return Err(ProcError::Parse { path: path.to_path_buf(), line: 1, message: format!("expected header `{}`", kind.header()) });
    }
    let owned = path.to_path_buf();
    Ok(lines.enumerate().map(move |(i, l)| l.map(|l| (i + 2, l)).map_err(|source| ProcError::Io { path: owned.clone(), source })))
}

/// Calls `f` for every record of a log file, in file order.
pub fn for_each_record<R: Record>(path: &Path, mut f: impl FnMut(R)) -> Result<(), ProcError> {
    for item in open_log(path, R::KIND)? {
        let (line, text) = item?;
        let r = R::parse_line(&text).map_err(|message| ProcError::Parse { path: path.to_path_buf(), line, message })?;
        f(r);
    }
    Ok(())
}

pub fn read_records<R: Record>(path: &Path) -> Result<Vec<R>, ProcError> {
    let mut out = Vec::new();
    for_each_record(path, |r| out.push(r))?;
    Ok(out)
}
