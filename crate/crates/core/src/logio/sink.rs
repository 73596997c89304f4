//! Buffered TSV writers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::records::{LogKind, Record};

/// Records between explicit flushes.
pub const FLUSH_EVERY: usize = 10_000;
const BUFFER_BYTES: usize = 1 << 20;

/// Writes one log family: a header line, then one line per record.
#[derive(Debug)]
pub struct LogSink<W: Write> {
    out: W,
    kind: LogKind,
    line: String,
    since_flush: usize,
    written: u64,
}

impl LogSink<BufWriter<File>> {
    pub fn create(path: &Path, kind: LogKind) -> io::Result<Self> {
        Self::new(BufWriter::with_capacity(BUFFER_BYTES, File::create(path)?), kind)
    }
}

impl<W: Write> LogSink<W> {
    pub fn new(mut out: W, kind: LogKind) -> io::Result<Self> {
        out.write_all(kind.header().as_bytes())?;
        out.write_all(b"\n")?;
        Ok(Self { out, kind, line: String::with_capacity(128), since_flush: 0, written: 0 })
    }

    pub fn kind(&self) -> LogKind {
        self.kind
    }

    pub fn write<R: Record>(&mut self, record: &R) -> io::Result<()> {
        debug_assert_eq!(R::KIND, self.kind);
        self.line.clear();
        record.write_line(&mut self.line);
        self.line.push('\n');
        self.out.write_all(self.line.as_bytes())?;
        self.written += 1;
        self.since_flush += 1;
        if self.since_flush >= FLUSH_EVERY {
            self.out.flush()?;
            self.since_flush = 0;
        }
        Ok(())
    }

    /// Records written so far (header excluded).
    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Appends a batch; returns how many records were written.
pub fn write_records<'a, R: Record + 'a, W: Write>(sink: &mut LogSink<W>, records: impl IntoIterator<Item = &'a R>) -> io::Result<usize> {
    let mut n = 0;
    for r in records {
        sink.write(r)?;
        n += 1;
    }
    Ok(n)
}
