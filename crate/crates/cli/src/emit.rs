//! Deterministic output formatting: every float is serialized with 17
//! significant digits, every CSV starts with the resolved-config comment
//! and a header row.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use crate::CliError;

/// 17 significant digits, scientific.
pub fn f(x: f64) -> String {
    format!("{x:.16e}")
}

pub enum Sink {
    Stdout(io::Stdout),
    File(BufWriter<File>),
}

impl Sink {
    pub fn open(path: Option<&str>) -> Result<Sink, CliError> {
        match path {
            None => Ok(Sink::Stdout(io::stdout())),
            Some(p) => File::create(p)
                .map(|f| Sink::File(BufWriter::new(f)))
                .map_err(|e| CliError::io(format!("cannot create {p}: {e}"))),
        }
    }

    pub fn write_line(&mut self, line: &str) -> Result<(), CliError> {
        let r = match self {
            Sink::Stdout(s) => writeln!(s, "{line}"),
            Sink::File(f) => writeln!(f, "{line}"),
        };
        r.map_err(|e| CliError::io(format!("write failed: {e}")))
    }

    pub fn finish(self) -> Result<(), CliError> {
        if let Sink::File(mut f) = self {
            f.flush().map_err(|e| CliError::io(format!("flush failed: {e}")))?;
        }
        Ok(())
    }
}

/// Writes the comment line, the header, then all rows.
pub fn csv(
    path: Option<&str>,
    comment: &str,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<(), CliError> {
    let mut sink = Sink::open(path)?;
    sink.write_line(comment)?;
    sink.write_line(header)?;
    for row in rows {
        sink.write_line(&row)?;
    }
    sink.finish()
}

/// Writes one prebuilt JSON line.
pub fn json(path: Option<&str>, body: &str) -> Result<(), CliError> {
    let mut sink = Sink::open(path)?;
    sink.write_line(body)?;
    sink.finish()
}
