//! Versioned CSV output and the channel-matrix file format.
//!
//! Every file starts with `# recipcal-csv v1`, followed by `# key = value`
//! metadata lines, a header row and data rows. Reals are written with `{:e}`,
//! which round-trips exactly.

use std::io::Read;
use std::path::Path;

use recipcal_core::channel::ChannelMatrix;
use recipcal_core::linalg::{CMatrix, C64};

use crate::error::{AppError, AppResult};

pub const SCHEMA_LINE: &str = "# recipcal-csv v1";

/// In-memory CSV document.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDoc {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

impl CsvDoc {
    pub fn new(header: &[&str]) -> Self {
        CsvDoc {
            meta: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.meta(key, fmt_f64(value))
    }

    pub fn row(&mut self, fields: Vec<String>) {
        debug_assert_eq!(fields.len(), self.header.len());
        self.rows.push(fields);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SCHEMA_LINE.as_bytes());
        out.push(b'\n');
        for (k, v) in &self.meta {
            out.extend_from_slice(format!("# {k} = {v}\n").as_bytes());
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header).expect("writing to memory");
        for r in &self.rows {
            w.write_record(r).expect("writing to memory");
        }
        w.into_inner().expect("writing to memory")
    }
}

fn format_error(line: u64, msg: impl std::fmt::Display) -> AppError {
    AppError::Config(format!("channel CSV line {line}: {msg}"))
}

/// Writes `channel` as `row,col,re,im` rows, one per entry.
pub fn channel_to_csv(channel: &ChannelMatrix) -> CsvDoc {
    let c = channel.entries();
    let mut doc = CsvDoc::new(&["row", "col", "re", "im"]);
    doc.meta("kind", "intra-array-channel").meta("n_ant", c.nrows());
    for r in 0..c.nrows() {
        for col in 0..c.ncols() {
            let z = c[(r, col)];
            doc.row(vec![r.to_string(), col.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
        }
    }
    doc
}

/// Parses a channel file for an `n_ant`-antenna array. Every entry must
/// appear exactly once and the matrix must be symmetric.
pub fn channel_from_reader<R: Read>(reader: R, n_ant: usize) -> AppResult<ChannelMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(&e))?.clone();
    let expected = ["row", "col", "re", "im"];
    if headers.iter().ne(expected.iter().copied()) {
        let line = rdr.position().line();
        return Err(format_error(line, "expected header `row,col,re,im`"));
    }

    let mut m = CMatrix::zeros(n_ant, n_ant);
    let mut seen = vec![false; n_ant * n_ant];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let index = |i: usize| -> AppResult<usize> {
            let v: usize = rec[i]
                .trim()
                .parse()
                .map_err(|_| format_error(line, format!("`{}` is not a valid {}", &rec[i], expected[i])))?;
            if v >= n_ant {
                return Err(format_error(line, format!("{} {v} out of range for {n_ant} antennas", expected[i])));
            }
            Ok(v)
        };
        let real = |i: usize| -> AppResult<f64> {
            let v: f64 = rec[i]
                .trim()
                .parse()
                .map_err(|_| format_error(line, format!("`{}` is not a valid number for {}", &rec[i], expected[i])))?;
            if !v.is_finite() {
                return Err(format_error(line, format!("{} must be finite", expected[i])));
            }
            Ok(v)
        };
        let (r, c) = (index(0)?, index(1)?);
        let z = C64::new(real(2)?, real(3)?);
        let slot = &mut seen[r * n_ant + c];
        if *slot {
            return Err(format_error(line, format!("duplicate entry ({r}, {c})")));
        }
        *slot = true;
        m[(r, c)] = z;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(AppError::Config(format!(
            "channel CSV: entry ({}, {}) missing; {n_ant}x{n_ant} entries required",
            missing / n_ant,
            missing % n_ant
        )));
    }
    ChannelMatrix::reciprocal(m).map_err(|_| AppError::Config("channel CSV: matrix is not symmetric".into()))
}

pub fn read_channel(path: &Path, n_ant: usize) -> AppResult<ChannelMatrix> {
    let file = std::fs::File::open(path).map_err(|e| AppError::Io(format!("opening {}: {e}", path.display())))?;
    channel_from_reader(std::io::BufReader::new(file), n_ant).map_err(|e| match e {
        AppError::Config(msg) => AppError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn csv_error(e: &csv::Error) -> AppError {
    match e.position() {
        Some(p) => format_error(p.line(), e),
        None => match e.kind() {
            csv::ErrorKind::Io(io) => AppError::Io(io.to_string()),
            _ => AppError::Config(format!("channel CSV: {e}")),
        },
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> AppResult<()> {
    std::fs::write(path, bytes).map_err(|e| AppError::Io(format!("writing {}: {e}", path.display())))
}
