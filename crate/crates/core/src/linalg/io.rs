//! Matrix file formats.
//!
//! * CSV: one matrix row per line, `,` separator, `.` decimal point.
//! * Binary: magic `NCAA`, `u32` version (1), `u64` rows, `u64` cols, then
//!   `rows * cols` little-endian `f64` values in column-major order.
//!
//! Inside JSON documents a matrix is stored as its shape plus the binary
//! encoding in base64.

use std::fs;
use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::DenseMatrix;
use crate::error::{NcaaError, Result};

pub const MAGIC: &[u8; 4] = b"NCAA";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.csv` selects CSV, anything else the binary format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

pub fn parse_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        let mut offset = 0;
        for field in line.split(',') {
            let value: f64 = field.trim().parse().map_err(|_| NcaaError::Parse {
                line: lineno + 1,
                offset,
                detail: format!("not a number: {:?}", field.trim()),
            })?;
            if !value.is_finite() {
                return Err(NcaaError::Parse {
                    line: lineno + 1,
                    offset,
                    detail: "non-finite value".into(),
                });
            }
            row.push(value);
            offset += field.len() + 1;
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(NcaaError::Parse {
                    line: lineno + 1,
                    offset: 0,
                    detail: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

pub fn to_csv(m: &DenseMatrix) -> String {
    let mut out = String::with_capacity(m.rows() * m.cols() * 12);
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            // `{}` on f64 is the shortest representation that round-trips
            out.push_str(&format!("{}", m.get(i, j)));
        }
        out.push('\n');
    }
    out
}

pub fn encode_binary(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn binary_error(offset: usize, detail: impl Into<String>) -> NcaaError {
    NcaaError::Parse {
        line: 0,
        offset,
        detail: detail.into(),
    }
}

pub fn decode_binary(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(binary_error(bytes.len(), "truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(binary_error(0, "bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(binary_error(4, format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| binary_error(8, "shape overflows"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * 8 {
        return Err(binary_error(
            HEADER_LEN,
            format!("expected {} payload bytes, found {}", count * 8, body.len()),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for (k, chunk) in body.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(binary_error(HEADER_LEN + 8 * k, "non-finite value"));
        }
        data.push(v);
    }
    DenseMatrix::from_col_major(rows, cols, data)
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    match MatrixFormat::from_path(path) {
        MatrixFormat::Csv => parse_csv(&fs::read_to_string(path)?),
        MatrixFormat::Binary => decode_binary(&fs::read(path)?),
    }
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let bytes = match MatrixFormat::from_path(path) {
        MatrixFormat::Csv => to_csv(m).into_bytes(),
        MatrixFormat::Binary => encode_binary(m),
    };
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct EncodedMatrix {
    rows: u64,
    cols: u64,
    encoding: String,
    data: String,
}

const ENCODING: &str = "ncaa-binary-v1+base64";

impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        EncodedMatrix {
            rows: self.rows() as u64,
            cols: self.cols() as u64,
            encoding: ENCODING.to_string(),
            data: BASE64.encode(encode_binary(self)),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let enc = EncodedMatrix::deserialize(deserializer)?;
        if enc.encoding != ENCODING {
            return Err(D::Error::custom(format!(
                "unknown matrix encoding {:?}",
                enc.encoding
            )));
        }
        let bytes = BASE64.decode(enc.data.as_bytes()).map_err(D::Error::custom)?;
        let m = decode_binary(&bytes).map_err(D::Error::custom)?;
        if m.rows() as u64 != enc.rows || m.cols() as u64 != enc.cols {
            return Err(D::Error::custom("shape header disagrees with payload"));
        }
        Ok(m)
    }
}
