//! MatrixMarket coordinate matrices and plain-text vectors.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| parse_err(0, format!("cannot read {}: {e}", path.display())))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

/// Parses a MatrixMarket `coordinate` matrix (`real`, `integer` or
/// `pattern`; `general`, `symmetric` or `skew-symmetric`). Symmetric
/// storage is expanded and duplicate entries are summed.
pub fn parse_matrix_market(text: &str) -> Result<CsrMatrix> {
    let header = text.lines().next().ok_or_else(|| parse_err(1, "empty file"))?;
    let words: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(
            1,
            "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`",
        ));
    }
    if words[2] != "coordinate" {
        return Err(parse_err(1, format!("unsupported format `{}`", words[2])));
    }
    let pattern = match words[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => return Err(parse_err(1, format!("unsupported field `{other}`"))),
    };
    let sym = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(1, format!("unsupported symmetry `{other}`"))),
    };

    let mut lines = data_lines(text).skip_while(|(n, _)| *n == 1);
    let (sline, size) = lines.next().ok_or_else(|| parse_err(1, "missing size line"))?;
    let mut tok = size.split_whitespace();
    let nrows: usize = field(tok.next(), sline, "row count")?;
    let ncols: usize = field(tok.next(), sline, "column count")?;
    let nnz: usize = field(tok.next(), sline, "entry count")?;
    if tok.next().is_some() {
        return Err(parse_err(sline, "size line has extra fields"));
    }
    if sym != Symmetry::General && nrows != ncols {
        return Err(parse_err(sline, "symmetric storage needs a square matrix"));
    }

    let mut t = Vec::with_capacity(if sym == Symmetry::General { nnz } else { 2 * nnz });
    let mut count = 0;
    for (ln, l) in lines {
        let mut tok = l.split_whitespace();
        let i: usize = field(tok.next(), ln, "row index")?;
        let j: usize = field(tok.next(), ln, "column index")?;
        let v: f64 = if pattern { 1.0 } else { field(tok.next(), ln, "value")? };
        if tok.next().is_some() {
            return Err(parse_err(ln, "entry has extra fields"));
        }
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(parse_err(ln, format!("index ({i}, {j}) outside {nrows}x{ncols}")));
        }
        let (i, j) = (i - 1, j - 1);
        t.push((i, j, v));
        if i != j {
            match sym {
                Symmetry::General => {}
                Symmetry::Symmetric => t.push((j, i, v)),
                Symmetry::SkewSymmetric => t.push((j, i, -v)),
            }
        }
        count += 1;
    }
    if count != nnz {
        return Err(parse_err(
            sline,
            format!("size line announces {nnz} entries, found {count}"),
        ));
    }
    CsrMatrix::from_triplets(nrows, ncols, &t)
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    parse_matrix_market(&read_text(path.as_ref())?)
}

/// Writes `a` as a general real coordinate matrix.
pub fn write_matrix_market(path: impl AsRef<Path>, a: &CsrMatrix) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for i in 0..a.nrows() {
        let (c, v) = a.row(i);
        for (&j, &x) in c.iter().zip(v) {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, x)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One value per line, or a MatrixMarket `array` with a single column.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let first = text.lines().next().unwrap_or("").to_ascii_lowercase();
    let mut lines = data_lines(text).peekable();
    let mut expected = None;
    if first.starts_with("%%matrixmarket") {
        let words: Vec<&str> = first.split_whitespace().collect();
        if words.get(2) != Some(&"array") {
            return Err(parse_err(1, "vectors must use the MatrixMarket array format"));
        }
        let (ln, size) = lines.next().ok_or_else(|| parse_err(1, "missing size line"))?;
        let mut tok = size.split_whitespace();
        let rows: usize = field(tok.next(), ln, "row count")?;
        let cols: usize = field(tok.next(), ln, "column count")?;
        if cols != 1 {
            return Err(parse_err(ln, format!("expected one column, found {cols}")));
        }
        expected = Some((ln, rows));
    }
    let mut out = Vec::new();
    for (ln, l) in lines {
        let mut tok = l.split_whitespace();
        let v: f64 = field(tok.next(), ln, "value")?;
        if tok.next().is_some() {
            return Err(parse_err(ln, "expected one value per line"));
        }
        out.push(v);
    }
    if let Some((ln, rows)) = expected {
        if rows != out.len() {
            return Err(parse_err(
                ln,
                format!("size line announces {rows} values, found {}", out.len()),
            ));
        }
    }
    Ok(out)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(&read_text(path.as_ref())?)
}

pub fn write_vector(path: impl AsRef<Path>, x: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in x {
        writeln!(w, "{v:e}")?;
    }
    w.flush()?;
    Ok(())
}

/// One `0` or `1` per line; `1` marks a pressure unknown.
pub fn parse_mask(text: &str) -> Result<Vec<bool>> {
    data_lines(text)
        .map(|(ln, l)| match l {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(parse_err(ln, format!("mask entries must be 0 or 1, found `{other}`"))),
        })
        .collect()
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Vec<bool>> {
    parse_mask(&read_text(path.as_ref())?)
}
