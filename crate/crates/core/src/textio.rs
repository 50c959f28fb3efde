//! Structured text formats for every artifact the library reads or writes.
//!
//! All formats are line oriented; blank lines and lines starting with `#`
//! are ignored. Complex numbers are written as a `re im` pair of decimal
//! floats (shortest round-trip form, so write → parse is lossless):
//!
//! - sampled paths / weight functions: one complex value per line;
//! - blocked sequences and weight families: header `blocked K`, then one
//!   block per line with `K` pairs;
//! - densities: header `density K F`, then one `K×K` matrix per line in
//!   row-major pairs;
//! - polynomials: header `ma K M L`, then one `K×M` coefficient per line;
//! - reports: `key = value` lines (or `key=value` in machine mode).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::blocking::{BlockedSequence, FunctionalWeights};
use crate::error::{Error, Result};
use crate::spectral::{MatrixMAPolynomial, SpectralDensityGrid};
use crate::{C64, CMat, CVec};

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Data lines of a document with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_floats(path: &str, lineno: usize, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| parse_err(path, lineno, format!("bad float {tok:?}: {e}")))
        })
        .collect()
}

fn pairs_to_complex(path: &str, lineno: usize, vals: &[f64], expect: usize) -> Result<Vec<C64>> {
    if vals.len() != 2 * expect {
        return Err(parse_err(
            path,
            lineno,
            format!("expected {} floats ({expect} complex pairs), got {}", 2 * expect, vals.len()),
        ));
    }
    Ok(vals.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
}

fn push_complex(out: &mut String, v: C64, first: &mut bool) {
    if !*first {
        out.push(' ');
    }
    *first = false;
    let _ = write!(out, "{} {}", v.re, v.im);
}

// --- sampled values ---------------------------------------------------

pub fn complex_values_to_string(values: &[C64]) -> String {
    let mut out = String::new();
    for v in values {
        let _ = writeln!(out, "{} {}", v.re, v.im);
    }
    out
}

pub fn parse_complex_values(text: &str, path: &str) -> Result<Vec<C64>> {
    let mut out = Vec::new();
    for (lineno, line) in data_lines(text) {
        let vals = parse_floats(path, lineno, line)?;
        if vals.len() != 2 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected a `re im` pair, got {} tokens", vals.len()),
            ));
        }
        out.push(C64::new(vals[0], vals[1]));
    }
    Ok(out)
}

// --- blocked sequences and weight families -----------------------------

fn blocks_to_string(k: usize, blocks: &[CVec]) -> String {
    let mut out = format!("blocked {k}\n");
    for b in blocks {
        let mut first = true;
        for v in b.iter() {
            push_complex(&mut out, *v, &mut first);
        }
        out.push('\n');
    }
    out
}

fn parse_blocks(text: &str, path: &str) -> Result<(usize, Vec<CVec>)> {
    let mut lines = data_lines(text);
    let (lineno, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 0, "empty document"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("blocked") {
        return Err(parse_err(path, lineno, "expected header `blocked K`"));
    }
    let k: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(path, lineno, "bad dimension in `blocked K` header"))?;
    if toks.next().is_some() {
        return Err(parse_err(path, lineno, "trailing tokens in header"));
    }
    let mut blocks = Vec::new();
    for (lineno, line) in lines {
        let vals = parse_floats(path, lineno, line)?;
        let pairs = pairs_to_complex(path, lineno, &vals, k)?;
        blocks.push(CVec::from_vec(pairs));
    }
    Ok((k, blocks))
}

pub fn blocked_to_string(seq: &BlockedSequence) -> String {
    blocks_to_string(seq.k, &seq.blocks)
}

pub fn parse_blocked(text: &str, path: &str) -> Result<BlockedSequence> {
    let (k, blocks) = parse_blocks(text, path)?;
    BlockedSequence::new(k, blocks)
}

pub fn weights_to_string(w: &FunctionalWeights) -> String {
    blocks_to_string(w.k(), &w.coeffs)
}

pub fn parse_weights(text: &str, path: &str) -> Result<FunctionalWeights> {
    let (k, blocks) = parse_blocks(text, path)?;
    if blocks.is_empty() {
        return Err(parse_err(path, 0, format!("weight file has no blocks (K = {k})")));
    }
    FunctionalWeights::new(blocks)
}

// --- densities ----------------------------------------------------------

pub fn density_to_string(d: &SpectralDensityGrid) -> String {
    let k = d.k();
    let mut out = format!("density {k} {}\n", d.grid_size());
    for m in d.values() {
        let mut first = true;
        for i in 0..k {
            for j in 0..k {
                push_complex(&mut out, m[(i, j)], &mut first);
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_density(text: &str, path: &str) -> Result<SpectralDensityGrid> {
    let mut lines = data_lines(text);
    let (lineno, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 0, "empty document"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("density") {
        return Err(parse_err(path, lineno, "expected header `density K F`"));
    }
    let k: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(path, lineno, "bad dimension in density header"))?;
    let f: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(path, lineno, "bad grid size in density header"))?;
    let mut values = Vec::with_capacity(f);
    for (lineno, line) in lines {
        let vals = parse_floats(path, lineno, line)?;
        let pairs = pairs_to_complex(path, lineno, &vals, k * k)?;
        values.push(CMat::from_row_slice(k, k, &pairs));
    }
    if values.len() != f {
        return Err(parse_err(
            path,
            0,
            format!("density header promises {f} grid points, found {}", values.len()),
        ));
    }
    SpectralDensityGrid::new(values)
}

// --- polynomials ----------------------------------------------------------

pub fn ma_to_string(p: &MatrixMAPolynomial) -> String {
    let mut out = format!("ma {} {} {}\n", p.rows(), p.cols(), p.order());
    for c in p.coeffs() {
        let mut first = true;
        for i in 0..p.rows() {
            for j in 0..p.cols() {
                push_complex(&mut out, c[(i, j)], &mut first);
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_ma(text: &str, path: &str) -> Result<MatrixMAPolynomial> {
    let mut lines = data_lines(text);
    let (lineno, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 0, "empty document"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("ma") {
        return Err(parse_err(path, lineno, "expected header `ma K M L`"));
    }
    let dims: Vec<usize> = toks
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, lineno, format!("bad header field: {e}")))?;
    let [rows, cols, order] = dims[..] else {
        return Err(parse_err(path, lineno, "expected header `ma K M L`"));
    };
    let mut coeffs = Vec::with_capacity(order + 1);
    for (lineno, line) in lines {
        let vals = parse_floats(path, lineno, line)?;
        let pairs = pairs_to_complex(path, lineno, &vals, rows * cols)?;
        coeffs.push(CMat::from_row_slice(rows, cols, &pairs));
    }
    if coeffs.len() != order + 1 {
        return Err(parse_err(
            path,
            0,
            format!("header promises order {order}, found {} coefficients", coeffs.len()),
        ));
    }
    MatrixMAPolynomial::new(coeffs)
}

// --- key-value reports ------------------------------------------------

/// Render report entries; `machine` drops the spaces around `=` and any
/// cosmetic section comments so the output is one `key=value` per line.
pub fn report_to_string(entries: &[(String, String)], machine: bool) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        if k.starts_with('#') {
            if !machine {
                let _ = writeln!(out, "{k}");
            }
            continue;
        }
        if machine {
            let _ = writeln!(out, "{k}={v}");
        } else {
            let _ = writeln!(out, "{k} = {v}");
        }
    }
    out
}

pub fn parse_report(text: &str, path: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in data_lines(text) {
        let Some((k, v)) = line.split_once('=') else {
            return Err(parse_err(path, lineno, "expected `key = value`"));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

// --- file wrappers ------------------------------------------------------

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_complex_values_file(path: &Path) -> Result<Vec<C64>> {
    parse_complex_values(&read_text(path)?, &path.display().to_string())
}

pub fn read_blocked_file(path: &Path) -> Result<BlockedSequence> {
    parse_blocked(&read_text(path)?, &path.display().to_string())
}

pub fn read_weights_file(path: &Path) -> Result<FunctionalWeights> {
    parse_weights(&read_text(path)?, &path.display().to_string())
}

pub fn read_density_file(path: &Path) -> Result<SpectralDensityGrid> {
    parse_density(&read_text(path)?, &path.display().to_string())
}

pub fn read_ma_file(path: &Path) -> Result<MatrixMAPolynomial> {
    parse_ma(&read_text(path)?, &path.display().to_string())
}

pub fn read_report_file(path: &Path) -> Result<Vec<(String, String)>> {
    parse_report(&read_text(path)?, &path.display().to_string())
}
