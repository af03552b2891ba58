//! Plain-text signal files and binary 8-bit PGM images.
//!
//! A signal file holds one `re,im` pair per line; blank lines and lines
//! starting with `#` are skipped.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Result, SprError};
use crate::signal::ComplexSignal;

pub fn parse_signal(text: &str) -> Result<ComplexSignal> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || SprError::Format(format!("line {}: expected 're,im', got '{line}'", lineno + 1));
        let mut parts = line.split(',');
        let re = parts.next().ok_or_else(bad)?.trim().parse::<f64>().map_err(|_| bad())?;
        let im = match parts.next() {
            Some(p) => p.trim().parse::<f64>().map_err(|_| bad())?,
            None => 0.0,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        values.push(Complex64::new(re, im));
    }
    ComplexSignal::new(values).map_err(|e| SprError::Format(e.to_string()))
}

pub fn read_signal(path: &Path) -> Result<ComplexSignal> {
    parse_signal(&std::fs::read_to_string(path)?)
}

pub fn write_signal<W: Write>(mut out: W, x: &ComplexSignal) -> Result<()> {
    for v in x.iter() {
        writeln!(out, "{:e},{:e}", v.re, v.im)?;
    }
    Ok(())
}

/// Grey image with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

fn pgm_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let c = byte[0];
        if c == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(c as char);
    }
    if tok.is_empty() {
        return Err(SprError::Format("truncated PGM header".into()));
    }
    Ok(tok)
}

pub fn read_pgm<R: BufRead>(mut r: R) -> Result<GrayImage> {
    if pgm_token(&mut r)? != "P5" {
        return Err(SprError::Format("not a binary PGM (P5) file".into()));
    }
    let mut number = |what: &str| -> Result<usize> {
        pgm_token(&mut r)?
            .parse::<usize>()
            .map_err(|_| SprError::Format(format!("bad PGM {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if width == 0 || height == 0 {
        return Err(SprError::Format("PGM has zero size".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(SprError::Format(format!("unsupported PGM maxval {maxval}")));
    }
    let mut raw = vec![0u8; width * height];
    r.read_exact(&mut raw)
        .map_err(|_| SprError::Format("PGM pixel data is truncated".into()))?;
    Ok(GrayImage {
        width,
        height,
        pixels: raw.iter().map(|&b| b as f64 / maxval as f64).collect(),
    })
}

pub fn load_pgm(path: &Path) -> Result<GrayImage> {
    read_pgm(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Writes `values` scaled so the largest maps to 255.
pub fn write_pgm<W: Write>(mut out: W, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(SprError::Dimension {
            expected: width * height,
            found: values.len(),
        });
    }
    let peak = values.iter().cloned().fold(0.0, f64::max);
    write!(out, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = values
        .iter()
        .map(|&v| {
            if peak > 0.0 {
                (v / peak * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    out.write_all(&bytes)?;
    Ok(())
}
