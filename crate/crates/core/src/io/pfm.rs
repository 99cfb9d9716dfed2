//! Portable float map height maps.
//!
//! A map whose mask is all ones is written as greyscale `Pf`; otherwise as
//! `PF` with channels (height, mask, 0). Data is little-endian (negative
//! scale) and rows run bottom to top. Readers accept either endianness.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PixelHeightMap;
use crate::grid::Grid;
use crate::num::Real;

const MAX_DIM: usize = 1 << 15;

pub fn write_pfm<T: Real>(map: &PixelHeightMap<T>, mut out: impl Write) -> Result<()> {
    let (w, h) = map.dims();
    let full = map.mask().as_slice().iter().all(|&m| m == T::one());
    let channels = if full { 1 } else { 3 };
    write!(out, "{}\n{} {}\n-1.0\n", if full { "Pf" } else { "PF" }, w, h)?;
    let mut row = Vec::with_capacity(w * channels * 4);
    for y in (0..h).rev() {
        row.clear();
        for x in 0..w {
            row.extend_from_slice(&(map.value(x, y).to_f64_lossy() as f32).to_le_bytes());
            if !full {
                row.extend_from_slice(&(map.coverage(x, y).to_f64_lossy() as f32).to_le_bytes());
                row.extend_from_slice(&0f32.to_le_bytes());
            }
        }
        out.write_all(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_pfm<T: Real>(input: impl Read, name: &str) -> Result<PixelHeightMap<T>> {
    let bad = |m: String| Error::format(name, m);
    let mut r = BufReader::new(input);
    let mut token = |what: &str| -> Result<String> {
        let mut tok = Vec::new();
        loop {
            let mut b = [0u8];
            if r.read(&mut b)? == 0 {
                return Err(bad(format!("truncated header reading {what}")));
            }
            if b[0].is_ascii_whitespace() {
                if tok.is_empty() {
                    continue;
                }
                return String::from_utf8(tok).map_err(|_| bad(format!("non-ASCII {what}")));
            }
            tok.push(b[0]);
            if tok.len() > 32 {
                return Err(bad(format!("{what} is too long")));
            }
        }
    };
    let channels = match token("magic")?.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(bad(format!("unknown magic {other:?}"))),
    };
    let dim = |s: String, what: &str| -> Result<usize> {
        let v: usize = s.parse().map_err(|_| bad(format!("bad {what} {s:?}")))?;
        if v == 0 || v > MAX_DIM {
            return Err(bad(format!("{what} {v} outside 1..={MAX_DIM}")));
        }
        Ok(v)
    };
    let w = dim(token("width")?, "width")?;
    let h = dim(token("height")?, "height")?;
    let scale_tok = token("scale")?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| bad(format!("bad scale {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("scale must be finite and non-zero".into()));
    }
    let little = scale < 0.0;
    let mut data = vec![0u8; w * h * channels * 4];
    r.read_exact(&mut data)
        .map_err(|_| bad("truncated pixel data".into()))?;
    if !r.fill_buf()?.is_empty() {
        return Err(bad("trailing bytes after pixel data".into()));
    }
    let floats: Vec<f32> = data
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    let at = |x: usize, y: usize, c: usize| floats[((h - 1 - y) * w + x) * channels + c];
    let values = Grid::from_fn(w, h, |x, y| T::of(at(x, y, 0) as f64));
    let mask = if channels == 1 {
        Grid::filled(w, h, T::one())
    } else {
        Grid::from_fn(w, h, |x, y| T::of(at(x, y, 1) as f64))
    };
    PixelHeightMap::new(values, mask).map_err(|e| bad(e.to_string()))
}

pub fn save_pfm<T: Real>(map: &PixelHeightMap<T>, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_pfm(map, std::io::BufWriter::new(f))
}

pub fn load_pfm<T: Real>(path: impl AsRef<Path>) -> Result<PixelHeightMap<T>> {
    let path = path.as_ref();
    read_pfm(std::fs::File::open(path)?, &path.display().to_string())
}
