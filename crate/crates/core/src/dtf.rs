//! DTF dense-tensor files and MSK mask files.
//!
//! Both start with one ASCII header line, `DTF1 <N> <I_1> .. <I_N>\n` (or
//! `MSK1 ..`), followed by the entries in first-index-fastest order: raw
//! little-endian `f64` for DTF, one `0`/`1` byte per entry for MSK.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::tensor::{DenseTensor, Shape};

const DTF_MAGIC: &str = "DTF1";
const MSK_MAGIC: &str = "MSK1";

fn header(magic: &str, shape: &Shape) -> String {
    let mut h = format!("{magic} {}", shape.order());
    for d in shape.dims() {
        h.push(' ');
        h.push_str(&d.to_string());
    }
    h.push('\n');
    h
}

pub fn write_dtf<W: Write>(mut w: W, t: &DenseTensor) -> Result<()> {
    w.write_all(header(DTF_MAGIC, t.shape()).as_bytes())?;
    let mut buf = Vec::with_capacity(t.numel() * 8);
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_mask<W: Write>(mut w: W, mask: &IndexSet) -> Result<()> {
    w.write_all(header(MSK_MAGIC, mask.shape()).as_bytes())?;
    let mut bytes = vec![0u8; mask.shape().numel()];
    for &k in mask.linear() {
        bytes[k] = 1;
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Parses a header line and returns `(magic, shape)`.
pub fn read_header<R: BufRead>(r: &mut R) -> Result<(String, Shape)> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("missing header line".into()));
    }
    let text = std::str::from_utf8(&line[..line.len() - 1])
        .map_err(|_| Error::Format("header is not ASCII".into()))?;
    let mut parts = text.split_ascii_whitespace();
    let magic = parts
        .next()
        .ok_or_else(|| Error::Format("empty header".into()))?
        .to_string();
    if magic != DTF_MAGIC && magic != MSK_MAGIC {
        return Err(Error::Format(format!("unknown magic {magic:?}")));
    }
    let order: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("bad order field".into()))?;
    let dims: Vec<usize> = parts
        .map(|s| s.parse().map_err(|_| Error::Format(format!("bad extent {s:?}"))))
        .collect::<Result<_>>()?;
    if dims.len() != order {
        return Err(Error::Format(format!(
            "header declares order {order} but lists {} extents",
            dims.len()
        )));
    }
    Ok((magic, Shape::new(dims)?))
}

pub fn read_dtf<R: Read>(r: R) -> Result<DenseTensor> {
    let mut r = BufReader::new(r);
    let (magic, shape) = read_header(&mut r)?;
    if magic != DTF_MAGIC {
        return Err(Error::Format(format!("expected {DTF_MAGIC}, found {magic}")));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != shape.numel() * 8 {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            shape.numel() * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    DenseTensor::from_vec(shape, data)
}

pub fn read_mask<R: Read>(r: R) -> Result<IndexSet> {
    let mut r = BufReader::new(r);
    let (magic, shape) = read_header(&mut r)?;
    if magic != MSK_MAGIC {
        return Err(Error::Format(format!("expected {MSK_MAGIC}, found {magic}")));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != shape.numel() {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            shape.numel()
        )));
    }
    let mut linear = Vec::new();
    for (k, &b) in bytes.iter().enumerate() {
        match b {
            0 => {}
            1 => linear.push(k),
            other => return Err(Error::Format(format!("mask byte {k} is {other}"))),
        }
    }
    IndexSet::from_linear(shape, linear)
}

pub fn save_dtf(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let mut buf = Vec::new();
    write_dtf(&mut buf, t)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_dtf(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_dtf(fs::File::open(path)?)
}

pub fn save_mask(path: impl AsRef<Path>, mask: &IndexSet) -> Result<()> {
    let mut buf = Vec::new();
    write_mask(&mut buf, mask)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<IndexSet> {
    read_mask(fs::File::open(path)?)
}

/// Reads only the header of a DTF or MSK file.
pub fn peek_header(path: impl AsRef<Path>) -> Result<(String, Shape)> {
    let mut r = BufReader::new(fs::File::open(path)?);
    read_header(&mut r)
}
