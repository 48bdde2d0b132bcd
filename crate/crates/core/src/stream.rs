//! Token-stream files.
//!
//! * text: one sequence per line, tokens separated by single spaces;
//! * binary: magic `STK1`, then per record an unsigned LEB128 token count
//!   followed by that many LEB128 token IDs;
//! * weights sidecar: one line per sequence, space-separated floats.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"STK1";

fn write_varint<W: Write>(w: &mut W, mut v: u64) -> std::io::Result<()> {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            return w.write_all(&[byte]);
        }
        w.write_all(&[byte | 0x80])?;
    }
}

/// `Ok(None)` on clean end of input before the first byte.
fn read_varint<R: Read>(r: &mut R) -> Result<Option<u64>> {
    let mut value = 0u64;
    let mut shift = 0;
    let mut buf = [0u8; 1];
    loop {
        if r.read(&mut buf)? == 0 {
            if shift == 0 {
                return Ok(None);
            }
            return Err(Error::Format("truncated varint".into()));
        }
        if shift >= 64 {
            return Err(Error::Format("varint overflow".into()));
        }
        value |= u64::from(buf[0] & 0x7f) << shift;
        if buf[0] & 0x80 == 0 {
            return Ok(Some(value));
        }
        shift += 7;
    }
}

pub fn write_binary<W: Write>(mut w: W, sequences: &[Vec<u32>]) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    for seq in sequences {
        write_varint(&mut w, seq.len() as u64)?;
        for &id in seq {
            write_varint(&mut w, u64::from(id))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Vec<Vec<u32>>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("missing STK1 header".into()))?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut out = Vec::new();
    while let Some(len) = read_varint(&mut r)? {
        let mut seq = Vec::with_capacity(len.min(1 << 20) as usize);
        for _ in 0..len {
            let id = read_varint(&mut r)?
                .ok_or_else(|| Error::Format("record ends early".into()))?;
            let id = u32::try_from(id).map_err(|_| Error::Format(format!("id {id} too large")))?;
            seq.push(id);
        }
        out.push(seq);
    }
    Ok(out)
}

/// Writes one line per sequence.
pub fn write_lines<W: Write, S: AsRef<str>>(mut w: W, lines: &[Vec<S>]) -> Result<()> {
    for line in lines {
        let mut first = true;
        for tok in line {
            if !first {
                w.write_all(b" ")?;
            }
            w.write_all(tok.as_ref().as_bytes())?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads whitespace-separated tokens, one sequence per non-blank line.
pub fn read_lines<R: BufRead>(r: R) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(line.split_whitespace().map(str::to_string).collect());
    }
    Ok(out)
}

/// Reads one sequence of integer IDs per non-blank line.
pub fn read_id_lines<R: BufRead>(r: R) -> Result<Vec<Vec<u32>>> {
    read_lines(r)?
        .into_iter()
        .map(|line| {
            line.iter()
                .map(|t| {
                    t.parse::<u32>()
                        .map_err(|_| Error::Format(format!("`{t}` is not a token id")))
                })
                .collect()
        })
        .collect()
}

pub fn write_weights<W: Write>(w: W, weights: &[Vec<f64>]) -> Result<()> {
    let lines: Vec<Vec<String>> = weights
        .iter()
        .map(|ws| ws.iter().map(|x| x.to_string()).collect())
        .collect();
    write_lines(w, &lines)
}

pub fn read_weights<R: BufRead>(r: R) -> Result<Vec<Vec<f64>>> {
    read_lines(r)?
        .into_iter()
        .map(|line| {
            line.iter()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::Format(format!("`{t}` is not a weight")))
                })
                .collect()
        })
        .collect()
}
