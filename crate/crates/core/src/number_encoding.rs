//! Fixed sine-cosine encodings for numeric tokens and their combination
//! with learned embeddings.
//!
//! Row `pos` of a table encodes the number token with ordinal `pos` in the
//! quantizer's ascending vocabulary:
//!
//! ```text
//! table[pos][2i]     = sin(pos / 10000^(2i/d))
//! table[pos][2i + 1] = cos(pos / 10000^(2i/d))
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::quantizer::QuantizerConfig;

pub const TABLE_MAGIC: &[u8; 4] = b"NENC";

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingTable<T> {
    values: Array2<T>,
}

impl<T: Real> EncodingTable<T> {
    pub fn n_positions(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    /// Writes the table as `NENC`, n, d (u64 LE), then row-major f64 LE.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(TABLE_MAGIC)?;
        w.write_u64::<LittleEndian>(self.n_positions() as u64)?;
        w.write_u64::<LittleEndian>(self.dim() as u64)?;
        for v in self.values.iter() {
            w.write_f64::<LittleEndian>(v.as_f64())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TABLE_MAGIC {
            return Err(Error::Format(format!("bad table magic {magic:?}")));
        }
        let n = r.read_u64::<LittleEndian>()? as usize;
        let d = r.read_u64::<LittleEndian>()? as usize;
        let count = n
            .checked_mul(d)
            .ok_or_else(|| Error::Format("table too large".into()))?;
        let mut data = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            data.push(T::of(r.read_f64::<LittleEndian>()?));
        }
        let values = Array2::from_shape_vec((n, d), data)
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(EncodingTable { values })
    }
}

/// Builds the `n x d` sine-cosine table.
pub fn sincos_table<T: Real>(n: usize, d: usize) -> Result<EncodingTable<T>> {
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::OddDimension(d));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("table needs at least one position".into()));
    }
    let base = T::of(10_000.0);
    let inv_freq: Vec<T> = (0..d / 2)
        .map(|i| base.powf(T::of((2 * i) as f64 / d as f64)).recip())
        .collect();
    let values = Array2::from_shape_fn((n, d), |(pos, col)| {
        let angle = T::of(pos as f64) * inv_freq[col / 2];
        if col % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    });
    Ok(EncodingTable { values })
}

/// Table with one row per token of `cfg`'s numeric vocabulary.
pub fn number_table<T: Real>(cfg: &QuantizerConfig, d: usize) -> Result<EncodingTable<T>> {
    sincos_table(cfg.len(), d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncodingMode {
    Fixed,
    Learned,
    #[default]
    Hybrid,
}

/// Final number embeddings: the fixed table, the learned matrix, or their sum.
pub fn combine<T: Real>(
    learned: &Array2<T>,
    fixed: &EncodingTable<T>,
    mode: EncodingMode,
) -> Result<Array2<T>> {
    if learned.dim() != fixed.values.dim() {
        return Err(Error::ShapeMismatch {
            expected: fixed.values.dim(),
            actual: learned.dim(),
        });
    }
    Ok(match mode {
        EncodingMode::Fixed => fixed.values.clone(),
        EncodingMode::Learned => learned.clone(),
        EncodingMode::Hybrid => learned + &fixed.values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_row_alternates_zero_one() {
        let t = sincos_table::<f64>(4, 8).unwrap();
        for col in 0..8 {
            assert_eq!(t.values()[[0, col]], if col % 2 == 0 { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn second_row_first_column_is_sin_one() {
        let t = sincos_table::<f64>(2, 4).unwrap();
        assert_abs_diff_eq!(t.values()[[1, 0]], 0.8414709848, epsilon = 1e-10);
        let t = sincos_table::<f32>(2, 4).unwrap();
        assert_abs_diff_eq!(t.values()[[1, 0]], 0.841_470_96, epsilon = 1e-6);
    }

    #[test]
    fn dimension_must_be_even() {
        assert!(matches!(sincos_table::<f64>(3, 5), Err(Error::OddDimension(5))));
        assert!(matches!(sincos_table::<f64>(3, 0), Err(Error::OddDimension(0))));
    }

    #[test]
    fn entries_bounded() {
        let t = sincos_table::<f64>(500, 32).unwrap();
        assert!(t.values().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn rows_distinct_over_ten_thousand_positions() {
        let t = sincos_table::<f64>(10_000, 64).unwrap();
        let mut rows: Vec<Vec<u64>> = t
            .values()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.to_bits()).collect())
            .collect();
        rows.sort();
        rows.dedup();
        assert_eq!(rows.len(), 10_000);
    }

    #[test]
    fn combine_modes() {
        let fixed = sincos_table::<f64>(3, 4).unwrap();
        let zeros = Array2::<f64>::zeros((3, 4));
        assert_eq!(combine(&zeros, &fixed, EncodingMode::Hybrid).unwrap(), fixed.values);
        let learned = Array2::from_shape_fn((3, 4), |(r, c)| (r * 4 + c) as f64);
        assert_eq!(combine(&learned, &fixed, EncodingMode::Learned).unwrap(), learned);
        assert_eq!(combine(&learned, &fixed, EncodingMode::Fixed).unwrap(), fixed.values);
        let diff = combine(&learned, &fixed, EncodingMode::Hybrid).unwrap() - &learned;
        for (a, b) in diff.iter().zip(fixed.values.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(matches!(
            combine(&Array2::zeros((2, 4)), &fixed, EncodingMode::Hybrid),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn table_file_roundtrip() {
        let t = number_table::<f64>(&QuantizerConfig::clevr(), 16).unwrap();
        assert_eq!(t.n_positions(), 321);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"NENC");
        assert_eq!(buf.len(), 4 + 16 + 321 * 16 * 8);
        assert_eq!(EncodingTable::<f64>::read_from(&buf[..]).unwrap(), t);
    }
}
