//! Corpus statistics over token ID sequences.

use std::collections::HashMap;
use std::io::Write;
use std::ops::Range;

use crate::error::{Error, Result};

/// Most common token at one position and the share of sequences holding it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionMode {
    pub token: u32,
    pub share: f64,
}

/// Per-position mode over equal-length sequences. Ties go to the smaller ID.
pub fn position_modes<S: AsRef<[u32]>>(seqs: &[S]) -> Result<Vec<PositionMode>> {
    let first = seqs.first().ok_or(Error::EmptyInput)?.as_ref().len();
    for (index, s) in seqs.iter().enumerate() {
        if s.as_ref().len() != first {
            return Err(Error::RaggedInput {
                index,
                expected: first,
                actual: s.as_ref().len(),
            });
        }
    }
    let n = seqs.len() as f64;
    let mut counts: HashMap<u32, usize> = HashMap::new();
    Ok((0..first)
        .map(|pos| {
            counts.clear();
            for s in seqs {
                *counts.entry(s.as_ref()[pos]).or_default() += 1;
            }
            let (token, c) = counts
                .iter()
                .map(|(&t, &c)| (t, c))
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .expect("at least one sequence");
            PositionMode {
                token,
                share: c as f64 / n,
            }
        })
        .collect())
}

/// Share of sequences carrying the most common token, per position.
pub fn position_concentration<S: AsRef<[u32]>>(seqs: &[S]) -> Result<Vec<f64>> {
    Ok(position_modes(seqs)?.into_iter().map(|m| m.share).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageHistogram {
    pub codes: Range<u32>,
    /// `counts[i]` is the count of code `codes.start + i`.
    pub counts: Vec<u64>,
}

impl UsageHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn used(&self) -> usize {
        self.counts.iter().filter(|c| **c > 0).count()
    }

    /// Fraction of the code range seen at least once.
    pub fn used_fraction(&self) -> f64 {
        if self.counts.is_empty() {
            0.0
        } else {
            self.used() as f64 / self.counts.len() as f64
        }
    }

    pub fn count(&self, code: u32) -> u64 {
        if self.codes.contains(&code) {
            self.counts[(code - self.codes.start) as usize]
        } else {
            0
        }
    }
}

pub fn usage_histogram<S: AsRef<[u32]>>(seqs: &[S], codes: Range<u32>) -> Result<UsageHistogram> {
    let mut counts = vec![0u64; codes.len()];
    for s in seqs {
        for &c in s.as_ref() {
            if !codes.contains(&c) {
                return Err(Error::OutOfRange {
                    value: c as i64,
                    min: codes.start as i64,
                    max: codes.end as i64,
                });
            }
            counts[(c - codes.start) as usize] += 1;
        }
    }
    Ok(UsageHistogram { codes, counts })
}

pub fn write_concentration_csv<W: Write>(mut w: W, shares: &[f64]) -> Result<()> {
    writeln!(w, "position,share")?;
    for (i, s) in shares.iter().enumerate() {
        writeln!(w, "{i},{s}")?;
    }
    Ok(())
}

pub fn write_usage_csv<W: Write>(mut w: W, hist: &UsageHistogram) -> Result<()> {
    writeln!(w, "code,count")?;
    for (code, c) in hist.codes.clone().zip(&hist.counts) {
        writeln!(w, "{code},{c}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_sequences() {
        let seqs = vec![vec![4, 5, 6]; 3];
        assert_eq!(position_concentration(&seqs).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn distinct_tokens_give_one_over_k() {
        let seqs: Vec<Vec<u32>> = (0..4).map(|i| vec![i, 9]).collect();
        assert_eq!(position_concentration(&seqs).unwrap(), vec![0.25, 1.0]);
        assert_eq!(position_modes(&seqs).unwrap()[0].token, 0);
    }

    #[test]
    fn tie_goes_to_smaller_id() {
        let seqs = vec![vec![7], vec![3], vec![7], vec![3]];
        assert_eq!(position_modes(&seqs).unwrap()[0].token, 3);
    }

    #[test]
    fn ragged_and_empty() {
        let seqs = vec![vec![1, 2], vec![1]];
        assert!(matches!(
            position_concentration(&seqs),
            Err(Error::RaggedInput { index: 1, expected: 2, actual: 1 })
        ));
        assert!(matches!(position_concentration::<Vec<u32>>(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn histogram_counts() {
        let h = usage_histogram(&[vec![0, 0, 1]], 0..8).unwrap();
        assert_eq!((h.count(0), h.count(1), h.count(2)), (2, 1, 0));
        assert_eq!(h.used_fraction(), 2.0 / 8.0);
        let empty = usage_histogram::<Vec<u32>>(&[], 0..8).unwrap();
        assert_eq!(empty.counts, vec![0; 8]);
        assert!(matches!(
            usage_histogram(&[vec![8]], 0..8),
            Err(Error::OutOfRange { value: 8, .. })
        ));
    }

    #[test]
    fn csv_output() {
        let mut buf = Vec::new();
        write_concentration_csv(&mut buf, &[1.0, 0.5]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "position,share\n0,1\n1,0.5\n");
        let mut buf = Vec::new();
        write_usage_csv(&mut buf, &usage_histogram(&[vec![10, 11, 11]], 10..12).unwrap()).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "code,count\n10,1\n11,2\n");
    }

    proptest! {
        #[test]
        fn shares_bounded_and_totals_match(seqs in prop::collection::vec(prop::collection::vec(0u32..16, 5), 1..20)) {
            let n = seqs.len() as f64;
            for s in position_concentration(&seqs).unwrap() {
                prop_assert!(s > 0.0 && s <= 1.0 && s >= 1.0 / n - 1e-15);
            }
            let h = usage_histogram(&seqs, 0..16).unwrap();
            prop_assert_eq!(h.total(), (seqs.len() * 5) as u64);
        }
    }
}
