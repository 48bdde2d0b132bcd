//! Center-token reordering of raster image token sequences.
//!
//! The reordered sequence starts at the middle raster index and then hops
//! alternately one step further left and right until both sides run out.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HopOrder {
    #[default]
    LeftFirst,
    RightFirst,
}

/// `perm[k]` is the raster index placed at reordered position `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReorderPlan {
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

/// Plan for `length` tokens with center `length / 2`, hopping left first.
pub fn center_plan(length: usize) -> ReorderPlan {
    ReorderPlan::center(length, HopOrder::LeftFirst)
}

impl ReorderPlan {
    pub fn center(length: usize, hops: HopOrder) -> Self {
        assert!(length >= 1, "plan length must be positive");
        let c = length / 2;
        let mut perm = Vec::with_capacity(length);
        perm.push(c);
        for step in 1..=c.max(length - c) {
            let left = c.checked_sub(step);
            let right = (c + step < length).then_some(c + step);
            let (a, b) = match hops {
                HopOrder::LeftFirst => (left, right),
                HopOrder::RightFirst => (right, left),
            };
            perm.extend(a);
            perm.extend(b);
        }
        Self::from_perm(perm).expect("center walk is a permutation")
    }

    /// Wraps an arbitrary permutation of `0..perm.len()`.
    pub fn from_perm(perm: Vec<usize>) -> Result<Self> {
        let mut inverse = vec![usize::MAX; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            if p >= perm.len() || inverse[p] != usize::MAX {
                return Err(Error::InvalidConfig(format!(
                    "not a permutation: index {p} at position {k}"
                )));
            }
            inverse[p] = k;
        }
        Ok(ReorderPlan { perm, inverse })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    fn check<T>(&self, tokens: &[T]) -> Result<()> {
        if tokens.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: tokens.len(),
            });
        }
        Ok(())
    }

    /// Raster order to reordered.
    pub fn apply<T: Clone>(&self, tokens: &[T]) -> Result<Vec<T>> {
        self.check(tokens)?;
        Ok(self.perm.iter().map(|&p| tokens[p].clone()).collect())
    }

    /// Reordered back to raster order.
    pub fn invert<T: Clone>(&self, tokens: &[T]) -> Result<Vec<T>> {
        self.check(tokens)?;
        Ok(self.inverse.iter().map(|&k| tokens[k].clone()).collect())
    }
}
