//! Uniform binning of coordinates into canonical fixed-decimal number tokens.
//!
//! Every value is held as an integer count of `10^-decimals` units so that
//! printing and parsing never go through binary floating point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

const MAX_DECIMALS: u32 = 9;

/// User-facing quantizer settings, as read from config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub granularity: f64,
    pub range_min: f64,
    pub range_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "QuantizerSpec", into = "QuantizerSpec")]
pub struct QuantizerConfig {
    decimals: u32,
    step_units: i64,
    min_units: i64,
    max_units: i64,
}

impl TryFrom<QuantizerSpec> for QuantizerConfig {
    type Error = Error;

    fn try_from(s: QuantizerSpec) -> Result<Self> {
        QuantizerConfig::new(s.granularity, s.range_min, s.range_max)
    }
}

impl From<QuantizerConfig> for QuantizerSpec {
    fn from(c: QuantizerConfig) -> Self {
        QuantizerSpec {
            granularity: c.granularity(),
            range_min: c.range_min(),
            range_max: c.range_max(),
        }
    }
}

fn decimals_for(granularity: f64) -> Option<u32> {
    (0..=MAX_DECIMALS).find(|&k| {
        let scaled = granularity * 10f64.powi(k as i32);
        (scaled - scaled.round()).abs() <= 1e-9 * scaled.abs().max(1.0)
    })
}

impl QuantizerConfig {
    /// Builds a config; the range bounds must be multiples of `granularity`.
    pub fn new(granularity: f64, range_min: f64, range_max: f64) -> Result<Self> {
        if !(granularity.is_finite() && granularity > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "granularity must be positive, got {granularity}"
            )));
        }
        if !range_min.is_finite() || !range_max.is_finite() || range_min > range_max {
            return Err(Error::InvalidConfig(format!(
                "invalid range [{range_min}, {range_max}]"
            )));
        }
        let decimals = decimals_for(granularity).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "granularity {granularity} needs more than {MAX_DECIMALS} decimals"
            ))
        })?;
        let scale = 10f64.powi(decimals as i32);
        let step_units = (granularity * scale).round() as i64;
        let to_units = |v: f64| -> Result<i64> {
            let u = v * scale;
            let r = u.round();
            if (u - r).abs() > 1e-6 || r.abs() > 1e15 {
                return Err(Error::InvalidConfig(format!(
                    "range bound {v} is not printable with {decimals} decimals"
                )));
            }
            let r = r as i64;
            if r % step_units != 0 {
                return Err(Error::InvalidConfig(format!(
                    "range bound {v} is not a multiple of {granularity}"
                )));
            }
            Ok(r)
        };
        Ok(QuantizerConfig {
            decimals,
            step_units,
            min_units: to_units(range_min)?,
            max_units: to_units(range_max)?,
        })
    }

    /// 0.05 granularity over [-8, 8].
    pub fn clevr() -> Self {
        Self::new(0.05, -8.0, 8.0).expect("valid default")
    }

    /// 0.05 granularity over [-10, 10], used for camera-frame datasets.
    pub fn camera() -> Self {
        Self::new(0.05, -10.0, 10.0).expect("valid default")
    }

    pub fn decimals(&self) -> u32 {
        self.decimals
    }

    fn scale(&self) -> f64 {
        10f64.powi(self.decimals as i32)
    }

    pub fn granularity(&self) -> f64 {
        self.step_units as f64 / self.scale()
    }

    pub fn range_min(&self) -> f64 {
        self.min_units as f64 / self.scale()
    }

    pub fn range_max(&self) -> f64 {
        self.max_units as f64 / self.scale()
    }

    /// Number of bins, i.e. the size of [`numeric_vocab`](Self::numeric_vocab).
    pub fn len(&self) -> usize {
        ((self.max_units - self.min_units) / self.step_units) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn format_units(&self, units: i64) -> String {
        let neg = units < 0;
        let abs = units.unsigned_abs();
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        if self.decimals == 0 {
            out.push_str(&abs.to_string());
        } else {
            let scale = 10u64.pow(self.decimals);
            out.push_str(&(abs / scale).to_string());
            out.push('.');
            out.push_str(&format!(
                "{:0width$}",
                abs % scale,
                width = self.decimals as usize
            ));
        }
        out
    }

    fn parse_units(&self, tok: &str) -> Option<i64> {
        let (neg, body) = match tok.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, tok),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty()
            || frac_part.len() != self.decimals as usize
            || (self.decimals > 0) != body.contains('.')
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || (int_part.len() > 1 && int_part.starts_with('0'))
        {
            return None;
        }
        let scale = 10i64.pow(self.decimals);
        let i: i64 = int_part.parse().ok()?;
        let f: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().ok()? };
        let abs = i.checked_mul(scale)?.checked_add(f)?;
        if neg && abs == 0 {
            return None;
        }
        Some(if neg { -abs } else { abs })
    }

    /// Bin ordinal (0-based from `range_min`) of `x`, clamping out-of-range
    /// values and rounding ties away from zero.
    pub fn quantize_index<T: Real>(&self, x: T) -> Result<usize> {
        let v = x.as_f64();
        if !v.is_finite() {
            return Err(Error::NonFinite(v));
        }
        let v = v.clamp(self.range_min(), self.range_max());
        let q = v / self.granularity();
        let frac = q.abs().fract();
        // x/g lands a few ulps off an exact half for decimal ties like 0.075/0.05
        let bins = if (frac - 0.5).abs() <= 1e-12 * q.abs().max(1.0) {
            q.trunc() + q.signum()
        } else {
            q.round()
        };
        let units = (bins as i64 * self.step_units).clamp(self.min_units, self.max_units);
        Ok(((units - self.min_units) / self.step_units) as usize)
    }

    /// Canonical token of the nearest bin to `x`.
    pub fn quantize<T: Real>(&self, x: T) -> Result<String> {
        Ok(self.token_at(self.quantize_index(x)?))
    }

    /// Snaps `x` onto the grid, returning the exact value its token denotes.
    pub fn snap<T: Real>(&self, x: T) -> Result<T> {
        Ok(self.value_at(self.quantize_index(x)?))
    }

    /// Token for bin ordinal `index`. Panics if `index >= len()`.
    pub fn token_at(&self, index: usize) -> String {
        assert!(index < self.len(), "bin {index} out of range");
        self.format_units(self.min_units + index as i64 * self.step_units)
    }

    /// Value for bin ordinal `index`, equal to the decimal literal of its token.
    pub fn value_at<T: Real>(&self, index: usize) -> T {
        T::of(
            self.token_at(index)
                .parse::<f64>()
                .expect("canonical tokens parse"),
        )
    }

    /// Bin ordinal of a canonical token.
    pub fn index_of(&self, tok: &str) -> Result<usize> {
        let units = self
            .parse_units(tok)
            .filter(|u| {
                *u >= self.min_units
                    && *u <= self.max_units
                    && (u - self.min_units) % self.step_units == 0
            })
            .ok_or_else(|| Error::UnknownToken(tok.to_string()))?;
        Ok(((units - self.min_units) / self.step_units) as usize)
    }

    pub fn is_token(&self, tok: &str) -> bool {
        self.index_of(tok).is_ok()
    }

    /// Exact decimal value of a canonical token.
    pub fn dequantize<T: Real>(&self, tok: &str) -> Result<T> {
        let index = self.index_of(tok)?;
        Ok(self.value_at(index))
    }

    /// All tokens from `range_min` to `range_max`, ascending.
    pub fn numeric_vocab(&self) -> Vec<String> {
        (0..self.len()).map(|i| self.token_at(i)).collect()
    }
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self::clevr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g05() -> QuantizerConfig {
        QuantizerConfig::clevr()
    }

    #[test]
    fn rounds_to_nearest_bin() {
        let q = g05();
        assert_eq!(q.quantize(-0.551).unwrap(), "-0.55");
        assert_eq!(q.quantize(0.0).unwrap(), "0.00");
        assert_eq!(q.quantize(0.70).unwrap(), "0.70");
        assert_eq!(q.quantize(0.05_f32).unwrap(), "0.05");
        assert_eq!(q.quantize(-0.0).unwrap(), "0.00");
    }

    #[test]
    fn ties_round_away_from_zero() {
        let q = g05();
        assert_eq!(q.quantize(0.025).unwrap(), "0.05");
        assert_eq!(q.quantize(-0.025).unwrap(), "-0.05");
        assert_eq!(q.quantize(0.075).unwrap(), "0.10");
        assert_eq!(q.quantize(-1.125).unwrap(), "-1.15");
    }

    #[test]
    fn clamps_out_of_range() {
        let q = g05();
        assert_eq!(q.quantize(100.0).unwrap(), "8.00");
        assert_eq!(q.quantize(-8.3).unwrap(), "-8.00");
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(g05().quantize(f64::NAN), Err(Error::NonFinite(_))));
        assert!(matches!(
            g05().quantize(f64::INFINITY),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn decimals_follow_granularity() {
        assert_eq!(QuantizerConfig::new(0.5, -1.0, 1.0).unwrap().decimals(), 1);
        assert_eq!(g05().decimals(), 2);
        assert_eq!(QuantizerConfig::new(0.005, -1.0, 1.0).unwrap().decimals(), 3);
        assert_eq!(QuantizerConfig::new(1.0, -3.0, 3.0).unwrap().decimals(), 0);
    }

    #[test]
    fn coarse_vocab_enumerates() {
        let q = QuantizerConfig::new(0.5, -1.0, 1.0).unwrap();
        assert_eq!(q.numeric_vocab(), vec!["-1.0", "-0.5", "0.0", "0.5", "1.0"]);
    }

    #[test]
    fn default_vocab_count_matches_closed_form() {
        // (16 / 0.05) + 1
        let v = g05().numeric_vocab();
        assert_eq!(v.len(), 321);
        assert_eq!(v.first().unwrap(), "-8.00");
        assert_eq!(v.last().unwrap(), "8.00");
    }

    #[test]
    fn degenerate_range_has_one_token() {
        let q = QuantizerConfig::new(0.05, 1.0, 1.0).unwrap();
        assert_eq!(q.numeric_vocab(), vec!["1.00"]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(QuantizerConfig::new(0.0, -1.0, 1.0).is_err());
        assert!(QuantizerConfig::new(0.05, 1.0, -1.0).is_err());
        assert!(QuantizerConfig::new(0.5, -1.25, 1.0).is_err());
    }

    #[test]
    fn dequantize_parses_canonical_only() {
        let q = g05();
        assert_eq!(q.dequantize::<f64>("-0.55").unwrap(), -0.55);
        for bad in ["0.050", "+0.05", "-0.00", "00.05", "0.07", "9.00", "1e-2", "", "-", ".05"] {
            assert!(
                matches!(q.dequantize::<f64>(bad), Err(Error::UnknownToken(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn every_token_is_a_fixed_point() {
        let q = g05();
        for tok in q.numeric_vocab() {
            let v: f64 = q.dequantize(&tok).unwrap();
            assert_eq!(q.quantize(v).unwrap(), tok);
        }
    }

    #[test]
    fn spec_roundtrips_through_serde() {
        let q = QuantizerConfig::new(0.005, -2.0, 2.0).unwrap();
        let json = serde_json::to_string(&q).unwrap();
        assert_eq!(json, r#"{"granularity":0.005,"range_min":-2.0,"range_max":2.0}"#);
        let back: QuantizerConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, q);
    }

    proptest! {
        #[test]
        fn error_bounded_by_half_bin(x in -8.0f64..=8.0) {
            let q = g05();
            let back: f64 = q.dequantize(&q.quantize(x).unwrap()).unwrap();
            prop_assert!((x - back).abs() <= 0.025 + 1e-12);
        }

        #[test]
        fn monotone(a in -9.0f64..9.0, b in -9.0f64..9.0) {
            let q = g05();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(q.quantize_index(lo).unwrap() <= q.quantize_index(hi).unwrap());
        }
    }
}
