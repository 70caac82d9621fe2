//! Two's-complement fixed-point arithmetic with result truncation.
//!
//! The approximate datapath is modeled by zeroing the `truncation` low bits of
//! every approximable operation's result. Values are held as raw `i64`
//! integers scaled by `2^fraction_bits`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointFormat {
    pub total_bits: u32,
    pub fraction_bits: u32,
    /// Low bits dropped from each approximable result in approximate mode.
    pub truncation: u32,
}

impl Default for FixedPointFormat {
    /// Q8.8 with four truncated bits.
    fn default() -> Self {
        Self {
            total_bits: 16,
            fraction_bits: 8,
            truncation: 4,
        }
    }
}

impl FixedPointFormat {
    pub fn new(total_bits: u32, fraction_bits: u32, truncation: u32) -> Result<Self> {
        let fmt = Self {
            total_bits,
            fraction_bits,
            truncation,
        };
        fmt.validate()?;
        Ok(fmt)
    }

    pub fn validate(&self) -> Result<()> {
        // Products of two raw values must fit in i64.
        if !(2..=31).contains(&self.total_bits) {
            return Err(Error::InvalidParameter(format!(
                "total_bits must be in 2..=31, got {}",
                self.total_bits
            )));
        }
        if self.fraction_bits >= self.total_bits {
            return Err(Error::InvalidParameter(format!(
                "fraction_bits {} must be below total_bits {}",
                self.fraction_bits, self.total_bits
            )));
        }
        if self.truncation >= self.total_bits {
            return Err(Error::InvalidParameter(format!(
                "truncation {} must be below total_bits {}",
                self.truncation, self.total_bits
            )));
        }
        Ok(())
    }

    pub fn with_truncation(self, truncation: u32) -> Self {
        Self { truncation, ..self }
    }

    /// Weight of the least significant bit.
    pub fn ulp(&self) -> f64 {
        (-(self.fraction_bits as f64)).exp2()
    }

    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    pub fn min_raw(&self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    /// Clamps to the representable range; the flag reports whether clamping
    /// happened.
    pub fn saturate(&self, raw: i64) -> (i64, bool) {
        if raw > self.max_raw() {
            (self.max_raw(), true)
        } else if raw < self.min_raw() {
            (self.min_raw(), true)
        } else {
            (raw, false)
        }
    }

    /// Rounds a real value to the nearest representable raw value.
    pub fn quantize(&self, x: f64) -> (i64, bool) {
        let scaled = (x * (self.fraction_bits as f64).exp2()).round();
        if scaled >= self.max_raw() as f64 {
            (self.max_raw(), scaled > self.max_raw() as f64)
        } else if scaled <= self.min_raw() as f64 {
            (self.min_raw(), scaled < self.min_raw() as f64)
        } else {
            (scaled as i64, false)
        }
    }

    pub fn to_real(&self, raw: i64) -> f64 {
        raw as f64 * self.ulp()
    }

    /// Fixed-point product, rounded toward negative infinity.
    pub fn mul_raw(&self, a: i64, b: i64) -> i64 {
        (a * b) >> self.fraction_bits
    }

    /// Zeroes the low `truncation` bits.
    pub fn truncate(&self, raw: i64) -> i64 {
        if self.truncation == 0 {
            raw
        } else {
            raw & !((1i64 << self.truncation) - 1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q8_8_limits() {
        let f = FixedPointFormat::default();
        assert_eq!(f.max_raw(), 32767);
        assert_eq!(f.min_raw(), -32768);
        assert_eq!(f.ulp(), 1.0 / 256.0);
    }

    #[test]
    fn rejects_bad_formats() {
        assert!(FixedPointFormat::new(16, 16, 0).is_err());
        assert!(FixedPointFormat::new(16, 8, 16).is_err());
        assert!(FixedPointFormat::new(40, 8, 0).is_err());
        assert!(FixedPointFormat::new(12, 4, 3).is_ok());
    }

    #[test]
    fn quantize_saturates() {
        let f = FixedPointFormat::default();
        assert_eq!(f.quantize(1000.0), (32767, true));
        assert_eq!(f.quantize(-1000.0), (-32768, true));
        assert_eq!(f.quantize(0.5), (128, false));
    }

    #[test]
    fn truncation_rounds_down() {
        let f = FixedPointFormat::default();
        assert_eq!(f.truncate(0b1011_0111), 0b1011_0000);
        assert_eq!(f.truncate(-1), -16);
        assert_eq!(f.with_truncation(0).truncate(-1), -1);
    }

    #[test]
    fn product_floors() {
        let f = FixedPointFormat::default();
        // 1.5 * 1.5 = 2.25
        assert_eq!(f.mul_raw(384, 384), 576);
        // -ulp * ulp floors to -ulp
        assert_eq!(f.mul_raw(-1, 1), -1);
    }
}
