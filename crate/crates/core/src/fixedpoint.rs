//! Exact two's-complement fixed-point arithmetic.
//!
//! Every partial remainder, divisor, and selection constant in the divider is
//! a [`FixedPoint`]: a scaled `i128` holding `raw / 2^frac_bits`. All
//! operations are exact — mixed-precision operands are aligned to the wider
//! fractional format before combining, and any result that would exceed the
//! configured range is a hard [`FixedPointError::Overflow`], never a silent
//! wraparound. A wrap here would masquerade as a digit-selection bug one
//! layer up, so the substrate refuses to produce one.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Integer bits (sign excluded) used when a width is not given explicitly.
/// Four bits comfortably hold the shifted partial remainder, which stays
/// inside (-8/3, 8/3).
pub const DEFAULT_INT_BITS: u32 = 4;

/// Fractional bits used by the division engine unless configured otherwise.
/// 64 bits leave headroom for 29 radix-4 iterations on 53-bit significands
/// with no truncation anywhere in the recurrence.
pub const DEFAULT_FRAC_BITS: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FixedPointError {
    #[error("fixed-point overflow in {op} (int_bits={int_bits}, frac_bits={frac_bits})")]
    Overflow {
        op: &'static str,
        int_bits: u32,
        frac_bits: u32,
    },
    #[error("fractional precision {frac_bits} bits is not representable in 128-bit raw storage")]
    PrecisionTooHigh { frac_bits: u32 },
}

/// An exact two's-complement fixed-point value: `raw / 2^frac_bits`.
///
/// `int_bits` counts integer bits excluding the sign; the representable range
/// is `|value| <= 2^int_bits - 2^-frac_bits`. Equality and ordering compare
/// *values*, so `1/2` at two fractional bits equals `2/4` at four.
#[derive(Debug, Clone, Copy)]
pub struct FixedPoint {
    raw: i128,
    frac_bits: u32,
    int_bits: u32,
}

impl FixedPoint {
    /// Builds `raw / 2^frac_bits` with the default integer width.
    pub fn new(raw: i128, frac_bits: u32) -> Result<Self, FixedPointError> {
        Self::with_int_bits(raw, frac_bits, DEFAULT_INT_BITS)
    }

    /// Builds `raw / 2^frac_bits` with an explicit integer width.
    pub fn with_int_bits(
        raw: i128,
        frac_bits: u32,
        int_bits: u32,
    ) -> Result<Self, FixedPointError> {
        if frac_bits > 124 {
            return Err(FixedPointError::PrecisionTooHigh { frac_bits });
        }
        let fp = FixedPoint {
            raw,
            frac_bits,
            int_bits,
        };
        fp.check_range("make")?;
        Ok(fp)
    }

    /// Zero at the requested precision.
    pub fn zero(frac_bits: u32) -> Self {
        FixedPoint {
            raw: 0,
            frac_bits,
            int_bits: DEFAULT_INT_BITS,
        }
    }

    /// Exact integer value `n`.
    pub fn from_int(n: i128) -> Result<Self, FixedPointError> {
        Self::new(n, 0)
    }

    pub fn raw(&self) -> i128 {
        self.raw
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn int_bits(&self) -> u32 {
        self.int_bits
    }

    pub fn is_zero(&self) -> bool {
        self.raw == 0
    }

    pub fn is_negative(&self) -> bool {
        self.raw < 0
    }

    /// Largest representable |raw| for this width, saturated to `i128::MAX`
    /// when the configured width exceeds the storage width.
    fn raw_bound(&self) -> i128 {
        let total = self.int_bits as u64 + self.frac_bits as u64;
        if total >= 127 {
            i128::MAX
        } else {
            (1i128 << total) - 1
        }
    }

    fn check_range(&self, op: &'static str) -> Result<(), FixedPointError> {
        if self.raw == i128::MIN || self.raw.abs() > self.raw_bound() {
            Err(FixedPointError::Overflow {
                op,
                int_bits: self.int_bits,
                frac_bits: self.frac_bits,
            })
        } else {
            Ok(())
        }
    }

    /// Rescales to `frac_bits >= self.frac_bits` without changing the value.
    pub fn align_to(&self, frac_bits: u32) -> Result<Self, FixedPointError> {
        if frac_bits < self.frac_bits {
            // Narrowing could drop bits; the substrate never rounds.
            return Err(FixedPointError::Overflow {
                op: "align (narrowing)",
                int_bits: self.int_bits,
                frac_bits,
            });
        }
        if frac_bits > 124 {
            return Err(FixedPointError::PrecisionTooHigh { frac_bits });
        }
        let shift = frac_bits - self.frac_bits;
        let raw = self
            .raw
            .checked_shl(shift)
            .filter(|r| r >> shift == self.raw)
            .ok_or(FixedPointError::Overflow {
                op: "align",
                int_bits: self.int_bits,
                frac_bits,
            })?;
        Ok(FixedPoint {
            raw,
            frac_bits,
            int_bits: self.int_bits,
        })
    }

    fn aligned_raws(&self, other: &Self) -> Result<(i128, i128, u32), FixedPointError> {
        let f = self.frac_bits.max(other.frac_bits);
        Ok((self.align_to(f)?.raw, other.align_to(f)?.raw, f))
    }

    /// Exact sum; the result carries `max` of the operand precisions.
    pub fn add(&self, other: &Self) -> Result<Self, FixedPointError> {
        let (a, b, f) = self.aligned_raws(other)?;
        let fp = FixedPoint {
            raw: a.checked_add(b).ok_or(FixedPointError::Overflow {
                op: "add",
                int_bits: self.int_bits.max(other.int_bits),
                frac_bits: f,
            })?,
            frac_bits: f,
            int_bits: self.int_bits.max(other.int_bits),
        };
        fp.check_range("add")?;
        Ok(fp)
    }

    /// Exact difference; same alignment rule as [`FixedPoint::add`].
    pub fn sub(&self, other: &Self) -> Result<Self, FixedPointError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        FixedPoint {
            raw: -self.raw,
            frac_bits: self.frac_bits,
            int_bits: self.int_bits,
        }
    }

    pub fn abs(&self) -> Self {
        FixedPoint {
            raw: self.raw.abs(),
            frac_bits: self.frac_bits,
            int_bits: self.int_bits,
        }
    }

    /// Exact product by a small integer (quotient digits are -2..2); the
    /// precision is unchanged, so the result is reached by shift/negate only.
    pub fn mul_small(&self, m: i128) -> Result<Self, FixedPointError> {
        let fp = FixedPoint {
            raw: self.raw.checked_mul(m).ok_or(FixedPointError::Overflow {
                op: "mul_small",
                int_bits: self.int_bits,
                frac_bits: self.frac_bits,
            })?,
            frac_bits: self.frac_bits,
            int_bits: self.int_bits,
        };
        fp.check_range("mul_small")?;
        Ok(fp)
    }

    /// Exact radix shift: multiply by 4.
    pub fn shl2(&self) -> Result<Self, FixedPointError> {
        let fp = FixedPoint {
            raw: self
                .raw
                .checked_shl(2)
                .filter(|r| r >> 2 == self.raw)
                .ok_or(FixedPointError::Overflow {
                    op: "shl2",
                    int_bits: self.int_bits,
                    frac_bits: self.frac_bits,
                })?,
            frac_bits: self.frac_bits,
            int_bits: self.int_bits,
        };
        fp.check_range("shl2")?;
        Ok(fp)
    }

    /// Exact full product: precisions and integer widths add.
    pub fn mul(&self, other: &Self) -> Result<Self, FixedPointError> {
        let frac_bits = self.frac_bits + other.frac_bits;
        if frac_bits > 124 {
            return Err(FixedPointError::PrecisionTooHigh { frac_bits });
        }
        let int_bits = self.int_bits + other.int_bits;
        let fp = FixedPoint {
            raw: self
                .raw
                .checked_mul(other.raw)
                .ok_or(FixedPointError::Overflow {
                    op: "mul",
                    int_bits,
                    frac_bits,
                })?,
            frac_bits,
            int_bits,
        };
        fp.check_range("mul")?;
        Ok(fp)
    }

    /// Compares `m * self` against `n * other` exactly.
    ///
    /// This is how every rational threshold in the selection logic is tested
    /// without ever dividing: `|p| <= (2/3) d` becomes `3|p| <= 2d`.
    ///
    /// Panics if the scaled comparison cannot be carried out in 128-bit
    /// arithmetic; the divider's widths keep all scaled raws far below that.
    pub fn scaled_cmp(&self, m: i128, other: &Self, n: i128) -> Ordering {
        let (a, b, _) = self
            .aligned_raws(other)
            .expect("scaled_cmp: operands exceed comparable width");
        let lhs = a.checked_mul(m).expect("scaled_cmp: lhs scale overflow");
        let rhs = b.checked_mul(n).expect("scaled_cmp: rhs scale overflow");
        lhs.cmp(&rhs)
    }

    pub fn cmp_value(&self, other: &Self) -> Ordering {
        self.scaled_cmp(1, other, 1)
    }

    /// Approximate value as `f64`. Lossy for raws wider than 53 bits; used
    /// only where an inexact real is acceptable (fuzzy membership inputs,
    /// human-facing summaries), never inside the recurrence.
    pub fn to_f64(&self) -> f64 {
        self.raw as f64 / 2f64.powi(self.frac_bits as i32)
    }
}

impl PartialEq for FixedPoint {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_value(other) == Ordering::Equal
    }
}

impl Eq for FixedPoint {}

impl PartialOrd for FixedPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp_value(other))
    }
}

impl Ord for FixedPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_value(other)
    }
}

impl fmt::Display for FixedPoint {
    /// Exact decimal rendering. Binary fractions always terminate in
    /// decimal, so no rounding is involved.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = self.raw < 0;
        let mag = self.raw.unsigned_abs();
        let int_part = mag >> self.frac_bits;
        let mut frac = if self.frac_bits == 0 {
            0
        } else {
            mag & ((1u128 << self.frac_bits) - 1)
        };
        if neg && (int_part != 0 || frac != 0) {
            write!(f, "-")?;
        }
        write!(f, "{int_part}")?;
        if frac != 0 {
            write!(f, ".")?;
            // Each step peels one decimal digit: frac < 2^frac_bits and
            // frac_bits <= 124 keeps frac * 10 inside u128.
            while frac != 0 {
                frac *= 10;
                write!(f, "{}", frac >> self.frac_bits)?;
                frac &= (1u128 << self.frac_bits) - 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fp(raw: i128, f: u32) -> FixedPoint {
        FixedPoint::new(raw, f).unwrap()
    }

    #[test]
    fn make_basic_values() {
        assert_eq!(fp(1, 1).to_f64(), 0.5);
        assert_eq!(fp(-1, 1).to_f64(), -0.5);
        assert_eq!(fp(5, 3).to_f64(), 0.625);
    }

    #[test]
    fn add_sub_examples() {
        let half = fp(1, 1);
        assert!(half.add(&half.neg()).unwrap().is_zero());
        assert_eq!(fp(5, 3).sub(&half).unwrap(), fp(1, 3));
        // 2.5 + 2.5 overflows a 2-integer-bit format.
        let x = FixedPoint::with_int_bits(5, 1, 2).unwrap();
        assert!(matches!(
            x.add(&x),
            Err(FixedPointError::Overflow { op: "add", .. })
        ));
    }

    #[test]
    fn mul_small_examples() {
        assert_eq!(
            fp(1, 1).mul_small(2).unwrap(),
            FixedPoint::from_int(1).unwrap()
        );
        assert_eq!(fp(3, 2).mul_small(-1).unwrap(), fp(-3, 2));
        assert!(fp(5, 3).mul_small(0).unwrap().is_zero());
        // +-2 near the range edge overflows.
        let big = FixedPoint::with_int_bits(3, 1, 1).unwrap(); // 1.5 in 1.1 format
        assert!(big.mul_small(2).is_err());
    }

    #[test]
    fn shl2_examples() {
        assert_eq!(fp(1, 3).shl2().unwrap(), fp(1, 1)); // 0.125 -> 0.5
        assert_eq!(fp(-1, 1).shl2().unwrap().to_f64(), -2.0);
        assert_eq!(fp(1, 1).shl2().unwrap().to_f64(), 2.0);
        assert!(fp(4, 0).shl2().is_err()); // 16 exceeds the 4-integer-bit range
    }

    #[test]
    fn alignment_is_exact_and_value_equality_crosses_precisions() {
        assert_eq!(fp(1, 1), fp(2, 2));
        assert_eq!(fp(1, 1).align_to(20).unwrap().raw(), 1 << 19);
        assert!(fp(1, 20).align_to(10).is_err());
    }

    #[test]
    fn scaled_cmp_rational_thresholds() {
        // 3 * 0.5 < 2 * 0.8  <=>  0.5 < (2/3) * 0.8
        let p = fp(1, 1);
        let d = fp(819, 10); // 0.7998...
        assert_eq!(p.scaled_cmp(3, &d, 2), Ordering::Less);
        // equality case: 3 * 0.5 == 2 * 0.75
        let d75 = fp(3, 2);
        assert_eq!(p.scaled_cmp(3, &d75, 2), Ordering::Equal);
    }

    #[test]
    fn display_exact_decimal() {
        assert_eq!(fp(1, 1).to_string(), "0.5");
        assert_eq!(fp(-5, 3).to_string(), "-0.625");
        assert_eq!(fp(0, 7).to_string(), "0");
        assert_eq!(fp(11, 2).to_string(), "2.75");
        assert_eq!(fp(1, 12).to_string(), "0.000244140625");
    }

    #[test]
    fn range_bound_is_symmetric() {
        // |value| <= 2^I - 2^-F: raw magnitude 2^(I+F) must fail, -2^(I+F) too.
        assert!(FixedPoint::with_int_bits(16, 2, 2).is_err());
        assert!(FixedPoint::with_int_bits(-16, 2, 2).is_err());
        assert!(FixedPoint::with_int_bits(15, 2, 2).is_ok());
        assert!(FixedPoint::with_int_bits(-15, 2, 2).is_ok());
    }

    proptest! {
        #[test]
        fn add_then_sub_roundtrips(a in -1_000_000i128..1_000_000, b in -1_000_000i128..1_000_000) {
            let x = fp(a, 20);
            let y = fp(b, 20);
            let back = x.add(&y).unwrap().sub(&y).unwrap();
            prop_assert_eq!(back.raw(), x.raw());
            prop_assert_eq!(back, x);
        }

        #[test]
        fn mul_small_matches_repeated_add(a in -100_000i128..100_000, f in 15u32..24) {
            let x = fp(a, f);
            prop_assert_eq!(x.mul_small(2).unwrap(), x.add(&x).unwrap());
            for q in -2i128..=2 {
                let pos = x.mul_small(q).unwrap();
                let neg = FixedPoint::zero(f).sub(&x.mul_small(-q).unwrap()).unwrap();
                prop_assert_eq!(pos, neg);
            }
        }

        #[test]
        fn shl2_is_double_double(a in -50_000i128..50_000) {
            let x = fp(a, 20);
            let via_mul = x.mul_small(2).unwrap().mul_small(2).unwrap();
            prop_assert_eq!(x.shl2().unwrap(), via_mul);
        }

        #[test]
        fn mixed_precision_add_is_exact(a in -4_000i128..4_000, fa in 10u32..30, b in -4_000i128..4_000, fb in 10u32..30) {
            let x = fp(a, fa);
            let y = fp(b, fb);
            let s = x.add(&y).unwrap();
            prop_assert_eq!(s.frac_bits(), fa.max(fb));
            // exactness against wide integer arithmetic
            let f = fa.max(fb);
            let expect = (a << (f - fa)) + (b << (f - fb));
            prop_assert_eq!(s.raw(), expect);
        }

        #[test]
        fn display_roundtrips_through_value(a in -1_000_000i128..1_000_000, f in 17u32..30) {
            let x = fp(a, f);
            let s = x.to_string();
            // the decimal string re-parses to the same rational
            let negative = s.starts_with('-');
            let body = s.trim_start_matches('-');
            let (ip, fp_digits) = match body.split_once('.') {
                Some((i, d)) => (i, d),
                None => (body, ""),
            };
            let mut num: i128 = ip.parse().unwrap();
            let mut denom_pow10 = 0u32;
            for c in fp_digits.chars() {
                num = num * 10 + (c as u8 - b'0') as i128;
                denom_pow10 += 1;
            }
            if negative {
                num = -num;
            }
            // value == num / 10^denom_pow10  <=>  raw * 10^k == num * 2^f
            let lhs = (a as f64) / 2f64.powi(f as i32);
            let rhs = (num as f64) / 10f64.powi(denom_pow10 as i32);
            prop_assert!((lhs - rhs).abs() < 1e-9_f64.min(lhs.abs() * 1e-12 + 1e-15));
        }
    }
}
