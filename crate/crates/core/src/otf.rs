//! On-the-fly conversion of signed radix-4 digits to conventional binary.
//!
//! A signed digit stream cannot be assimilated with plain shifts because a
//! negative digit would require borrow propagation across everything already
//! accumulated. The classic fix keeps two registers:
//!
//! * `A` — the converted value of the digits so far;
//! * `B` — always exactly `A` minus one unit in the last place.
//!
//! Appending a digit then only ever shifts one of the two registers and ors
//! in a nonnegative 2-bit field; no carries, no borrows:
//!
//! ```text
//! A' = 4A + q        (q >= 0)      B' = 4A + (q-1)    (q >= 1)
//! A' = 4B + (4+q)    (q <  0)      B' = 4B + (3+q)    (q <= 0)
//! ```
//!
//! The final correction picks `B` instead of `A` when the last partial
//! remainder is negative.
//!
//! Registers are unsigned, which is only sound when the running value never
//! goes negative; the first digit must therefore be at least 1 (guaranteed
//! here because the recurrence starts from a normalized dividend).

use thiserror::Error;

use crate::fixedpoint::{FixedPoint, FixedPointError};
use crate::qds::QDigit;

#[derive(Debug, Error)]
pub enum OtfError {
    #[error("first quotient digit must be >= 1, got {0}")]
    LeadingDigit(i8),
    #[error("quotient register full after {0} digits")]
    CapacityExceeded(u32),
    #[error(transparent)]
    Fixed(#[from] FixedPointError),
}

/// Maximum digits a 128-bit register pair can hold (2 bits per digit).
pub const MAX_DIGITS: u32 = 64;

/// The register pair of the converter, after `k` appended digits.
/// `a` holds the converted prefix scaled by `4^k`; `b` is always `a - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OtfState {
    a: u128,
    b: u128,
    k: u32,
}

impl Default for OtfState {
    fn default() -> Self {
        Self::new()
    }
}

impl OtfState {
    pub fn new() -> Self {
        OtfState { a: 0, b: 0, k: 0 }
    }

    pub fn a(&self) -> u128 {
        self.a
    }

    pub fn b(&self) -> u128 {
        self.b
    }

    /// Number of digits appended so far.
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Shifts one more digit into the register pair.
    pub fn append(&mut self, q: QDigit) -> Result<(), OtfError> {
        if self.k >= MAX_DIGITS {
            return Err(OtfError::CapacityExceeded(self.k));
        }
        let qv = q.value() as i32;
        if self.k == 0 && qv < 1 {
            return Err(OtfError::LeadingDigit(q.value()));
        }
        let (a, b) = (self.a, self.b);
        self.a = if qv >= 0 {
            4 * a + qv as u128
        } else {
            4 * b + (4 + qv) as u128
        };
        self.b = if qv >= 1 {
            4 * a + (qv - 1) as u128
        } else {
            4 * b + (3 + qv) as u128
        };
        self.k += 1;
        Ok(())
    }

    /// The converted quotient: `A`, or `B` when the final partial remainder
    /// is negative (the digit string overshot by one ulp).
    pub fn finalize(&self, remainder_negative: bool) -> u128 {
        if remainder_negative {
            self.b
        } else {
            self.a
        }
    }

    /// The accumulated value `a / 4^k` as an exact fixed-point number.
    pub fn to_fixed(&self, frac_bits: u32) -> Result<FixedPoint, OtfError> {
        let shift = frac_bits
            .checked_sub(2 * self.k)
            .ok_or(OtfError::CapacityExceeded(self.k))?;
        let raw = i128::try_from(self.a)
            .ok()
            .and_then(|v| v.checked_shl(shift))
            .ok_or(OtfError::CapacityExceeded(self.k))?;
        Ok(FixedPoint::new(raw, frac_bits)?)
    }

    /// `A` as a zero-padded binary string, two bits per digit.
    pub fn a_bits(&self) -> String {
        bits_string(self.a, self.k)
    }

    /// `B` as a zero-padded binary string, two bits per digit.
    pub fn b_bits(&self) -> String {
        bits_string(self.b, self.k)
    }
}

fn bits_string(x: u128, k: u32) -> String {
    let width = (2 * k) as usize;
    if width == 0 {
        return String::new();
    }
    format!("{x:0width$b}")
}
