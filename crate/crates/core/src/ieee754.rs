//! IEEE-754 binary64 division on top of the radix-4 recurrence.
//!
//! Operands are unpacked and classified; special cases (zeros, infinities,
//! NaNs) resolve per IEEE rules without touching the core. For finite
//! nonzero operands both significands are normalized to [1/2, 1), the
//! recurrence runs 29 iterations (58 quotient bits: 53 significand bits, a
//! normalization bit, and rounding margin), the on-the-fly fix-up yields
//! exactly `floor(ratio * 2^56)`, and the nonzero-remainder sticky plus
//! round-to-nearest-even deliver the correctly rounded quotient, including
//! gradual underflow.
//!
//! Exception flags follow the non-trapping defaults: `invalid` for 0/0,
//! inf/inf, or signaling NaN operands; `divide_by_zero` for finite nonzero
//! over zero; `underflow` on tininess (after rounding) plus inexactness.
//! NaN results are canonicalized to one quiet pattern.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::fixedpoint::FixedPoint;
use crate::qds::{DigitSelector, Policy};
use crate::srt::{run_divide_with, CycleTrace, SrtConfig};

/// The canonical quiet NaN this implementation returns.
pub const QNAN: u64 = 0x7FF8_0000_0000_0000;

/// Iterations of the radix-4 core per divide.
pub const CORE_ITERS: u32 = 29;

#[derive(Debug, Error)]
pub enum FlagParseError {
    #[error("unknown flag name '{0}'")]
    UnknownFlag(String),
}

/// IEEE-754 exception flags (non-trapping, accumulated per operation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub invalid: bool,
    pub divide_by_zero: bool,
    pub overflow: bool,
    pub underflow: bool,
    pub inexact: bool,
}

impl Flags {
    pub fn none() -> Self {
        Flags::default()
    }

    pub fn is_empty(&self) -> bool {
        *self == Flags::default()
    }

    fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.invalid {
            out.push("invalid");
        }
        if self.divide_by_zero {
            out.push("divide_by_zero");
        }
        if self.overflow {
            out.push("overflow");
        }
        if self.underflow {
            out.push("underflow");
        }
        if self.inexact {
            out.push("inexact");
        }
        out
    }
}

impl fmt::Display for Flags {
    /// Comma-joined canonical names; `-` when no flag is raised.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.names();
        if names.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

impl FromStr for Flags {
    type Err = FlagParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut flags = Flags::none();
        if s == "-" || s.is_empty() {
            return Ok(flags);
        }
        for name in s.split(',') {
            match name.trim() {
                "invalid" => flags.invalid = true,
                "divide_by_zero" => flags.divide_by_zero = true,
                "overflow" => flags.overflow = true,
                "underflow" => flags.underflow = true,
                "inexact" => flags.inexact = true,
                other => return Err(FlagParseError::UnknownFlag(other.to_string())),
            }
        }
        Ok(flags)
    }
}

impl Serialize for Flags {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Encoding class of a binary64 word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FpClass {
    Zero,
    Subnormal,
    Normal,
    Infinity,
    Nan,
}

/// Decoded fields of a binary64 word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Float64Parts {
    pub sign: bool,
    pub biased_exp: u16,
    pub fraction: u64,
    pub class: FpClass,
}

/// Splits a word into (sign, exponent, fraction) and classifies it.
pub fn unpack(bits: u64) -> Float64Parts {
    let sign = bits >> 63 != 0;
    let biased_exp = ((bits >> 52) & 0x7FF) as u16;
    let fraction = bits & ((1u64 << 52) - 1);
    let class = match (biased_exp, fraction) {
        (0, 0) => FpClass::Zero,
        (0, _) => FpClass::Subnormal,
        (0x7FF, 0) => FpClass::Infinity,
        (0x7FF, _) => FpClass::Nan,
        _ => FpClass::Normal,
    };
    Float64Parts {
        sign,
        biased_exp,
        fraction,
        class,
    }
}

/// Reassembles a word from decoded fields (inverse of [`unpack`] on
/// canonical encodings).
pub fn pack(parts: &Float64Parts) -> u64 {
    debug_assert!(parts.biased_exp <= 0x7FF);
    debug_assert!(parts.fraction < (1u64 << 52));
    ((parts.sign as u64) << 63) | ((parts.biased_exp as u64) << 52) | parts.fraction
}

fn is_signaling_nan(parts: &Float64Parts) -> bool {
    parts.class == FpClass::Nan && parts.fraction >> 51 == 0
}

fn inf_bits(sign: bool) -> u64 {
    ((sign as u64) << 63) | (0x7FFu64 << 52)
}

fn zero_bits(sign: bool) -> u64 {
    (sign as u64) << 63
}

/// Significand normalized to a 53-bit integer in [2^52, 2^53) — read as a
/// fixed-point value in [1/2, 1) — plus the power of two such that
/// `value = (mant / 2^53) * 2^e`.
fn normalize_significand(parts: &Float64Parts) -> (u64, i32) {
    match parts.class {
        FpClass::Normal => (
            (1u64 << 52) | parts.fraction,
            parts.biased_exp as i32 - 1022,
        ),
        FpClass::Subnormal => {
            let shift = parts.fraction.leading_zeros() - 11;
            ((parts.fraction << shift), -1021 - shift as i32)
        }
        _ => unreachable!("only finite nonzero operands are normalized"),
    }
}

/// Round-to-nearest-even of `n / 2^shift` with an extra sticky-in.
/// Returns (rounded, inexact). `shift` must be >= 1; shifts past the word
/// treat everything as sticky.
fn round_shift_rne(n: u128, shift: u32, sticky_in: bool) -> (u128, bool) {
    let sh = shift.min(63);
    let keep = n >> sh;
    let round_bit = (n >> (sh - 1)) & 1 != 0;
    let low_mask = (1u128 << (sh - 1)) - 1;
    let sticky = (n & low_mask) != 0 || sticky_in;
    let inexact = round_bit || sticky;
    let bump = round_bit && (sticky || keep & 1 == 1);
    (keep + bump as u128, inexact)
}

/// Division of the two magnitudes (finite, nonzero): returns magnitude bits
/// (sign cleared), flags, and the per-cycle trace when requested.
fn divide_finite(
    a: &Float64Parts,
    b: &Float64Parts,
    selector: &DigitSelector,
    record_trace: bool,
) -> (u64, Flags, Vec<CycleTrace>) {
    let mut flags = Flags::none();
    let (mant_x, e_x) = normalize_significand(a);
    let (mant_d, e_d) = normalize_significand(b);
    let delta = e_x - e_d;

    let x = FixedPoint::new(mant_x as i128, 53).expect("53-bit significand");
    let d = FixedPoint::new(mant_d as i128, 53).expect("53-bit significand");
    let mut cfg = SrtConfig::new(CORE_ITERS, selector.policy()).expect("fixed iteration count");
    if !record_trace {
        cfg = cfg.without_trace();
    }
    let result = run_divide_with(&x, &d, &cfg, selector)
        .expect("normalized operands cannot fail the recurrence");

    // quotient_bits = floor(ratio * 2^56) for ratio = mant_x/mant_d in (1/2, 2)
    let n = result.quotient_bits;
    let sticky = !result.is_exact();
    let cycles = result.cycles;

    // 53-bit round with unbounded exponent: binade picks the shift
    let ratio_ge_one = n >= 1u128 << 56;
    let shift = if ratio_ge_one { 4 } else { 3 };
    let mut unbiased = if ratio_ge_one { delta } else { delta - 1 };
    let (mut mant, inexact) = round_shift_rne(n, shift, sticky);
    if mant == 1u128 << 53 {
        mant = 1u128 << 52;
        unbiased += 1;
    }

    if unbiased > 1023 {
        flags.overflow = true;
        flags.inexact = true;
        return (inf_bits(false), flags, cycles);
    }

    if unbiased >= -1022 {
        flags.inexact = inexact;
        let parts = Float64Parts {
            sign: false,
            biased_exp: (unbiased + 1023) as u16,
            fraction: (mant as u64) & ((1u64 << 52) - 1),
            class: FpClass::Normal,
        };
        return (pack(&parts), flags, cycles);
    }

    // tiny after rounding: re-round the exact quotient at the subnormal
    // quantum 2^-1074; value = (n + sticky-tail) * 2^(delta - 56)
    let sub_shift = (-(delta) - 1018).max(1) as u32;
    let (sub_mant, sub_inexact) = round_shift_rne(n, sub_shift, sticky);
    flags.inexact = sub_inexact;
    flags.underflow = sub_inexact;
    let (biased_exp, fraction) = if sub_mant == 1u128 << 52 {
        (1u16, 0u64) // carried all the way up to the smallest normal
    } else {
        (0u16, sub_mant as u64)
    };
    let parts = Float64Parts {
        sign: false,
        biased_exp,
        fraction,
        class: if biased_exp == 0 {
            if fraction == 0 {
                FpClass::Zero
            } else {
                FpClass::Subnormal
            }
        } else {
            FpClass::Normal
        },
    };
    (pack(&parts), flags, cycles)
}

fn fdiv_impl(
    a: u64,
    b: u64,
    selector: &DigitSelector,
    record_trace: bool,
) -> (u64, Flags, Vec<CycleTrace>) {
    let pa = unpack(a);
    let pb = unpack(b);
    let mut flags = Flags::none();
    let sign = (a ^ b) >> 63 != 0;

    if pa.class == FpClass::Nan || pb.class == FpClass::Nan {
        flags.invalid = is_signaling_nan(&pa) || is_signaling_nan(&pb);
        return (QNAN, flags, Vec::new());
    }
    match (pa.class, pb.class) {
        (FpClass::Infinity, FpClass::Infinity) => {
            flags.invalid = true;
            (QNAN, flags, Vec::new())
        }
        (FpClass::Infinity, _) => (inf_bits(sign), flags, Vec::new()),
        (_, FpClass::Infinity) => (zero_bits(sign), flags, Vec::new()),
        (FpClass::Zero, FpClass::Zero) => {
            flags.invalid = true;
            (QNAN, flags, Vec::new())
        }
        (FpClass::Zero, _) => (zero_bits(sign), flags, Vec::new()),
        (_, FpClass::Zero) => {
            flags.divide_by_zero = true;
            (inf_bits(sign), flags, Vec::new())
        }
        _ => {
            let (magnitude, flags, cycles) = divide_finite(&pa, &pb, selector, record_trace);
            (magnitude | ((sign as u64) << 63), flags, cycles)
        }
    }
}

/// IEEE-754 binary64 division with the given digit selector.
pub fn fdiv_with(a: u64, b: u64, selector: &DigitSelector) -> (u64, Flags) {
    let (bits, flags, _) = fdiv_impl(a, b, selector, false);
    (bits, flags)
}

/// As [`fdiv_with`], also returning the per-cycle recurrence trace
/// (empty when an operand is special and the recurrence never runs).
pub fn fdiv_traced(a: u64, b: u64, selector: &DigitSelector) -> (u64, Flags, Vec<CycleTrace>) {
    fdiv_impl(a, b, selector, true)
}

/// IEEE-754 binary64 division under the given correction policy.
pub fn fdiv_policy(a: u64, b: u64, policy: Policy) -> (u64, Flags) {
    fdiv_with(a, b, &DigitSelector::new(policy))
}

/// IEEE-754 binary64 division (default exact-comparison policy).
pub fn fdiv(a: u64, b: u64) -> (u64, Flags) {
    fdiv_policy(a, b, Policy::Exact)
}
