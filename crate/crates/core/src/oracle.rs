//! Reference oracles the divider is verified against.
//!
//! Two independent routes, deliberately kept apart:
//!
//! * [`platform_divide`] — the host's hardware binary64 division. Correct
//!   result bits, but no portable access to exception flags.
//! * [`reference_divide`] — a from-scratch integer long division with its own
//!   operand decomposition, its own round-to-nearest-even, and full flag
//!   semantics. It shares no code with the unit under test: where the
//!   divider normalizes significands to [1/2, 1) and runs the digit
//!   recurrence, the oracle works on raw integer significands scaled by
//!   bit length and divides with 128-bit integer arithmetic (wide enough
//!   that every intermediate here is exact).
//!
//! Verification campaigns compare the divider against both: bits must match
//! both oracles, flags must match the reference.

use crate::ieee754::Flags;

/// Canonical quiet NaN (matches the divider's canonicalization).
const CANON_NAN: u64 = 0x7FF8_0000_0000_0000;

/// Host hardware division; NaN results canonicalized for comparison.
pub fn platform_divide(a: u64, b: u64) -> u64 {
    let q = f64::from_bits(a) / f64::from_bits(b);
    if q.is_nan() {
        CANON_NAN
    } else {
        q.to_bits()
    }
}

const EXP_MASK: u64 = 0x7FF0_0000_0000_0000;
const FRAC_MASK: u64 = 0x000F_FFFF_FFFF_FFFF;
const SIGN_MASK: u64 = 0x8000_0000_0000_0000;

fn is_nan(w: u64) -> bool {
    w & EXP_MASK == EXP_MASK && w & FRAC_MASK != 0
}

fn is_snan(w: u64) -> bool {
    is_nan(w) && w & (1 << 51) == 0
}

fn is_inf(w: u64) -> bool {
    w & !SIGN_MASK == EXP_MASK
}

fn is_zero(w: u64) -> bool {
    w & !SIGN_MASK == 0
}

/// Integer significand and the power of two scaling it:
/// `|value| = f * 2^e` with `f` an integer (no normalization).
fn decompose(w: u64) -> (u128, i32) {
    let biased = ((w & EXP_MASK) >> 52) as i32;
    let frac = (w & FRAC_MASK) as u128;
    if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1 << 52), biased - 1075)
    }
}

/// Round-to-nearest-even of `q / 2^shift`, with sticky-in; returns the
/// rounded value and whether anything was discarded.
fn rne(q: u128, shift: u32, sticky_in: bool) -> (u128, bool) {
    if shift == 0 {
        return (q, sticky_in);
    }
    let sh = shift.min(127);
    let half = 1u128 << (sh - 1);
    let tail = q & ((half << 1).wrapping_sub(1));
    let keep = q >> sh;
    let inexact = tail != 0 || sticky_in;
    let bump = if tail > half || (tail == half && sticky_in) {
        true
    } else if tail == half {
        keep & 1 == 1
    } else {
        false
    };
    (keep + bump as u128, inexact)
}

/// Independent binary64 division: exact integer long division, then
/// round-to-nearest-even with after-rounding tininess for underflow.
pub fn reference_divide(a: u64, b: u64) -> (u64, Flags) {
    let mut flags = Flags::none();
    let sign = ((a ^ b) & SIGN_MASK) != 0;
    let sign_word = (sign as u64) << 63;

    if is_nan(a) || is_nan(b) {
        flags.invalid = is_snan(a) || is_snan(b);
        return (CANON_NAN, flags);
    }
    if is_inf(a) {
        if is_inf(b) {
            flags.invalid = true;
            return (CANON_NAN, flags);
        }
        return (sign_word | EXP_MASK, flags);
    }
    if is_inf(b) {
        return (sign_word, flags);
    }
    if is_zero(a) {
        if is_zero(b) {
            flags.invalid = true;
            return (CANON_NAN, flags);
        }
        return (sign_word, flags);
    }
    if is_zero(b) {
        flags.divide_by_zero = true;
        return (sign_word | EXP_MASK, flags);
    }

    let (fa, ea) = decompose(a);
    let (fb, eb) = decompose(b);
    let la = 128 - fa.leading_zeros() as i32;
    let lb = 128 - fb.leading_zeros() as i32;

    // scale the dividend so the integer quotient carries 57 or 58 bits
    let s = 57 + lb - la;
    debug_assert!(s > 0);
    let num = fa << s as u32;
    let q = num / fb;
    let sticky = num % fb != 0;
    // value = (q + tail) * 2^e, tail in [0,1), tail > 0 iff sticky
    let e = ea - eb - s;

    let top = 127 - q.leading_zeros() as i32; // exponent of q's leading bit
    let (mut mant, inexact) = rne(q, (top - 52) as u32, sticky);
    let mut exp_unbounded = e + top; // value in [2^exp, 2^{exp+1})
    if mant == 1 << 53 {
        mant >>= 1;
        exp_unbounded += 1;
    }

    if exp_unbounded > 1023 {
        flags.overflow = true;
        flags.inexact = true;
        return (sign_word | EXP_MASK, flags);
    }

    if exp_unbounded < -1022 {
        // tiny after rounding: deliver at the 2^-1074 quantum
        let shift_sub = -(e + 1074);
        debug_assert!(shift_sub > 0);
        let (sub, sub_inexact) = rne(q, (shift_sub as u32).min(127), sticky);
        flags.inexact = sub_inexact;
        flags.underflow = sub_inexact;
        // sub <= 2^52; a value of exactly 2^52 is the smallest normal
        return (sign_word | sub as u64, flags);
    }

    flags.inexact = inexact;
    let biased = (exp_unbounded + 1023) as u64;
    let word = sign_word | (biased << 52) | (mant as u64 & FRAC_MASK);
    (word, flags)
}
