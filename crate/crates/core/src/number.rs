//! Exact decimal-rational numbers.
//!
//! Every numeric value in a workbook is held as an arbitrary-precision
//! rational. Decimal text such as `0.02` parses to exactly `2/100`; nothing
//! passes through binary floating point.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = num_rational::BigRational;

/// Significant digits used when a non-terminating value must be shown as a
/// decimal (general display only; storage stays exact).
const GENERAL_SIGNIFICANT_DIGITS: usize = 15;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

fn pow10(exp: u32) -> BigInt {
    num_traits::pow(BigInt::from(10u8), exp as usize)
}

/// Parses decimal text (`12`, `-0.02`, `.5`, `1.5E-3`) exactly.
///
/// Returns `None` for anything else, including leading `+`, embedded
/// whitespace, and exponents whose magnitude exceeds 400.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => {
            let exp_text = &body[pos + 1..];
            let digits = exp_text.strip_prefix(['+', '-']).unwrap_or(exp_text);
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let exp: i32 = exp_text.parse().ok()?;
            if exp.abs() > 400 {
                return None;
            }
            (&body[..pos], exp)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let scale = exponent - frac_part.len() as i32;
    let mut value = if scale >= 0 {
        Rational::from_integer(numer * pow10(scale as u32))
    } else {
        Rational::new(numer, pow10((-scale) as u32))
    };
    if negative {
        value = -value;
    }
    Some(value)
}

/// Parses either decimal text or an exact fraction `n/d`.
pub fn parse_exact(text: &str) -> Option<Rational> {
    if let Some((n, d)) = text.split_once('/') {
        let numer: BigInt = n.parse().ok()?;
        let denom: BigInt = d.parse().ok()?;
        if denom.is_zero() || d.starts_with(['-', '+']) || n.starts_with('+') {
            return None;
        }
        return Some(Rational::new(numer, denom));
    }
    parse_decimal(text)
}

/// True when the value has a finite decimal expansion.
pub fn is_terminating(value: &Rational) -> bool {
    let mut denom = value.denom().clone();
    let two = BigInt::from(2u8);
    let five = BigInt::from(5u8);
    while denom.is_even() {
        denom /= &two;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
    }
    denom.is_one()
}

/// Number of decimal places in the exact expansion, if it terminates.
fn terminating_places(value: &Rational) -> Option<u32> {
    if !is_terminating(value) {
        return None;
    }
    let mut places = 0u32;
    let mut scaled = value.clone();
    while !scaled.is_integer() {
        scaled *= int(10);
        places += 1;
    }
    Some(places)
}

/// Exact decimal text for terminating values, `n/d` otherwise.
///
/// This is the lossless serialization used by the interchange formats.
pub fn to_exact_string(value: &Rational) -> String {
    match terminating_places(value) {
        Some(places) => format_fixed(value, places),
        None => format!("{}/{}", value.numer(), value.denom()),
    }
}

/// Rounds to `places` decimals, halves away from zero.
pub fn round_half_away(value: &Rational, places: u32) -> Rational {
    let scale = Rational::from_integer(pow10(places));
    let scaled = value * &scale;
    let magnitude = scaled.abs();
    let floor = magnitude.floor();
    let frac = &magnitude - &floor;
    let mut rounded = floor;
    if frac >= ratio(1, 2) {
        rounded += int(1);
    }
    if scaled.is_negative() {
        rounded = -rounded;
    }
    rounded / scale
}

/// Fixed-decimal text with `places` digits after the point.
///
/// A value that rounds to zero renders without a minus sign.
pub fn format_fixed(value: &Rational, places: u32) -> String {
    let rounded = round_half_away(value, places);
    let scaled = (rounded * Rational::from_integer(pow10(places))).to_integer();
    let negative = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let places = places as usize;
    let text = if places == 0 {
        digits
    } else {
        let padded = format!("{digits:0>width$}", width = places + 1);
        let (int_part, frac_part) = padded.split_at(padded.len() - places);
        format!("{int_part}.{frac_part}")
    };
    if negative {
        format!("-{text}")
    } else {
        text
    }
}

/// Shortest exact decimal for terminating values; non-terminating values are
/// rounded to 15 significant digits with trailing zeros trimmed.
pub fn format_general(value: &Rational) -> String {
    if let Some(places) = terminating_places(value) {
        return format_fixed(value, places);
    }
    let magnitude = value.abs();
    // Position of the leading significant digit relative to the decimal point.
    let mut leading = 0i64;
    if magnitude >= int(1) {
        let digits = magnitude.to_integer().to_string().len() as i64;
        leading = digits;
    } else {
        let mut probe = magnitude.clone();
        while probe < int(1) {
            probe *= int(10);
            leading -= 1;
        }
        leading += 1;
    }
    let places = (GENERAL_SIGNIFICANT_DIGITS as i64 - leading).clamp(0, 400) as u32;
    let text = format_fixed(value, places);
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    }
}

/// Lossy conversion for contexts that need a float (e.g. sampling).
pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}
