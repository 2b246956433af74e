//! Scalar abstraction shared by the voting and theory code.
//!
//! Vote tallies, weights and the population-objective calculators are written
//! once against [`Scalar`] and instantiated for `f32`, `f64` and exact
//! rationals ([`num_rational::Rational64`]). The exact instantiation is what
//! makes tie-sensitive identities (pooled voting, strict assumption checks)
//! hold bit for bit.

use std::fmt::Debug;

use num_rational::Rational64;
use num_traits::{CheckedDiv, CheckedMul, FromPrimitive, Num, ToPrimitive};

pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Slack allowed when validating that a probability vector sums to one.
    /// Zero for exact types.
    fn sum_tolerance() -> Self;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }

    /// `num / den` for small non-negative integers.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }

    fn half() -> Self {
        Self::ratio(1, 2)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn abs_diff(self, other: Self) -> Self {
        if self >= other {
            self - other
        } else {
            other - self
        }
    }

    fn powi(self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl Scalar for f64 {
    fn sum_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn sum_tolerance() -> Self {
        1e-6
    }
}

impl Scalar for u64 {
    fn sum_tolerance() -> Self {
        0
    }
}

impl Scalar for Rational64 {
    fn sum_tolerance() -> Self {
        Rational64::from_integer(0)
    }
}

/// Parses a plain decimal literal (`"0.8"`, `"-1.25e-2"`, `"3"`) into an exact
/// rational. Returns `None` for anything that is not a finite decimal.
pub fn rational_from_decimal(text: &str) -> Option<Rational64> {
    let text = text.trim();
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer: i64 = all.trim_start_matches('0').parse().unwrap_or(0);
    let scale = exponent - frac_part.len() as i32;
    let ten = Rational64::from_integer(10);
    let mut value = Rational64::from_integer(numer);
    if scale >= 0 {
        for _ in 0..scale {
            value = value.checked_mul(&ten)?;
        }
    } else {
        for _ in 0..(-scale) {
            value = value.checked_div(&ten)?;
        }
    }
    Some(if negative { -value } else { value })
}
