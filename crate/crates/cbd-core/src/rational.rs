//! Exact rational scalars.
//!
//! Every probability and expectation in this crate is a [`Rat`], an
//! arbitrary-precision rational. Input files may write probabilities as
//! decimal strings or as fractions; both are converted exactly, so two
//! documents writing `"0.5"` and `"1/2"` produce bit-identical values.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational number.
pub type Rat = BigRational;

/// Builds a rational from small integers. Panics if `den == 0`.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RationalError {
    #[error("malformed rational literal {literal:?}")]
    Malformed { literal: String },
    #[error("zero denominator in {literal:?}")]
    ZeroDenominator { literal: String },
    #[error("probability {value} out of [0, 1]")]
    OutOfRange { value: String },
}

fn malformed(s: &str) -> RationalError {
    RationalError::Malformed {
        literal: s.to_string(),
    }
}

/// Parses a rational literal: an integer (`"2"`), a fraction (`"a/b"`), or
/// a decimal (`"0.25"`). Decimals convert exactly: k digits after the
/// point become a denominator of 10^k.
pub fn parse_rat(s: &str) -> Result<Rat, RationalError> {
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s),
    };
    if body.is_empty() {
        return Err(malformed(s));
    }
    let magnitude = if let Some((num, den)) = body.split_once('/') {
        let num = parse_digits(num).ok_or_else(|| malformed(s))?;
        let den = parse_digits(den).ok_or_else(|| malformed(s))?;
        if den.is_zero() {
            return Err(RationalError::ZeroDenominator {
                literal: s.to_string(),
            });
        }
        Rat::new(num, den)
    } else if let Some((int_part, frac_part)) = body.split_once('.') {
        // "0.25" -> 25/100; an empty integer part (".5") is accepted.
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(malformed(s));
        }
        let int_part = if int_part.is_empty() {
            BigInt::zero()
        } else {
            parse_digits(int_part).ok_or_else(|| malformed(s))?
        };
        let frac_digits = frac_part.len() as u32;
        let frac_part = if frac_part.is_empty() {
            BigInt::zero()
        } else {
            parse_digits(frac_part).ok_or_else(|| malformed(s))?
        };
        let scale = BigInt::from(10u32).pow(frac_digits);
        Rat::new(int_part * &scale + frac_part, scale)
    } else {
        Rat::from_integer(parse_digits(body).ok_or_else(|| malformed(s))?)
    };
    Ok(if sign < 0 { -magnitude } else { magnitude })
}

fn parse_digits(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(s).ok()
}

/// Canonical string form: `"a/b"` in lowest terms, or a bare integer when
/// the denominator is 1.
pub fn format_rat(r: &Rat) -> String {
    r.to_string()
}

/// An exact probability, a rational confined to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Probability(Rat);

impl Probability {
    pub fn new(value: Rat) -> Result<Self, RationalError> {
        if value.is_negative() || value > Rat::one() {
            return Err(RationalError::OutOfRange {
                value: format_rat(&value),
            });
        }
        Ok(Probability(value))
    }

    pub fn zero() -> Self {
        Probability(Rat::zero())
    }

    pub fn one() -> Self {
        Probability(Rat::one())
    }

    /// Parses a probability literal, enforcing the `[0, 1]` range.
    pub fn parse(s: &str) -> Result<Self, RationalError> {
        Probability::new(parse_rat(s)?)
    }

    pub fn as_rat(&self) -> &Rat {
        &self.0
    }

    pub fn into_rat(self) -> Rat {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
