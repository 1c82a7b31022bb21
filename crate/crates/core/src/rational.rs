//! Exact rational arithmetic helpers.
//!
//! All schedule/timing arithmetic in this crate is exact; floats never enter
//! the library. Decimal literals (from source files or solver models) are
//! converted digit-by-digit to rationals.

use num::bigint::BigInt;
use num::rational::Ratio;
use num::{One, Signed, ToPrimitive, Zero};

pub type Q = Ratio<BigInt>;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn q0() -> Q {
    Q::zero()
}

pub fn q1() -> Q {
    Q::one()
}

/// Parse a numeric literal: `3`, `-5`, `0.265625`, `1/8`, `-1/3`.
/// Decimal forms convert exactly (denominator a power of ten).
pub fn parse_rational(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().ok()?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let num: BigInt = frac.parse().ok()?;
        let den = BigInt::from(10u8).pow(frac.len() as u32);
        let frac_part = Q::new(num, den);
        let int_part = Q::from_integer(int);
        return Some(if neg { int_part - frac_part } else { int_part + frac_part });
    }
    let n: BigInt = s.parse().ok()?;
    Some(Q::from_integer(n))
}

/// Print exactly: finite decimal expansion when the denominator is of the
/// form 2^a·5^b, fraction `n/d` otherwise.
pub fn format_rational(x: &Q) -> String {
    if x.is_integer() {
        return x.numer().to_string();
    }
    let mut d = x.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", x.numer(), x.denom());
    }
    let shift = twos.max(fives);
    let scale = BigInt::from(10u8).pow(shift);
    let scaled = x.numer() * &scale / x.denom();
    let neg = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let digits = if digits.len() <= shift as usize {
        format!("{}{}", "0".repeat(shift as usize + 1 - digits.len()), digits)
    } else {
        digits
    };
    let (int, frac) = digits.split_at(digits.len() - shift as usize);
    format!("{}{}.{}", if neg { "-" } else { "" }, int, frac)
}

/// SMT-LIB2 real literal.
pub fn smt_rational(x: &Q) -> String {
    let n = x.numer();
    let d = x.denom();
    let base = if d.is_one() {
        format!("{}.0", n.abs())
    } else {
        format!("(/ {}.0 {}.0)", n.abs(), d)
    };
    if n.is_negative() {
        format!("(- {})", base)
    } else {
        base
    }
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.numer().to_f64().unwrap_or(f64::NAN) / x.denom().to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.265625").unwrap(), q(17, 64));
        assert_eq!(parse_rational("0.5").unwrap(), q(1, 2));
        assert_eq!(parse_rational("1/8").unwrap(), q(1, 8));
        assert_eq!(parse_rational("2").unwrap(), q(2, 1));
        assert_eq!(parse_rational("-0.25").unwrap(), q(-1, 4));
        assert!(parse_rational("1/0").is_none());
    }

    #[test]
    fn formats_round_trip() {
        for (n, d) in [(1i64, 2i64), (17, 64), (1, 3), (7, 10), (0, 1), (-3, 8)] {
            let x = q(n, d);
            assert_eq!(parse_rational(&format_rational(&x)).unwrap(), x);
        }
        assert_eq!(format_rational(&q(17, 64)), "0.265625");
        assert_eq!(format_rational(&q(1, 3)), "1/3");
    }
}
