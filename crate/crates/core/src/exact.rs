//! Exact rational arithmetic for fixtures whose inputs are rational.
//!
//! Floating-point inputs are mapped back to the simplest rational that rounds
//! to the same double, so `1.0 / 6.0` becomes `1/6` and `0.05` becomes `1/20`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Simplest continued-fraction convergent of `x` that converts back to `x`.
///
/// Returns `None` for non-finite input.
pub fn rationalize(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    if x.fract() == 0.0 {
        return Rational::from_float(x);
    }
    let target = Rational::from_float(x)?;
    if let (Some(p), Some(q)) = (target.numer().to_i128(), target.denom().to_i128()) {
        return Some(rationalize_small(x, p, q));
    }
    Some(rationalize_big(x, target))
}

fn rationalize_big(x: f64, target: Rational) -> Rational {
    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    let mut rest = target.clone();
    loop {
        let a = rest.floor().to_integer();
        let h_next = &a * &h + &h_prev;
        let k_next = &a * &k + &k_prev;
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
        let candidate = Rational::new(h.clone(), k.clone());
        if candidate.to_f64() == Some(x) {
            return candidate;
        }
        let frac = &rest - Rational::from_integer(a);
        if frac.is_zero() {
            return target;
        }
        rest = frac.recip();
    }
}

/// [`rationalize`] for `x = p / q` with both parts fitting in `i128`.
fn rationalize_small(x: f64, mut p: i128, mut q: i128) -> Rational {
    const EXACT: i128 = 1 << 53;
    let (mut h_prev, mut h) = (0i128, 1i128);
    let (mut k_prev, mut k) = (1i128, 0i128);
    loop {
        let a = p.div_euclid(q);
        (h_prev, h) = (h, a * h + h_prev);
        (k_prev, k) = (k, a * k + k_prev);
        // Both parts exact in f64, so the division rounds correctly.
        let hits = if h.abs() <= EXACT && k <= EXACT {
            h as f64 / k as f64 == x
        } else {
            Rational::new(h.into(), k.into()).to_f64() == Some(x)
        };
        let r = p.rem_euclid(q);
        if hits || r == 0 {
            return Rational::new(h.into(), k.into());
        }
        (p, q) = (q, r);
    }
}

/// Parses a decimal (`0.05`, `-3`, `1e-3`) or a fraction (`7/2`).
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_rational(num)?;
        let den = parse_rational(den)?;
        if den.is_zero() {
            return None;
        }
        return Some(num / den);
    }
    let value: f64 = text.parse().ok()?;
    if !value.is_finite() {
        return None;
    }
    parse_decimal(text).or_else(|| rationalize(value))
}

fn parse_decimal(text: &str) -> Option<Rational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let negative = mantissa.starts_with('-');
    let mantissa = mantissa.trim_start_matches(['+', '-']);
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits: String = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(digits.parse::<BigInt>().ok()?);
    let scale = exponent - frac_part.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, (-scale) as usize);
    }
    Some(if negative { -value } else { value })
}

/// Parses a number as `f64`, accepting the same syntax as [`parse_rational`].
pub fn parse_number(text: &str) -> Option<f64> {
    let text = text.trim();
    if text.contains('/') {
        parse_rational(text)?.to_f64()
    } else {
        text.parse::<f64>().ok().filter(|v| v.is_finite())
    }
}

/// `p/q` in lowest terms, or `p` for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}
