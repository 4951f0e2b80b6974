//! Directed rational enclosures of the natural logarithm.
//!
//! `ln_lo(x) <= ln(x) <= ln_up(x)` holds exactly, with `ln_up - ln_lo`
//! below `1e-9` for the magnitudes used here. Bound checks pick the
//! enclosure side that keeps a `holds = true` verdict sound.

use num_bigint::BigInt;

use crate::rational::Rational;

const SERIES_TERMS: u32 = 18;

fn output_scale() -> BigInt {
    BigInt::from(10u64).pow(12)
}

/// Enclosure of `2 * atanh(t)` for `0 <= t <= 1/3`, i.e. of `ln((1+t)/(1-t))`.
fn two_atanh(t: &Rational) -> (Rational, Rational) {
    if t.is_zero() {
        return (Rational::zero(), Rational::zero());
    }
    let t2 = t * t;
    let mut power = t.clone();
    let mut sum = Rational::zero();
    for j in 0..SERIES_TERMS {
        sum += &power / Rational::from(2 * j as i64 + 1);
        power = &power * &t2;
    }
    // power = t^(2K+1); remainder <= t^(2K+1) / ((2K+1)(1 - t^2))
    let k = Rational::from(2 * SERIES_TERMS as i64 + 1);
    let remainder = &power / (k * (Rational::one() - &t2));
    let two = Rational::from(2i64);
    (&two * &sum, two * (sum + remainder))
}

fn round_down(r: &Rational) -> Rational {
    let scale = output_scale();
    Rational::new((r * Rational::from_integer(scale.clone())).floor(), scale)
}

fn round_up(r: &Rational) -> Rational {
    let scale = output_scale();
    Rational::new((r * Rational::from_integer(scale.clone())).ceil(), scale)
}

/// Returns `(lo, hi)` with `lo <= ln(x) <= hi`. Panics if `x <= 0`.
pub fn ln_enclosure(x: &Rational) -> (Rational, Rational) {
    assert!(x.is_positive(), "ln of a non-positive rational");
    if *x < Rational::one() {
        let (lo, hi) = ln_enclosure(&x.recip());
        return (-hi, -lo);
    }
    // x = 2^k * y with y in [1, 2)
    let two = Rational::from(2i64);
    let mut k: i64 = 0;
    let mut y = x.clone();
    while y >= two {
        y = &y / &two;
        k += 1;
    }
    let one = Rational::one();
    let t = (&y - &one) / (&y + &one);
    let (y_lo, y_hi) = two_atanh(&t);
    let (l2_lo, l2_hi) = two_atanh(&Rational::new(1, 3));
    let kr = Rational::from(k);
    let lo = &kr * &l2_lo + y_lo;
    let hi = kr * l2_hi + y_hi;
    (round_down(&lo), round_up(&hi))
}

pub fn ln_up(x: &Rational) -> Rational {
    ln_enclosure(x).1
}

pub fn ln_lo(x: &Rational) -> Rational {
    ln_enclosure(x).0
}

/// Upper enclosure of `ln(n)`, with the convention `ln(0) := 0` for the
/// degree-zero corner case of empty instances.
pub fn ln_up_int(n: u64) -> Rational {
    if n <= 1 {
        Rational::zero()
    } else {
        ln_up(&Rational::from(n))
    }
}

pub fn ln_lo_int(n: u64) -> Rational {
    if n <= 1 {
        Rational::zero()
    } else {
        ln_lo(&Rational::from(n))
    }
}
