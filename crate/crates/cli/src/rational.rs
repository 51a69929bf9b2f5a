//! Recovering small fractions from floating-point matrix entries.

use std::fmt;

pub const DENOMINATOR_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    pub num: i64,
    pub den: u64,
}

impl Fraction {
    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Best continued-fraction convergent of `x` with denominator at most `cap`,
/// accepted only if it reproduces `x` to within a few ulps.
pub fn reconstruct(x: f64, cap: u64) -> Option<Fraction> {
    if !x.is_finite() || x.abs() > 1e12 {
        return None;
    }
    let negative = x < 0.0;
    let target = x.abs();
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut rest = target;
    let tolerance = 4.0 * f64::EPSILON * target.max(f64::MIN_POSITIVE);
    let mut best = None;
    for _ in 0..64 {
        let a = rest.floor();
        let ai = a as i128;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > cap as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        best = Some((h1, k1));
        if ((h1 as f64 / k1 as f64) - target).abs() <= tolerance {
            break;
        }
        let frac = rest - a;
        if frac <= 0.0 {
            break;
        }
        rest = 1.0 / frac;
    }
    let (h, k) = best?;
    if ((h as f64 / k as f64) - target).abs() > tolerance {
        return None;
    }
    let num = if negative { -(h as i64) } else { h as i64 };
    Some(Fraction { num, den: k as u64 })
}
