//! Dollar amounts.
//!
//! Arithmetic stays in full double precision; [`Money::round_cents`] is
//! applied only where an amount is posted to a ledger.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A US dollar amount.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(pub f64);

impl Money {
    pub const ZERO: Money = Money(0.0);

    pub fn new(amount: f64) -> Self {
        Money(amount)
    }

    pub fn amount(self) -> f64 {
        self.0
    }

    /// Rounds half away from zero to whole cents.
    ///
    /// A relative nudge of 1e-9 cents absorbs binary representation error so
    /// that decimal halves such as 1.005 round up as written.
    pub fn round_cents(self) -> Money {
        let scaled = self.0 * 100.0;
        let magnitude = (scaled.abs() * (1.0 + 1e-12) + 0.5).floor();
        Money(magnitude.copysign(scaled) / 100.0)
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn max(self, other: Money) -> Money {
        Money(self.0.max(other.0))
    }

    pub fn min(self, other: Money) -> Money {
        Money(self.0.min(other.0))
    }

    pub fn clamp(self, lo: Money, hi: Money) -> Money {
        Money(self.0.clamp(lo.0, hi.0))
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.0)
    }
}

impl From<f64> for Money {
    fn from(v: f64) -> Self {
        Money(v)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Mul<f64> for Money {
    type Output = Money;
    fn mul(self, rhs: f64) -> Money {
        Money(self.0 * rhs)
    }
}

impl Div<f64> for Money {
    type Output = Money;
    fn div(self, rhs: f64) -> Money {
        Money(self.0 / rhs)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_half_up() {
        assert_eq!(Money(1.005).round_cents(), Money(1.01));
        assert_eq!(Money(2.675).round_cents(), Money(2.68));
        assert_eq!(Money(1100.0).round_cents(), Money(1100.0));
        assert_eq!(Money(-1.005).round_cents(), Money(-1.01));
        assert_eq!(Money(0.004).round_cents(), Money(0.0));
    }

    #[test]
    fn display_two_decimals() {
        assert_eq!(Money(6307.5).to_string(), "6307.50");
    }
}
