//! Exact half-integer arithmetic.

use core::fmt;
use core::ops::{Add, Neg, Sub};

/// A half-integer stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HalfInt(i32);

impl HalfInt {
    pub const HALF: HalfInt = HalfInt(1);
    pub const MINUS_HALF: HalfInt = HalfInt(-1);
    pub const ZERO: HalfInt = HalfInt(0);

    pub const fn from_doubled(doubled: i32) -> Self {
        HalfInt(doubled)
    }

    pub const fn from_int(n: i32) -> Self {
        HalfInt(2 * n)
    }

    pub const fn doubled(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) * 0.5
    }

    pub const fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// True for `±1/2, ±3/2, ...`.
    pub const fn is_half_odd(self) -> bool {
        self.0 % 2 != 0
    }

    /// The integer value, if this is one.
    pub const fn as_int(self) -> Option<i32> {
        if self.0 % 2 == 0 {
            Some(self.0 / 2)
        } else {
            None
        }
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_int() {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "{}/2", self.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn arithmetic_is_exact() {
        let a = HalfInt::from_doubled(3);
        let b = HalfInt::MINUS_HALF;
        assert_eq!(a + b, HalfInt::from_int(1));
        assert_eq!(a - b, HalfInt::from_int(2));
        assert_eq!(-a, HalfInt::from_doubled(-3));
        assert!(b < HalfInt::HALF);
        assert!(a.is_half_odd());
        assert!(!(a + b).is_half_odd());
        assert_eq!(a.value(), 1.5);
    }

    #[test]
    fn display() {
        assert_eq!(HalfInt::from_doubled(-7).to_string(), "-7/2");
        assert_eq!(HalfInt::from_int(4).to_string(), "4");
    }
}
