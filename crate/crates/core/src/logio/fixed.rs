//! Six-decimal fixed-point numbers for log columns.

use std::fmt;
use std::str::FromStr;

/// A value stored as an integer count of millionths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fixed6(pub i64);

impl Fixed6 {
    pub const SCALE: i64 = 1_000_000;

    /// Rounds to the nearest millionth, halves away from zero.
    pub fn from_f64(v: f64) -> Self {
        assert!(v.is_finite(), "non-finite value in log record");
        Fixed6((v * Self::SCALE as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }

    pub fn micros(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Fixed6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:06}", abs / Self::SCALE as u64, abs % Self::SCALE as u64)
    }
}

impl FromStr for Fixed6 {
    type Err = String;

    /// Accepts exactly the emitted form: optional `-`, digits, `.`, six digits.
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("`{s}` is not a six-decimal number");
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').ok_or_else(bad)?;
        if int.is_empty() || frac.len() != 6 || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if int.len() > 1 && int.starts_with('0') {
            return Err(bad());
        }
        let int: u64 = int.parse().map_err(|_| bad())?;
        let frac: u64 = frac.parse().map_err(|_| bad())?;
        let abs = int.checked_mul(Self::SCALE as u64).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
        if neg && abs == 0 {
            return Err(bad());
        }
        let v = if neg { 0i64.checked_sub_unsigned(abs) } else { i64::try_from(abs).ok() };
        v.map(Fixed6).ok_or_else(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formatting() {
        assert_eq!(Fixed6::from_f64(0.0).to_string(), "0.000000");
        assert_eq!(Fixed6::from_f64(-0.0000004).to_string(), "0.000000");
        assert_eq!(Fixed6::from_f64(1.5).to_string(), "1.500000");
        assert_eq!(Fixed6::from_f64(-12.3456789).to_string(), "-12.345679");
        assert_eq!(Fixed6::from_f64(1e12).to_string(), "1000000000000.000000");
        assert_eq!(Fixed6(-1).to_string(), "-0.000001");
    }

    #[test]
    fn rejects_other_spellings() {
        for s in ["1.5", "1e3", "+1.000000", "-0.000000", "01.000000", ".500000", "1.0000000", "nan"] {
            assert!(s.parse::<Fixed6>().is_err(), "{s}");
        }
    }

    proptest! {
        #[test]
        fn text_round_trip(v in any::<i64>()) {
            let x = Fixed6(v);
            prop_assert_eq!(x.to_string().parse::<Fixed6>().unwrap(), x);
        }

        #[test]
        fn float_rounding_is_nearest(v in -1e9f64..1e9) {
            let x = Fixed6::from_f64(v);
            prop_assert!((x.to_f64() - v).abs() <= 0.5e-6 + v.abs() * 1e-15);
        }
    }
}
