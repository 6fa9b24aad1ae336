//! Shared value types: closed intervals, index-generated grids and the
//! fixed-precision number format used by every emitted file.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::domain("interval", format!("non-finite bound [{min}, {max}]")));
        }
        if min > max {
            return Err(Error::domain("interval", format!("empty interval [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.min >= self.min && other.max <= self.max
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }

    /// Number of grid points when the interval is sampled at `step`,
    /// `floor(width / step) + 1`. The step has to divide the width to within
    /// 1e-9 (relative to the step).
    pub fn grid_len(&self, step: f64) -> Result<usize> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::domain("grid", format!("resolution must be > 0, got {step}")));
        }
        let cells = self.width() / step;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::domain(
                "grid",
                format!(
                    "resolution {step} does not divide the range [{}, {}]",
                    self.min, self.max
                ),
            ));
        }
        Ok(rounded as usize + 1)
    }

    /// Grid points `min + i * step` generated by integer index.
    pub fn grid(&self, step: f64) -> Result<Vec<f64>> {
        let n = self.grid_len(step)?;
        Ok((0..n).map(|i| self.min + i as f64 * step).collect())
    }
}

/// Formats `x` like C's `%.{digits}g` using a `.` decimal point, whatever
/// the process locale.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

/// Nine significant digits, the precision of all numeric CSV output.
pub fn fmt9(x: f64) -> String {
    fmt_sig(x, 9)
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_rejects_reversed_bounds() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn grid_is_index_generated() {
        let g = Interval::new(-60.0, 5.0).unwrap().grid(0.5).unwrap();
        assert_eq!(g.len(), 131);
        assert_eq!(g[0], -60.0);
        assert_eq!(*g.last().unwrap(), 5.0);
        assert_eq!(g[3], -60.0 + 3.0 * 0.5);
    }

    #[test]
    fn grid_rejects_non_dividing_step() {
        let r = Interval::new(0.0, 1.0).unwrap();
        assert!(r.grid(0.3).is_err());
        assert!(r.grid(0.0).is_err());
        assert!(r.grid(-1.0).is_err());
        assert_eq!(Interval::new(2.0, 2.0).unwrap().grid(1.0).unwrap(), vec![2.0]);
    }

    #[test]
    fn sig_format_matches_printf_g() {
        // Expected strings are what `printf("%.9g")` prints.
        let cases = [
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (-60.0, "-60"),
            (0.5, "0.5"),
            (18.2466, "18.2466"),
            (1.0 / 3.0, "0.333333333"),
            (2.0 / 3.0 * 1e-7, "6.66666667e-08"),
            (123456789.0, "123456789"),
            (1234567891.0, "1.23456789e+09"),
            (9.9999999996, "10"),
            (0.0001, "0.0001"),
            (0.00001, "1e-05"),
            (16.357678, "16.357678"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt9(x), want, "formatting {x}");
        }
    }
}
