//! Plain-text table output: '.' decimal point, 17 significant digits, LF endings.

use std::io::{self, Write};

/// Format a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Format an optional float; `None` becomes an empty field.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

pub fn write_row<W: Write>(w: &mut W, fields: &[String]) -> io::Result<()> {
    w.write_all(fields.join(",").as_bytes())?;
    w.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt17(f64::INFINITY), "inf");
        assert_eq!(fmt_opt(None), "");
        // 17 significant digits round-trip every f64.
        for v in [std::f64::consts::PI, 1e-300, 123456.789e10] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
    }
}
