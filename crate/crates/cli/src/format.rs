//! Number formatting for CSV output.

/// Significant digits written for every floating-point field.
pub const SIGNIFICANT_DIGITS: usize = 10;

/// Shortest form of `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
/// Plain decimal between 1e-5 and 1e10, scientific notation otherwise.
pub fn number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..10).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_fraction(mantissa))
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(number(0.0), "0");
        assert_eq!(number(1.0), "1");
        assert_eq!(number(-21.947617), "-21.947617");
        assert_eq!(number(0.001), "0.001");
        assert_eq!(number(1e-9), "1e-9");
        assert_eq!(number(9.865876450376981e-10), "9.86587645e-10");
        assert_eq!(number(2000.0), "2000");
        assert_eq!(number(1.0 / 3.0), "0.3333333333");
        assert_eq!(number(123456789012.0), "1.23456789e11");
        assert_eq!(number(f64::NAN), "NaN");
        assert_eq!(number(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn parse_back_within_tolerance() {
        let mut x = 1.234567890123e-300;
        while x < 1e300 {
            for v in [x, -x, x * 7.77777777777, x * 9.9999999999] {
                let back: f64 = number(v).parse().unwrap();
                assert!(((back - v) / v).abs() <= 1e-9, "{v} -> {}", number(v));
            }
            x *= 13.7;
        }
    }
}
