//! Small shared helpers.

/// Formats `x` in plain decimal notation with `sig` significant digits.
///
/// Used for CSV emission where outputs must round-trip at a fixed
/// significant-digit budget regardless of magnitude.
pub fn format_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (sig as i64 - 1 - magnitude).max(0) as usize;
    format!("{:.*}", decimals, x)
}

#[cfg(test)]
mod tests {
    use super::format_sig;

    #[test]
    fn twelve_digit_round_trip() {
        for &x in &[
            0.3141592653589793,
            1.0 / 3.0,
            11.0 / 35.0,
            17.0 / 44.0,
            1e-5 + 1e-9,
            123.4567890123,
        ] {
            let s = format_sig(x, 12);
            let back: f64 = s.parse().unwrap();
            assert!(
                ((back - x) / x).abs() < 1e-11,
                "{x} -> {s} -> {back} lost precision"
            );
        }
    }

    #[test]
    fn special_values() {
        assert_eq!(format_sig(0.0, 12), "0");
        assert_eq!(format_sig(f64::INFINITY, 12), "inf");
        assert_eq!(format_sig(f64::NEG_INFINITY, 12), "-inf");
        assert_eq!(format_sig(-0.25, 3), "-0.250");
    }
}
