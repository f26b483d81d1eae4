//! Fixed-precision decimal rendering shared by the CSV and text exports.

/// Significant digits written for every exported real.
pub const SIG_DIGITS: usize = 15;

/// Renders `x` with exactly [`SIG_DIGITS`] significant digits, positional
/// when the decimal exponent lies in `[-5, 15)` and scientific otherwise.
pub fn sig15(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.*}", SIG_DIGITS - 1, 0.0);
    }
    // Exponent after rounding, so 9.99..95 -> 1.0e1 is handled.
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..15).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        sci
    }
}

/// Rounds `x` to [`SIG_DIGITS`] significant digits (the value a reader
/// recovers from [`sig15`]).
pub fn round_sig15(x: f64) -> f64 {
    sig15(x).parse().unwrap_or(x)
}
