//! Fixed numeric formatting shared by every text output.

/// Probabilities: four decimals.
pub fn dec4(x: f64) -> String {
    format!("{x:.4}")
}

/// `%.6g`-style formatting: six significant digits, trailing zeros removed,
/// scientific notation outside `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    sig(x, 6)
}

pub fn sig(x: f64, digits: usize) -> String {
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
    let digits = digits.max(1);
    // Round first so that the exponent reflects the printed mantissa.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
