//! Number formatting for summaries.

/// `digits` significant digits in the style of C's `%g`: fixed notation for
/// decimal exponents in `[-4, digits)`, otherwise `d.ddde±XX`, trailing
/// zeros removed.
pub fn sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return non_finite(v);
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        return format!("{}e{}", trim_zeros(mantissa), c_exponent(exp));
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

/// Scientific notation with `decimals` mantissa decimals and a C-style
/// exponent: `exp(3.0703e-3, 2) == "3.07e-03"`.
pub fn exp(v: f64, decimals: usize) -> String {
    if !v.is_finite() {
        return non_finite(v);
    }
    let sci = format!("{v:.decimals$e}");
    let (mantissa, e) = sci.split_once('e').expect("exponent present");
    format!("{mantissa}e{}", c_exponent(e.parse().expect("integer exponent")))
}

pub fn fixed(v: f64, decimals: usize) -> String {
    if !v.is_finite() {
        return non_finite(v);
    }
    format!("{v:.decimals$}")
}

fn c_exponent(e: i32) -> String {
    format!("{}{:02}", if e < 0 { '-' } else { '+' }, e.unsigned_abs())
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn non_finite(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
