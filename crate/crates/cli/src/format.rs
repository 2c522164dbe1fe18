/// At most 12 significant digits, `.` as the decimal point. Very small or
/// very large magnitudes switch to exponent form.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let magnitude = rounded.abs();
    if (1e-4..1e12).contains(&magnitude) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub fn join(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|&v| sig12(v)).collect();
    parts.join(", ")
}
