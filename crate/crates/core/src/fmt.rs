//! Number formatting for CSV and reports.

/// Formats `v` with 12 significant digits, trimming trailing zeros.
pub fn sig(v: f64) -> String {
    sig_n(v, 12)
}

pub fn sig_n(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" { "0".into() } else { s }
    } else {
        let s = format!("{:.*e}", digits - 1, v);
        let (mant, e) = s.split_once('e').unwrap();
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        assert_eq!(sig(0.0), "0");
        assert_eq!(sig(0.5), "0.5");
        assert_eq!(sig(0.693147180559945), "0.69314718056");
        assert_eq!(sig(100.0), "100");
        assert_eq!(sig(1.0e-7), "1e-7");
        assert_eq!(sig(-2.5e20), "-2.5e20");
        assert_eq!(sig(123456.789), "123456.789");
    }
}
