//! Small helpers shared by the line-oriented text formats.

use crate::error::{MimicError, Result};

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| MimicError::parse(line, format!("invalid number `{token}`")))
}

pub fn parse_usize(token: &str, line: usize) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| MimicError::parse(line, format!("invalid integer `{token}`")))
}

/// Splits `key=value`, requiring the given key.
pub fn expect_key<'a>(token: &'a str, key: &str, line: usize) -> Result<&'a str> {
    match token.split_once('=') {
        Some((k, v)) if k == key => Ok(v),
        _ => Err(MimicError::parse(
            line,
            format!("expected `{key}=<value>`, found `{token}`"),
        )),
    }
}

/// Non-empty lines with their 1-based line numbers, `#` comments removed.
pub fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(parse_f64(&s, 1).unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn key_mismatch_names_line() {
        let err = expect_key("gamma=3", "n", 7).unwrap_err();
        assert!(err.to_string().starts_with("line 7:"));
    }

    #[test]
    fn comments_and_blanks_skipped() {
        let lines: Vec<_> = content_lines("a\n\n# x\nb # tail\n").collect();
        assert_eq!(lines, vec![(1, "a"), (4, "b")]);
    }
}
