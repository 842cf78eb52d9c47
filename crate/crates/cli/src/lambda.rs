//! Spectral parameter literals: `0.7`, `2i`, `-i`, `0.3-1.2i`, `exp(i*0.5)`, `exp(i*pi/6)`.

use loopsplit_core::C64;

use crate::error::{CliError, CliResult};

fn real(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("pi") {
        let rest = rest.trim();
        if rest.is_empty() {
            return Some(std::f64::consts::PI);
        }
        return rest.strip_prefix('/').and_then(|d| d.trim().parse::<f64>().ok()).map(|d| std::f64::consts::PI / d);
    }
    if let Some((a, b)) = t.split_once('*') {
        return Some(real(a)? * real(b)?);
    }
    t.parse().ok()
}

fn imaginary(text: &str) -> Option<f64> {
    let t = text.trim().strip_suffix('i')?.trim();
    match t {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => real(t.strip_suffix('*').unwrap_or(t)),
    }
}

/// Parses one λ literal; zero is rejected because every consumer divides by λ.
pub fn parse_lambda(text: &str) -> CliResult<C64> {
    let bad = || CliError::Validation(format!("cannot read `{text}` as a nonzero complex number"));
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let z = if let Some(inner) = t.strip_prefix("exp(").and_then(|s| s.strip_suffix(')')) {
        let theta = inner.strip_prefix("i*").map(real).or_else(|| inner.strip_suffix("*i").map(real)).flatten();
        C64::from_polar(1.0, theta.ok_or_else(bad)?)
    } else if t.ends_with('i') {
        // Split at the last sign that is not part of an exponent.
        let bytes = t.as_bytes();
        let cut = (1..bytes.len()).rev().find(|&p| (bytes[p] == b'+' || bytes[p] == b'-') && !matches!(bytes[p - 1], b'e' | b'E'));
        match cut {
            Some(p) => C64::new(real(&t[..p]).ok_or_else(bad)?, imaginary(&t[p..]).ok_or_else(bad)?),
            None => C64::new(0.0, imaginary(&t).ok_or_else(bad)?),
        }
    } else {
        C64::new(real(&t).ok_or_else(bad)?, 0.0)
    };
    if z.norm() == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(bad());
    }
    Ok(z)
}

/// Compact rendering used in file headers.
pub fn format_lambda(z: C64) -> String {
    format!("{:.16e}{:+.16e}i", z.re, z.im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn literals() {
        assert_eq!(parse_lambda("0.7").unwrap(), C64::new(0.7, 0.0));
        assert_eq!(parse_lambda("2i").unwrap(), C64::new(0.0, 2.0));
        assert_eq!(parse_lambda("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_lambda("0.3-1.2i").unwrap(), C64::new(0.3, -1.2));
        assert_eq!(parse_lambda("1e-1+2e-1i").unwrap(), C64::new(0.1, 0.2));
        assert_eq!(parse_lambda("exp(i*0.3)").unwrap(), C64::from_polar(1.0, 0.3));
        assert!((parse_lambda("exp(i*pi/6)").unwrap() - C64::from_polar(1.0, PI / 6.0)).norm() < 1e-16);
        assert!((parse_lambda("exp(i * 2*pi)").unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_zero_and_junk() {
        assert!(parse_lambda("0").is_err());
        assert!(parse_lambda("0i").is_err());
        assert!(parse_lambda("exp(0.3)").is_err());
        assert!(parse_lambda("abc").is_err());
    }

    #[test]
    fn formatted_values_parse_back() {
        let z = C64::new(-0.25, 1.0 / 3.0);
        assert_eq!(parse_lambda(&format_lambda(z)).unwrap(), z);
    }
}
