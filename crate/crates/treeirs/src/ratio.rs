//! Small helpers for parsing and rendering exact rationals in reports.

use num::{BigInt, BigRational, ToPrimitive};

use crate::error::{Error, Result};

/// Parses `"p/q"` or `"p"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let parse_int = |t: &str| -> Result<BigInt> {
        t.trim()
            .parse::<BigInt>()
            .map_err(|e| Error::Parse(format!("invalid integer {t:?}: {e}")))
    };
    match s.split_once('/') {
        Some((num, den)) => {
            let den = parse_int(den)?;
            if den == BigInt::from(0) {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(BigRational::new(parse_int(num)?, den))
        }
        None => Ok(BigRational::from_integer(parse_int(s)?)),
    }
}

/// Canonical `"p/q"` rendering (just `"p"` for integers).
pub fn rational_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Nearest f64, for human-readable report fields only.
pub fn rational_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `{"rational": "p/q", "decimal": x}` report fragment.
pub fn rational_json(r: &BigRational) -> serde_json::Value {
    serde_json::json!({
        "rational": rational_string(r),
        "decimal": rational_f64(r),
    })
}
