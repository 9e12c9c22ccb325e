//! Canonical JSON encoding for model and table files.
//!
//! Object keys are written in alphabetical order and every `f64` is written
//! with 17 significant digits, which is enough to round-trip any finite
//! double bit-exactly.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::{Error, Result};

struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` with sorted keys and 17-digit floats.
pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String> {
    // Going through `Value` sorts object keys (its map is a BTreeMap).
    let tree = serde_json::to_value(value)?;
    check_finite(&tree)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits);
    tree.serialize(&mut ser)?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::Format(e.to_string()))
}

pub fn from_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_file<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    std::fs::write(path, to_canonical_string(value)?)?;
    Ok(())
}

pub fn read_file<T: DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    from_str(&text)
}

fn check_finite(v: &serde_json::Value) -> Result<()> {
    match v {
        // serde_json maps NaN and infinities to null when building a Value;
        // nulls in our documents only ever come from that.
        serde_json::Value::Null => Err(Error::Numeric("cannot serialize a non-finite number".into())),
        serde_json::Value::Array(a) => a.iter().try_for_each(check_finite),
        serde_json::Value::Object(o) => o.values().try_for_each(check_finite),
        _ => Ok(()),
    }
}

/// Formats a float for CSV output with 17 significant digits.
pub fn csv_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn keys_sorted_and_floats_long() {
        let mut m = BTreeMap::new();
        m.insert("zeta", 0.1f64);
        m.insert("alpha", 1.0 / 3.0);
        let s = to_canonical_string(&m).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
        assert!(s.contains("3.3333333333333331e-1"));
    }

    #[test]
    fn nan_rejected() {
        assert!(to_canonical_string(&vec![f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn floats_round_trip_bit_exact(xs in proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..64)) {
            let s = to_canonical_string(&xs).unwrap();
            let back: Vec<f64> = from_str(&s).unwrap();
            prop_assert_eq!(xs.len(), back.len());
            for (a, b) in xs.iter().zip(&back) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
