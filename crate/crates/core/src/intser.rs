//! JSON encoding of arbitrary-precision integers: plain numbers while they fit
//! in 64 bits, decimal strings beyond that.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::de::{self, Deserializer, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::Deserialize;
use serde_json::Value;
use std::fmt;

pub fn to_json(x: &BigInt) -> Value {
    match x.to_i64() {
        Some(v) => Value::from(v),
        None => Value::String(x.to_string()),
    }
}

pub fn vec_to_json(xs: &[BigInt]) -> Value {
    Value::Array(xs.iter().map(to_json).collect())
}

pub fn from_json(v: &Value) -> Result<BigInt, String> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(BigInt::from(i))
            } else if let Some(u) = n.as_u64() {
                Ok(BigInt::from(u))
            } else {
                Err(format!("non-integer number {n}"))
            }
        }
        Value::String(s) => s
            .trim()
            .parse::<BigInt>()
            .map_err(|_| format!("not a decimal integer: {s:?}")),
        other => Err(format!("expected integer, found {other}")),
    }
}

pub fn vec_from_json(v: &Value) -> Result<Vec<BigInt>, String> {
    match v {
        Value::Array(items) => items.iter().map(from_json).collect(),
        other => Err(format!("expected integer array, found {other}")),
    }
}

pub fn serialize<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    match x.to_i64() {
        Some(v) => s.serialize_i64(v),
        None => s.serialize_str(&x.to_string()),
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
    d.deserialize_any(IntVisitor)
}

struct IntVisitor;

impl<'de> Visitor<'de> for IntVisitor {
    type Value = BigInt;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an integer or a decimal string")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<BigInt, E> {
        Ok(BigInt::from(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<BigInt, E> {
        Ok(BigInt::from(v))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<BigInt, E> {
        v.trim()
            .parse()
            .map_err(|_| E::custom(format!("not a decimal integer: {v:?}")))
    }
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&Wrapped(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let raw: Vec<Unwrapped> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|u| u.0).collect())
    }

    struct Wrapped<'a>(&'a BigInt);

    impl serde::Serialize for Wrapped<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            super::serialize(self.0, s)
        }
    }

    struct Unwrapped(BigInt);

    impl<'de> Deserialize<'de> for Unwrapped {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            super::deserialize(d).map(Unwrapped)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values_are_numbers_large_are_strings() {
        assert_eq!(to_json(&BigInt::from(-7)), Value::from(-7));
        let big: BigInt = "123456789012345678901234567890".parse().unwrap();
        assert_eq!(to_json(&big), Value::String(big.to_string()));
        assert_eq!(from_json(&to_json(&big)).unwrap(), big);
        assert_eq!(from_json(&Value::from(u64::MAX)).unwrap(), BigInt::from(u64::MAX));
        assert!(from_json(&Value::from(1.5)).is_err());
    }
}
