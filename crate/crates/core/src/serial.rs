//! Serde helpers for float arrays written with 17 significant digits.
//!
//! `{:.16e}` always yields 17 significant decimal digits, which is enough
//! to round-trip any finite `f64`. Reading goes through serde_json's
//! correctly rounded parser (`float_roundtrip` feature).

use serde::de::Error as _;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

pub(crate) fn fmt17(x: f64) -> Option<String> {
    x.is_finite().then(|| format!("{x:.16e}"))
}

fn raw<E: serde::ser::Error>(x: f64) -> Result<Box<RawValue>, E> {
    let s = fmt17(x).ok_or_else(|| E::custom(format!("cannot serialize non-finite {x}")))?;
    RawValue::from_string(s).map_err(E::custom)
}

pub mod f64_17 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        raw::<S::Error>(*x)?.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d)
    }
}

pub mod vec_f64_17 {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for &x in xs {
            seq.serialize_element(&raw::<S::Error>(x)?)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<f64>::deserialize(d)
    }
}

pub mod vec_vec_f64_17 {
    use super::*;

    pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(rows.len()))?;
        for row in rows {
            let r: Vec<Box<RawValue>> = row
                .iter()
                .map(|&x| raw::<S::Error>(x))
                .collect::<Result<_, _>>()?;
            seq.serialize_element(&r)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(D::Error::custom("non-finite value"));
        }
        Ok(rows)
    }
}
