//! JSON number formatting with 17 significant digits.
//!
//! serde_json prints the shortest round-trip representation; model files and
//! manifests instead use a fixed `{:.16e}` layout so every value carries 17
//! significant digits. Parsing relies on serde_json's `float_roundtrip`.

use serde::de::Deserializer;
use serde::ser::{Error as _, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::tensor::Matrix;

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn raw_array(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24 + 2);
    s.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format_f64(*v));
    }
    s.push(']');
    s
}

/// `#[serde(with = "numfmt::vec17")]` for `Vec<f64>`.
pub mod vec17 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(S::Error::custom("non-finite value in numeric array"));
        }
        RawValue::from_string(raw_array(v))
            .map_err(S::Error::custom)?
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<f64>::deserialize(d)
    }
}

/// `#[serde(with = "numfmt::f64_17")]` for a scalar.
pub mod f64_17 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if !v.is_finite() {
            return Err(S::Error::custom("non-finite scalar"));
        }
        RawValue::from_string(format_f64(*v))
            .map_err(S::Error::custom)?
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d)
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    #[serde(with = "vec17")]
    data: Vec<f64>,
}

/// `#[serde(with = "numfmt::matrix17")]` for [`Matrix`].
pub mod matrix17 {
    use super::*;
    use serde::de::Error as _;

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().to_vec(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let r = MatrixRepr::deserialize(d)?;
        Matrix::new(r.rows, r.cols, r.data).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Holder {
        #[serde(with = "vec17")]
        v: Vec<f64>,
        #[serde(with = "f64_17")]
        x: f64,
    }

    #[test]
    fn seventeen_digits_roundtrip() {
        let h = Holder {
            v: vec![0.1, -1.0 / 3.0, 1e-300, 123456.789, 0.0],
            x: std::f64::consts::PI,
        };
        let text = serde_json::to_string(&h).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("3.1415926535897931e0"), "{text}");
        let back: Holder = serde_json::from_str(&text).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn non_finite_refused() {
        let h = Holder { v: vec![f64::NAN], x: 0.0 };
        assert!(serde_json::to_string(&h).is_err());
    }
}
