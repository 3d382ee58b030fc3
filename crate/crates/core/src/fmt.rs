//! Fixed-precision number formatting shared by every text output.
//!
//! All emitted floating-point numbers carry 15 significant digits so that
//! repeated runs produce byte-identical files.

use serde::Serializer;

/// Formats `x` in scientific notation with 15 significant digits.
pub fn sig15(x: f64) -> String {
    if x.is_finite() {
        format!("{:.14e}", x)
    } else {
        format!("{}", x)
    }
}

/// Rounds `x` to 15 significant digits.
pub fn round15(x: f64) -> f64 {
    if x.is_finite() {
        sig15(x).parse().unwrap_or(x)
    } else {
        x
    }
}

/// `serialize_with` helper: writes an `f64` rounded to 15 significant digits.
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round15(*x))
}

pub fn ser_vec_f64<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&round15(*x))?;
    }
    seq.end()
}

pub fn ser_mat_f64<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(rows.len()))?;
    for r in rows {
        let r: Vec<f64> = r.iter().map(|x| round15(*x)).collect();
        seq.serialize_element(&r)?;
    }
    seq.end()
}
