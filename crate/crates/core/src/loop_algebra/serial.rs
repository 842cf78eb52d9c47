//! JSON form `{n, lo, coeffs}` where each coefficient is a row-major list of `[re, im]`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::LaurentLoop;
use crate::linalg::{CMat, C64};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopRepr {
    n: usize,
    lo: i32,
    coeffs: Vec<Vec<[f64; 2]>>,
}

pub(crate) fn matrix_to_pairs(m: &CMat) -> Vec<[f64; 2]> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * m.ncols());
    for i in 0..n {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

pub(crate) fn pairs_to_matrix(n: usize, pairs: &[[f64; 2]]) -> Option<CMat> {
    if pairs.len() != n * n {
        return None;
    }
    Some(CMat::from_fn(n, n, |i, j| {
        let [re, im] = pairs[i * n + j];
        C64::new(re, im)
    }))
}

impl Serialize for LaurentLoop {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        LoopRepr {
            n: self.n,
            lo: self.lo,
            coeffs: self.coeffs.iter().map(matrix_to_pairs).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LaurentLoop {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = LoopRepr::deserialize(deserializer)?;
        if repr.n == 0 {
            return Err(D::Error::custom("n must be positive"));
        }
        let coeffs = repr
            .coeffs
            .iter()
            .enumerate()
            .map(|(d, pairs)| {
                pairs_to_matrix(repr.n, pairs).ok_or_else(|| {
                    D::Error::custom(format!("coeffs[{d}] must have n*n = {} entries", repr.n * repr.n))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if coeffs.is_empty() {
            return Err(D::Error::custom("coeffs must be non-empty"));
        }
        if coeffs.iter().any(|m| m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(D::Error::custom("coefficients must be finite"));
        }
        // Keep exactly what was written: no trimming on read.
        Ok(LaurentLoop { n: repr.n, lo: repr.lo, coeffs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = CMat::from_fn(3, 3, |i, j| c(1.0 / (1.0 + i as f64 + 7.0 * j as f64), (i as f64).sqrt() - 0.1));
        let g = LaurentLoop::new(-2, vec![m.clone(), m.transpose(), &m * &m]).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: LaurentLoop = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        for ((_, a), (_, b)) in g.terms().zip(back.terms()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }

    #[test]
    fn malformed_payloads_are_rejected() {
        assert!(serde_json::from_str::<LaurentLoop>(r#"{"n":2,"lo":0,"coeffs":[[[1,0]]]}"#).is_err());
        assert!(serde_json::from_str::<LaurentLoop>(r#"{"n":1,"lo":0,"coeffs":[]}"#).is_err());
        assert!(serde_json::from_str::<LaurentLoop>(r#"{"n":1,"lo":0,"coeffs":[[[1,0]]],"x":1}"#).is_err());
        let one: LaurentLoop = serde_json::from_str(r#"{"n":1,"lo":0,"coeffs":[[[1,0]]]}"#).unwrap();
        assert_eq!(one, LaurentLoop::identity(1));
    }
}
