//! JSON encodings for complex values: a complex number is a two-element
//! array `[re, im]`, a matrix is a row-major nested array of those.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn to_pair(z: &Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn from_pair(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

pub mod scalar {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        to_pair(z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        <[f64; 2]>::deserialize(d).map(from_pair)
    }
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(to_pair).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(from_pair).collect())
    }
}

pub mod matrix {
    use super::*;

    pub fn rows(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| to_pair(&m[(i, j)])).collect())
            .collect()
    }

    pub fn from_rows(rows: Vec<Vec<[f64; 2]>>) -> Result<DMatrix<Complex64>, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        let flat: Vec<Complex64> = rows.into_iter().flatten().map(from_pair).collect();
        Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<Complex64>, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(rows).map_err(D::Error::custom)
    }
}

pub mod option_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(
        m: &Option<DMatrix<Complex64>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        m.as_ref().map(matrix::rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<DMatrix<Complex64>>, D::Error> {
        match Option::<Vec<Vec<[f64; 2]>>>::deserialize(d)? {
            Some(rows) => matrix::from_rows(rows).map(Some).map_err(D::Error::custom),
            None => Ok(None),
        }
    }
}
