//! JSON exchange format for square matrices: `{"dim": d, "rows": [[...], ...]}`
//! with row-major 64-bit floats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &Mat) -> Self {
        MatrixJson {
            dim: m.nrows(),
            rows: (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<Mat> {
        if self.rows.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "matrix declares dim {} but has {} rows",
                self.dim,
                self.rows.len()
            )));
        }
        if let Some(bad) = self.rows.iter().find(|r| r.len() != self.dim) {
            return Err(Error::NotSquare {
                rows: self.dim,
                cols: bad.len(),
            });
        }
        Ok(Mat::from_fn(self.dim, self.dim, |i, j| self.rows[i][j]))
    }
}

/// Serde adapter for fields of type [`Mat`].
pub mod mat_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Mat, D::Error> {
        let mj = MatrixJson::deserialize(d)?;
        mj.to_matrix().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_are_rejected() {
        let mj = MatrixJson {
            dim: 2,
            rows: vec![vec![1.0, 0.0], vec![0.0]],
        };
        assert!(matches!(mj.to_matrix(), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn parses_exchange_format() {
        let mj: MatrixJson = serde_json::from_str(r#"{"dim":2,"rows":[[0,-1],[1,0]]}"#).unwrap();
        let m = mj.to_matrix().unwrap();
        assert_eq!(m[(0, 1)], -1.0);
        assert_eq!(MatrixJson::from_matrix(&m), mj);
    }
}
