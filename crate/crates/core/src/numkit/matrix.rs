//! Row-major dense matrix over `f64`.

use serde::{Deserialize, Serialize};

use super::NumError;

/// A dense `rows x cols` matrix stored row-major.
///
/// Vector-shaped quantities (biases, attention score vectors) are stored
/// as `1 x n` matrices so that every learned parameter shares one type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from a row-major flat buffer.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumError> {
        if data.len() != rows * cols {
            return Err(NumError::ShapeMismatch {
                op: "from_flat",
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumError> {
        let height = rows.len();
        let width = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(height * width);
        for row in rows {
            if row.len() != width {
                return Err(NumError::ShapeMismatch {
                    op: "from_rows",
                    expected: format!("row length {width}"),
                    got: format!("row length {}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: height,
            cols: width,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Borrows row `r` as a slice.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Nested-row view used by the JSON model format.
    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// `self * v` for a column vector `v` of length `cols`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, NumError> {
        if v.len() != self.cols {
            return Err(NumError::ShapeMismatch {
                op: "matvec",
                expected: format!("vector of length {}", self.cols),
                got: format!("length {}", v.len()),
            });
        }
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            out[r] = acc;
        }
        Ok(out)
    }

    /// `self^T * v` for a vector `v` of length `rows`. Used by backward
    /// passes; no explicit transpose is materialized.
    pub fn matvec_transposed(&self, v: &[f64]) -> Result<Vec<f64>, NumError> {
        if v.len() != self.rows {
            return Err(NumError::ShapeMismatch {
                op: "matvec_transposed",
                expected: format!("vector of length {}", self.rows),
                got: format!("length {}", v.len()),
            });
        }
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let s = v[r];
            if s == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += s * a;
            }
        }
        Ok(out)
    }

    /// Accumulates the outer product `a * b^T` into `self`.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) -> Result<(), NumError> {
        if a.len() != self.rows || b.len() != self.cols {
            return Err(NumError::ShapeMismatch {
                op: "add_outer",
                expected: format!("{}x{}", self.rows, self.cols),
                got: format!("{}x{}", a.len(), b.len()),
            });
        }
        for (r, &av) in a.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let row = self.row_mut(r);
            for (o, &bv) in row.iter_mut().zip(b) {
                *o += av * bv;
            }
        }
        Ok(())
    }

    /// Elementwise accumulate from a flat buffer of identical size.
    pub fn add_flat(&mut self, g: &[f64]) -> Result<(), NumError> {
        if g.len() != self.data.len() {
            return Err(NumError::ShapeMismatch {
                op: "add_flat",
                expected: format!("{} entries", self.data.len()),
                got: format!("{} entries", g.len()),
            });
        }
        for (o, &v) in self.data.iter_mut().zip(g) {
            *o += v;
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_hand_arithmetic() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn matvec_rejects_bad_length() {
        let m = Matrix::zeros(2, 3);
        assert!(matches!(
            m.matvec(&[1.0, 2.0]),
            Err(NumError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn transposed_matvec_matches_explicit_transpose() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let v = vec![10.0, 100.0];
        // Explicit M^T rows: [1,4],[2,5],[3,6].
        assert_eq!(
            m.matvec_transposed(&v).unwrap(),
            vec![410.0, 520.0, 630.0]
        );
    }

    #[test]
    fn outer_product_accumulates() {
        let mut m = Matrix::zeros(2, 2);
        m.add_outer(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        m.add_outer(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(m.data(), &[4.0, 5.0, 6.0, 8.0]);
    }

    #[test]
    fn from_rows_rejects_ragged_input() {
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
