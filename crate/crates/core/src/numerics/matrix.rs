use faer::{Accum, Mat, MatMut, MatRef, Par};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result, C64};

/// Dense complex vector.
pub type ComplexVector = Vec<C64>;

/// Dense complex matrix.
///
/// Storage is column-major (it wraps a `faer::Mat`), but the serialized form is
/// row-major: a list of rows, each a list of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(Mat<C64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Mat::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(Mat::from_fn(rows, cols, f))
    }

    /// Builds a matrix from row-major nested vectors. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|row| row.len() != c) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {c}",
                rows[bad].len()
            )));
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { C64::new(0.0, 0.0) })
    }

    /// `x x^H` for a column vector `x`.
    pub fn outer(x: &[C64]) -> Self {
        let n = x.len();
        Self::from_fn(n, n, |i, j| x[i] * x[j].conj())
    }

    /// Matrix whose `j`-th column is `cols[j]`.
    pub fn from_columns(cols: &[ComplexVector]) -> Result<Self> {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|col| col.len() != r) {
            return Err(Error::Dimension("columns have unequal lengths".into()));
        }
        Ok(Self::from_fn(r, c, |i, j| cols[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.0[(i, j)] = v;
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        (0..self.rows()).map(|i| self.0[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> ComplexVector {
        (0..self.cols()).map(|j| self.0[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<ComplexVector> {
        (0..self.cols()).map(|j| self.column(j)).collect()
    }

    pub fn as_faer(&self) -> MatRef<'_, C64> {
        self.0.as_ref()
    }

    pub fn as_faer_mut(&mut self) -> MatMut<'_, C64> {
        self.0.as_mut()
    }

    pub fn into_faer(self) -> Mat<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint().to_owned())
    }

    /// `(A + A^H) / 2`.
    pub fn hermitized(&self) -> Self {
        let n = self.rows();
        Self::from_fn(n, n, |i, j| (self.0[(i, j)] + self.0[(j, i)].conj()) * 0.5)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm_l2()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows().min(self.cols())).map(|i| self.0[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                m = m.max(self.0[(i, j)].norm());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        (0..self.cols()).all(|j| (0..self.rows()).all(|i| self.0[(i, j)].is_finite()))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_fn(self.rows(), self.cols(), |i, j| self.0[(i, j)] * s)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self::from_fn(self.rows(), self.cols(), |i, j| self.0[(i, j)] - other.0[(i, j)]))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        let mut out = Mat::zeros(self.rows(), other.cols());
        faer::linalg::matmul::matmul(
            out.as_mut(),
            Accum::Replace,
            self.0.as_ref(),
            other.0.as_ref(),
            C64::new(1.0, 0.0),
            Par::Seq,
        );
        Ok(Self(out))
    }

    pub fn matvec(&self, x: &[C64]) -> Result<ComplexVector> {
        if x.len() != self.cols() {
            return Err(Error::Dimension(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.cols()
            )));
        }
        Ok((0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.0[(i, j)] * x[j]).sum())
            .collect())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(())
    }

    fn to_rows(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| pair(self.0[(i, j)])).collect())
            .collect()
    }
}

impl From<Mat<C64>> for ComplexMatrix {
    fn from(m: Mat<C64>) -> Self {
        Self(m)
    }
}

pub(crate) fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn vector_norm(x: &[C64]) -> f64 {
    x.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
}

/// `x^H y`.
pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let rows: Vec<Vec<C64>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect();
        let m = ComplexMatrix::from_rows(&rows).map_err(serde::de::Error::custom)?;
        if !m.is_finite() {
            return Err(serde::de::Error::custom("matrix has non-finite entries"));
        }
        Ok(m)
    }
}

/// Serde adapter for `Vec<C64>` as a list of `[re, im]` pairs.
pub mod complex_vec_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(|z| pair(*z)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<C64>, D::Error> {
        let v: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serde_is_row_major_pairs() {
        let m = ComplexMatrix::from_rows(&[
            vec![C64::new(1.0, 2.0), C64::new(3.0, 0.0)],
            vec![C64::new(0.0, -1.0), C64::new(0.5, 0.25)],
        ])
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[[1.0,2.0],[3.0,0.0]],[[0.0,-1.0],[0.5,0.25]]]");
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec![C64::new(1.0, 0.0)], vec![]];
        assert!(ComplexMatrix::from_rows(&rows).is_err());
    }

    #[test]
    fn matmul_matches_loops() {
        let a = ComplexMatrix::from_fn(3, 2, |i, j| C64::new(i as f64, j as f64 + 1.0));
        let b = ComplexMatrix::from_fn(2, 4, |i, j| C64::new(1.0 - j as f64, i as f64));
        let c = a.matmul(&b).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let want: C64 = (0..2).map(|k| a.get(i, k) * b.get(k, j)).sum();
                assert!((c.get(i, j) - want).norm() < 1e-14);
            }
        }
    }
}
