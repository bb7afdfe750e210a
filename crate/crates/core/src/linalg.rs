//! Small dense matrices for per-element Jacobians (d = 2 or 3).

use std::ops::{Add, Index, IndexMut, Mul, Sub};

/// A square matrix of runtime dimension 2 or 3, stored inline.
///
/// Entries outside the active `dim × dim` block are always zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    dim: usize,
    m: [[f64; 3]; 3],
}

impl Mat {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "matrix dimension must be 2 or 3");
        Mat { dim, m: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut a = Mat::zeros(dim);
        for i in 0..dim {
            a.m[i][i] = 1.0;
        }
        a
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut a = Mat::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            a.m[i][i] = *v;
        }
        a
    }

    /// Builds a matrix from row slices; the number of rows sets the dimension.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let mut a = Mat::zeros(rows.len());
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), rows.len(), "matrix must be square");
            a.m[i][..row.len()].copy_from_slice(row);
        }
        a
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[&[f64]]) -> Self {
        let mut a = Mat::zeros(cols.len());
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                a.m[i][j] = *v;
            }
        }
        a
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transpose(&self) -> Self {
        let mut t = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }

    /// Determinant by cofactor expansion.
    #[inline]
    pub fn det(&self) -> f64 {
        let m = &self.m;
        if self.dim == 2 {
            m[0][0] * m[1][1] - m[0][1] * m[1][0]
        } else {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }

    /// Cofactor matrix, i.e. the derivative of `det` with respect to each entry.
    #[inline]
    pub fn cofactor(&self) -> Self {
        let m = &self.m;
        let mut c = Mat::zeros(self.dim);
        if self.dim == 2 {
            c.m[0][0] = m[1][1];
            c.m[0][1] = -m[1][0];
            c.m[1][0] = -m[0][1];
            c.m[1][1] = m[0][0];
        } else {
            for i in 0..3 {
                for j in 0..3 {
                    let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                    let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                    c.m[i][j] = m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1];
                }
            }
        }
        c
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(self.cofactor().transpose() * (1.0 / det))
    }

    /// Squared Frobenius norm, `tr(AᵀA)`.
    #[inline]
    pub fn norm2(&self) -> f64 {
        self.dot(self)
    }

    /// Frobenius inner product.
    #[inline]
    pub fn dot(&self, other: &Mat) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j] * other.m[i][j];
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        let mut s: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s = s.max(self.m[i][j].abs());
            }
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    /// Rotation by `angle` in the plane.
    pub fn rotation2(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat::from_rows(&[&[c, -s], &[s, c]])
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.dim && j < self.dim);
        &self.m[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.dim && j < self.dim);
        &mut self.m[i][j]
    }
}

impl Mul for Mat {
    type Output = Mat;
    #[inline]
    fn mul(self, rhs: Mat) -> Mat {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut p = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut s = 0.0;
                for k in 0..self.dim {
                    s += self.m[i][k] * rhs.m[k][j];
                }
                p.m[i][j] = s;
            }
        }
        p
    }
}

impl Mul<f64> for Mat {
    type Output = Mat;
    #[inline]
    fn mul(mut self, rhs: f64) -> Mat {
        for row in self.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= rhs;
            }
        }
        self
    }
}

impl Add for Mat {
    type Output = Mat;
    #[inline]
    fn add(mut self, rhs: Mat) -> Mat {
        for i in 0..3 {
            for j in 0..3 {
                self.m[i][j] += rhs.m[i][j];
            }
        }
        self
    }
}

impl Sub for Mat {
    type Output = Mat;
    #[inline]
    fn sub(mut self, rhs: Mat) -> Mat {
        for i in 0..3 {
            for j in 0..3 {
                self.m[i][j] -= rhs.m[i][j];
            }
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_inverse_3d() {
        let a = Mat::from_rows(&[&[2.0, 1.0, 0.0], &[0.0, 3.0, 1.0], &[1.0, 0.0, 1.0]]);
        assert!((a.det() - 7.0).abs() < 1e-14);
        let p = a * a.inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[(i, j)] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cofactor_is_det_derivative() {
        let a = Mat::from_rows(&[&[0.3, -1.2, 0.5], &[0.7, 0.1, 2.0], &[-0.4, 0.9, 1.1]]);
        let c = a.cofactor();
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..3 {
                let mut p = a;
                p[(i, j)] += h;
                let mut m = a;
                m[(i, j)] -= h;
                let fd = (p.det() - m.det()) / (2.0 * h);
                assert!((fd - c[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(a.inverse().is_none());
    }
}
