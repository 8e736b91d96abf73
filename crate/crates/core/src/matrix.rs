//! Small dense square matrices, the values of fiber maps.
//!
//! Storage is row-major and inline for `m ≤ 3`, so the transfer-product loop
//! does not allocate. Sizes above 2 fall back to nalgebra for determinants,
//! inverses and singular values.

use nalgebra::DMatrix;
use smallvec::SmallVec;

use crate::error::{Error, Result};

type Entries = SmallVec<[f64; 9]>;

/// Determinant tolerance for matrices accepted as elements of `SL_m(ℝ)`.
pub const DET_TOLERANCE: f64 = 1e-9;
/// Inversion refuses matrices with `|det|` below this.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SlMatrix {
    m: usize,
    data: Entries,
}

impl SlMatrix {
    /// Builds an `SL_m` matrix from rows; rejects non-square input and
    /// `|det − 1| > 1e−9`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::MatrixSize { expected: m, found: bad.len() });
        }
        let data: Entries = rows.iter().flatten().copied().collect();
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        let out = Self { m, data };
        let det = out.det();
        if (det - 1.0).abs() > DET_TOLERANCE {
            return Err(Error::NotSpecialLinear { det });
        }
        Ok(out)
    }

    /// Row-major constructor without the determinant check. Used for
    /// intermediate products whose determinant is only monitored.
    pub fn from_row_major(m: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), m * m, "row-major data must have m*m entries");
        Self { m, data: data.iter().copied().collect() }
    }

    pub fn identity(m: usize) -> Self {
        let mut data = Entries::from_elem(0.0, m * m);
        for i in 0..m {
            data[i * m + i] = 1.0;
        }
        Self { m, data }
    }

    pub fn diag(d: &[f64]) -> Result<Self> {
        let m = d.len();
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| if i == j { d[i] } else { 0.0 }).collect())
            .collect();
        Self::from_rows(&rows)
    }

    #[inline]
    pub(crate) fn new2(a: f64, b: f64, c: f64, d: f64) -> Self {
        let mut data = Entries::new();
        data.extend_from_slice(&[a, b, c, d]);
        Self { m: 2, data }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.m).map(|r| r.to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.m, self.m, &self.data)
    }

    pub fn det(&self) -> f64 {
        let a = &self.data;
        match self.m {
            1 => a[0],
            2 => a[0] * a[3] - a[1] * a[2],
            3 => {
                a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                    + a[2] * (a[3] * a[7] - a[4] * a[6])
            }
            _ => self.to_nalgebra().determinant(),
        }
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &SlMatrix) -> Result<SlMatrix> {
        if self.m != rhs.m {
            return Err(Error::MatrixSize { expected: self.m, found: rhs.m });
        }
        let mut out = SlMatrix { m: self.m, data: Entries::from_elem(0.0, self.m * self.m) };
        mul_into(self.m, &self.data, &rhs.data, &mut out.data);
        Ok(out)
    }

    /// Replaces `self` with `left · self`.
    pub fn mul_left_assign(&mut self, left: &SlMatrix) -> Result<()> {
        if self.m != left.m {
            return Err(Error::MatrixSize { expected: self.m, found: left.m });
        }
        if self.m == 2 {
            let (l, r) = (&left.data, &mut self.data);
            let (a, b, c, d) = (r[0], r[1], r[2], r[3]);
            r[0] = l[0] * a + l[1] * c;
            r[1] = l[0] * b + l[1] * d;
            r[2] = l[2] * a + l[3] * c;
            r[3] = l[2] * b + l[3] * d;
        } else {
            let mut out = Entries::from_elem(0.0, self.m * self.m);
            mul_into(self.m, &left.data, &self.data, &mut out);
            self.data = out;
        }
        Ok(())
    }

    pub fn inverse(&self) -> Result<SlMatrix> {
        let det = self.det();
        if !(det.abs() >= SINGULAR_THRESHOLD) {
            return Err(Error::Singular { det });
        }
        if self.m == 2 {
            let a = &self.data;
            return Ok(Self::new2(a[3] / det, -a[1] / det, -a[2] / det, a[0] / det));
        }
        let inv = self.to_nalgebra().try_inverse().ok_or(Error::Singular { det })?;
        let mut data = Entries::with_capacity(self.m * self.m);
        for i in 0..self.m {
            for j in 0..self.m {
                data.push(inv[(i, j)]);
            }
        }
        Ok(SlMatrix { m: self.m, data })
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Operator 2-norm (largest singular value).
    pub fn op_norm(&self) -> f64 {
        op_norm(self.m, &self.data)
    }

    /// `‖self − other‖₂`.
    pub fn dist(&self, other: &SlMatrix) -> Result<f64> {
        if self.m != other.m {
            return Err(Error::MatrixSize { expected: self.m, found: other.m });
        }
        let diff: Entries = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(op_norm(self.m, &diff))
    }

    /// Largest absolute entry difference.
    pub fn max_entry_diff(&self, other: &SlMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn mul_into(m: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..m {
        for j in 0..m {
            out[i * m + j] = (0..m).map(|k| a[i * m + k] * b[k * m + j]).sum();
        }
    }
}

/// Largest singular value of a row-major `m × m` matrix.
pub(crate) fn op_norm(m: usize, a: &[f64]) -> f64 {
    match m {
        1 => a[0].abs(),
        2 => {
            // σ_max = (|(a+d, c−b)| + |(a−d, b+c)|) / 2
            let (p, q, r, s) = (a[0], a[1], a[2], a[3]);
            0.5 * ((p + s).hypot(r - q) + (p - s).hypot(q + r))
        }
        _ => DMatrix::from_row_slice(m, m, a)
            .singular_values()
            .iter()
            .fold(0.0, |acc: f64, &x| acc.max(x)),
    }
}
