use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            values: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nrows * ncols {
            return Err(Error::dim(format!(
                "{} values for a {nrows}x{ncols} matrix",
                values.len()
            )));
        }
        Ok(Self { nrows, ncols, values })
    }

    /// Builds from a slice of equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::dim("ragged rows"));
        }
        Ok(Self {
            nrows,
            ncols,
            values: rows.concat(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::dim(format!(
                "dense matvec: {} columns, x has {}",
                self.ncols,
                x.len()
            )));
        }
        Ok((0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `selfᵀ * x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(Error::dim(format!(
                "dense transposed matvec: {} rows, x has {}",
                self.nrows,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (yj, &a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
        Ok(y)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::dim(format!(
                "dense matmul: {}x{} times {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut c = DenseMatrix::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.ncols {
                    c[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(c)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.values[i * self.ncols + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`, packed in place.
#[derive(Clone, Debug)]
pub struct LuFactorization {
    lu: DenseMatrix,
    pivots: Vec<usize>,
}

impl LuFactorization {
    /// Factorizes a square matrix. A pivot that is negligible relative to
    /// the largest entry of `a` is reported as [`Error::SingularMatrix`].
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::dim(format!(
                "LU of a non-square {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let mut lu = a.clone();
        let mut pivots = vec![0; n];
        let tiny = f64::EPSILON * (n.max(1) as f64) * a.max_abs();
        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pmag <= tiny || pmag == 0.0 {
                return Err(Error::SingularMatrix {
                    pivot: k,
                    magnitude: pmag,
                });
            }
            pivots[k] = p;
            if p != k {
                for j in 0..n {
                    lu.values.swap(k * n + j, p * n + j);
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / d;
                lu[(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= l * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, pivots })
    }

    pub fn size(&self) -> usize {
        self.pivots.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        let n = self.size();
        if b.len() != n {
            return Err(Error::dim(format!("LU solve: size {n}, rhs has {}", b.len())));
        }
        for k in 0..n {
            b.swap(k, self.pivots[k]);
        }
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = b[i];
            for j in 0..i {
                s -= row[j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = b[i];
            for j in i + 1..n {
                s -= row[j] * b[j];
            }
            b[i] = s / row[i];
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}
