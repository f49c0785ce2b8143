use rayon::prelude::*;

use super::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Entries with magnitude below this are dropped from sparse products.
pub const DROP_TOLERANCE: f64 = 1e-300;

/// Row count above which mat-vec products fan out over the current rayon pool.
const PAR_ROWS: usize = 8192;

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row and there are no
/// duplicate entries. Every constructor enforces this.
///
/// ```text
///  2 -1  .        row_ptr = [0, 2, 5, 7]
/// -1  2 -1        col_idx = [0, 1, 0, 1, 2, 1, 2]
///  . -1  2        values  = [2, -1, -1, 2, -1, -1, 2]
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Validates and wraps raw CSR arrays.
    pub fn new(nrows: usize, ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(Error::Structure(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if row_ptr[0] != 0 {
            return Err(Error::Structure("row_ptr[0] must be 0".into()));
        }
        if col_idx.len() != values.len() || row_ptr[nrows] != col_idx.len() {
            return Err(Error::Structure(format!(
                "row_ptr ends at {} but there are {} column indices and {} values",
                row_ptr[nrows],
                col_idx.len(),
                values.len()
            )));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::Structure(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for (k, &c) in cols.iter().enumerate() {
                if c >= ncols {
                    return Err(Error::Structure(format!(
                        "column {c} out of range in row {i} (ncols = {ncols})"
                    )));
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(Error::Structure(format!("columns not strictly increasing in row {i}")));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub(crate) fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), nrows + 1);
        debug_assert_eq!(col_idx.len(), values.len());
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Duplicates are summed; explicit zeros are kept.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::dim(format!(
                    "triplet ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..nrows {
            let (lo, hi) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(lo..hi);
            // stable: duplicates are summed in input order
            order.sort_by_key(|&k| cols[k]);
            for &k in &order {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == cols[k] {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_parts_unchecked(nrows, ncols, row_ptr, col_idx, values))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_parts_unchecked(nrows, ncols, vec![0; nrows + 1], Vec::new(), Vec::new())
    }

    /// Diagonal matrix with the given entries (zeros are stored explicitly).
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), diag.to_vec())
    }

    /// Sparse copy of a dense matrix; exact zeros are skipped.
    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..d.nrows() {
            for (j, &v) in d.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_parts_unchecked(d.nrows(), d.ncols(), row_ptr, col_idx, values)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Main diagonal; missing entries read as zero.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = alpha * A * x + beta * y`.
    ///
    /// Rows are independent and each row is summed left to right, so the
    /// result does not depend on how many threads take part.
    pub fn spmv(&self, alpha: f64, x: &[f64], beta: f64, y: &mut [f64]) -> Result<()> {
        if x.len() != self.ncols || y.len() != self.nrows {
            return Err(Error::dim(format!(
                "spmv: matrix is {}x{}, x has {} entries, y has {}",
                self.nrows,
                self.ncols,
                x.len(),
                y.len()
            )));
        }
        let row = |i: usize, yi: &mut f64| {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * x[j];
            }
            *yi = if beta == 0.0 { alpha * s } else { alpha * s + beta * *yi };
        };
        if self.nrows >= PAR_ROWS && rayon::current_num_threads() > 1 {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| row(i, yi));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| row(i, yi));
        }
        Ok(())
    }

    /// `A * x` into a fresh vector.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.spmv(1.0, x, 0.0, &mut y)?;
        Ok(y)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // rows visited in ascending order keep the transposed columns sorted
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self::from_parts_unchecked(self.ncols, self.nrows, counts, col_idx, values)
    }

    /// Sparse product `self * other` (row-by-row Gustavson).
    ///
    /// Results with magnitude below [`DROP_TOLERANCE`] are discarded; no
    /// other dropping happens, so Galerkin products stay exact.
    pub fn spgemm(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::dim(format!(
                "spgemm: {}x{} times {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let n = other.ncols;
        let mut marker = vec![usize::MAX; n];
        let mut acc = vec![0.0; n];
        let mut row_cols: Vec<usize> = Vec::new();

        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            row_cols.clear();
            let (acols, avals) = self.row(i);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&j, &b) in bcols.iter().zip(bvals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = a * b;
                        row_cols.push(j);
                    } else {
                        acc[j] += a * b;
                    }
                }
            }
            row_cols.sort_unstable();
            for &j in &row_cols {
                if acc[j].abs() >= DROP_TOLERANCE {
                    col_idx.push(j);
                    values.push(acc[j]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_parts_unchecked(self.nrows, n, row_ptr, col_idx, values))
    }

    /// Multiplies every stored value by `s`.
    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Keeps the rows listed in `rows` and remaps columns through `col_map`
    /// (`None` drops the column). Row and column order follow the maps.
    pub fn extract(&self, rows: &[usize], col_map: &[Option<usize>], ncols: usize) -> CsrMatrix {
        debug_assert_eq!(col_map.len(), self.ncols);
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut entries: Vec<(usize, f64)> = Vec::new();
        row_ptr.push(0);
        for &i in rows {
            entries.clear();
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if let Some(c) = col_map[j] {
                    entries.push((c, v));
                }
            }
            entries.sort_unstable_by_key(|e| e.0);
            for &(c, v) in &entries {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_parts_unchecked(rows.len(), ncols, row_ptr, col_idx, values)
    }

    /// Largest absolute stored value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
