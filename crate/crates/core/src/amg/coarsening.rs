use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Marks unknowns that belong to no aggregate.
pub const UNAGGREGATED: usize = usize::MAX;

/// Assignment of fine unknowns to aggregates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aggregates {
    pub id: Vec<usize>,
    pub count: usize,
}

/// Strong-connection flag for every stored entry of `a`, in storage order.
///
/// Off-diagonal `(i, j)` is strong iff `|a_ij| > eps * sqrt(|a_ii * a_jj|)`;
/// diagonal entries are always strong.
pub fn strength_graph(a: &CsrMatrix, eps: f64) -> Result<Vec<bool>> {
    if !a.is_square() {
        return Err(Error::dim("strength graph of a non-square matrix"));
    }
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::Structure(format!("zero diagonal entry in row {i}")));
    }
    let mut strong = Vec::with_capacity(a.nnz());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            strong.push(i == j || v.abs() > eps * (diag[i] * diag[j]).abs().sqrt());
        }
    }
    Ok(strong)
}

/// Greedy root-based aggregation in ascending row order.
///
/// The first unaggregated row becomes a root and takes its unaggregated
/// strong neighbours, then the unaggregated strong neighbours of those.
/// Rows without strong neighbours become singleton aggregates.
pub fn aggregate(strong: &[bool], a: &CsrMatrix) -> Result<Aggregates> {
    if strong.len() != a.nnz() {
        return Err(Error::dim(format!(
            "strength flags ({}) do not match matrix entries ({})",
            strong.len(),
            a.nnz()
        )));
    }
    let n = a.nrows();
    let ptr = a.row_ptr();
    let col = a.col_idx();
    let mut id = vec![UNAGGREGATED; n];
    let mut count = 0;
    let mut ring: Vec<usize> = Vec::new();
    for i in 0..n {
        if id[i] != UNAGGREGATED {
            continue;
        }
        let cur = count;
        count += 1;
        id[i] = cur;
        ring.clear();
        for k in ptr[i]..ptr[i + 1] {
            let c = col[k];
            if strong[k] && id[c] == UNAGGREGATED {
                id[c] = cur;
                ring.push(c);
            }
        }
        for &c in &ring {
            for k in ptr[c]..ptr[c + 1] {
                let cc = col[k];
                if strong[k] && id[cc] == UNAGGREGATED {
                    id[cc] = cur;
                }
            }
        }
    }
    Ok(Aggregates { id, count })
}

/// Piecewise-constant prolongation: `P[i, id[i]] = 1`, empty rows for
/// unaggregated unknowns.
pub fn tentative_prolongation(agg: &Aggregates, n: usize) -> Result<CsrMatrix> {
    if agg.id.len() != n {
        return Err(Error::dim(format!(
            "aggregates cover {} unknowns, expected {n}",
            agg.id.len()
        )));
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n);
    row_ptr.push(0);
    for &g in &agg.id {
        if g != UNAGGREGATED {
            col_idx.push(g);
        }
        row_ptr.push(col_idx.len());
    }
    let values = vec![1.0; col_idx.len()];
    CsrMatrix::new(n, agg.count, row_ptr, col_idx, values)
}

/// Strength-filtered operator: weak off-diagonals are dropped and added to
/// the diagonal so row sums are preserved.
pub fn filtered_matrix(a: &CsrMatrix, strong: &[bool]) -> CsrMatrix {
    let mut row_ptr = Vec::with_capacity(a.nrows() + 1);
    let mut col_idx = Vec::with_capacity(a.nnz());
    let mut values = Vec::with_capacity(a.nnz());
    row_ptr.push(0);
    let mut k = 0;
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        let weak: f64 = cols
            .iter()
            .zip(vals)
            .enumerate()
            .filter(|&(o, (&j, _))| j != i && !strong[k + o])
            .map(|(_, (_, &v))| v)
            .sum();
        for (o, (&j, &v)) in cols.iter().zip(vals).enumerate() {
            if j == i {
                col_idx.push(j);
                values.push(v + weak);
            } else if strong[k + o] {
                col_idx.push(j);
                values.push(v);
            }
        }
        k += cols.len();
        row_ptr.push(col_idx.len());
    }
    CsrMatrix::from_parts_unchecked(a.nrows(), a.ncols(), row_ptr, col_idx, values)
}

/// `P = (I - omega * D^-1 * A_f) * P_tent` with `D = diag(A)` and `A_f`
/// the strength-filtered matrix.
pub fn smooth_prolongation(a: &CsrMatrix, strong: &[bool], p_tent: &CsrMatrix, omega: f64) -> Result<CsrMatrix> {
    if a.ncols() != p_tent.nrows() || !a.is_square() {
        return Err(Error::dim(format!(
            "prolongation smoothing: A is {}x{}, P is {}x{}",
            a.nrows(),
            a.ncols(),
            p_tent.nrows(),
            p_tent.ncols()
        )));
    }
    if strong.len() != a.nnz() {
        return Err(Error::dim("strength flags do not match matrix entries"));
    }
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::Structure(format!("zero diagonal entry in row {i}")));
    }
    if omega == 0.0 {
        return Ok(p_tent.clone());
    }
    let mut af = filtered_matrix(a, strong);
    // A_f <- I - omega * D^-1 * A_f, row by row
    let n = af.nrows();
    let mut triplets = Vec::with_capacity(af.nnz() + n);
    for i in 0..n {
        let (cols, vals) = af.row(i);
        let s = -omega / diag[i];
        let mut has_diag = false;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                has_diag = true;
                triplets.push((i, j, 1.0 + s * v));
            } else {
                triplets.push((i, j, s * v));
            }
        }
        if !has_diag {
            triplets.push((i, i, 1.0));
        }
    }
    af = CsrMatrix::from_triplets(n, n, &triplets)?;
    af.spgemm(p_tent)
}
