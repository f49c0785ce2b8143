use std::ops::Range;
use std::sync::Arc;

use super::comm::Communicator;
use super::partition::Partition;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Off-subdomain column indices a subdomain reads, grouped by owner.
#[derive(Clone, Debug)]
pub struct HaloPattern {
    col_partition: Arc<Partition>,
    ghosts: Vec<usize>,
    neighbors: Vec<(usize, Vec<usize>)>,
}

impl HaloPattern {
    /// Column partition the ghost indices refer to.
    pub fn col_partition(&self) -> &Partition {
        &self.col_partition
    }

    /// Global indices of the ghost columns, sorted ascending.
    pub fn ghosts(&self) -> &[usize] {
        &self.ghosts
    }

    /// `(owner, global indices)` pairs; concatenated they equal `ghosts()`.
    pub fn neighbors(&self) -> &[(usize, Vec<usize>)] {
        &self.neighbors
    }
}

/// The rows of a distributed matrix owned by one subdomain.
///
/// Columns of `local` are renumbered: `[0, ncols_local)` are the owned
/// columns (the diagonal block when row and column partitions coincide),
/// followed by one column per ghost in `halo.ghosts()` order.
#[derive(Clone, Debug)]
pub struct SubdomainView {
    rank: usize,
    rows: Range<usize>,
    cols: Range<usize>,
    local: CsrMatrix,
    halo: HaloPattern,
}

impl SubdomainView {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rows(&self) -> Range<usize> {
        self.rows.clone()
    }

    pub fn cols(&self) -> Range<usize> {
        self.cols.clone()
    }

    pub fn nrows_local(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols_local(&self) -> usize {
        self.cols.len()
    }

    /// Local rows over owned columns followed by ghost columns.
    pub fn local_matrix(&self) -> &CsrMatrix {
        &self.local
    }

    pub fn halo(&self) -> &HaloPattern {
        &self.halo
    }

    /// The owned-column block with ghost couplings discarded. For square
    /// splits this is the subdomain's diagonal block.
    pub fn local_block(&self) -> CsrMatrix {
        let nc = self.ncols_local();
        let map: Vec<Option<usize>> = (0..self.local.ncols()).map(|j| (j < nc).then_some(j)).collect();
        let rows: Vec<usize> = (0..self.local.nrows()).collect();
        self.local.extract(&rows, &map, nc)
    }

    /// Owned entries of `A x` for a distributed `x`; collective.
    pub fn spmv(&self, comm: &Communicator, x_local: &[f64], y_local: &mut [f64]) -> Result<()> {
        let ghosts = comm.halo_exchange(x_local, &self.halo)?;
        self.spmv_with_ghosts(x_local, &ghosts, y_local)
    }

    /// Local product once ghost values are known.
    pub fn spmv_with_ghosts(&self, x_local: &[f64], ghosts: &[f64], y_local: &mut [f64]) -> Result<()> {
        if ghosts.is_empty() {
            if self.local.ncols() != x_local.len() {
                return Err(Error::dim("ghost values missing for subdomain product"));
            }
            return self.local.spmv(1.0, x_local, 0.0, y_local);
        }
        let mut xg = Vec::with_capacity(x_local.len() + ghosts.len());
        xg.extend_from_slice(x_local);
        xg.extend_from_slice(ghosts);
        self.local.spmv(1.0, &xg, 0.0, y_local)
    }

    /// Global matrix entries of this view as `(row, col, value)` triplets.
    pub fn global_triplets(&self) -> Vec<(usize, usize, f64)> {
        let nc = self.ncols_local();
        let mut out = Vec::with_capacity(self.local.nnz());
        for i in 0..self.local.nrows() {
            let (cols, vals) = self.local.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let g = if j < nc {
                    self.cols.start + j
                } else {
                    self.halo.ghosts[j - nc]
                };
                out.push((self.rows.start + i, g, v));
            }
        }
        out
    }
}

/// Splits a square matrix into per-subdomain row blocks over one partition.
pub fn split_matrix(a: &CsrMatrix, part: &Partition) -> Result<Vec<SubdomainView>> {
    if !a.is_square() {
        return Err(Error::dim(format!(
            "split_matrix needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    split_rect(a, part, part)
}

/// Splits a possibly rectangular matrix: rows follow `row_part`, columns
/// are owned according to `col_part`.
pub fn split_rect(a: &CsrMatrix, row_part: &Partition, col_part: &Partition) -> Result<Vec<SubdomainView>> {
    if a.nrows() != row_part.nglobal() || a.ncols() != col_part.nglobal() {
        return Err(Error::dim(format!(
            "matrix is {}x{}, partitions cover {}x{}",
            a.nrows(),
            a.ncols(),
            row_part.nglobal(),
            col_part.nglobal()
        )));
    }
    if row_part.len() != col_part.len() {
        return Err(Error::dim(format!(
            "row partition has {} subdomains, column partition {}",
            row_part.len(),
            col_part.len()
        )));
    }
    let col_part = Arc::new(col_part.clone());
    let mut views = Vec::with_capacity(row_part.len());
    for p in 0..row_part.len() {
        let rows = row_part.range(p);
        let cols = col_part.range(p);

        let mut ghosts: Vec<usize> = rows
            .clone()
            .flat_map(|i| a.row(i).0.iter().copied())
            .filter(|j| !cols.contains(j))
            .collect();
        ghosts.sort_unstable();
        ghosts.dedup();

        let mut col_map: Vec<Option<usize>> = vec![None; a.ncols()];
        for (k, j) in cols.clone().enumerate() {
            col_map[j] = Some(k);
        }
        for (k, &g) in ghosts.iter().enumerate() {
            col_map[g] = Some(cols.len() + k);
        }
        let row_list: Vec<usize> = rows.clone().collect();
        let local = a.extract(&row_list, &col_map, cols.len() + ghosts.len());

        let mut neighbors: Vec<(usize, Vec<usize>)> = Vec::new();
        for &g in &ghosts {
            let owner = col_part.owner(g);
            match neighbors.last_mut() {
                Some((o, list)) if *o == owner => list.push(g),
                _ => neighbors.push((owner, vec![g])),
            }
        }
        views.push(SubdomainView {
            rank: p,
            rows,
            cols,
            local,
            halo: HaloPattern {
                col_partition: Arc::clone(&col_part),
                ghosts,
                neighbors,
            },
        });
    }
    Ok(views)
}

/// Rebuilds the global matrix from its views.
pub fn reassemble(views: &[SubdomainView], nrows: usize, ncols: usize) -> Result<CsrMatrix> {
    let triplets: Vec<_> = views.iter().flat_map(|v| v.global_triplets()).collect();
    CsrMatrix::from_triplets(nrows, ncols, &triplets)
}
