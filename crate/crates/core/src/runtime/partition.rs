use std::ops::Range;

use crate::error::{Error, Result};

/// Assignment of global unknowns to subdomains as ordered, disjoint,
/// contiguous index intervals covering `[0, nglobal)`.
///
/// Empty subdomains are allowed (they occur when a block system is split
/// into velocity and pressure parts).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    offsets: Vec<usize>,
}

impl Partition {
    /// Splits `nglobal` unknowns into `m` intervals whose sizes differ by at
    /// most one; the first `nglobal % m` intervals get the extra unknown.
    pub fn contiguous(nglobal: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Partition("subdomain count must be positive".into()));
        }
        if m > nglobal {
            return Err(Error::Partition(format!(
                "{m} subdomains requested for {nglobal} unknowns"
            )));
        }
        let (q, r) = (nglobal / m, nglobal % m);
        let sizes: Vec<usize> = (0..m).map(|p| q + usize::from(p < r)).collect();
        Ok(Self::from_sizes(&sizes))
    }

    pub fn from_sizes(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Self { offsets }
    }

    /// Interval boundaries, length `m + 1`.
    pub fn from_offsets(offsets: Vec<usize>) -> Result<Self> {
        if offsets.first() != Some(&0) || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Partition("offsets must start at 0 and be non-decreasing".into()));
        }
        if offsets.len() < 2 {
            return Err(Error::Partition("at least one subdomain is required".into()));
        }
        Ok(Self { offsets })
    }

    pub fn nglobal(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Number of subdomains.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.nglobal() == 0
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn range(&self, p: usize) -> Range<usize> {
        self.offsets[p]..self.offsets[p + 1]
    }

    pub fn local_len(&self, p: usize) -> usize {
        self.offsets[p + 1] - self.offsets[p]
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.offsets.windows(2).map(|w| w[0]..w[1])
    }

    /// Subdomain owning global index `i`.
    pub fn owner(&self, i: usize) -> usize {
        debug_assert!(i < self.nglobal());
        // last offset <= i, skipping empty subdomains
        self.offsets.partition_point(|&o| o <= i) - 1
    }

    /// Owner of every global index.
    pub fn owners(&self) -> Vec<usize> {
        let mut owner = Vec::with_capacity(self.nglobal());
        for (p, r) in self.ranges().enumerate() {
            owner.extend(std::iter::repeat_n(p, r.len()));
        }
        owner
    }

    /// Gathers per-subdomain pieces back into one global vector.
    pub fn assemble<T: Clone>(&self, pieces: &[Vec<T>]) -> Result<Vec<T>> {
        if pieces.len() != self.len() {
            return Err(Error::dim(format!(
                "{} pieces for {} subdomains",
                pieces.len(),
                self.len()
            )));
        }
        let mut out = Vec::with_capacity(self.nglobal());
        for (p, piece) in pieces.iter().enumerate() {
            if piece.len() != self.local_len(p) {
                return Err(Error::dim(format!(
                    "subdomain {p} returned {} entries, owns {}",
                    piece.len(),
                    self.local_len(p)
                )));
            }
            out.extend_from_slice(piece);
        }
        Ok(out)
    }
}

/// Free-function form of [`Partition::contiguous`].
pub fn partition_contiguous(nglobal: usize, m: usize) -> Result<Partition> {
    Partition::contiguous(nglobal, m)
}
