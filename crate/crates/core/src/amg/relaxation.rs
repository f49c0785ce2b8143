use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Smoother family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelaxKind {
    DampedJacobi,
    GaussSeidel,
    /// Diagonal sparse approximate inverse minimizing `||I - M A||_F`.
    Spai0,
}

impl FromStr for RelaxKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "damped_jacobi" => Ok(Self::DampedJacobi),
            "gauss_seidel" => Ok(Self::GaussSeidel),
            "spai0" => Ok(Self::Spai0),
            other => Err(format!(
                "unknown relaxation `{other}` (expected damped_jacobi, gauss_seidel or spai0)"
            )),
        }
    }
}

/// Per-level smoother. `weights` holds `damping / a_ii` for damped Jacobi,
/// `a_ii / sum_j a_ij^2` for SPAI-0 and `1 / a_ii` for Gauss-Seidel.
#[derive(Clone, Debug)]
pub struct Smoother {
    kind: RelaxKind,
    weights: Vec<f64>,
    damping: f64,
}

impl Smoother {
    pub fn new(kind: RelaxKind, a: &CsrMatrix, damping: f64) -> Result<Self> {
        if !(damping > 0.0 && damping < 2.0) {
            return Err(Error::config(
                "relax.damping",
                format!("damping {damping} outside (0, 2)"),
            ));
        }
        let diag = a.diagonal();
        let weights = match kind {
            RelaxKind::DampedJacobi | RelaxKind::GaussSeidel => {
                if let Some(i) = diag.iter().position(|&d| d == 0.0) {
                    return Err(Error::Structure(format!("zero diagonal entry in row {i}")));
                }
                let w = if kind == RelaxKind::DampedJacobi { damping } else { 1.0 };
                diag.iter().map(|d| w / d).collect()
            }
            RelaxKind::Spai0 => (0..a.nrows())
                .map(|i| {
                    let norm2: f64 = a.row(i).1.iter().map(|v| v * v).sum();
                    if norm2 == 0.0 {
                        Err(Error::Structure(format!("zero row {i} in SPAI-0 setup")))
                    } else {
                        Ok(diag[i] / norm2)
                    }
                })
                .collect::<Result<_>>()?,
        };
        Ok(Self { kind, weights, damping })
    }

    pub fn kind(&self) -> RelaxKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    /// One sweep on `A x = r` updating `x` in place.
    pub fn relax(&self, a: &CsrMatrix, r: &[f64], x: &mut [f64]) {
        match self.kind {
            RelaxKind::DampedJacobi | RelaxKind::Spai0 => {
                let mut ax = vec![0.0; x.len()];
                a.spmv(1.0, x, 0.0, &mut ax).expect("smoother sizes");
                for ((xi, w), (ri, axi)) in x.iter_mut().zip(&self.weights).zip(r.iter().zip(&ax)) {
                    *xi += w * (ri - axi);
                }
            }
            RelaxKind::GaussSeidel => {
                for i in 0..a.nrows() {
                    let (cols, vals) = a.row(i);
                    let mut s = r[i];
                    let mut d = 0.0;
                    for (&j, &v) in cols.iter().zip(vals) {
                        if j == i {
                            d = v;
                        } else {
                            s -= v * x[j];
                        }
                    }
                    x[i] = s / d;
                }
            }
        }
    }

    /// Correction for residual `r` starting from zero.
    pub fn apply(&self, a: &CsrMatrix, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != a.nrows() || self.weights.len() != a.nrows() {
            return Err(Error::dim(format!(
                "smoother of size {} applied to {}x{} matrix and residual of {}",
                self.weights.len(),
                a.nrows(),
                a.ncols(),
                r.len()
            )));
        }
        match self.kind {
            RelaxKind::GaussSeidel => {
                let mut z = vec![0.0; r.len()];
                self.relax(a, r, &mut z);
                Ok(z)
            }
            _ => Ok(r.iter().zip(&self.weights).map(|(r, w)| r * w).collect()),
        }
    }
}

/// Free-function form of [`Smoother::apply`].
pub fn apply_smoother(s: &Smoother, a: &CsrMatrix, r: &[f64]) -> Result<Vec<f64>> {
    s.apply(a, r)
}
