//! Dense linear-algebra primitives with explicit tolerance handling.
//!
//! Everything downstream (scatter construction, null-space extraction, kernel
//! PCA) is built on three operations: an orthonormal basis of a column space
//! with numerical rank truncation, a symmetric eigendecomposition, and column
//! centering. Rank decisions are always made relative to the largest
//! singular/eigen magnitude, never absolutely, because feature scales vary
//! wildly across representations.

use faer_ext::{IntoFaer, IntoNdarray};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Thresholds separating "numerically zero" from "signal".
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Relative threshold for treating a singular/eigen value as zero,
    /// measured against the largest magnitude in the same spectrum.
    pub rank_tol: f64,
    /// Relative threshold for post-hoc collapse checks on trained models.
    pub collapse_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_tol: 1e-10,
            collapse_tol: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.rank_tol > 0.0) || !(self.collapse_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be strictly positive (rank_tol={}, collapse_tol={})",
                self.rank_tol, self.collapse_tol
            )));
        }
        Ok(())
    }
}

/// Orthonormal basis of the column space of `m`, as a `d x r` matrix where
/// `r` is the numerical rank of `m` under `tol.rank_tol`.
///
/// Modified Gram-Schmidt with one re-orthogonalization pass; classical
/// Gram-Schmidt loses orthogonality once `d` reaches the tens of thousands.
/// A column whose residual norm after orthogonalization falls below
/// `rank_tol` times the largest column norm of `m` is treated as linearly
/// dependent and dropped. An all-zero `m` yields an empty (`d x 0`) basis.
pub fn orthonormal_basis(m: &ArrayView2<f64>, tol: &Tolerances) -> Array2<f64> {
    let (d, cols) = m.dim();
    let scale = (0..cols)
        .map(|j| column_norm(m, j))
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Array2::zeros((d, 0));
    }
    let threshold = tol.rank_tol * scale;

    let mut basis: Vec<Array1<f64>> = Vec::new();
    for j in 0..cols {
        let mut v = m.column(j).to_owned();
        for _ in 0..2 {
            for u in &basis {
                let c = u.dot(&v);
                v.scaled_add(-c, u);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > threshold {
            basis.push(v / norm);
        }
    }

    let r = basis.len();
    let mut q = Array2::zeros((d, r));
    for (j, u) in basis.iter().enumerate() {
        q.column_mut(j).assign(u);
    }
    q
}

fn column_norm(m: &ArrayView2<f64>, j: usize) -> f64 {
    let c = m.column(j);
    c.dot(&c).sqrt()
}

/// Relative tolerance accepted when checking that the input to [`sym_eig`]
/// is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues ascending and the
/// i-th eigenvector in column i, satisfying `S V = V diag(lambda)`. Rejects
/// inputs that are asymmetric beyond [`SYMMETRY_TOL`] relative to the largest
/// entry magnitude.
pub fn sym_eig(s: &ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (n, m) = s.dim();
    if n != m {
        return Err(Error::dim(
            "sym_eig input",
            "square matrix",
            format!("{n}x{m}"),
        ));
    }
    let magnitude = s.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let mut asymmetry = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asymmetry = asymmetry.max((s[[i, j]] - s[[j, i]]).abs());
        }
    }
    let allowed = SYMMETRY_TOL * magnitude;
    if asymmetry > allowed {
        return Err(Error::NotSymmetric {
            asymmetry,
            tolerance: allowed,
        });
    }

    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }

    let evd = s.into_faer().selfadjoint_eigendecomposition(faer::Side::Lower);
    let values = Array1::from_iter((0..n).map(|i| evd.s().column_vector().read(i)));
    let vectors = evd.u().into_ndarray().to_owned();
    Ok((values, vectors))
}

/// Subtracts the column mean from every column of `x`.
///
/// Returns the centered matrix together with the mean vector, so callers can
/// apply the same shift to held-out data.
pub fn center_columns(x: &ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let n = x.ncols();
    if n == 0 {
        return (x.to_owned(), Array1::zeros(x.nrows()));
    }
    let mean = x.mean_axis(Axis(1)).expect("n >= 1");
    let centered = x - &mean.view().insert_axis(Axis(1));
    (centered, mean)
}
