//! Kernelized null Foley-Sammon training and projection.
//!
//! The linear solver needs d > N - C to find its null space. Kernelizing
//! lifts data into an implicit feature space where that condition holds by
//! construction, so the same C-1 collapse directions exist for any data.
//! All computation stays in N x N kernel coordinates:
//!
//! 1. build the kernel matrix K and double-center it, Kt = (I-M) K (I-M),
//!    where M has every entry 1/N;
//! 2. kernel PCA on Kt keeps eigenpairs above `rank_tol`, giving scaled
//!    eigenvectors Vt = V E^{-1/2} (the kernelized orthonormal basis);
//! 3. H = ((I-M) Vt)' K (I-L), where L averages over each class, so H'b
//!    measures within-class scatter along direction b;
//! 4. the C-1 smallest-eigenvalue eigenvectors of H H' give the null
//!    directions; coefficients (I-M) Vt b are stored for projection.
//!
//! The centering operators M and L are never materialized; both reduce to
//! row/column mean subtractions, which keeps training at O(N^2) memory.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use rayon::prelude::*;

use crate::dataset::FeatureSet;
use crate::error::{Error, Result};
use crate::linear::fix_column_signs;
use crate::numeric::{sym_eig, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Rbf,
    Linear,
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Rbf => "rbf",
            KernelKind::Linear => "linear",
        }
    }
}

/// RBF bandwidth: fixed, or derived from the data as the mean pairwise
/// Euclidean distance of the training samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RbfWidth {
    Auto,
    Explicit(f64),
}

/// User-facing kernel choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub width: RbfWidth,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            kind: KernelKind::Rbf,
            width: RbfWidth::Auto,
        }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if let RbfWidth::Explicit(w) = self.width {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "kernel width must be a positive real, got {w}"
                )));
            }
        }
        Ok(())
    }

    /// Pins the width against the given data, yielding a kernel that can be
    /// evaluated on arbitrary inputs.
    pub fn resolve(&self, x: &ArrayView2<f64>) -> Result<ResolvedKernel> {
        self.validate()?;
        let sigma = match (self.kind, self.width) {
            (KernelKind::Linear, _) => None,
            (KernelKind::Rbf, RbfWidth::Explicit(w)) => Some(w),
            (KernelKind::Rbf, RbfWidth::Auto) => Some(rbf_width_auto(x)?),
        };
        Ok(ResolvedKernel {
            kind: self.kind,
            sigma,
        })
    }
}

/// A kernel whose parameters are fully determined (`sigma` present iff RBF).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedKernel {
    pub kind: KernelKind,
    pub sigma: Option<f64>,
}

fn sq_dist(a: &ndarray::ArrayView1<f64>, b: &ndarray::ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let e = x - y;
            e * e
        })
        .sum()
}

/// Kernel matrix with entry (i, j) = k(x_i, y_j); `n x m` for `X` of n
/// columns and `Y` of m columns.
///
/// Linear: x' y. RBF: exp(-|x - y|^2 / (2 sigma^2)), evaluated per pair so
/// that identical columns give exactly 1 (no Gram-expansion cancellation).
pub fn kernel_matrix(
    x: &ArrayView2<f64>,
    y: &ArrayView2<f64>,
    kernel: &ResolvedKernel,
) -> Result<Array2<f64>> {
    if x.nrows() != y.nrows() {
        return Err(Error::dim(
            "kernel_matrix row dimensions",
            x.nrows().to_string(),
            y.nrows().to_string(),
        ));
    }
    match kernel.kind {
        KernelKind::Linear => Ok(x.t().dot(y)),
        KernelKind::Rbf => {
            let sigma = kernel.sigma.ok_or_else(|| {
                Error::InvalidArgument("rbf kernel requires a resolved width".into())
            })?;
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "rbf width must be positive, got {sigma}"
                )));
            }
            let inv = 1.0 / (2.0 * sigma * sigma);
            let (n, m) = (x.ncols(), y.ncols());
            // Parallel over output columns; every entry is computed with a
            // fixed sequential reduction, so results are thread-invariant.
            let cols: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|j| {
                    let yj = y.column(j);
                    (0..n)
                        .map(|i| (-sq_dist(&x.column(i), &yj) * inv).exp())
                        .collect()
                })
                .collect();
            let mut k = Array2::zeros((n, m).f());
            for (j, col) in cols.into_iter().enumerate() {
                k.column_mut(j).assign(&Array1::from_vec(col));
            }
            Ok(k)
        }
    }
}

/// Mean Euclidean distance over all N(N-1)/2 unordered column pairs.
///
/// Fails with `DegenerateKernel` when every pairwise distance is zero,
/// since the resulting RBF kernel would be constant.
pub fn rbf_width_auto(x: &ArrayView2<f64>) -> Result<f64> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "auto kernel width needs at least 2 samples, got {n}"
        )));
    }
    // Per-anchor partial sums are collected in index order and reduced
    // sequentially: deterministic under any thread schedule.
    let partials: Vec<f64> = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let xi = x.column(i);
            (i + 1..n)
                .map(|j| sq_dist(&xi, &x.column(j)).sqrt())
                .sum()
        })
        .collect();
    let total: f64 = partials.iter().sum();
    let pairs = (n * (n - 1) / 2) as f64;
    let sigma = total / pairs;
    if sigma <= 0.0 {
        return Err(Error::DegenerateKernel(
            "all pairwise distances are zero; auto RBF width is undefined".into(),
        ));
    }
    Ok(sigma)
}

/// Learned kernel null-space model.
///
/// Projection of a point x needs its kernel column against the training
/// samples plus the training-time centering statistics, so the model retains
/// the training features verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelNullModel {
    pub train_features: Array2<f64>,
    pub kernel: ResolvedKernel,
    /// N x (C-1); column i holds the expansion coefficients of NPD i over
    /// the centered training features.
    pub coef: Array2<f64>,
    /// Column means of the training kernel matrix.
    pub train_kernel_col_means: Array1<f64>,
    /// Grand mean of the training kernel matrix (the mean of the column
    /// means; recomputable, kept to avoid re-deriving it on every call).
    pub train_kernel_grand_mean: f64,
    pub class_count: usize,
}

impl KernelNullModel {
    pub fn dim(&self) -> usize {
        self.train_features.nrows()
    }

    pub fn train_size(&self) -> usize {
        self.train_features.ncols()
    }

    /// Output dimension, always `class_count - 1`.
    pub fn out_dim(&self) -> usize {
        self.coef.ncols()
    }
}

/// Numerical evidence recorded while training a kernel model.
#[derive(Debug, Clone)]
pub struct KernelTrainReport {
    pub samples: usize,
    pub dim: usize,
    pub classes: usize,
    /// Resolved RBF width (None for the linear kernel).
    pub sigma: Option<f64>,
    /// Rank kept by kernel PCA on the centered kernel.
    pub kpca_rank: usize,
    /// The C-1 smallest eigenvalues of H H', ascending.
    pub null_eigenvalues: Vec<f64>,
    /// Largest eigenvalue of H H'.
    pub max_eigenvalue: f64,
    /// max over NPDs of projected within-class scatter, relative to the
    /// within-scatter norm.
    pub max_collapse_ratio: f64,
    /// min over NPDs of projected between-class scatter.
    pub min_between_scatter: f64,
}

/// `Kt = (I-M) K (I-M)` for symmetric K, returned with the column means and
/// grand mean used for test-time centering.
fn double_center(k: &Array2<f64>) -> (Array2<f64>, Array1<f64>, f64) {
    let n = k.nrows();
    let col_means = k.mean_axis(Axis(0)).expect("n >= 1");
    let grand = col_means.mean().expect("n >= 1");
    let mut kt = Array2::zeros((n, n).f());
    for j in 0..n {
        for i in 0..=j {
            let v = k[[i, j]] - col_means[i] - col_means[j] + grand;
            kt[[i, j]] = v;
            kt[[j, i]] = v;
        }
    }
    (kt, col_means, grand)
}

/// `B = K (I-L)`: subtracts from every kernel column the mean column of its
/// class. L is the block matrix with constant 1/N_c entries per class block;
/// applying it as a per-class mean avoids materializing the blocks (and any
/// sample permutation).
fn subtract_class_col_means(k: &Array2<f64>, members: &[Vec<usize>]) -> Array2<f64> {
    let mut b = k.clone();
    for class in members {
        let mut mean = Array1::zeros(k.nrows());
        for &j in class {
            mean += &k.column(j);
        }
        mean /= class.len() as f64;
        for &j in class {
            let mut col = b.column_mut(j);
            col -= &mean;
        }
    }
    b
}

fn frob(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Trains the kernelized null Foley-Sammon transform.
pub fn train_kernel_nfst(
    fs: &FeatureSet,
    spec: &KernelSpec,
    tol: &Tolerances,
) -> Result<KernelNullModel> {
    train_kernel_nfst_with_report(fs, spec, tol).map(|(m, _)| m)
}

/// As [`train_kernel_nfst`], also returning the numerical evidence.
pub fn train_kernel_nfst_with_report(
    fs: &FeatureSet,
    spec: &KernelSpec,
    tol: &Tolerances,
) -> Result<(KernelNullModel, KernelTrainReport)> {
    train_kernel_impl(fs, spec, tol, true)
}

/// Best-effort variant for self-training rounds.
///
/// Pseudo-classes may share samples, and a sample sitting in two classes
/// rules out an exact shared null space: collapsing both classes forces
/// their projected means onto that sample's projection. This variant keeps
/// the C-1 smallest-eigenvalue directions without demanding that they be
/// null, requiring only enough centered-kernel rank for C-1 directions.
pub(crate) fn train_kernel_nfst_relaxed(
    fs: &FeatureSet,
    spec: &KernelSpec,
    tol: &Tolerances,
) -> Result<KernelNullModel> {
    train_kernel_impl(fs, spec, tol, false).map(|(m, _)| m)
}

fn train_kernel_impl(
    fs: &FeatureSet,
    spec: &KernelSpec,
    tol: &Tolerances,
    strict: bool,
) -> Result<(KernelNullModel, KernelTrainReport)> {
    tol.validate()?;
    let n = fs.num_samples();
    let c = fs.num_classes();
    if c < 2 {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 2 identity classes, got {c}"
        )));
    }
    let needed = c - 1;
    let x = fs.features();
    let kernel = spec.resolve(&x)?;

    let k = kernel_matrix(&x, &x, &kernel)?;
    let k = {
        // exact symmetry before eigendecomposition
        let kt = k.t().to_owned();
        (k + kt) * 0.5
    };
    let (kt, col_means, grand) = double_center(&k);

    // Kernel PCA: keep eigenpairs of the centered kernel above rank_tol.
    let (evals, evecs) = sym_eig(&kt.view())?;
    let lambda_max = evals[n - 1];
    if !(lambda_max > 0.0) {
        return Err(Error::DegenerateKernel(format!(
            "centered kernel has no positive eigenvalue (max {lambda_max:.3e})"
        )));
    }
    let keep_from = evals
        .iter()
        .position(|v| *v > tol.rank_tol * lambda_max)
        .expect("lambda_max itself exceeds the threshold");
    let r = n - keep_from;
    // Vt = V E^{-1/2}, columns ordered by descending eigenvalue.
    let mut vt = Array2::zeros((n, r));
    for (out, idx) in (keep_from..n).rev().enumerate() {
        let scale = 1.0 / evals[idx].sqrt();
        vt.column_mut(out).assign(&(&evecs.column(idx) * scale));
    }

    // Q = (I-M) Vt: column-mean removal.
    let q_means = vt.mean_axis(Axis(0)).expect("n >= 1");
    let q = &vt - &q_means.view().insert_axis(Axis(0));

    let members = fs.class_members();
    let b = subtract_class_col_means(&k, &members);
    let h = q.t().dot(&b); // r x N
    let g = {
        let gg = h.dot(&h.t());
        let ggt = gg.t().to_owned();
        (gg + ggt) * 0.5
    };

    let (gvals, gvecs) = sym_eig(&g.view())?;
    let g_max = gvals[r - 1].max(0.0);
    let below = gvals
        .iter()
        .take_while(|v| **v <= tol.rank_tol * g_max)
        .count();
    if strict && below < needed {
        return Err(Error::NoNullSpace {
            found: below,
            required: needed,
        });
    }
    if r < needed {
        // Even best-effort selection needs C-1 directions to pick from.
        return Err(Error::NoNullSpace {
            found: below,
            required: needed,
        });
    }
    if !strict && below < needed {
        log::debug!(
            "relaxed kernel training: only {below} of {needed} directions are null, \
             keeping the {needed} smallest"
        );
    }

    let mut beta = gvecs.slice(s![.., 0..needed]).to_owned();
    fix_column_signs(&mut beta);
    let coef = q.dot(&beta); // N x (C-1)

    // Validate collapse and separation directly on the training projections
    // rather than trusting the eigensolver. Training projections are
    // coef' Kt; w' S_w w in feature space equals |H' beta|^2 / N, whose
    // scale is |G|_F / N.
    let yt = coef.t().dot(&kt);
    let mut yw = yt.clone();
    for class in &members {
        let mut mean = Array1::zeros(yt.nrows());
        for &j in class {
            mean += &yw.column(j);
        }
        mean /= class.len() as f64;
        for &j in class {
            let mut col = yw.column_mut(j);
            col -= &mean;
        }
    }
    let nf = n as f64;
    let sw_quad: Vec<f64> = yw.axis_iter(Axis(0)).map(|row| row.dot(&row) / nf).collect();
    let st_quad: Vec<f64> = yt.axis_iter(Axis(0)).map(|row| row.dot(&row) / nf).collect();
    let scatter_scale = frob(&g) / nf;
    let collapse_limit = tol.collapse_tol * scatter_scale;
    let collapsed = sw_quad.iter().filter(|v| **v <= collapse_limit).count();
    if strict && collapsed < needed {
        return Err(Error::NoNullSpace {
            found: collapsed,
            required: needed,
        });
    }
    // Reference scale for separation is the total-scatter trace in feature
    // space, tr(Kt)/N, so negligible between-class spread is caught even
    // when every direction is degenerate at once.
    let st_trace = kt.diag().sum() / nf;
    let sb_quad: Vec<f64> = (0..needed).map(|i| st_quad[i] - sw_quad[i]).collect();
    let failing: Vec<usize> = (0..needed)
        .filter(|&i| sb_quad[i] <= tol.rank_tol * st_trace)
        .collect();
    if strict && !failing.is_empty() {
        return Err(Error::BetweenScatterNotPositive { columns: failing });
    }

    let report = KernelTrainReport {
        samples: n,
        dim: fs.dim(),
        classes: c,
        sigma: kernel.sigma,
        kpca_rank: r,
        null_eigenvalues: gvals.iter().take(needed).copied().collect(),
        max_eigenvalue: gvals[r - 1],
        max_collapse_ratio: if scatter_scale > 0.0 {
            sw_quad.iter().fold(0.0_f64, |acc, v| acc.max(*v)) / scatter_scale
        } else {
            0.0
        },
        min_between_scatter: sb_quad.iter().fold(f64::INFINITY, |acc, v| acc.min(*v)),
    };
    let model = KernelNullModel {
        train_features: x.to_owned(),
        kernel,
        coef,
        train_kernel_col_means: col_means,
        train_kernel_grand_mean: grand,
        class_count: c,
    };
    Ok((model, report))
}

/// Projects `x` (d x n) into the learned null space.
///
/// Computes the kernel columns of `x` against the training features and
/// applies the test-time analogue of the training centering: subtract the
/// stored column means, then shift by each column's own mean minus the grand
/// mean. Feeding training samples through this path reproduces their
/// training projections.
pub fn project_kernel(model: &KernelNullModel, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.nrows() != model.dim() {
        return Err(Error::dim(
            "project_kernel input rows",
            model.dim().to_string(),
            x.nrows().to_string(),
        ));
    }
    let mut kx = kernel_matrix(&model.train_features.view(), x, &model.kernel)?;
    for j in 0..kx.ncols() {
        let col_mean = kx.column(j).mean().expect("train size >= 1");
        let shift = col_mean - model.train_kernel_grand_mean;
        let mut col = kx.column_mut(j);
        col -= &model.train_kernel_col_means;
        col.mapv_inplace(|v| v - shift);
    }
    Ok(model.coef.t().dot(&kx))
}
