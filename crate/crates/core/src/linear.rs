//! Linear null Foley-Sammon training and projection.
//!
//! A null projecting direction (NPD) `w` satisfies `w' S_w w = 0` and
//! `w' S_b w > 0` on the training data: every class collapses to a single
//! point while class means stay apart. With N samples in C classes and
//! d > N - C, exactly C-1 such directions exist, and training recovers all
//! of them at once.
//!
//! The solver never forms the d x d scatter matrices. Data is restricted to
//! U, an orthonormal basis of the globally centered samples (rank <= N-1),
//! where the within-class scatter becomes the small matrix U' S_w U whose
//! near-zero eigenvectors are the null directions expressed in basis
//! coordinates.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::dataset::FeatureSet;
use crate::error::{Error, Result};
use crate::numeric::{center_columns, orthonormal_basis, sym_eig, Tolerances};

/// Learned linear null-space model: projection `W` (d x (C-1), columns are
/// NPDs), the training mean, and the training class count.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearNullModel {
    pub w: Array2<f64>,
    pub train_mean: Array1<f64>,
    pub class_count: usize,
}

impl LinearNullModel {
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// Output dimension, always `class_count - 1`.
    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }
}

/// Within-class and total scatter of a feature set, both scaled by `1/N`.
/// The between-class scatter is available as `S_t - S_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPair {
    pub s_w: Array2<f64>,
    pub s_t: Array2<f64>,
}

impl ScatterPair {
    pub fn s_b(&self) -> Array2<f64> {
        &self.s_t - &self.s_w
    }
}

/// Subtracts each sample's class mean, returning the class-centered columns.
fn class_centered(fs: &FeatureSet) -> Array2<f64> {
    let x = fs.features();
    let mut xw = x.to_owned();
    for members in fs.class_members() {
        let mut mean = Array1::zeros(fs.dim());
        for &j in &members {
            mean += &x.column(j);
        }
        mean /= members.len() as f64;
        for &j in &members {
            let mut col = xw.column_mut(j);
            col -= &mean;
        }
    }
    xw
}

fn symmetrize(mut m: Array2<f64>) -> Array2<f64> {
    let t = m.t().to_owned();
    m += &t;
    m *= 0.5;
    m
}

/// Builds the dense scatter matrices `S_w = (1/N) X_w X_w'` and
/// `S_t = (1/N) X_t X_t'`.
///
/// Intended for diagnostics and small problems; training works in basis
/// coordinates and never materializes these.
pub fn scatter_matrices(fs: &FeatureSet) -> Result<ScatterPair> {
    let n = fs.num_samples();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "scatter matrices need N >= 2 samples, got {n}"
        )));
    }
    let (xt, _) = center_columns(&fs.features());
    let xw = class_centered(fs);
    let scale = 1.0 / n as f64;
    let s_t = symmetrize(xt.dot(&xt.t()) * scale);
    let s_w = symmetrize(xw.dot(&xw.t()) * scale);
    Ok(ScatterPair { s_w, s_t })
}

/// Fisher discriminant ratio `(w' S_b w) / (w' S_w w)`.
///
/// `Infinite` marks a null projecting direction: the denominator vanishes
/// while the numerator stays positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FisherValue {
    Finite(f64),
    Infinite,
}

impl FisherValue {
    pub fn is_infinite(&self) -> bool {
        matches!(self, FisherValue::Infinite)
    }
}

fn frob(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Evaluates the Fisher criterion for direction `w` against `scatter`.
///
/// Vanishing is decided relative to the scatter norms and `|w|^2` so the
/// result is invariant to rescaling `w`. A direction orthogonal to all
/// scatter (0/0) is defined as 0 and logged, since it carries no
/// discriminative signal.
pub fn fisher_criterion(
    w: &ndarray::ArrayView1<f64>,
    scatter: &ScatterPair,
    tol: &Tolerances,
) -> Result<FisherValue> {
    let wsq = w.dot(w);
    if wsq == 0.0 {
        return Err(Error::InvalidArgument(
            "fisher_criterion requires a nonzero direction".into(),
        ));
    }
    if w.len() != scatter.s_w.nrows() {
        return Err(Error::dim(
            "fisher_criterion direction",
            scatter.s_w.nrows().to_string(),
            w.len().to_string(),
        ));
    }
    let s_b = scatter.s_b();
    let sw = w.dot(&scatter.s_w.dot(w));
    let sb = w.dot(&s_b.dot(w));
    let sw_zero = sw <= tol.rank_tol * frob(&scatter.s_w) * wsq;
    let sb_zero = sb <= tol.rank_tol * frob(&s_b) * wsq;
    Ok(if sw_zero && sb_zero {
        log::warn!("fisher_criterion: direction orthogonal to all scatter (0/0), defining as 0");
        FisherValue::Finite(0.0)
    } else if sw_zero {
        FisherValue::Infinite
    } else {
        FisherValue::Finite(sb / sw)
    })
}

/// Numerical evidence recorded while training a linear model.
#[derive(Debug, Clone)]
pub struct LinearTrainReport {
    pub samples: usize,
    pub dim: usize,
    pub classes: usize,
    /// Rank of the centered training data (number of basis vectors).
    pub basis_rank: usize,
    /// The C-1 smallest eigenvalues of `U' S_w U`, ascending.
    pub null_eigenvalues: Vec<f64>,
    /// Largest eigenvalue of `U' S_w U`.
    pub max_eigenvalue: f64,
    /// max over NPDs of `w' S_w w`, relative to the within-scatter norm.
    pub max_collapse_ratio: f64,
    /// min over NPDs of `w' S_b w`.
    pub min_between_scatter: f64,
}

/// Trains the linear null Foley-Sammon transform.
///
/// Requires C >= 2 classes and enough excess dimension (d > N - C) for the
/// shared null space to exist; otherwise fails with `NoNullSpace` carrying
/// the number of usable directions found.
pub fn train_linear_nfst(fs: &FeatureSet, tol: &Tolerances) -> Result<LinearNullModel> {
    train_linear_nfst_with_report(fs, tol).map(|(m, _)| m)
}

/// As [`train_linear_nfst`], also returning the numerical evidence.
pub fn train_linear_nfst_with_report(
    fs: &FeatureSet,
    tol: &Tolerances,
) -> Result<(LinearNullModel, LinearTrainReport)> {
    tol.validate()?;
    let n = fs.num_samples();
    let d = fs.dim();
    let c = fs.num_classes();
    if c < 2 {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 2 identity classes, got {c}"
        )));
    }
    let needed = c - 1;

    let (xt, train_mean) = center_columns(&fs.features());
    let u = orthonormal_basis(&xt.view(), tol);
    let r = u.ncols();
    if r < needed {
        return Err(Error::NoNullSpace {
            found: 0,
            required: needed,
        });
    }

    let xw = class_centered(fs);
    let p = u.t().dot(&xw); // r x N
    let a = symmetrize(p.dot(&p.t()) / n as f64); // U' S_w U

    let (vals, vecs) = sym_eig(&a.view())?;
    let lambda_max = vals[r - 1].max(0.0);
    let eig_threshold = tol.rank_tol * lambda_max;
    let below = vals.iter().take_while(|v| **v <= eig_threshold).count();
    if below < needed {
        return Err(Error::NoNullSpace {
            found: below,
            required: needed,
        });
    }

    // Deterministic output: ascending eigenvalue order, each beta sign-fixed
    // so its largest-magnitude entry is positive.
    let mut beta = vecs.slice(s![.., 0..needed]).to_owned();
    fix_column_signs(&mut beta);
    let w = u.dot(&beta);

    // Validate the model invariants directly on the training data rather
    // than trusting the eigensolver: w' S_w w must vanish and w' S_b w must
    // stay positive for every NPD.
    let scatter_scale = frob(&a);
    let yw = w.t().dot(&xw);
    let yt = w.t().dot(&xt);
    let sw_quad: Vec<f64> = quad_forms(&yw.view(), n);
    let st_quad: Vec<f64> = quad_forms(&yt.view(), n);
    let collapse_limit = tol.collapse_tol * scatter_scale;
    let collapsed = sw_quad.iter().filter(|q| **q <= collapse_limit).count();
    if collapsed < needed {
        return Err(Error::NoNullSpace {
            found: collapsed,
            required: needed,
        });
    }
    // Reference scale for separation is the full total-scatter trace, so a
    // direction whose between-class spread is negligible against the data's
    // overall variance (near-duplicate identities) is rejected even when all
    // C-1 directions are degenerate together.
    let st_trace = xt.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let sb_quad: Vec<f64> = (0..needed).map(|i| st_quad[i] - sw_quad[i]).collect();
    let positivity_limit = tol.rank_tol * st_trace;
    let failing: Vec<usize> = (0..needed)
        .filter(|&i| sb_quad[i] <= positivity_limit)
        .collect();
    if !failing.is_empty() {
        return Err(Error::BetweenScatterNotPositive { columns: failing });
    }

    let report = LinearTrainReport {
        samples: n,
        dim: d,
        classes: c,
        basis_rank: r,
        null_eigenvalues: vals.iter().take(needed).copied().collect(),
        max_eigenvalue: vals[r - 1],
        max_collapse_ratio: if scatter_scale > 0.0 {
            sw_quad.iter().fold(0.0_f64, |acc, v| acc.max(*v)) / scatter_scale
        } else {
            0.0
        },
        min_between_scatter: sb_quad.iter().fold(f64::INFINITY, |acc, v| acc.min(*v)),
    };
    let model = LinearNullModel {
        w,
        train_mean,
        class_count: c,
    };
    Ok((model, report))
}

/// Row-wise quadratic forms `(1/n) |row|^2` of a projected data matrix.
fn quad_forms(y: &ArrayView2<f64>, n: usize) -> Vec<f64> {
    y.axis_iter(Axis(0))
        .map(|row| row.dot(&row) / n as f64)
        .collect()
}

pub(crate) fn fix_column_signs(m: &mut Array2<f64>) {
    for mut col in m.axis_iter_mut(Axis(1)) {
        let mut best = 0usize;
        let mut best_abs = -1.0_f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

/// Projects `x` (d x n) into the learned null space: `W' (x - mean)`.
pub fn project_linear(model: &LinearNullModel, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.nrows() != model.dim() {
        return Err(Error::dim(
            "project_linear input rows",
            model.dim().to_string(),
            x.nrows().to_string(),
        ));
    }
    let centered = x - &model.train_mean.view().insert_axis(Axis(1));
    Ok(model.w.t().dot(&centered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, FeatureSet};
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, arr2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set_1d(samples: &[(f64, &str)]) -> FeatureSet {
        let n = samples.len();
        let mut features = Array2::zeros((1, n));
        let mut sample_ids = Vec::new();
        let mut person_ids = Vec::new();
        let mut camera_ids = Vec::new();
        for (j, (v, p)) in samples.iter().enumerate() {
            features[[0, j]] = *v;
            sample_ids.push(format!("s{j}"));
            person_ids.push((*p).to_string());
            camera_ids.push(format!("c{}", j % 2));
        }
        FeatureSet::new(features, sample_ids, person_ids, camera_ids).unwrap()
    }

    #[test]
    fn scatter_one_class_hand_computed() {
        // (1/2)((0-1)^2 + (2-1)^2) = 1 for both scatters.
        let fs = set_1d(&[(0.0, "p"), (2.0, "p")]);
        let sp = scatter_matrices(&fs).unwrap();
        assert_abs_diff_eq!(sp.s_w[[0, 0]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sp.s_t[[0, 0]], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn scatter_singleton_classes_zero_within() {
        let fs = set_1d(&[(0.0, "a"), (2.0, "b"), (5.0, "c")]);
        let sp = scatter_matrices(&fs).unwrap();
        assert_eq!(sp.s_w[[0, 0]], 0.0);
        assert!(sp.s_t[[0, 0]] > 0.0);
    }

    #[test]
    fn scatter_identical_samples_all_zero() {
        let fs = set_1d(&[(3.0, "a"), (3.0, "a"), (3.0, "b")]);
        let sp = scatter_matrices(&fs).unwrap();
        assert_eq!(sp.s_w[[0, 0]], 0.0);
        assert_eq!(sp.s_t[[0, 0]], 0.0);
    }

    #[test]
    fn scatter_rejects_single_sample() {
        let fs = set_1d(&[(1.0, "a")]);
        assert!(matches!(
            scatter_matrices(&fs),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn scatter_psd_and_between_psd() {
        let fs = synth_generate(4, 2, 6, 2, 0.3, 0.2, 17).unwrap();
        let sp = scatter_matrices(&fs).unwrap();
        for m in [&sp.s_w, &sp.s_t, &sp.s_b()] {
            let (vals, _) = sym_eig(&m.view()).unwrap();
            let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-30);
            assert!(
                vals.iter().all(|v| *v >= -1e-10 * scale),
                "negative eigenvalue {vals:?}"
            );
        }
    }

    #[test]
    fn fisher_two_class_1d_hand_computed() {
        // Classes {0,2} and {6,8}: S_w = 1, S_t = 10, so S_b = 9 and the
        // ratio for w = [1] is 9. Oracle below recomputes both quadratic
        // forms directly.
        let fs = set_1d(&[(0.0, "a"), (2.0, "a"), (6.0, "b"), (8.0, "b")]);
        let sp = scatter_matrices(&fs).unwrap();
        let w = arr1(&[1.0]);
        let sw = w.dot(&sp.s_w.dot(&w));
        let sb = w.dot(&sp.s_b().dot(&w));
        assert_abs_diff_eq!(sb / sw, 9.0, epsilon = 1e-12);
        match fisher_criterion(&w.view(), &sp, &Tolerances::default()).unwrap() {
            FisherValue::Finite(v) => assert_abs_diff_eq!(v, 9.0, epsilon = 1e-12),
            other => panic!("expected finite ratio, got {other:?}"),
        }
    }

    #[test]
    fn fisher_zero_direction_rejected() {
        let fs = set_1d(&[(0.0, "a"), (2.0, "b")]);
        let sp = scatter_matrices(&fs).unwrap();
        let w = arr1(&[0.0]);
        assert!(fisher_criterion(&w.view(), &sp, &Tolerances::default()).is_err());
    }

    #[test]
    fn fisher_degenerate_direction_is_zero() {
        // Direction orthogonal to all data variation: 0/0 convention.
        let features = arr2(&[[0.0, 2.0, 6.0, 8.0], [0.0, 0.0, 0.0, 0.0]]);
        let fs = FeatureSet::new(
            features,
            vec!["s0".into(), "s1".into(), "s2".into(), "s3".into()],
            vec!["a".into(), "a".into(), "b".into(), "b".into()],
            vec!["c0".into(), "c1".into(), "c0".into(), "c1".into()],
        )
        .unwrap();
        let sp = scatter_matrices(&fs).unwrap();
        let w = arr1(&[0.0, 1.0]);
        match fisher_criterion(&w.view(), &sp, &Tolerances::default()).unwrap() {
            FisherValue::Finite(v) => assert_eq!(v, 0.0),
            other => panic!("expected 0, got {other:?}"),
        }
    }

    fn general_position_set() -> FeatureSet {
        let features = arr2(&[
            [0.1, 0.9, 3.0, 4.2],
            [1.2, -0.3, 0.7, 1.9],
            [-0.5, 0.4, 2.1, -1.0],
        ]);
        FeatureSet::new(
            features,
            (0..4).map(|i| format!("s{i}")).collect(),
            vec!["a".into(), "a".into(), "b".into(), "b".into()],
            vec!["c0".into(), "c1".into(), "c0".into(), "c1".into()],
        )
        .unwrap()
    }

    #[test]
    fn two_classes_yield_one_npd_and_collapse() {
        let fs = general_position_set();
        let tol = Tolerances::default();
        let model = train_linear_nfst(&fs, &tol).unwrap();
        assert_eq!(model.out_dim(), 1);
        let y = project_linear(&model, &fs.features()).unwrap();
        // each class lands on a single scalar, the two scalars differ
        assert_abs_diff_eq!(y[[0, 0]], y[[0, 1]], epsilon = 1e-8);
        assert_abs_diff_eq!(y[[0, 2]], y[[0, 3]], epsilon = 1e-8);
        assert!((y[[0, 0]] - y[[0, 2]]).abs() > 1e-3);
    }

    #[test]
    fn trained_npd_has_infinite_fisher_ratio() {
        let fs = general_position_set();
        let tol = Tolerances::default();
        let model = train_linear_nfst(&fs, &tol).unwrap();
        let sp = scatter_matrices(&fs).unwrap();
        for col in model.w.axis_iter(Axis(1)) {
            let v = fisher_criterion(&col, &sp, &tol).unwrap();
            assert!(v.is_infinite(), "NPD should blow up the ratio, got {v:?}");
        }
    }

    #[test]
    fn synth_spread_over_gap_is_tiny() {
        // Within-class max spread / between-class min gap, computed directly
        // from the projections.
        let fs = synth_generate(10, 2, 50, 1, 0.5, 0.05, 23).unwrap();
        let tol = Tolerances::default();
        let model = train_linear_nfst(&fs, &tol).unwrap();
        let y = project_linear(&model, &fs.features()).unwrap();
        let members = fs.class_members();
        let mut spread = 0.0_f64;
        let mut centers: Vec<Array1<f64>> = Vec::new();
        for class in &members {
            let mut mean = Array1::zeros(y.nrows());
            for &j in class {
                mean += &y.column(j);
            }
            mean /= class.len() as f64;
            for &j in class {
                let diff = &y.column(j) - &mean;
                spread = spread.max(diff.dot(&diff).sqrt());
            }
            centers.push(mean);
        }
        let mut gap = f64::INFINITY;
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                let diff = &centers[i] - &centers[j];
                gap = gap.min(diff.dot(&diff).sqrt());
            }
        }
        assert!(gap > 0.0);
        assert!(
            spread / gap < 1e-6,
            "spread {spread:.3e} vs gap {gap:.3e}"
        );
    }

    #[test]
    fn low_dimension_has_no_null_space() {
        // d=1 with 10 noisy samples per class: U' S_w U has no near-zero
        // eigenvalue. The eigen oracle below checks that directly.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut samples = Vec::new();
        for (center, label) in [(0.0, "a"), (4.0, "b")] {
            for _ in 0..10 {
                samples.push((center + rng.gen_range(-0.5..0.5), label));
            }
        }
        let fs = set_1d(&samples);
        let tol = Tolerances::default();
        match train_linear_nfst(&fs, &tol) {
            Err(Error::NoNullSpace { found, required }) => {
                assert_eq!(found, 0);
                assert_eq!(required, 1);
            }
            other => panic!("expected NoNullSpace, got {other:?}"),
        }

        let (xt, _) = center_columns(&fs.features());
        let u = orthonormal_basis(&xt.view(), &tol);
        let xw = class_centered(&fs);
        let p = u.t().dot(&xw);
        let a = p.dot(&p.t()) / fs.num_samples() as f64;
        let (vals, _) = sym_eig(&a.view()).unwrap();
        let lambda_max = vals[vals.len() - 1];
        assert!(vals.iter().all(|v| *v > tol.rank_tol * lambda_max));
    }

    #[test]
    fn duplicate_identities_have_no_null_space() {
        // Two distinct labels over identical feature columns: total and
        // within scatter coincide, so no null projecting direction exists.
        let features = arr2(&[
            [0.1, 0.9, 0.1, 0.9],
            [1.2, -0.3, 1.2, -0.3],
            [-0.5, 0.4, -0.5, 0.4],
        ]);
        let fs = FeatureSet::new(
            features,
            (0..4).map(|i| format!("s{i}")).collect(),
            vec!["a".into(), "a".into(), "b".into(), "b".into()],
            vec!["c0".into(), "c1".into(), "c0".into(), "c1".into()],
        )
        .unwrap();
        match train_linear_nfst(&fs, &Tolerances::default()) {
            Err(Error::NoNullSpace { found, required }) => {
                assert!(found < required);
                assert_eq!(required, 1);
            }
            other => panic!("expected NoNullSpace, got {other:?}"),
        }
    }

    #[test]
    fn near_duplicate_identities_fail_positivity() {
        // Class b is class a shifted by 1e-7: a null direction exists along
        // the shift, but its between-class scatter is negligible against the
        // data's total variance.
        let eps = 1e-7;
        let features = arr2(&[
            [0.1, 0.9, 0.1, 0.9],
            [1.2, -0.3, 1.2 + eps, -0.3 + eps],
            [-0.5, 0.4, -0.5 + eps, 0.4 + eps],
        ]);
        let fs = FeatureSet::new(
            features,
            (0..4).map(|i| format!("s{i}")).collect(),
            vec!["a".into(), "a".into(), "b".into(), "b".into()],
            vec!["c0".into(), "c1".into(), "c0".into(), "c1".into()],
        )
        .unwrap();
        match train_linear_nfst(&fs, &Tolerances::default()) {
            Err(Error::BetweenScatterNotPositive { columns }) => {
                assert_eq!(columns, vec![0]);
            }
            other => panic!("expected BetweenScatterNotPositive, got {other:?}"),
        }
    }

    #[test]
    fn projecting_mean_gives_zero() {
        let fs = general_position_set();
        let model = train_linear_nfst(&fs, &Tolerances::default()).unwrap();
        let mu = model
            .train_mean
            .clone()
            .into_shape((fs.dim(), 1))
            .unwrap();
        let y = project_linear(&model, &mu.view()).unwrap();
        assert_abs_diff_eq!(y, Array2::zeros((1, 1)), epsilon = 1e-12);
    }

    #[test]
    fn projection_is_mahalanobis() {
        let fs = synth_generate(5, 2, 20, 2, 0.4, 0.1, 31).unwrap();
        let model = train_linear_nfst(&fs, &Tolerances::default()).unwrap();
        let x = fs.features();
        let y = project_linear(&model, &x).unwrap();
        let m = model.w.dot(&model.w.t());
        for (i, j) in [(0usize, 5usize), (3, 11), (7, 19)] {
            let yd = &y.column(i) - &y.column(j);
            let lhs = yd.dot(&yd);
            let xd = (&x.column(i) - &x.column(j)).into_owned();
            let rhs = xd.dot(&m.dot(&xd));
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn project_rejects_wrong_dimension() {
        let fs = general_position_set();
        let model = train_linear_nfst(&fs, &Tolerances::default()).unwrap();
        let bad = Array2::zeros((2, 4));
        assert!(matches!(
            project_linear(&model, &bad.view()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mean_shift_leaves_distances_unchanged() {
        let fs = synth_generate(4, 2, 12, 1, 0.3, 0.1, 13).unwrap();
        let tol = Tolerances::default();
        let model_a = train_linear_nfst(&fs, &tol).unwrap();
        let shift = Array1::from_elem(fs.dim(), 2.5);
        let shifted = fs.features().to_owned() + &shift.view().insert_axis(Axis(1));
        let fs_b = FeatureSet::new(
            shifted,
            fs.sample_ids().to_vec(),
            fs.person_ids().to_vec(),
            fs.camera_ids().to_vec(),
        )
        .unwrap();
        let model_b = train_linear_nfst(&fs_b, &tol).unwrap();
        let ya = project_linear(&model_a, &fs.features()).unwrap();
        let yb = project_linear(&model_b, &fs_b.features()).unwrap();
        for i in 0..fs.num_samples() {
            for j in (i + 1)..fs.num_samples() {
                let da = (&ya.column(i) - &ya.column(j)).mapv(|v| v * v).sum().sqrt();
                let db = (&yb.column(i) - &yb.column(j)).mapv(|v| v * v).sum().sqrt();
                assert_abs_diff_eq!(da, db, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let fs = synth_generate(6, 2, 30, 1, 0.4, 0.1, 3).unwrap();
        let tol = Tolerances::default();
        let a = train_linear_nfst(&fs, &tol).unwrap();
        let b = train_linear_nfst(&fs, &tol).unwrap();
        let bits = |m: &Array2<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.w), bits(&b.w));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn collapse_and_separation_hold(c in 2usize..6, seed in 0u64..40) {
            let d = 8 * c;
            let fs = synth_generate(c, 2, d, 2, 0.4, 0.1, seed).unwrap();
            let tol = Tolerances::default();
            let (model, report) = train_linear_nfst_with_report(&fs, &tol).unwrap();
            prop_assert_eq!(model.out_dim(), c - 1);
            prop_assert!(report.max_collapse_ratio <= tol.collapse_tol);
            prop_assert!(report.min_between_scatter > 0.0);
        }
    }
}
