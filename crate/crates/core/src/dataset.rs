//! Labeled cross-view feature sets: loading, validation, splitting, and
//! synthetic generation.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fmat::{self, MatrixFormat};

/// A column-major feature matrix with per-sample identity and camera labels.
///
/// Column `j` of `features` is sample `j`; `sample_ids`, `person_ids` and
/// `camera_ids` run parallel to the columns. Identity and camera labels are
/// opaque strings; dense indices are assigned in first-appearance order
/// wherever an integer class id is needed, so every downstream ordering is
/// deterministic.
///
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    features: Array2<f64>,
    sample_ids: Vec<String>,
    person_ids: Vec<String>,
    camera_ids: Vec<String>,
}

impl FeatureSet {
    /// Validates and assembles a feature set.
    ///
    /// An empty set (`N = 0`) is representable: boundary splits and empty
    /// unlabeled pools need a value to return.
    pub fn new(
        features: Array2<f64>,
        sample_ids: Vec<String>,
        person_ids: Vec<String>,
        camera_ids: Vec<String>,
    ) -> Result<Self> {
        let n = features.ncols();
        for (name, len) in [
            ("sample_ids", sample_ids.len()),
            ("person_ids", person_ids.len()),
            ("camera_ids", camera_ids.len()),
        ] {
            if len != n {
                return Err(Error::dim(
                    format!("{name} length"),
                    n.to_string(),
                    len.to_string(),
                ));
            }
        }
        for ((i, j), v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i,
                    col: j,
                    path: None,
                });
            }
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate sample_id `{id}`"
                )));
            }
        }
        Ok(FeatureSet {
            features,
            sample_ids,
            person_ids,
            camera_ids,
        })
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    /// Sample count `N`.
    pub fn num_samples(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn person_ids(&self) -> &[String] {
        &self.person_ids
    }

    pub fn camera_ids(&self) -> &[String] {
        &self.camera_ids
    }

    /// Distinct identity labels in first-appearance order.
    pub fn distinct_persons(&self) -> Vec<String> {
        distinct(&self.person_ids)
    }

    /// Distinct camera labels in first-appearance order.
    pub fn distinct_cameras(&self) -> Vec<String> {
        distinct(&self.camera_ids)
    }

    /// Number of identity classes `C`.
    pub fn num_classes(&self) -> usize {
        self.distinct_persons().len()
    }

    /// Dense class label per sample (first-appearance order) plus the class
    /// count `C`.
    pub fn class_labels(&self) -> (Vec<usize>, usize) {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut labels = Vec::with_capacity(self.person_ids.len());
        for id in &self.person_ids {
            let next = index.len();
            let c = *index.entry(id.as_str()).or_insert(next);
            labels.push(c);
        }
        (labels, index.len())
    }

    /// Member sample indices per class, classes in first-appearance order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let (labels, c) = self.class_labels();
        let mut members = vec![Vec::new(); c];
        for (j, &l) in labels.iter().enumerate() {
            members[l].push(j);
        }
        members
    }

    /// New feature set holding the given sample columns, in the given order.
    pub fn select(&self, indices: &[usize]) -> FeatureSet {
        let d = self.dim();
        let mut features = Array2::zeros((d, indices.len()).f());
        let mut sample_ids = Vec::with_capacity(indices.len());
        let mut person_ids = Vec::with_capacity(indices.len());
        let mut camera_ids = Vec::with_capacity(indices.len());
        for (k, &j) in indices.iter().enumerate() {
            features.column_mut(k).assign(&self.features.column(j));
            sample_ids.push(self.sample_ids[j].clone());
            person_ids.push(self.person_ids[j].clone());
            camera_ids.push(self.camera_ids[j].clone());
        }
        FeatureSet {
            features,
            sample_ids,
            person_ids,
            camera_ids,
        }
    }
}

/// Concatenates two feature sets column-wise (`a`'s samples first).
/// Sample ids must stay globally unique.
pub fn concat(a: &FeatureSet, b: &FeatureSet) -> Result<FeatureSet> {
    if a.dim() != b.dim() {
        return Err(Error::dim(
            "concat feature dimensions",
            a.dim().to_string(),
            b.dim().to_string(),
        ));
    }
    let n = a.num_samples() + b.num_samples();
    let mut features = Array2::zeros((a.dim(), n).f());
    features
        .slice_mut(ndarray::s![.., 0..a.num_samples()])
        .assign(&a.features());
    features
        .slice_mut(ndarray::s![.., a.num_samples()..])
        .assign(&b.features());
    let chain =
        |x: &[String], y: &[String]| x.iter().chain(y.iter()).cloned().collect::<Vec<_>>();
    FeatureSet::new(
        features,
        chain(a.sample_ids(), b.sample_ids()),
        chain(a.person_ids(), b.person_ids()),
        chain(a.camera_ids(), b.camera_ids()),
    )
}

fn distinct(labels: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for l in labels {
        if seen.insert(l.as_str()) {
            out.push(l.clone());
        }
    }
    out
}

/// How to divide a feature set into train and test identities.
///
/// Whole identities are assigned to one side; a person never appears in both.
#[derive(Debug, Clone)]
pub enum SplitSpec {
    /// Sample `round(train_fraction * C)` identities for training, the rest
    /// for testing, deterministically under `seed`.
    IdentityFraction { train_fraction: f64, seed: u64 },
    /// Caller-provided identity lists. They must be disjoint and jointly
    /// cover every identity in the input.
    ExplicitIds {
        train: Vec<String>,
        test: Vec<String>,
    },
}

/// Partitions `fs` by identity.
///
/// The two outputs preserve the original sample order and jointly cover `fs`
/// exactly. Identical inputs and seed produce identical splits.
pub fn split_train_test(fs: &FeatureSet, spec: &SplitSpec) -> Result<(FeatureSet, FeatureSet)> {
    let persons = fs.distinct_persons();
    let train_set: HashSet<String> = match spec {
        SplitSpec::IdentityFraction {
            train_fraction,
            seed,
        } => {
            if !(*train_fraction > 0.0 && *train_fraction <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "train_fraction must lie in (0, 1], got {train_fraction}"
                )));
            }
            let c = persons.len();
            let n_train = ((train_fraction * c as f64).round() as usize).min(c);
            if n_train == 0 {
                return Err(Error::EmptySplit {
                    fraction: *train_fraction,
                    classes: c,
                });
            }
            let mut order = persons.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            order.shuffle(&mut rng);
            order.into_iter().take(n_train).collect()
        }
        SplitSpec::ExplicitIds { train, test } => {
            let train_ids: HashSet<String> = train.iter().cloned().collect();
            let test_ids: HashSet<String> = test.iter().cloned().collect();
            if let Some(both) = train_ids.intersection(&test_ids).next() {
                return Err(Error::InvalidArgument(format!(
                    "identity `{both}` listed in both train and test"
                )));
            }
            let all: HashSet<&str> = persons.iter().map(String::as_str).collect();
            for id in train_ids.iter().chain(test_ids.iter()) {
                if !all.contains(id.as_str()) {
                    return Err(Error::InvalidArgument(format!(
                        "identity `{id}` not present in the feature set"
                    )));
                }
            }
            if let Some(missing) = persons
                .iter()
                .find(|p| !train_ids.contains(*p) && !test_ids.contains(*p))
            {
                return Err(Error::InvalidArgument(format!(
                    "identity `{missing}` assigned to neither train nor test"
                )));
            }
            if train_ids.is_empty() {
                return Err(Error::EmptySplit {
                    fraction: 0.0,
                    classes: persons.len(),
                });
            }
            train_ids
        }
    };

    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (j, p) in fs.person_ids().iter().enumerate() {
        if train_set.contains(p) {
            train_idx.push(j);
        } else {
            test_idx.push(j);
        }
    }
    Ok((fs.select(&train_idx), fs.select(&test_idx)))
}

/// Generates a synthetic cross-view feature set.
///
/// Each identity has a latent prototype drawn from N(0, I); each view adds a
/// fixed shift `view_shift_scale * N(0, I)` shared by all identities in that
/// view; each sample adds `noise_sigma * N(0, I)`. The noise stream is drawn
/// even when `noise_sigma` is zero so the underlying geometry for a given
/// seed does not depend on the noise level. Deterministic under `seed`.
#[allow(clippy::too_many_arguments)]
pub fn synth_generate(
    num_ids: usize,
    views: usize,
    d: usize,
    samples_per_id_per_view: usize,
    view_shift_scale: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<FeatureSet> {
    if num_ids < 2 || views < 2 || d < 2 {
        return Err(Error::InvalidArgument(format!(
            "synth requires C >= 2, views >= 2, d >= 2 (got C={num_ids}, views={views}, d={d})"
        )));
    }
    if samples_per_id_per_view < 1 {
        return Err(Error::InvalidArgument(
            "samples_per_id_per_view must be >= 1".into(),
        ));
    }
    if !view_shift_scale.is_finite() || !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "view_shift_scale={view_shift_scale}, noise_sigma={noise_sigma} must be finite, noise_sigma >= 0"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss_vec = |scale: f64, rng: &mut ChaCha8Rng| -> Array1<f64> {
        Array1::from_iter((0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)))
    };

    let prototypes: Vec<Array1<f64>> = (0..num_ids).map(|_| gauss_vec(1.0, &mut rng)).collect();
    let shifts: Vec<Array1<f64>> = (0..views)
        .map(|_| gauss_vec(view_shift_scale, &mut rng))
        .collect();

    let n = num_ids * views * samples_per_id_per_view;
    let mut features = Array2::zeros((d, n).f());
    let mut sample_ids = Vec::with_capacity(n);
    let mut person_ids = Vec::with_capacity(n);
    let mut camera_ids = Vec::with_capacity(n);
    let mut col = 0;
    for c in 0..num_ids {
        for v in 0..views {
            for s in 0..samples_per_id_per_view {
                let noise = gauss_vec(noise_sigma, &mut rng);
                let x = &prototypes[c] + &shifts[v] + noise;
                features.column_mut(col).assign(&x);
                sample_ids.push(format!("id{c:04}_v{v}_s{s}"));
                person_ids.push(format!("p{c:04}"));
                camera_ids.push(format!("cam{v}"));
                col += 1;
            }
        }
    }
    FeatureSet::new(features, sample_ids, person_ids, camera_ids)
}

const LABELS_HEADER: &str = "sample_id,person_id,camera_id";

/// Parsed rows of a labels CSV, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    pub sample_ids: Vec<String>,
    pub person_ids: Vec<String>,
    pub camera_ids: Vec<String>,
}

impl LabelTable {
    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }
}

/// Loads a labels CSV with header `sample_id,person_id,camera_id`.
pub fn load_labels(labels_path: &Path) -> Result<LabelTable> {
    let text = fs::read_to_string(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == LABELS_HEADER => {}
        Some(h) => {
            return Err(Error::MalformedHeader {
                path: labels_path.to_path_buf(),
                reason: format!("expected header `{LABELS_HEADER}`, got `{h}`"),
            })
        }
        None => {
            return Err(Error::MalformedHeader {
                path: labels_path.to_path_buf(),
                reason: "empty file".into(),
            })
        }
    }

    let mut table = LabelTable {
        sample_ids: Vec::new(),
        person_ids: Vec::new(),
        camera_ids: Vec::new(),
    };
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line_idx, line) in lines.enumerate() {
        let line_no = line_idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: labels_path.to_path_buf(),
                line: line_no,
                reason: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: labels_path.to_path_buf(),
                line: line_no,
                reason: "empty field".into(),
            });
        }
        let sid = fields[0].to_string();
        if let Some(first) = seen.insert(sid.clone(), line_no) {
            return Err(Error::DuplicateSampleId {
                id: sid,
                path: labels_path.to_path_buf(),
                line: first,
            });
        }
        table.sample_ids.push(sid);
        table.person_ids.push(fields[1].to_string());
        table.camera_ids.push(fields[2].to_string());
    }
    Ok(table)
}

/// Loads a feature set from a matrix file (FMAT or CSV, sniffed) plus a
/// labels CSV with header `sample_id,person_id,camera_id`, one row per
/// sample in feature-column order.
pub fn load_featureset(features_path: &Path, labels_path: &Path) -> Result<FeatureSet> {
    let features = fmat::read_matrix(features_path)?;
    // N = 0 is allowed (an empty unlabeled pool is a valid input), a zero
    // feature dimension is not.
    if features.nrows() == 0 {
        return Err(Error::MalformedHeader {
            path: features_path.to_path_buf(),
            reason: "feature matrix must have at least one row".into(),
        });
    }

    let labels = load_labels(labels_path)?;
    if labels.len() != features.ncols() {
        return Err(Error::dim(
            format!("label rows in {}", labels_path.display()),
            format!("{} (feature columns)", features.ncols()),
            labels.len().to_string(),
        ));
    }
    FeatureSet::new(
        features,
        labels.sample_ids,
        labels.person_ids,
        labels.camera_ids,
    )
}

/// Writes a feature set as a matrix file plus a labels CSV.
pub fn save_featureset(
    fs: &FeatureSet,
    features_path: &Path,
    labels_path: &Path,
    format: MatrixFormat,
) -> Result<()> {
    fmat::write_matrix(features_path, &fs.features(), format)?;
    let mut out = String::from(LABELS_HEADER);
    out.push('\n');
    for j in 0..fs.num_samples() {
        out.push_str(&format!(
            "{},{},{}\n",
            fs.sample_ids()[j],
            fs.person_ids()[j],
            fs.camera_ids()[j]
        ));
    }
    fmat::atomic_write(labels_path, out.as_bytes())
}
