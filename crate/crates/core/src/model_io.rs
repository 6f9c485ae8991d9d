//! Model persistence.
//!
//! A model is a directory: `meta.txt` with `key=value` lines plus FMAT
//! payload files. Linear models store the projection `w.fmat` and training
//! mean `mean.fmat`; kernel models store `train_features.fmat`, `coef.fmat`
//! and `kernel_col_means.fmat` (the grand mean is recomputed as the mean of
//! the column means). All floating-point payloads round-trip bit-exactly.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::fmat::{atomic_write, read_fmat, read_fmat_vec, write_fmat, write_fmat_vec};
use crate::kernel::{project_kernel, KernelKind, KernelNullModel, ResolvedKernel};
use crate::linear::{project_linear, LinearNullModel};

const META_FILE: &str = "meta.txt";

/// A trained model of either family, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearNullModel),
    Kernel(KernelNullModel),
}

impl Model {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Kernel(_) => "kernel",
        }
    }

    /// Input feature dimension.
    pub fn dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.dim(),
            Model::Kernel(m) => m.dim(),
        }
    }

    /// Output dimension (C-1).
    pub fn out_dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.out_dim(),
            Model::Kernel(m) => m.out_dim(),
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            Model::Linear(m) => m.class_count,
            Model::Kernel(m) => m.class_count,
        }
    }

    /// Projects `x` (d x n) into the learned null space.
    pub fn project(&self, x: &ArrayView2<f64>) -> Result<ndarray::Array2<f64>> {
        match self {
            Model::Linear(m) => project_linear(m, x),
            Model::Kernel(m) => project_kernel(m, x),
        }
    }
}

fn invalid(dir: &Path, reason: impl Into<String>) -> Error {
    Error::InvalidModel {
        path: dir.to_path_buf(),
        reason: reason.into(),
    }
}

/// Serializes a model into directory `dir` (created if missing).
pub fn save_model(model: &Model, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut meta = String::new();
    match model {
        Model::Linear(m) => {
            meta.push_str("kind=linear\n");
            meta.push_str(&format!("classes={}\n", m.class_count));
            meta.push_str(&format!("dim={}\n", m.dim()));
            write_fmat(&dir.join("w.fmat"), &m.w.view())?;
            write_fmat_vec(&dir.join("mean.fmat"), &m.train_mean.view())?;
        }
        Model::Kernel(m) => {
            meta.push_str("kind=kernel\n");
            meta.push_str(&format!("kernel={}\n", m.kernel.kind.name()));
            match m.kernel.sigma {
                Some(s) => meta.push_str(&format!("sigma={s}\n")),
                None => meta.push_str("sigma=none\n"),
            }
            meta.push_str(&format!("classes={}\n", m.class_count));
            write_fmat(&dir.join("train_features.fmat"), &m.train_features.view())?;
            write_fmat(&dir.join("coef.fmat"), &m.coef.view())?;
            write_fmat_vec(
                &dir.join("kernel_col_means.fmat"),
                &m.train_kernel_col_means.view(),
            )?;
        }
    }
    atomic_write(&dir.join(META_FILE), meta.as_bytes())
}

fn parse_meta(dir: &Path) -> Result<HashMap<String, String>> {
    let text =
        fs::read_to_string(dir.join(META_FILE)).map_err(|e| Error::io(&dir.join(META_FILE), e))?;
    let mut map = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid(dir, format!("metadata line `{line}` is not key=value")))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn meta_get<'a>(meta: &'a HashMap<String, String>, key: &str, dir: &Path) -> Result<&'a str> {
    meta.get(key)
        .map(String::as_str)
        .ok_or_else(|| invalid(dir, format!("metadata missing `{key}`")))
}

fn meta_usize(meta: &HashMap<String, String>, key: &str, dir: &Path) -> Result<usize> {
    meta_get(meta, key, dir)?
        .parse()
        .map_err(|_| invalid(dir, format!("metadata `{key}` is not an integer")))
}

/// Loads a model directory written by [`save_model`].
pub fn load_model(dir: &Path) -> Result<Model> {
    let meta = parse_meta(dir)?;
    match meta_get(&meta, "kind", dir)? {
        "linear" => {
            let classes = meta_usize(&meta, "classes", dir)?;
            let dim = meta_usize(&meta, "dim", dir)?;
            let w = read_fmat(&dir.join("w.fmat"))?;
            let train_mean = read_fmat_vec(&dir.join("mean.fmat"))?;
            if w.nrows() != dim || train_mean.len() != dim {
                return Err(invalid(
                    dir,
                    format!(
                        "dim={dim} but w is {}x{} and mean has {} entries",
                        w.nrows(),
                        w.ncols(),
                        train_mean.len()
                    ),
                ));
            }
            if classes < 2 || w.ncols() != classes - 1 {
                return Err(invalid(
                    dir,
                    format!("classes={classes} but w has {} columns", w.ncols()),
                ));
            }
            Ok(Model::Linear(LinearNullModel {
                w,
                train_mean,
                class_count: classes,
            }))
        }
        "kernel" => {
            let classes = meta_usize(&meta, "classes", dir)?;
            let kind = match meta_get(&meta, "kernel", dir)? {
                "rbf" => KernelKind::Rbf,
                "linear" => KernelKind::Linear,
                other => return Err(invalid(dir, format!("unknown kernel `{other}`"))),
            };
            let sigma = match (kind, meta_get(&meta, "sigma", dir)?) {
                (KernelKind::Linear, _) => None,
                (KernelKind::Rbf, raw) => {
                    let s: f64 = raw
                        .parse()
                        .map_err(|_| invalid(dir, format!("sigma `{raw}` is not a number")))?;
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(invalid(dir, format!("sigma must be positive, got {s}")));
                    }
                    Some(s)
                }
            };
            let train_features = read_fmat(&dir.join("train_features.fmat"))?;
            let coef = read_fmat(&dir.join("coef.fmat"))?;
            let col_means = read_fmat_vec(&dir.join("kernel_col_means.fmat"))?;
            let n = train_features.ncols();
            if coef.nrows() != n || col_means.len() != n {
                return Err(invalid(
                    dir,
                    format!(
                        "{n} training samples but coef is {}x{} and col_means has {} entries",
                        coef.nrows(),
                        coef.ncols(),
                        col_means.len()
                    ),
                ));
            }
            if classes < 2 || coef.ncols() != classes - 1 {
                return Err(invalid(
                    dir,
                    format!("classes={classes} but coef has {} columns", coef.ncols()),
                ));
            }
            let grand = col_means.mean().ok_or_else(|| {
                invalid(dir, "kernel model has zero training samples".to_string())
            })?;
            Ok(Model::Kernel(KernelNullModel {
                train_features,
                kernel: ResolvedKernel { kind, sigma },
                coef,
                train_kernel_col_means: col_means,
                train_kernel_grand_mean: grand,
                class_count: classes,
            }))
        }
        other => Err(invalid(dir, format!("unknown model kind `{other}`"))),
    }
}
