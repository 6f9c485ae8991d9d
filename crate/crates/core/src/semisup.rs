//! Semi-supervised null-space learning by iterative self-training.
//!
//! Starting from a model trained on the labeled identities, each round
//! projects the unlabeled pool, links every unlabeled sample to its k
//! nearest cross-camera neighbors, keeps the most confident fraction of
//! those neighborhoods as pseudo-classes, and retrains on labeled plus
//! pseudo-labeled data. The mean k-NN edge distance measures how tightly
//! cross-view matches cluster under the current model; the loop stops once
//! it no longer decreases, returning the model that achieved the minimum.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView2, ShapeBuilder};

use crate::dataset::{concat, FeatureSet};
use crate::error::{Error, Result};
use crate::kernel::{
    project_kernel, train_kernel_nfst, train_kernel_nfst_relaxed, KernelNullModel, KernelSpec,
};
use crate::numeric::Tolerances;

/// Heat-kernel bandwidth for graph edge weights: fixed, or the mean squared
/// projected pairwise distance of the unlabeled pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeatWidth {
    Auto,
    Explicit(f64),
}

/// Parameters of the self-training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiConfig {
    /// Cross-view neighbors per vertex.
    pub k: usize,
    /// Fraction of neighborhoods kept as pseudo-classes, in (0, 1].
    pub fraction: f64,
    pub heat_width: HeatWidth,
    pub max_iters: usize,
    pub kernel: KernelSpec,
}

impl Default for SemiConfig {
    fn default() -> Self {
        SemiConfig {
            k: 3,
            fraction: 0.40,
            heat_width: HeatWidth::Auto,
            max_iters: 20,
            kernel: KernelSpec::default(),
        }
    }
}

impl SemiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fraction must lie in (0, 1], got {}",
                self.fraction
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if let HeatWidth::Explicit(w) = self.heat_width {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "heat width must be a positive real, got {w}"
                )));
            }
        }
        self.kernel.validate()
    }
}

/// A directed cross-camera edge to the neighbor `to` at projected Euclidean
/// distance `dist`, heat-kernel weighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: usize,
    pub dist: f64,
    pub weight: f64,
}

/// k-nearest-neighbor graph over projected unlabeled samples, edges only
/// between different cameras.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossViewGraph {
    /// Camera label per vertex (vertex i is unlabeled sample i).
    pub camera_ids: Vec<String>,
    /// Outgoing edges per vertex, ascending by (distance, neighbor index);
    /// at most k, fewer when a camera runs out of cross-view candidates.
    pub edges: Vec<Vec<Edge>>,
    /// Resolved heat-kernel bandwidth.
    pub heat_width: f64,
}

impl CrossViewGraph {
    pub fn num_vertices(&self) -> usize {
        self.camera_ids.len()
    }

    /// Mean edge distance over the whole graph.
    pub fn mean_knn_dist(&self) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for edges in &self.edges {
            for e in edges {
                total += e.dist;
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }
}

fn euclid(a: &ndarray::ArrayView1<f64>, b: &ndarray::ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let e = x - y;
            e * e
        })
        .sum::<f64>()
        .sqrt()
}

/// Builds the cross-view k-NN graph over projected unlabeled data `yu`
/// (one column per sample).
///
/// Vertices in a camera with fewer than k cross-view candidates get all of
/// them (clipped, not an error). Distance ties are broken by neighbor index.
pub fn build_cross_view_knn(
    yu: &ArrayView2<f64>,
    camera_ids: &[String],
    cfg: &SemiConfig,
) -> Result<CrossViewGraph> {
    cfg.validate()?;
    let n = yu.ncols();
    if camera_ids.len() != n {
        return Err(Error::dim(
            "camera_ids length",
            n.to_string(),
            camera_ids.len().to_string(),
        ));
    }
    let distinct: HashSet<&str> = camera_ids.iter().map(String::as_str).collect();
    if distinct.len() < 2 {
        return Err(Error::SingleCamera {
            found: distinct.len(),
        });
    }

    let heat_width = match cfg.heat_width {
        HeatWidth::Explicit(w) => w,
        HeatWidth::Auto => {
            // mean squared projected pairwise distance over all pairs
            let mut total = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = euclid(&yu.column(i), &yu.column(j));
                    total += d * d;
                }
            }
            let pairs = (n * (n - 1) / 2) as f64;
            let mean_sq = total / pairs;
            // all projections coincident: weights are 1 for any width
            if mean_sq > 0.0 {
                mean_sq
            } else {
                1.0
            }
        }
    };

    let mut edges = Vec::with_capacity(n);
    for i in 0..n {
        let yi = yu.column(i);
        let mut candidates: Vec<(f64, usize)> = (0..n)
            .filter(|&j| camera_ids[j] != camera_ids[i])
            .map(|j| (euclid(&yi, &yu.column(j)), j))
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        candidates.truncate(cfg.k);
        edges.push(
            candidates
                .into_iter()
                .map(|(dist, to)| Edge {
                    to,
                    dist,
                    weight: (-dist * dist / heat_width).exp(),
                })
                .collect(),
        );
    }
    Ok(CrossViewGraph {
        camera_ids: camera_ids.to_vec(),
        edges,
        heat_width,
    })
}

/// Builds pseudo-labeled training data from the most confident
/// neighborhoods.
///
/// Neighborhoods are ranked by the mean distance of their edges (ties by
/// vertex index); the best `round(fraction * V)` are kept, each becoming one
/// pseudo-class holding the vertex and its cross-view neighbors. Pseudo
/// person ids are fresh labels disjoint from `reserved_person_ids`; sample
/// ids are suffixed per pseudo-class because one unlabeled sample may appear
/// in several kept neighborhoods.
pub fn make_pseudo_classes(
    graph: &CrossViewGraph,
    fraction: f64,
    unlabeled: &FeatureSet,
    reserved_person_ids: &HashSet<String>,
) -> Result<FeatureSet> {
    if graph.num_vertices() == 0 {
        return Err(Error::InvalidArgument(
            "pseudo-classes need a non-empty graph".into(),
        ));
    }
    if graph.num_vertices() != unlabeled.num_samples() {
        return Err(Error::dim(
            "graph vertices",
            unlabeled.num_samples().to_string(),
            graph.num_vertices().to_string(),
        ));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }

    let mut ranked: Vec<(f64, usize)> = graph
        .edges
        .iter()
        .enumerate()
        .filter(|(_, edges)| !edges.is_empty())
        .map(|(v, edges)| {
            let mean = edges.iter().map(|e| e.dist).sum::<f64>() / edges.len() as f64;
            (mean, v)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let keep = (fraction * ranked.len() as f64).round() as usize;
    ranked.truncate(keep);

    if ranked.is_empty() {
        log::warn!("make_pseudo_classes: fraction {fraction} keeps zero neighborhoods");
        return FeatureSet::new(
            Array2::zeros((unlabeled.dim(), 0).f()),
            vec![],
            vec![],
            vec![],
        );
    }

    let mut counter = 0usize;
    let mut fresh_label = || loop {
        let candidate = format!("pseudo{counter:04}");
        counter += 1;
        if !reserved_person_ids.contains(&candidate) {
            return candidate;
        }
    };

    let x = unlabeled.features();
    let mut columns: Vec<usize> = Vec::new();
    let mut sample_ids = Vec::new();
    let mut person_ids = Vec::new();
    let mut camera_ids = Vec::new();
    for (pc, (_, v)) in ranked.iter().enumerate() {
        let label = fresh_label();
        let mut group = vec![*v];
        group.extend(graph.edges[*v].iter().map(|e| e.to));
        for j in group {
            columns.push(j);
            sample_ids.push(format!("{}~pc{pc}", unlabeled.sample_ids()[j]));
            person_ids.push(label.clone());
            camera_ids.push(unlabeled.camera_ids()[j].clone());
        }
    }
    let mut features = Array2::zeros((unlabeled.dim(), columns.len()).f());
    for (out, &j) in columns.iter().enumerate() {
        features.column_mut(out).assign(&x.column(j));
    }
    FeatureSet::new(features, sample_ids, person_ids, camera_ids)
}

/// One accepted self-training iteration: the mean k-NN distance measured
/// under the incoming model and the number of pseudo-classes built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub iter: usize,
    pub mean_knn_dist: f64,
    pub num_pseudo_classes: usize,
}

/// Result of the self-training loop: the best model plus per-iteration
/// diagnostics (`iterations` is empty when the unlabeled pool is empty).
#[derive(Debug, Clone)]
pub struct SemiOutcome {
    pub model: KernelNullModel,
    pub iterations: Vec<IterationStats>,
}

/// Convergence: the mean k-NN distance must drop by at least this relative
/// amount for an iteration to be accepted.
pub const CONVERGENCE_REL_TOL: f64 = 1e-4;

/// Runs the self-training loop.
///
/// The initial model is trained on `labeled` alone. Each round projects
/// `unlabeled` with the latest model, builds the cross-view graph, keeps the
/// top-fraction neighborhoods as pseudo-classes, and retrains on labeled
/// plus pseudo-labeled data (resolving the kernel width on the combined set
/// each time). Because kept neighborhoods may overlap, retraining cannot in
/// general satisfy the exact null-space requirement and therefore keeps the
/// best-available directions. Iterations are accepted while the mean k-NN
/// distance strictly decreases; the returned model is the one under which
/// the minimum was measured. An empty unlabeled pool returns the supervised
/// model after zero iterations.
pub fn train_semi_supervised(
    labeled: &FeatureSet,
    unlabeled: &FeatureSet,
    cfg: &SemiConfig,
    tol: &Tolerances,
) -> Result<SemiOutcome> {
    cfg.validate()?;
    let supervised = train_kernel_nfst(labeled, &cfg.kernel, tol)?;
    if unlabeled.num_samples() == 0 {
        return Ok(SemiOutcome {
            model: supervised,
            iterations: Vec::new(),
        });
    }
    if unlabeled.dim() != labeled.dim() {
        return Err(Error::dim(
            "unlabeled feature dimension",
            labeled.dim().to_string(),
            unlabeled.dim().to_string(),
        ));
    }

    let mut reserved: HashSet<String> = labeled.person_ids().iter().cloned().collect();
    reserved.extend(unlabeled.person_ids().iter().cloned());

    let mut current = supervised;
    let mut best: Option<(f64, KernelNullModel)> = None;
    let mut iterations = Vec::new();
    for iter in 1..=cfg.max_iters {
        let yu = project_kernel(&current, &unlabeled.features())?;
        let graph = build_cross_view_knn(&yu.view(), unlabeled.camera_ids(), cfg)?;
        let mean_dist = graph.mean_knn_dist();
        let improved = match &best {
            None => true,
            Some((best_dist, _)) => mean_dist < best_dist * (1.0 - CONVERGENCE_REL_TOL),
        };
        if !improved {
            break;
        }
        best = Some((mean_dist, current.clone()));

        let pseudo = make_pseudo_classes(&graph, cfg.fraction, unlabeled, &reserved)?;
        let num_pseudo_classes = pseudo.num_classes();
        iterations.push(IterationStats {
            iter,
            mean_knn_dist: mean_dist,
            num_pseudo_classes,
        });
        if num_pseudo_classes == 0 {
            break;
        }
        let augmented = concat(labeled, &pseudo)?;
        // Overlapping pseudo-classes rule out an exact shared null space, so
        // retraining keeps the best-effort directions; if even that fails,
        // stop and fall back to the best model measured so far.
        current = match train_kernel_nfst_relaxed(&augmented, &cfg.kernel, tol) {
            Ok(m) => m,
            Err(err) => {
                log::warn!("self-training iteration {iter}: retraining failed ({err}), stopping");
                break;
            }
        };
    }

    let model = best.map(|(_, m)| m).expect("at least one iteration ran");
    Ok(SemiOutcome { model, iterations })
}
