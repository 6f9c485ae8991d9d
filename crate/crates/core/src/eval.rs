//! Cross-view matching metrics: distance matrices, CMC curves, mAP,
//! multi-query pooling, and score-level fusion.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};

use crate::error::{Error, Result};
use crate::fmat;

/// Squared Euclidean distances between probe and gallery columns; entry
/// (i, j) = |probe_i - gallery_j|^2.
pub fn distance_matrix(probe: &ArrayView2<f64>, gallery: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if probe.nrows() != gallery.nrows() {
        return Err(Error::dim(
            "distance_matrix row dimensions",
            probe.nrows().to_string(),
            gallery.nrows().to_string(),
        ));
    }
    let (p, g) = (probe.ncols(), gallery.ncols());
    let mut dist = Array2::zeros((p, g).f());
    for j in 0..g {
        let gj = gallery.column(j);
        for i in 0..p {
            let d2: f64 = probe
                .column(i)
                .iter()
                .zip(gj.iter())
                .map(|(a, b)| {
                    let e = a - b;
                    e * e
                })
                .sum();
            dist[[i, j]] = d2;
        }
    }
    Ok(dist)
}

fn check_protocol(dist: &ArrayView2<f64>, probe_ids: &[String], gallery_ids: &[String]) -> Result<()> {
    let (p, g) = dist.dim();
    if probe_ids.len() != p {
        return Err(Error::dim("probe_ids length", p.to_string(), probe_ids.len().to_string()));
    }
    if gallery_ids.len() != g {
        return Err(Error::dim(
            "gallery_ids length",
            g.to_string(),
            gallery_ids.len().to_string(),
        ));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one probe".into()));
    }
    for id in probe_ids {
        if !gallery_ids.iter().any(|gid| gid == id) {
            return Err(Error::ProbeWithoutMatch { id: id.clone() });
        }
    }
    Ok(())
}

/// Gallery order for one probe row: ascending distance, ties broken by
/// gallery index (stable sort), so rankings are deterministic.
fn sorted_gallery(row: &ndarray::ArrayView1<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    order
}

/// Cumulated Matching Characteristics curve.
///
/// Entry r-1 is the fraction of probes whose best-ranked true match appears
/// within the top r gallery entries. With several true matches per probe the
/// best-ranked one counts (single-shot convention).
pub fn cmc(
    dist: &ArrayView2<f64>,
    probe_ids: &[String],
    gallery_ids: &[String],
) -> Result<Vec<f64>> {
    check_protocol(dist, probe_ids, gallery_ids)?;
    let (p, g) = dist.dim();
    let mut hits = vec![0usize; g];
    for i in 0..p {
        let order = sorted_gallery(&dist.row(i));
        let position = order
            .iter()
            .position(|&j| gallery_ids[j] == probe_ids[i])
            .expect("checked: every probe has a gallery match");
        hits[position] += 1;
    }
    let mut curve = Vec::with_capacity(g);
    let mut acc = 0usize;
    for h in hits {
        acc += h;
        curve.push(acc as f64 / p as f64);
    }
    Ok(curve)
}

/// Mean average precision.
///
/// Per probe, AP averages over each true match the precision at its sorted
/// position (true matches seen so far / position); mAP averages over probes.
pub fn map_score(
    dist: &ArrayView2<f64>,
    probe_ids: &[String],
    gallery_ids: &[String],
) -> Result<f64> {
    check_protocol(dist, probe_ids, gallery_ids)?;
    let p = dist.nrows();
    let mut total = 0.0;
    for i in 0..p {
        let order = sorted_gallery(&dist.row(i));
        let mut matches_seen = 0usize;
        let mut ap = 0.0;
        for (pos0, &j) in order.iter().enumerate() {
            if gallery_ids[j] == probe_ids[i] {
                matches_seen += 1;
                ap += matches_seen as f64 / (pos0 + 1) as f64;
            }
        }
        total += ap / matches_seen as f64;
    }
    Ok(total / p as f64)
}

/// Pools feature columns by arithmetic mean within each query group.
///
/// Returns one column per group, groups in first-appearance order, along
/// with the group labels.
pub fn multi_query_pool(
    features: &ArrayView2<f64>,
    query_group_ids: &[String],
) -> Result<(Array2<f64>, Vec<String>)> {
    let n = features.ncols();
    if query_group_ids.len() != n {
        return Err(Error::dim(
            "query_group_ids length",
            n.to_string(),
            query_group_ids.len().to_string(),
        ));
    }
    let mut groups: Vec<String> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (j, id) in query_group_ids.iter().enumerate() {
        match groups.iter().position(|g| g == id) {
            Some(k) => members[k].push(j),
            None => {
                groups.push(id.clone());
                members.push(vec![j]);
            }
        }
    }
    let mut pooled = Array2::zeros((features.nrows(), groups.len()).f());
    for (k, group) in members.iter().enumerate() {
        let mut mean = Array1::zeros(features.nrows());
        for &j in group {
            mean += &features.column(j);
        }
        mean /= group.len() as f64;
        pooled.column_mut(k).assign(&mean);
    }
    Ok((pooled, groups))
}

/// Z-scores one distance row; zero-variance rows (all gallery equidistant)
/// pass through as zeros with a warning, carrying no ranking signal.
fn zscore_row(row: &ndarray::ArrayView1<f64>, row_index: usize, side: &str) -> Array1<f64> {
    let g = row.len() as f64;
    let mean = row.sum() / g;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / g;
    let std = var.sqrt();
    if std > 0.0 {
        row.mapv(|v| (v - mean) / std)
    } else {
        log::warn!("fuse_scores: zero-variance row {row_index} in {side} contributes nothing");
        Array1::zeros(row.len())
    }
}

/// Score-level fusion of two distance matrices over the same probes and
/// galleries: per-probe-row z-score normalization, then sum. Z-scoring
/// removes the incomparable scales of different feature types.
pub fn fuse_scores(dist_a: &ArrayView2<f64>, dist_b: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if dist_a.dim() != dist_b.dim() {
        return Err(Error::dim(
            "fuse_scores shapes",
            format!("{:?}", dist_a.dim()),
            format!("{:?}", dist_b.dim()),
        ));
    }
    let (p, g) = dist_a.dim();
    let mut fused = Array2::zeros((p, g).f());
    for i in 0..p {
        let za = zscore_row(&dist_a.row(i), i, "first input");
        let zb = zscore_row(&dist_b.row(i), i, "second input");
        fused.row_mut(i).assign(&(&za + &zb));
    }
    Ok(fused)
}

pub const DEFAULT_RANKS: [usize; 4] = [1, 5, 10, 20];

/// Full evaluation result: CMC curve over every rank, mAP, and the ranks
/// picked out for summary display.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub cmc: Vec<f64>,
    pub map: f64,
    pub ranks_reported: Vec<usize>,
}

impl EvalReport {
    /// Accuracy at the given 1-based rank (clamped to the gallery size).
    pub fn rank_accuracy(&self, rank: usize) -> f64 {
        let idx = rank.clamp(1, self.cmc.len()) - 1;
        self.cmc[idx]
    }

    /// CSV serialization: `rank,accuracy` rows for the full curve, then a
    /// trailing `mAP,<value>` summary line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,accuracy\n");
        for (i, acc) in self.cmc.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, acc));
        }
        out.push_str(&format!("mAP,{}\n", self.map));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fmat::atomic_write(path, self.to_csv().as_bytes())
    }
}

/// Computes CMC and mAP for a distance matrix under the given identities.
pub fn evaluate(
    dist: &ArrayView2<f64>,
    probe_ids: &[String],
    gallery_ids: &[String],
    ranks_reported: &[usize],
) -> Result<EvalReport> {
    let curve = cmc(dist, probe_ids, gallery_ids)?;
    let map = map_score(dist, probe_ids, gallery_ids)?;
    Ok(EvalReport {
        cmc: curve,
        map,
        ranks_reported: ranks_reported.to_vec(),
    })
}
