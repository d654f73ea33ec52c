//! Measurement-set partitioning: distance partitioning for the filters plus
//! an exhaustive enumerator used as a test oracle.

use std::collections::HashSet;

use crate::error::{Result, TrackError};
use crate::extent::innovation_covariance;
use crate::types::{Measurement, ModelConfig, Partition, TrajectoryMixture};

/// Size guard for exhaustive enumeration (Bell(10) = 115975).
pub const ALL_PARTITIONS_MAX: usize = 10;

/// Default measurement gate in standard deviations of the per-measurement
/// innovation covariance.
pub const DEFAULT_GATE_SIGMAS: f64 = 4.0;

/// Keeps only the measurements within `gate_sigmas` (Mahalanobis) of some
/// predicted component, under that component's innovation covariance
/// `H Xi^r H^T + S Q^h S^T + Q^e`. Everything else is clutter far from any
/// hypothesis: discarding it leaves the PHD partition weights unchanged
/// (each far singleton multiplies every partition product by the same
/// clutter factor) and keeps the cardinalized update's cell count
/// meaningful (its hypothesis space admits at most one clutter cell per
/// partition). Input order is preserved.
pub fn gate_measurements(
    pred: &TrajectoryMixture,
    z: &[Measurement],
    m: &ModelConfig,
    gate_sigmas: f64,
) -> Vec<Measurement> {
    let gate_sq = gate_sigmas * gate_sigmas;
    let inverses: Vec<(nalgebra::Vector2<f64>, nalgebra::Matrix2<f64>)> = pred
        .components
        .iter()
        .filter_map(|c| {
            let s = c.current_state();
            innovation_covariance(s, m)
                .try_inverse()
                .map(|inv| (s.kin.position(), inv))
        })
        .collect();
    z.iter()
        .copied()
        .filter(|meas| {
            inverses.iter().any(|(center, inv)| {
                let d = meas.as_vector() - center;
                (d.transpose() * inv * d)[0] <= gate_sq
            })
        })
        .collect()
}

/// Distance partitioning: for each threshold `d`, the partition whose cells
/// are the connected components of the graph linking measurements closer
/// than `d`. Duplicate partitions across thresholds are removed; cells are
/// in canonical order. The empty measurement set yields the single empty
/// partition.
pub fn distance_partitions(z: &[Measurement], thresholds: &[f64]) -> Result<Vec<Partition>> {
    if thresholds.is_empty() {
        return Err(TrackError::InvalidConfig(
            "at least one partition threshold is required".into(),
        ));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TrackError::InvalidConfig(
            "partition thresholds must be strictly increasing".into(),
        ));
    }
    if z.is_empty() {
        return Ok(vec![Partition::new(Vec::new())]);
    }

    let n = z.len();
    let mut out: Vec<Partition> = Vec::new();
    let mut seen: HashSet<Vec<Vec<usize>>> = HashSet::new();
    for &d in thresholds {
        let mut uf = UnionFind::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = z[i].x - z[j].x;
                let dy = z[i].y - z[j].y;
                if (dx * dx + dy * dy).sqrt() < d {
                    uf.union(i, j);
                }
            }
        }
        let p = uf.into_partition();
        if seen.insert(p.cells.clone()) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Base distance scale of the partitioning, derived from the measurement
/// model: the per-axis measurement scatter, combining the additive noise
/// with the extent-induced spread of a `gamma`-sized cluster around the
/// birth shapes.
pub fn threshold_scale(m: &ModelConfig) -> f64 {
    let noise_var = m.q_meas.trace() / 2.0;
    let mean_extent_sq = if m.birth.is_empty() {
        0.0
    } else {
        m.birth
            .iter()
            .map(|b| {
                let s = &b.state.shape;
                s.l1 * s.l1 + s.l2 * s.l2
            })
            .sum::<f64>()
            / m.birth.len() as f64
    };
    (noise_var + mean_extent_sq / (4.0 * m.gamma)).sqrt()
}

/// Default distance thresholds: multiples `{1, 2, 3, 4}` of
/// [`threshold_scale`]. A fixed grid; [`linkage_thresholds`] refines it per
/// scan.
pub fn default_thresholds(m: &ModelConfig) -> Vec<f64> {
    let base = threshold_scale(m);
    (1..=4).map(|k| k as f64 * base).collect()
}

/// Per-scan thresholds realizing every single-linkage merge event between
/// `lower` and `upper`: the unique pairwise distances in range (each one,
/// used as a strict threshold, yields the hierarchy state just before that
/// merge) plus the two bounds. This exposes the full nested partition
/// family over the scale band to the update sum.
pub fn linkage_thresholds(z: &[Measurement], lower: f64, upper: f64) -> Vec<f64> {
    let mut out = vec![lower, upper];
    for i in 0..z.len() {
        for j in (i + 1)..z.len() {
            let d = ((z[i].x - z[j].x).powi(2) + (z[i].y - z[j].y).powi(2)).sqrt();
            if d > lower && d < upper {
                out.push(d);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    out
}

/// For each partition containing both small cells (at most `small`
/// measurements) and large cells (at least `large`), adds variants in which
/// small cells are absorbed into the large cell with the nearest centroid:
/// one with every small cell absorbed, and one per small cell where only
/// that cell stays separate (so it can play the lone clutter-cell role of
/// the cardinalized update). Single-linkage partitions form a nested
/// family, so the "outliers absorbed, neighboring targets still separate"
/// interpretation is often unreachable by thresholding alone; these
/// variants supply it and the update weights arbitrate. Duplicates are
/// removed.
pub fn with_absorbed_small_cells(
    parts: &[Partition],
    z: &[Measurement],
    small: usize,
    large: usize,
) -> Vec<Partition> {
    debug_assert!(large > small, "absorption thresholds must not overlap");
    let centroid = |cell: &[usize]| -> (f64, f64) {
        let n = cell.len() as f64;
        (
            cell.iter().map(|&i| z[i].x).sum::<f64>() / n,
            cell.iter().map(|&i| z[i].y).sum::<f64>() / n,
        )
    };
    let mut out: Vec<Partition> = Vec::with_capacity(parts.len());
    let mut seen: HashSet<Vec<Vec<usize>>> = HashSet::new();
    for p in parts {
        if seen.insert(p.cells.clone()) {
            out.push(p.clone());
        }
    }
    for p in parts {
        let large_cells: Vec<usize> = (0..p.cells.len())
            .filter(|&i| p.cells[i].len() >= large)
            .collect();
        let small_cells: Vec<usize> = (0..p.cells.len())
            .filter(|&i| p.cells[i].len() <= small)
            .collect();
        if large_cells.is_empty() || small_cells.is_empty() {
            continue;
        }
        // variant per kept-out small cell, plus the all-absorbed variant
        let mut keep_choices: Vec<Option<usize>> = vec![None];
        if small_cells.len() > 1 {
            keep_choices.extend(small_cells.iter().map(|&i| Some(i)));
        }
        for keep in keep_choices {
            let mut merged: Vec<Vec<usize>> = p
                .cells
                .iter()
                .enumerate()
                .filter(|(i, c)| c.len() > small || Some(*i) == keep)
                .map(|(_, c)| c.clone())
                .collect();
            for &si in small_cells.iter().filter(|&&i| Some(i) != keep) {
                let cell = &p.cells[si];
                let (cx, cy) = centroid(cell);
                let target = large_cells
                    .iter()
                    .map(|&i| {
                        let (tx, ty) = centroid(&p.cells[i]);
                        ((tx - cx).powi(2) + (ty - cy).powi(2), i)
                    })
                    .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                    .map(|(_, i)| i)
                    .unwrap();
                let pos = merged
                    .iter()
                    .position(|c| c.first() == p.cells[target].first())
                    .expect("absorption target survives the size filter");
                merged[pos].extend_from_slice(cell);
            }
            let candidate = Partition::new(merged);
            if seen.insert(candidate.cells.clone()) {
                out.push(candidate);
            }
        }
    }
    out
}

/// Enumerates every set partition of `0..z.len()` exactly once
/// (`Bell(|Z|)` partitions), in restricted-growth-string order.
pub fn all_partitions(z: &[Measurement]) -> Result<Vec<Partition>> {
    all_partitions_of_len(z.len())
}

/// Exhaustive partition enumeration of an index set of size `n`.
pub fn all_partitions_of_len(n: usize) -> Result<Vec<Partition>> {
    if n > ALL_PARTITIONS_MAX {
        return Err(TrackError::TooManyMeasurements {
            len: n,
            max: ALL_PARTITIONS_MAX,
        });
    }
    if n == 0 {
        return Ok(vec![Partition::new(Vec::new())]);
    }
    // Restricted growth strings: rgs[0] = 0, rgs[i] <= max(rgs[..i]) + 1.
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    loop {
        let num_cells = rgs.iter().copied().max().unwrap() + 1;
        let mut cells = vec![Vec::new(); num_cells];
        for (i, &c) in rgs.iter().enumerate() {
            cells[c].push(i);
        }
        out.push(Partition::new(cells));

        // advance to next restricted growth string
        let mut i = n;
        loop {
            if i == 1 {
                return Ok(out);
            }
            i -= 1;
            let max_prefix = rgs[..i].iter().copied().max().unwrap();
            if rgs[i] <= max_prefix {
                rgs[i] += 1;
                for r in rgs.iter_mut().skip(i + 1) {
                    *r = 0;
                }
                break;
            }
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, i: usize, j: usize) {
        let (ri, rj) = (self.find(i), self.find(j));
        if ri != rj {
            // root at the smaller index for determinism
            let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
            self.parent[hi] = lo;
        }
    }

    fn into_partition(mut self) -> Partition {
        let n = self.parent.len();
        let mut cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_of_root = vec![usize::MAX; n];
        for i in 0..n {
            let r = self.find(i);
            if cell_of_root[r] == usize::MAX {
                cell_of_root[r] = cells.len();
                cells.push(Vec::new());
            }
            cells[cell_of_root[r]].push(i);
        }
        Partition::new(cells)
    }
}
