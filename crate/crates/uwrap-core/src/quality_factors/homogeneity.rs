//! Cluster-homogeneity factor backed by DBSCAN.
//!
//! Events are clustered in the transformed coordinates of all distinct gated
//! markers of a cell type (Euclidean metric, joint over every axis). The
//! factor of an event is the fraction of its cluster sharing the classifier's
//! prediction for that event; noise events fall back to the same fraction
//! computed over the noise set, which makes a lone noise event score 1.0.
//!
//! DBSCAN semantics, pinned so an independent implementation can replicate
//! assignments exactly:
//! - neighborhoods use distance <= eps and count the point itself;
//! - a point is core iff its neighborhood has at least `min_pts` members;
//! - clusters are expanded one at a time in scan order, so cluster ids are
//!   ordered by each cluster's smallest core index, and a border point in
//!   reach of several clusters belongs to the lowest id among them.

use std::collections::VecDeque;

use crate::data_model::{CellTypeSpec, Sample};
use crate::error::{Result, UwError};
use crate::quality_factors::MarkerTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterAssignment {
    Cluster(usize),
    Noise,
}

fn validate_dbscan_params(eps: f64, min_pts: usize) -> Result<()> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(UwError::Config(format!("eps must be positive, got {eps}")));
    }
    if min_pts == 0 {
        return Err(UwError::Config("min_pts must be at least 1".into()));
    }
    Ok(())
}

/// Density-based clustering over points of uniform dimension.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<Vec<ClusterAssignment>> {
    validate_dbscan_params(eps, min_pts)?;
    let n = points.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let dim = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(UwError::Input(format!(
                "point {i} has dimension {}, expected {dim}",
                p.len()
            )));
        }
    }
    let eps_sq = eps * eps;
    let dist_sq = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
    };
    let region_query = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| dist_sq(&points[i], &points[j]) <= eps_sq)
            .collect()
    };

    const UNCLASSIFIED: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNCLASSIFIED; n];
    let mut expanded = vec![false; n];
    let mut next_cluster = 0usize;

    for i in 0..n {
        if expanded[i] || label[i] < NOISE {
            continue;
        }
        let neighbors = region_query(i);
        if neighbors.len() < min_pts {
            if label[i] == UNCLASSIFIED {
                label[i] = NOISE;
            }
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        label[i] = cluster;
        expanded[i] = true;
        let mut seeds: VecDeque<usize> = neighbors.into();
        while let Some(q) = seeds.pop_front() {
            if label[q] >= NOISE {
                label[q] = cluster;
            }
            if expanded[q] {
                continue;
            }
            let q_neighbors = region_query(q);
            if q_neighbors.len() >= min_pts {
                expanded[q] = true;
                seeds.extend(q_neighbors);
            } else {
                // Border point: claimed, never expanded.
                expanded[q] = true;
            }
        }
    }

    Ok(label
        .into_iter()
        .map(|l| {
            if l >= NOISE {
                ClusterAssignment::Noise
            } else {
                ClusterAssignment::Cluster(l)
            }
        })
        .collect())
}

/// Fitted homogeneity factor for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneityModel {
    pub eps: f64,
    pub min_pts: usize,
    pub marker_indexes: Vec<usize>,
    assignments: Vec<ClusterAssignment>,
    values: Vec<f64>,
}

/// Clusters `sample` on the cell type's gated markers and precomputes the
/// per-event agreement fraction against `predictions`.
pub fn fit_homogeneity(
    sample: &Sample,
    predictions: &[bool],
    cell_type: &CellTypeSpec,
    transform: &MarkerTransform,
    eps: f64,
    min_pts: usize,
) -> Result<HomogeneityModel> {
    validate_dbscan_params(eps, min_pts)?;
    if sample.events.is_empty() {
        return Err(UwError::Input(format!(
            "cannot fit homogeneity on empty sample '{}'",
            sample.sample_id
        )));
    }
    if predictions.len() != sample.events.len() {
        return Err(UwError::Input(format!(
            "{} predictions for {} events",
            predictions.len(),
            sample.events.len()
        )));
    }
    let marker_indexes = cell_type.distinct_gated_markers();
    for e in &sample.events {
        if let Some(&bad) = marker_indexes.iter().find(|&&m| m >= e.markers.len()) {
            return Err(UwError::Input(format!(
                "marker index {bad} out of range for event {}/{}",
                e.sample_id, e.event_id
            )));
        }
    }

    let points: Vec<Vec<f64>> = sample
        .events
        .iter()
        .map(|e| {
            marker_indexes
                .iter()
                .map(|&m| transform.apply(e.markers[m]))
                .collect()
        })
        .collect();
    let assignments = dbscan(&points, eps, min_pts)?;

    // (size, positive predictions) per cluster, plus the noise pseudo-group.
    let n_clusters = assignments
        .iter()
        .filter_map(|a| match a {
            ClusterAssignment::Cluster(c) => Some(c + 1),
            ClusterAssignment::Noise => None,
        })
        .max()
        .unwrap_or(0);
    let mut cluster_stats = vec![(0usize, 0usize); n_clusters];
    let mut noise_stats = (0usize, 0usize);
    for (a, &pred) in assignments.iter().zip(predictions) {
        let slot = match a {
            ClusterAssignment::Cluster(c) => &mut cluster_stats[*c],
            ClusterAssignment::Noise => &mut noise_stats,
        };
        slot.0 += 1;
        slot.1 += pred as usize;
    }

    let values = assignments
        .iter()
        .zip(predictions)
        .map(|(a, &pred)| {
            let (size, positives) = match a {
                ClusterAssignment::Cluster(c) => cluster_stats[*c],
                ClusterAssignment::Noise => noise_stats,
            };
            let agreeing = if pred { positives } else { size - positives };
            agreeing as f64 / size as f64
        })
        .collect();

    Ok(HomogeneityModel {
        eps,
        min_pts,
        marker_indexes,
        assignments,
        values,
    })
}

impl HomogeneityModel {
    /// Agreement fraction for the event at `event_index` in the fitted sample.
    pub fn value(&self, event_index: usize) -> Result<f64> {
        self.values.get(event_index).copied().ok_or_else(|| {
            UwError::Input(format!(
                "event index {event_index} out of range for a sample of {}",
                self.values.len()
            ))
        })
    }

    pub fn assignment(&self, event_index: usize) -> Option<ClusterAssignment> {
        self.assignments.get(event_index).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
