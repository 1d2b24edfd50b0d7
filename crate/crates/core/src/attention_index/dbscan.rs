//! DBSCAN over the mean-absolute-difference metric (the same metric the
//! alignment layer uses).
//!
//! Core points have at least `min_pts` neighbors within `eps` (self
//! included); clusters are maximal density-connected sets. Points are scanned
//! in index order, so labels are deterministic: cluster ids increase with the
//! index of each cluster's first core point, and a border point reachable
//! from several clusters joins the one expanded first.

use std::collections::VecDeque;

use crate::alignment::row_distance;

/// Cluster assignment for one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterLabel {
    Noise,
    Cluster(usize),
}

impl ClusterLabel {
    pub fn cluster(&self) -> Option<usize> {
        match self {
            ClusterLabel::Cluster(c) => Some(*c),
            ClusterLabel::Noise => None,
        }
    }
}

/// Label every point. Empty input yields an empty labeling.
pub fn cluster_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<ClusterLabel> {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let neighbors = |p: usize| -> Vec<usize> {
        (0..n).filter(|&q| row_distance(&points[p], &points[q]) <= eps).collect()
    };
    let mut labels: Vec<Option<ClusterLabel>> = vec![None; n];
    let mut next_cluster = 0usize;
    for seed in 0..n {
        if labels[seed].is_some() {
            continue;
        }
        let seed_neighbors = neighbors(seed);
        if seed_neighbors.len() < min_pts {
            labels[seed] = Some(ClusterLabel::Noise);
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[seed] = Some(ClusterLabel::Cluster(cluster));
        let mut queue: VecDeque<usize> = seed_neighbors.into();
        while let Some(p) = queue.pop_front() {
            match labels[p] {
                Some(ClusterLabel::Cluster(_)) => continue,
                // Noise becomes a border point of the first cluster to reach it.
                Some(ClusterLabel::Noise) | None => {}
            }
            labels[p] = Some(ClusterLabel::Cluster(cluster));
            let p_neighbors = neighbors(p);
            if p_neighbors.len() >= min_pts {
                queue.extend(p_neighbors);
            }
        }
    }
    labels.into_iter().map(|l| l.expect("all points labeled")).collect()
}
