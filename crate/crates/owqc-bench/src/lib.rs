//! Deterministic fixtures shared by the benchmarks.

use owqc::matrix::Mat;
use owqc::{build_cluster, ClusterGraph, ClusterModel, Layout, MeasurementAngles, NodePartition};

/// Dense weights w_ij = sin(0.7 (i + 1)(j + 2)) / 2 for i < j, symmetric, so every
/// block the solvers invert is generic.
pub fn model(n: usize) -> ClusterModel {
    let a = Mat::from_fn(n, n, |i, j| {
        let (lo, hi) = (i.min(j), i.max(j));
        if i == j {
            0.0
        } else {
            0.5 * (0.7 * ((lo + 1) * (hi + 2)) as f64).sin()
        }
    });
    build_cluster(&ClusterGraph::new(a).expect("finite weights"), None).expect("valid graph")
}

/// Roles and angles for `m` inputs and `l` measured-only nodes.
pub fn setup(layout: Layout, m: usize, l: usize) -> (ClusterModel, NodePartition, MeasurementAngles) {
    let angle = |k: usize| 0.3 + 0.7 * k as f64;
    let measured: Vec<f64> = (0..l).map(|k| angle(k + 11)).collect();
    match layout {
        Layout::Case1 => (
            model(m + l),
            NodePartition::direct((0..m).collect(), (m..m + l).collect()),
            MeasurementAngles::case1((0..m).map(angle).collect(), measured),
        ),
        _ => (
            model(2 * m + l),
            NodePartition::new((0..m).collect(), (m..2 * m).collect(), (2 * m..2 * m + l).collect()),
            MeasurementAngles::ports((0..m).map(angle).collect(), (0..m).map(|k| angle(k + 5)).collect(), measured),
        ),
    }
}
