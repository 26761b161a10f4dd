//! Shared test helpers: an independent direct solve of the homodyne
//! equations, and seeded random configurations.
#![allow(dead_code)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use owqc::matrix::{max_abs_diff, Mat};
use owqc::{build_cluster, ClusterGraph, ClusterModel, Layout, MeasurementAngles, NodePartition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random symmetric zero-diagonal weights in [−1, 1].
pub fn random_adjacency(n: usize, rng: &mut ChaCha8Rng) -> Mat {
    let mut a = Mat::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = rng.random_range(-1.0..1.0);
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
    }
    a
}

pub fn random_model(n: usize, rng: &mut ChaCha8Rng) -> ClusterModel {
    build_cluster(&ClusterGraph::new(random_adjacency(n, rng)).unwrap(), None).unwrap()
}

pub fn angles(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-PI..PI)).collect()
}

/// Random node roles for the given layout, shuffled so that role order and
/// node order differ.
pub fn random_partition(layout: Layout, m: usize, l: usize, rng: &mut ChaCha8Rng) -> NodePartition {
    let n = match layout {
        Layout::Case1 => m + l,
        _ => 2 * m + l,
    };
    let mut nodes: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        nodes.swap(i, j);
    }
    match layout {
        Layout::Case1 => NodePartition::direct(nodes[..m].to_vec(), nodes[m..].to_vec()),
        _ => NodePartition::new(nodes[..m].to_vec(), nodes[m..2 * m].to_vec(), nodes[2 * m..].to_vec()),
    }
}

pub fn random_angles(p: &NodePartition, rng: &mut ChaCha8Rng) -> MeasurementAngles {
    match p.layout() {
        Layout::Case1 => MeasurementAngles::case1(angles(p.m(), rng), angles(p.l(), rng)),
        _ => MeasurementAngles::ports(angles(p.m(), rng), angles(p.m(), rng), angles(p.l(), rng)),
    }
}

/// (Ũ, E) obtained by writing out every homodyne equation with zero
/// photocurrent and eliminating x_r by a dense solve. Unknown vector is
/// (x_in, y_in, x_r, y_r); E comes out on y_r in node order.
pub fn direct_solve(adjacency: &Mat, p: &NodePartition, a: &MeasurementAngles) -> Option<(Mat, Mat)> {
    let n = adjacency.nrows();
    let m = p.m();
    let width = 2 * m + 2 * n;
    let x_node = |k: usize| {
        let mut r = vec![0.0; width];
        r[2 * m + k] = 1.0;
        for j in 0..n {
            r[2 * m + n + j] = -adjacency[(k, j)];
        }
        r
    };
    let y_node = |k: usize| {
        let mut r = vec![0.0; width];
        for j in 0..n {
            r[2 * m + j] = adjacency[(k, j)];
        }
        r[2 * m + n + k] = 1.0;
        r
    };
    let unit = |i: usize| {
        let mut r = vec![0.0; width];
        r[i] = 1.0;
        r
    };
    let comb = |u: &[f64], cu: f64, v: &[f64], cv: f64| -> Vec<f64> {
        u.iter().zip(v).map(|(a, b)| cu * a + cv * b).collect()
    };
    let homodyne = |x: &[f64], y: &[f64], th: f64| comb(x, th.cos(), y, th.sin());

    let mut eqs: Vec<Vec<f64>> = Vec::new();
    let mut out_x: Vec<Vec<f64>> = Vec::new();
    let mut out_y: Vec<Vec<f64>> = Vec::new();
    let case1 = p.layout() == Layout::Case1;
    for (j, &k) in p.input_mixed.iter().enumerate() {
        let (xi, yi) = (unit(j), unit(m + j));
        let plus_x = comb(&xi, 1.0, &x_node(k), 1.0);
        let plus_y = comb(&yi, 1.0, &y_node(k), 1.0);
        let minus_x = comb(&xi, 1.0, &x_node(k), -1.0);
        let minus_y = comb(&yi, 1.0, &y_node(k), -1.0);
        eqs.push(homodyne(&plus_x, &plus_y, a.input_port[j]));
        if case1 {
            out_x.push(minus_x.iter().map(|v| v * FRAC_1_SQRT_2).collect());
            out_y.push(minus_y.iter().map(|v| v * FRAC_1_SQRT_2).collect());
        } else {
            eqs.push(homodyne(&minus_x, &minus_y, a.cluster_port[j]));
        }
    }
    for (j, &k) in p.measured_only.iter().enumerate() {
        eqs.push(homodyne(&x_node(k), &y_node(k), a.measured[j]));
    }
    if !case1 {
        for &k in &p.outputs {
            out_x.push(x_node(k));
            out_y.push(y_node(k));
        }
    }
    let rows = |v: &[Vec<f64>]| Mat::from_fn(v.len(), width, |i, j| v[i][j]);
    let meq = rows(&eqs);
    let o = rows(&[out_x, out_y].concat());
    let cols = |mat: &Mat, start: usize, len: usize| mat.columns(start, len).into_owned();
    let mx = cols(&meq, 2 * m, n);
    let mi = cols(&meq, 0, 2 * m);
    let my = cols(&meq, 2 * m + n, n);
    let ox = cols(&o, 2 * m, n);
    let oi = cols(&o, 0, 2 * m);
    let oy = cols(&o, 2 * m + n, n);
    let inv = mx.try_inverse()?;
    Some((&oi - &ox * &inv * mi, &oy - &ox * &inv * my))
}

pub fn close(a: &Mat, b: &Mat, tol: f64) -> bool {
    a.shape() == b.shape() && max_abs_diff(a, b) < tol
}
