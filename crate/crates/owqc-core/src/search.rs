//! Configuration search: graph enumeration, single-mode universality scoring,
//! the four-node study and the infeasibility probes.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{build_cluster, ClusterGraph, ClusterModel, Layout, NodePartition};
use crate::engine::{four_node_error, solve_auto, CaseSolution, MeasurementAngles, Variant};
use crate::error::{OwqcError, Result};
use crate::gates::{
    euler_decompose, four_node_angles_for, four_node_matrix, quarter_turns, EulerFactors, FourNodeAngles,
};
use crate::matrix::{max_abs, max_abs_diff, to_rows, Mat};

/// A parametrized family of transformations: angles in, matrix out.
pub trait Family: Sync {
    fn arity(&self) -> usize;
    /// None where the family is undefined (singular pivots, poles).
    fn evaluate(&self, params: &[f64]) -> Option<Mat>;
    /// Closed-form parameters for a target, when the family has them.
    fn analytic(&self, _target: &Mat) -> Option<Vec<f64>> {
        None
    }
}

fn finite(m: Mat) -> Option<Mat> {
    m.iter().all(|v| v.is_finite()).then_some(m)
}

/// Ũ of a cluster scheme as a function of its homodyne angles. Parameters
/// are the input-port angles, then the cluster-port angles (not in case 1),
/// then the measured-only angles.
#[derive(Debug, Clone)]
pub struct SchemeFamily {
    pub model: ClusterModel,
    pub partition: NodePartition,
    pub variant: Option<Variant>,
}

impl SchemeFamily {
    pub fn new(graph: &ClusterGraph, partition: NodePartition) -> Result<Self> {
        partition.validate(graph.n())?;
        Ok(Self { model: build_cluster(graph, None)?, partition, variant: None })
    }

    pub fn angles(&self, params: &[f64]) -> MeasurementAngles {
        let m = self.partition.m();
        if self.partition.layout() == Layout::Case1 {
            MeasurementAngles::case1(params[..m].to_vec(), params[m..].to_vec())
        } else {
            MeasurementAngles::ports(params[..m].to_vec(), params[m..2 * m].to_vec(), params[2 * m..].to_vec())
        }
    }

    pub fn solve(&self, params: &[f64]) -> Result<CaseSolution> {
        solve_auto(&self.model, &self.partition, &self.angles(params), self.variant)
    }
}

impl Family for SchemeFamily {
    fn arity(&self) -> usize {
        let (m, l) = (self.partition.m(), self.partition.l());
        if self.partition.layout() == Layout::Case1 {
            m + l
        } else {
            2 * m + l
        }
    }

    fn evaluate(&self, params: &[f64]) -> Option<Mat> {
        self.solve(params).ok().and_then(|s| finite(s.u_tilde))
    }
}

/// The single-mode two-node family: teleportation through one edge of
/// weight `weight`, parameters (input port, cluster port).
pub fn two_node_family(weight: f64) -> Result<SchemeFamily> {
    SchemeFamily::new(&ClusterGraph::from_edges(2, &[(0, 1, weight)])?, NodePartition::new(vec![0], vec![1], vec![]))
}

/// Four-node template `config_id`, parameters (Θ₃, Θ₄, Θ₊, Θ₋).
#[derive(Debug, Clone, Copy)]
pub struct TemplateFamily {
    pub config_id: u8,
}

impl Family for TemplateFamily {
    fn arity(&self) -> usize {
        4
    }

    fn evaluate(&self, p: &[f64]) -> Option<Mat> {
        let angles = FourNodeAngles { theta3: p[0], theta4: p[1], theta_plus: p[2], theta_minus: p[3] };
        four_node_matrix(self.config_id, &angles).ok().and_then(finite)
    }

    /// Closed-form inversion. R(a) S(r) R(b) = R(a + kπ/2) S((−1)^k r) R(b − kπ/2),
    /// so the four quarter-turn shifts give four chances to land inside the
    /// region where the closed form has real roots. Θ₊ then absorbs the
    /// right rotation.
    fn analytic(&self, target: &Mat) -> Option<Vec<f64>> {
        let f = euler_decompose(target).ok()?;
        let (l, p) = quarter_turns(self.config_id).ok()?;
        for k in 0..4 {
            let shift = k as f64 * FRAC_PI_2;
            let phi1 = f.phi1 + shift + FRAC_PI_2 * l as f64;
            let r = if k % 2 == 0 { f.r } else { -f.r };
            let Ok((angles, phi2)) = four_node_angles_for(self.config_id, phi1, r) else {
                continue;
            };
            let tp = crate::gates::wrap_angle(phi2 - FRAC_PI_2 * p as f64 - f.phi2 + shift);
            let params = vec![angles.theta3, angles.theta4, tp, angles.theta_minus];
            if let Some(u) = self.evaluate(&params) {
                if max_abs_diff(&u, target) < REACH_TOL {
                    return Some(params);
                }
            }
        }
        None
    }
}

/// Levenberg–Marquardt on the entries of U(p) − T with a central-difference
/// Jacobian. Returns the best point, its max-abs residual and evaluations spent.
pub fn lm_polish<F: Family + ?Sized>(family: &F, target: &Mat, x0: &[f64], max_evals: usize) -> (Vec<f64>, f64, usize) {
    let d = x0.len();
    let resid = |p: &[f64]| {
        family.evaluate(p).map(|u| nalgebra::DVector::from_iterator(target.len(), (&u - target).iter().copied()))
    };
    let mut evals = 1;
    let Some(mut r) = resid(x0) else {
        return (x0.to_vec(), f64::INFINITY, evals);
    };
    let mut x = x0.to_vec();
    let mut lambda = 1e-3;
    let h = 1e-7;
    while evals + 2 * d < max_evals && r.amax() >= 0.01 * REACH_TOL {
        let mut jac = Mat::zeros(r.len(), d);
        let mut ok = true;
        for k in 0..d {
            let (mut up, mut dn) = (x.clone(), x.clone());
            up[k] += h;
            dn[k] -= h;
            evals += 2;
            match (resid(&up), resid(&dn)) {
                (Some(a), Some(b)) => jac.set_column(k, &((a - b) / (2.0 * h))),
                _ => ok = false,
            }
        }
        if !ok {
            break;
        }
        let jt = jac.transpose();
        let g = &jt * &r;
        let jtj = &jt * &jac;
        let mut improved = false;
        while evals < max_evals && lambda < 1e12 {
            let mut a = jtj.clone();
            for k in 0..d {
                a[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            evals += 1;
            match resid(&trial) {
                Some(rt) if rt.norm_squared() < r.norm_squared() => {
                    x = trial;
                    r = rt;
                    lambda = (lambda * 0.1).max(1e-12);
                    improved = true;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved {
            break;
        }
    }
    (x, r.amax(), evals)
}

/// Residual below which a target counts as reached.
pub const REACH_TOL: f64 = 1e-6;

/// Descents ending below this residual are polished by restarts.
const POLISH_BELOW: f64 = 0.5;

/// Nelder–Mead on an unconstrained objective. Stops on `f < f_target`, on
/// simplex collapse, or after `max_evals` evaluations. Returns the best
/// point, its value and the evaluations spent.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    f_target: f64,
) -> (Vec<f64>, f64, usize) {
    let d = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut evals = d + 1;
    let point = |c: &[f64], x: &[f64], t: f64| -> Vec<f64> { c.iter().zip(x).map(|(a, b)| a + t * (b - a)).collect() };
    // dimension-adapted coefficients (Gao and Han)
    let dim = d as f64;
    let expand = 1.0 + 2.0 / dim;
    let contract = 0.75 - 0.5 / dim;
    let shrink = 1.0 - 1.0 / dim.max(2.0);
    loop {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let best = vals[0];
        let spread = vals[d] - best;
        let size =
            simplex[1..].iter().flat_map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if best < f_target
            || evals >= max_evals
            || (spread <= 1e-14 * best.abs() + 1e-300 && size < 1e-9)
            || size < 1e-13
        {
            return (simplex[0].clone(), best, evals);
        }
        let mut centroid = vec![0.0; d];
        for x in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let xr = point(&centroid, &worst, -1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = point(&centroid, &worst, -expand);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[d] = xe;
                vals[d] = fe;
            } else {
                simplex[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            simplex[d] = xr;
            vals[d] = fr;
        } else {
            let (xc, fc) = if fr < vals[d] {
                let xc = point(&centroid, &xr, contract);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = point(&centroid, &worst, contract);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[d].min(fr) {
                simplex[d] = xc;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    simplex[i] = point(&simplex[0].clone(), &simplex[i], shrink);
                    vals[i] = f(&simplex[i]);
                }
                evals += d;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Multi-start count per target.
    pub starts: usize,
    /// Objective evaluations per target, over all starts.
    pub evaluations: usize,
    /// Cap on a single descent.
    pub per_start: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { starts: 64, evaluations: 10_000, per_start: 400, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachMethod {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityReport {
    pub target: Vec<Vec<f64>>,
    pub best_residual: f64,
    pub best_params: Vec<f64>,
    /// Objective evaluations spent.
    pub attempts: usize,
    pub starts: usize,
    pub method: ReachMethod,
    pub reached: bool,
    /// Budget ran out before the target was reached.
    pub budget_exhausted: bool,
    /// Best residual after each start.
    pub history: Vec<f64>,
}

fn residual<F: Family + ?Sized>(family: &F, params: &[f64], target: &Mat) -> f64 {
    family.evaluate(params).map_or(f64::INFINITY, |u| max_abs_diff(&u, target))
}

/// Multi-start Nelder–Mead on the squared Frobenius distance, scored by the
/// largest absolute entry of the difference.
pub fn reach<F: Family + ?Sized>(family: &F, target: &Mat, budget: &SearchBudget, seed: u64) -> ReachabilityReport {
    let report =
        |params: Vec<f64>, res: f64, attempts: usize, history: Vec<f64>, method: ReachMethod| ReachabilityReport {
            target: to_rows(target),
            best_residual: res,
            best_params: params,
            attempts,
            starts: history.len(),
            method,
            reached: res < REACH_TOL,
            budget_exhausted: res >= REACH_TOL,
            history,
        };
    if let Some(p) = family.analytic(target) {
        let res = residual(family, &p, target);
        if res < REACH_TOL {
            return report(p, res, 1, Vec::new(), ReachMethod::Analytic);
        }
    }
    let d = family.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective = |p: &[f64]| match family.evaluate(p) {
        Some(u) => {
            let v = (&u - target).norm_squared();
            if v.is_finite() {
                v
            } else {
                1e300
            }
        }
        None => 1e300,
    };
    let mut best = (vec![0.0; d], f64::INFINITY);
    let mut spent = 0;
    let mut history = Vec::new();
    // squared Frobenius below this implies max-abs below the reach tolerance
    let f_target = (0.01 * REACH_TOL).powi(2);
    while history.len() < budget.starts && spent < budget.evaluations {
        let x0: Vec<f64> = (0..d).map(|_| rng.random_range(-PI..PI)).collect();
        let cap = budget.per_start.min(budget.evaluations - spent);
        let (mut x, _, used) = nelder_mead(objective, &x0, 0.3, cap, f_target);
        spent += used;
        let mut res = residual(family, &x, target);
        // a descent that stalls close to a solution is finished by a
        // finite-difference Levenberg–Marquardt polish
        if (REACH_TOL..POLISH_BELOW).contains(&res) && spent < budget.evaluations {
            let cap = budget.per_start.min(budget.evaluations - spent);
            let (y, r, used) = lm_polish(family, target, &x, cap);
            spent += used;
            if r < res {
                x = y;
                res = r;
            }
        }
        if res < best.1 {
            best = (x, res);
        }
        history.push(best.1);
        if best.1 < REACH_TOL {
            break;
        }
    }
    report(best.0, best.1, spent, history, ReachMethod::Numeric)
}

/// Seeded Euler targets: φ₁, φ₂ ~ U(−π, π], r ~ U[−2, 2].
pub fn euler_targets(count: usize, seed: u64) -> Vec<EulerFactors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| EulerFactors {
            phi1: PI - rng.random_range(0.0..2.0 * PI),
            r: rng.random_range(-2.0..=2.0),
            phi2: PI - rng.random_range(0.0..2.0 * PI),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalityReport {
    pub score: f64,
    pub reports: Vec<ReachabilityReport>,
}

/// Fraction of the targets reached. Targets are independent; each gets its
/// own stream seeded from the budget seed and its index.
pub fn universality_score<F: Family + ?Sized>(
    family: &F,
    targets: &[Mat],
    budget: &SearchBudget,
) -> UniversalityReport {
    let reports: Vec<ReachabilityReport> = targets
        .par_iter()
        .enumerate()
        .map(|(i, t)| reach(family, t, budget, budget.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)))
        .collect();
    let hits = reports.iter().filter(|r| r.reached).count();
    UniversalityReport { score: if targets.is_empty() { 0.0 } else { hits as f64 / targets.len() as f64 }, reports }
}

/// Infimum residual to `target` over `starts` short descents of at most
/// `per_start` evaluations each.
pub fn infeasibility_probe<F: Family + ?Sized>(
    family: &F,
    target: &Mat,
    starts: usize,
    per_start: usize,
    seed: u64,
) -> ReachabilityReport {
    let budget = SearchBudget { starts, evaluations: starts.saturating_mul(per_start), per_start, seed };
    let mut rep = reach(family, target, &budget, seed);
    rep.budget_exhausted = !rep.reached;
    rep
}

/// Largest node count accepted by the enumerator.
pub const MAX_ENUM_NODES: usize = 8;

/// Largest number of labelled graphs the class study will hold in memory.
pub const MAX_STUDY_GRAPHS: usize = 1 << 20;

/// Lazily enumerates every symmetric zero-diagonal matrix over a weight set.
/// With a partition, only the canonical member of each role-preserving
/// isomorphism class is yielded (measured-only nodes may be permuted; every
/// other node is pinned).
pub struct GraphEnumerator {
    n: usize,
    weights: Vec<f64>,
    digits: Vec<usize>,
    perms: Vec<Vec<usize>>,
    done: bool,
}

fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect()
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Node maps (old → new) that preserve roles.
fn role_preserving_maps(n: usize, partition: &NodePartition) -> Vec<Vec<usize>> {
    let free = &partition.measured_only;
    permutations(free)
        .into_iter()
        .map(|image| {
            let mut map: Vec<usize> = (0..n).collect();
            for (src, dst) in free.iter().zip(&image) {
                map[*src] = *dst;
            }
            map
        })
        .collect()
}

/// Edge digits of the graph relabelled by `map` (old node i becomes map[i]).
fn relabel_digits(n: usize, digits: &[usize], map: &[usize]) -> Vec<usize> {
    let pairs = upper_pairs(n);
    let index: BTreeMap<(usize, usize), usize> = pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let mut out = vec![0; digits.len()];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let (a, b) = (map[i].min(map[j]), map[i].max(map[j]));
        out[index[&(a, b)]] = digits[k];
    }
    out
}

fn digits_to_graph(n: usize, weights: &[f64], digits: &[usize]) -> ClusterGraph {
    let edges: Vec<(usize, usize, f64)> =
        upper_pairs(n).into_iter().zip(digits).map(|((i, j), &d)| (i, j, weights[d])).collect();
    ClusterGraph::from_edges(n, &edges).expect("enumerated weights are finite")
}

impl Iterator for GraphEnumerator {
    type Item = ClusterGraph;

    fn next(&mut self) -> Option<ClusterGraph> {
        while !self.done {
            let digits = self.digits.clone();
            // odometer step, last edge fastest
            let mut k = digits.len();
            loop {
                if k == 0 {
                    self.done = true;
                    break;
                }
                k -= 1;
                self.digits[k] += 1;
                if self.digits[k] < self.weights.len() {
                    break;
                }
                self.digits[k] = 0;
            }
            let canonical = self.perms.iter().all(|map| relabel_digits(self.n, &digits, map) >= digits);
            if canonical {
                return Some(digits_to_graph(self.n, &self.weights, &digits));
            }
        }
        None
    }
}

pub fn enumerate_graphs(n: usize, weights: &[f64], partition: Option<&NodePartition>) -> Result<GraphEnumerator> {
    if n > MAX_ENUM_NODES {
        return Err(OwqcError::TooLarge(format!("graph enumeration is limited to {MAX_ENUM_NODES} nodes, got {n}")));
    }
    if n == 0 {
        return Err(OwqcError::InvalidGraph("graph needs at least one node".into()));
    }
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
        return Err(OwqcError::InvalidWeight("weight set must be finite and non-empty".into()));
    }
    let mut w = weights.to_vec();
    w.sort_by(|a, b| a.total_cmp(b));
    w.dedup();
    let perms = match partition {
        Some(p) => {
            p.validate(n)?;
            role_preserving_maps(n, p)
        }
        None => Vec::new(),
    };
    Ok(GraphEnumerator { n, weights: w, digits: vec![0; n * (n - 1) / 2], perms, done: false })
}

/// Edges (i, j, weight) with i < j.
pub type EdgeList = Vec<(usize, usize, f64)>;

/// Edge list of a graph as (i, j, weight) over nonzero weights.
pub fn edge_list(g: &ClusterGraph) -> EdgeList {
    upper_pairs(g.n())
        .into_iter()
        .filter(|&(i, j)| g.weight(i, j) != 0.0)
        .map(|(i, j)| (i, j, g.weight(i, j)))
        .collect()
}

/// Roles of the four-node study: node 0 mixes with the input, node 1 is the
/// output, nodes 2 and 3 are measured.
pub fn four_node_partition() -> NodePartition {
    single_mode_partition(4)
}

/// The same roles on n nodes: 0 mixes, 1 is the output, 2.. are measured.
pub fn single_mode_partition(n: usize) -> NodePartition {
    NodePartition::new(vec![0], vec![1], (2..n.max(2)).collect())
}

/// How a class's angles map onto a template's (Θ₃, Θ₄, Θ₊, Θ₋).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleConvention {
    /// Θ₃ comes from node 3 and Θ₄ from node 2.
    pub swap: bool,
    /// Map applied to the node angle feeding Θ₃ and Θ₄, as an index into
    /// [θ, −θ, π/2 − θ, θ − π/2].
    pub map3: u8,
    pub map4: u8,
    /// Θ₋ taken as cluster port minus input port.
    pub flip_ports: bool,
}

fn angle_map(kind: u8, t: f64) -> f64 {
    match kind {
        0 => t,
        1 => -t,
        2 => FRAC_PI_2 - t,
        _ => t - FRAC_PI_2,
    }
}

impl AngleConvention {
    pub fn all() -> Vec<Self> {
        let mut out = Vec::new();
        for flip_ports in [false, true] {
            for swap in [false, true] {
                for map3 in 0..4 {
                    for map4 in 0..4 {
                        out.push(Self { swap, map3, map4, flip_ports });
                    }
                }
            }
        }
        out
    }

    /// Template angles for class parameters (input port, cluster port, θ₂, θ₃).
    pub fn template_angles(&self, p: &[f64]) -> FourNodeAngles {
        let (a, b) = if self.swap { (p[3], p[2]) } else { (p[2], p[3]) };
        let minus = p[0] - p[1];
        FourNodeAngles {
            theta3: angle_map(self.map3, a),
            theta4: angle_map(self.map4, b),
            theta_plus: p[0] + p[1],
            theta_minus: if self.flip_ports { -minus } else { minus },
        }
    }

    /// Column order of the template error in node labels.
    fn error_columns(&self) -> [usize; 4] {
        if self.swap {
            [0, 1, 3, 2]
        } else {
            [0, 1, 2, 3]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateMatch {
    pub config_id: u8,
    pub convention: AngleConvention,
    /// Largest |Ũ_class − Ũ_template| over the sample points.
    pub transform_residual: f64,
    /// Largest |E_class − E_template| over the sample points, with E_template
    /// as tabulated.
    pub error_residual: f64,
}

impl TemplateMatch {
    pub fn error_matches(&self) -> bool {
        self.error_residual < MATCH_TOL
    }
}

/// Matching tolerance for template comparison.
pub const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationClass {
    /// Edges (i, j, w) of the canonical representative.
    pub representative: Vec<(usize, usize, f64)>,
    pub partition: NodePartition,
    /// Edge lists of all labelled members.
    pub members: Vec<Vec<(usize, usize, f64)>>,
    pub universality_score: f64,
    pub universal: bool,
    /// Why the numeric search was skipped, if it was.
    pub screened: Option<String>,
    /// Every template (best convention each) whose Ũ matches this class.
    pub template_matches: Vec<TemplateMatch>,
    /// Template assigned to this class. Assignment is one-to-one across
    /// classes and prefers matches whose error also agrees.
    pub matched_template: Option<TemplateMatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourNodeReport {
    pub classes: Vec<ConfigurationClass>,
    /// Classes passing the reachability predicate.
    pub universal_classes: usize,
    /// Universal classes whose Ũ matches a tabulated template.
    pub template_classes: usize,
    /// Template ids assigned to some class, ascending.
    pub templates_covered: Vec<u8>,
    /// Template classes whose error also matches the tabulated one.
    pub error_matched_classes: usize,
    pub labelled_graphs: usize,
    pub targets: usize,
    pub universal_threshold: f64,
    pub budget: SearchBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourNodeSettings {
    /// Graph size; node 0 mixes with the input, node 1 is the output and
    /// the rest are measured. Templates are only matched for four nodes.
    pub nodes: usize,
    /// Edge weight alphabet.
    pub weights: Vec<f64>,
    pub targets: usize,
    pub target_seed: u64,
    pub budget: SearchBudget,
    /// Minimum score counted as universal.
    pub threshold: f64,
}

impl Default for FourNodeSettings {
    fn default() -> Self {
        Self {
            nodes: 4,
            weights: vec![0.0, 1.0],
            targets: 100,
            target_seed: 2024,
            budget: SearchBudget::default(),
            threshold: 0.99,
        }
    }
}

/// Random angle points away from the poles of tan and cot.
fn sample_points(count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..4).map(|_| rng.random_range(0.2..1.3)).collect()).collect()
}

/// Compare a class against every template and convention. Returns the
/// matches of Ũ, best first.
pub fn match_templates(family: &SchemeFamily) -> Vec<TemplateMatch> {
    let points = sample_points(4, 77);
    let sols: Vec<CaseSolution> = match points.iter().map(|p| family.solve(p)).collect::<Result<Vec<_>>>() {
        Ok(s) => s,
        Err(_) => return Vec::new(),
    };
    let mut found = Vec::new();
    for config_id in 1..=5u8 {
        for conv in AngleConvention::all() {
            let mut ures = 0.0_f64;
            let mut eres = 0.0_f64;
            let mut ok = true;
            for (p, sol) in points.iter().zip(&sols) {
                let a = conv.template_angles(p);
                let (Ok(u), Ok(e)) = (four_node_matrix(config_id, &a), four_node_error(config_id, a.theta3, a.theta4))
                else {
                    ok = false;
                    break;
                };
                let scale = max_abs(&u).max(1.0);
                ures = ures.max(max_abs_diff(&sol.u_tilde, &u) / scale);
                let cols = conv.error_columns();
                let e_nodes = Mat::from_fn(2, 4, |i, k| e[(i, cols.iter().position(|&c| c == k).unwrap())]);
                eres = eres.max(max_abs_diff(&sol.e_on_yr, &e_nodes) / max_abs(&e_nodes).max(1.0));
            }
            if ok && ures < MATCH_TOL {
                found.push(TemplateMatch {
                    config_id,
                    convention: conv,
                    transform_residual: ures,
                    error_residual: eres,
                });
            }
        }
    }
    found.sort_by(|a, b| a.error_residual.total_cmp(&b.error_residual));
    found
}

/// One-to-one assignment of templates to classes maximizing, in order, the
/// number of assigned classes and the number whose error also matches.
/// Ties go to the first assignment in class order.
fn assign_templates(candidates: &[Vec<TemplateMatch>]) -> Vec<Option<TemplateMatch>> {
    fn go(
        i: usize,
        candidates: &[Vec<TemplateMatch>],
        used: &mut Vec<u8>,
        cur: &mut Vec<Option<usize>>,
        best: &mut (usize, usize, Vec<Option<usize>>),
    ) {
        if i == candidates.len() {
            let assigned = cur.iter().flatten().count();
            let errors =
                cur.iter().enumerate().filter(|(k, c)| c.is_some_and(|j| candidates[*k][j].error_matches())).count();
            if (assigned, errors) > (best.0, best.1) {
                *best = (assigned, errors, cur.clone());
            }
            return;
        }
        for (j, m) in candidates[i].iter().enumerate() {
            if !used.contains(&m.config_id) {
                used.push(m.config_id);
                cur.push(Some(j));
                go(i + 1, candidates, used, cur, best);
                cur.pop();
                used.pop();
            }
        }
        cur.push(None);
        go(i + 1, candidates, used, cur, best);
        cur.pop();
    }
    let mut best = (0, 0, vec![None; candidates.len()]);
    go(0, candidates, &mut Vec::new(), &mut Vec::new(), &mut best);
    best.2.iter().enumerate().map(|(i, c)| c.map(|j| candidates[i][j].clone())).collect()
}

/// Cheap screen: a family undefined at every sampled angle set is
/// non-universal without searching.
fn screen(family: &SchemeFamily, seed: u64) -> Option<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = family.arity();
    let defined = (0..32).any(|_| {
        let p: Vec<f64> = (0..d).map(|_| rng.random_range(-PI..PI)).collect();
        family.evaluate(&p).is_some()
    });
    (!defined).then(|| "singular for all sampled angles".to_string())
}

/// Exhaustive single-mode study over every graph on `settings.nodes` nodes
/// with weights from `settings.weights`, one class per role-preserving
/// isomorphism class. The default is the unweighted four-node study.
pub fn search_four_node(settings: &FourNodeSettings) -> Result<FourNodeReport> {
    let n = settings.nodes;
    if n < 2 {
        return Err(OwqcError::InvalidGraph(format!("the study needs an input and an output node, got {n} nodes")));
    }
    let alphabet = settings.weights.iter().map(|w| w.to_bits()).collect::<std::collections::BTreeSet<_>>().len();
    let labelled_count = (alphabet as f64).powi((n * (n.saturating_sub(1)) / 2) as i32);
    if n > MAX_ENUM_NODES || labelled_count > MAX_STUDY_GRAPHS as f64 {
        return Err(OwqcError::TooLarge(format!(
            "{n} nodes over {alphabet} weights give {labelled_count:.0} labelled graphs, more than {MAX_STUDY_GRAPHS}"
        )));
    }
    let partition = single_mode_partition(n);
    let targets: Vec<Mat> =
        euler_targets(settings.targets, settings.target_seed).iter().map(EulerFactors::reconstruct).collect();
    let reps: Vec<ClusterGraph> = enumerate_graphs(n, &settings.weights, Some(&partition))?.collect();
    let labelled: Vec<ClusterGraph> = enumerate_graphs(n, &settings.weights, None)?.collect();
    let mut weights = settings.weights.clone();
    weights.sort_by(|a, b| a.total_cmp(b));
    weights.dedup();
    let maps = role_preserving_maps(n, &partition);
    let pairs = upper_pairs(n);
    let digits_of = |g: &ClusterGraph| -> Vec<usize> {
        pairs
            .iter()
            .map(|&(i, j)| weights.iter().position(|w| *w == g.weight(i, j)).expect("enumerated weight"))
            .collect()
    };
    let mut by_class: BTreeMap<Vec<usize>, Vec<EdgeList>> = BTreeMap::new();
    for g in &labelled {
        let d = digits_of(g);
        let key = maps.iter().map(|m| relabel_digits(n, &d, m)).min().unwrap();
        by_class.entry(key).or_default().push(edge_list(g));
    }

    let classes: Vec<ConfigurationClass> = reps
        .par_iter()
        .enumerate()
        .map(|(idx, rep)| -> Result<ConfigurationClass> {
            let members = by_class.get(&digits_of(rep)).cloned().unwrap_or_default();
            let family = SchemeFamily::new(rep, partition.clone())?;
            let screened = screen(&family, 1000 + idx as u64);
            let score = if screened.is_some() {
                0.0
            } else {
                let budget = SearchBudget { seed: settings.budget.seed.wrapping_add(idx as u64), ..settings.budget };
                universality_score(&family, &targets, &budget).score
            };
            let universal = score >= settings.threshold;
            let mut template_matches: Vec<TemplateMatch> = Vec::new();
            if universal && n == 4 {
                for m in match_templates(&family) {
                    if !template_matches.iter().any(|t| t.config_id == m.config_id) {
                        template_matches.push(m);
                    }
                }
            }
            Ok(ConfigurationClass {
                representative: edge_list(rep),
                partition: partition.clone(),
                members,
                universality_score: score,
                universal,
                screened,
                template_matches,
                matched_template: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut classes = classes;
    let candidates: Vec<Vec<TemplateMatch>> = classes.iter().map(|c| c.template_matches.clone()).collect();
    for (class, m) in classes.iter_mut().zip(assign_templates(&candidates)) {
        class.matched_template = m;
    }
    let universal_classes = classes.iter().filter(|c| c.universal).count();
    let template_classes = classes.iter().filter(|c| c.matched_template.is_some()).count();
    let templates_covered = {
        let mut ids: Vec<u8> =
            classes.iter().filter_map(|c| c.matched_template.as_ref().map(|m| m.config_id)).collect();
        ids.sort_unstable();
        ids
    };
    let error_matched_classes =
        classes.iter().filter(|c| c.matched_template.as_ref().is_some_and(TemplateMatch::error_matches)).count();
    Ok(FourNodeReport {
        classes,
        universal_classes,
        template_classes,
        templates_covered,
        error_matched_classes,
        labelled_graphs: labelled.len(),
        targets: settings.targets,
        universal_threshold: settings.threshold,
        budget: settings.budget,
    })
}
