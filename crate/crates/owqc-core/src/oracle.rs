//! Brute-force Gaussian simulation of the whole scheme: squeezed oscillators,
//! cluster preparation, beam splitters, sequential homodyne detection and
//! feedforward. It shares no code with the analytic solvers beyond the
//! cluster model itself.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cluster::{ClusterModel, Layout, NodePartition};
use crate::engine::{effective_error_on_ys, CaseSolution, MeasurementAngles};
use crate::error::{OwqcError, Result};
use crate::matrix::{checked_inverse, max_abs, max_abs_diff, symplectic_form, Mat};

/// Mean and covariance of k modes, ordered (x1..xk, y1..yk). Vacuum variance
/// is 1/4.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub covariance: Mat,
}

impl GaussianState {
    pub fn vacuum(k: usize) -> Self {
        Self { mean: DVector::zeros(2 * k), covariance: Mat::identity(2 * k, 2 * k) * 0.25 }
    }

    pub fn new(mean: DVector<f64>, covariance: Mat) -> Result<Self> {
        let d = mean.len();
        if d % 2 != 0 || covariance.shape() != (d, d) {
            return Err(OwqcError::DimensionMismatch(format!(
                "mean of length {d} with covariance {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let asym = max_abs_diff(&covariance, &covariance.transpose());
        if asym > 1e-12 * max_abs(&covariance).max(1.0) {
            return Err(OwqcError::DimensionMismatch(format!("covariance is not symmetric (asymmetry {asym:.3e})")));
        }
        Ok(Self { mean, covariance })
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    /// Symplectic eigenvalues, ascending, one per mode.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(&self.covariance)
    }
}

/// Singular values of Σ^{1/2} J Σ^{1/2}: that matrix is antisymmetric with
/// eigenvalues ±iν, so every ν appears twice.
pub fn symplectic_eigenvalues(cov: &Mat) -> Result<Vec<f64>> {
    let d = cov.nrows();
    if d % 2 != 0 || cov.ncols() != d {
        return Err(OwqcError::DimensionMismatch("covariance must be even and square".into()));
    }
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(OwqcError::NotPositiveDefinite(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)));
    }
    let v = &eig.eigenvectors;
    let root = v * Mat::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * v.transpose();
    let k = &root * symplectic_form(d / 2) * &root;
    let mut sv: Vec<f64> = k.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| a.total_cmp(b));
    Ok(sv.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

/// n oscillators squeezed in y: Var(x) = e^{2r}/4, Var(y) = e^{−2r}/4.
pub fn init_squeezed(n: usize, r: f64) -> GaussianState {
    let mut cov = Mat::zeros(2 * n, 2 * n);
    for k in 0..n {
        cov[(k, k)] = (2.0 * r).exp() / 4.0;
        cov[(n + k, n + k)] = (-2.0 * r).exp() / 4.0;
    }
    GaussianState { mean: DVector::zeros(2 * n), covariance: cov }
}

/// Independent union of two states, modes of `a` first.
pub fn direct_sum(a: &GaussianState, b: &GaussianState) -> GaussianState {
    let (ka, kb) = (a.modes(), b.modes());
    let k = ka + kb;
    let idx_a = |i: usize| if i < ka { i } else { k + i - ka };
    let idx_b = |i: usize| if i < kb { ka + i } else { k + ka + i - kb };
    let mut mean = DVector::zeros(2 * k);
    let mut cov = Mat::zeros(2 * k, 2 * k);
    for i in 0..2 * ka {
        mean[idx_a(i)] = a.mean[i];
        for j in 0..2 * ka {
            cov[(idx_a(i), idx_a(j))] = a.covariance[(i, j)];
        }
    }
    for i in 0..2 * kb {
        mean[idx_b(i)] = b.mean[i];
        for j in 0..2 * kb {
            cov[(idx_b(i), idx_b(j))] = b.covariance[(i, j)];
        }
    }
    GaussianState { mean, covariance: cov }
}

/// mean → S mean, covariance → S Σ Sᵀ.
pub fn apply_symplectic(state: &GaussianState, s: &Mat) -> Result<GaussianState> {
    let d = state.mean.len();
    if s.shape() != (d, d) {
        return Err(OwqcError::DimensionMismatch(format!(
            "{}x{} map on a {d}-dimensional state",
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(GaussianState { mean: s * &state.mean, covariance: s * &state.covariance * s.transpose() })
}

/// Embed a map on the listed modes into the identity on k modes.
pub fn embed(local: &Mat, modes: &[usize], k: usize) -> Mat {
    let j = modes.len();
    let idx: Vec<usize> = modes.iter().copied().chain(modes.iter().map(|m| k + m)).collect();
    let mut s = Mat::identity(2 * k, 2 * k);
    for (a, &ia) in idx.iter().enumerate() {
        for (b, &ib) in idx.iter().enumerate() {
            s[(ia, ib)] = local[(a, b)];
        }
    }
    debug_assert_eq!(local.nrows(), 2 * j);
    s
}

/// 50/50 beam splitter: mode a → (a + b)/√2, mode b → (a − b)/√2, on x and y alike.
pub fn beamsplitter_matrix(a: usize, b: usize, k: usize) -> Mat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let local = Mat::from_row_slice(4, 4, &[h, h, 0.0, 0.0, h, -h, 0.0, 0.0, 0.0, 0.0, h, h, 0.0, 0.0, h, -h]);
    embed(&local, &[a, b], k)
}

pub fn beamsplitter_mix(state: &GaussianState, mode_a: usize, mode_b: usize) -> Result<GaussianState> {
    let k = state.modes();
    if mode_a == mode_b || mode_a >= k || mode_b >= k {
        return Err(OwqcError::DimensionMismatch(format!(
            "beam splitter on modes {mode_a}, {mode_b} of a {k}-mode state"
        )));
    }
    apply_symplectic(state, &beamsplitter_matrix(mode_a, mode_b, k))
}

fn homodyne_vector(mode: usize, angle: f64, k: usize) -> DVector<f64> {
    let mut c = DVector::zeros(2 * k);
    c[mode] = angle.cos();
    c[k + mode] = angle.sin();
    c
}

fn drop_mode(state: &GaussianState, mode: usize) -> GaussianState {
    let k = state.modes();
    let keep: Vec<usize> = (0..2 * k).filter(|&i| i != mode && i != k + mode).collect();
    GaussianState {
        mean: DVector::from_iterator(keep.len(), keep.iter().map(|&i| state.mean[i])),
        covariance: crate::matrix::select(&state.covariance, &keep, &keep),
    }
}

/// Measure x cos θ + y sin θ on `mode`. Without a given outcome one is drawn
/// from the marginal. The rest is conditioned on the outcome (Schur
/// complement) and the measured mode is traced out.
pub fn homodyne_measure<R: Rng + ?Sized>(
    state: &GaussianState,
    mode: usize,
    angle: f64,
    outcome: Option<f64>,
    rng: &mut R,
) -> Result<(GaussianState, f64)> {
    let k = state.modes();
    if mode >= k {
        return Err(OwqcError::DimensionMismatch(format!("mode {mode} of a {k}-mode state")));
    }
    let c = homodyne_vector(mode, angle, k);
    let sc = &state.covariance * &c;
    let var = c.dot(&sc);
    if var.is_nan() || var <= 1e-300 {
        return Err(OwqcError::DegenerateVariance(var));
    }
    let mu = c.dot(&state.mean);
    let value = match outcome {
        Some(v) => v,
        None => mu + var.sqrt() * rng.sample::<f64, _>(StandardNormal),
    };
    let gain = &sc / var;
    let conditioned = GaussianState {
        mean: &state.mean + &gain * (value - mu),
        covariance: &state.covariance - &gain * sc.transpose(),
    };
    Ok((drop_mode(&conditioned, mode), value))
}

/// Everything needed to run the scheme once.
#[derive(Debug, Clone)]
pub struct SchemeProgram {
    pub model: ClusterModel,
    pub partition: NodePartition,
    pub angles: MeasurementAngles,
    /// State of the m input modes.
    pub input_state: GaussianState,
    /// Squeezing r of every cluster oscillator.
    pub squeezing: f64,
}

/// r = dB · ln 10 / 20.
pub fn db_to_r(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    CovarianceExact,
    MonteCarlo,
}

/// Source of the homodyne outcome noise in Monte Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Owen-scrambled Sobol points mapped through the normal quantile.
    #[default]
    Sobol,
    /// ChaCha8 pseudo-random normals.
    Pseudo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSettings {
    pub samples: usize,
    pub seed: u64,
    pub sampler: Sampler,
}

/// Output statistics of a simulation. `standard_error` holds per-entry
/// standard errors of the covariance estimate (Monte Carlo only).
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationStats {
    pub mode: SimulationMode,
    pub mean: DVector<f64>,
    pub covariance: Mat,
    pub standard_error: Option<Mat>,
    pub samples: usize,
    pub seed: Option<u64>,
    /// Feedforward gain applied to the homodyne outcomes (2m × n).
    pub feedforward: Mat,
}

/// One homodyne step on the evolving reduced state.
#[derive(Debug, Clone)]
struct Step {
    /// measurement vector on the current state
    c: DVector<f64>,
    /// Σc / var on the current state
    gain: DVector<f64>,
    sd: f64,
    mode: usize,
}

/// The scheme unrolled: pre-measurement state, the measurement sequence,
/// positions of the outputs and the feedforward gain.
struct Unrolled {
    state: GaussianState,
    steps: Vec<Step>,
    /// final reduced covariance of the output modes
    cond_cov: Mat,
    /// output positions in the final reduced state, x then y
    out_idx: Vec<usize>,
    feedforward: Mat,
    beta: f64,
}

/// Mode labels: inputs are 0..m, cluster node k is mode m + k.
fn unroll(p: &SchemeProgram) -> Result<Unrolled> {
    let part = &p.partition;
    let model = &p.model;
    let n = model.n();
    part.validate(n)?;
    let m = part.m();
    if p.input_state.modes() != m {
        return Err(OwqcError::DimensionMismatch(format!(
            "input state has {} modes, partition expects {m}",
            p.input_state.modes()
        )));
    }
    let a = &p.angles;
    let case1 = part.layout() == Layout::Case1;
    if a.input_port.len() != m || a.measured.len() != part.l() || (!case1 && a.cluster_port.len() != m) {
        return Err(OwqcError::DimensionMismatch("angles do not fit the partition".into()));
    }
    let k = m + n;
    let prep = embed(&model.preparation_symplectic(), &(m..k).collect::<Vec<_>>(), k);
    let mut network = prep;
    for (j, &node) in part.input_mixed.iter().enumerate() {
        network = beamsplitter_matrix(j, m + node, k) * network;
    }
    let start = direct_sum(&p.input_state, &init_squeezed(n, p.squeezing));
    let state = apply_symplectic(&start, &network)?;

    // measurement schedule (mode, angle), in the order they are performed
    let mut schedule: Vec<(usize, f64)> = Vec::new();
    for (j, &node) in part.input_mixed.iter().enumerate() {
        schedule.push((j, a.input_port[j]));
        if !case1 {
            schedule.push((m + node, a.cluster_port[j]));
        }
    }
    for (j, &node) in part.measured_only.iter().enumerate() {
        schedule.push((m + node, a.measured[j]));
    }
    let outputs: Vec<usize> = part.outputs.iter().map(|&node| m + node).collect();

    // feedforward gain from the network: remove every x_s (antisqueezed)
    // contribution from the outputs given the homodyne outcomes
    let xs_cols: Vec<usize> = (m..k).collect();
    let mrows = Mat::from_fn(schedule.len(), 2 * k, |i, col| {
        let (mode, th) = schedule[i];
        th.cos() * network[(mode, col)] + th.sin() * network[(k + mode, col)]
    });
    let orows = Mat::from_fn(2 * m, 2 * k, |i, col| {
        let mode = outputs[i % m];
        let row = if i < m { mode } else { k + mode };
        network[(row, col)]
    });
    let mxs = crate::matrix::select(&mrows, &(0..schedule.len()).collect::<Vec<_>>(), &xs_cols);
    let oxs = crate::matrix::select(&orows, &(0..2 * m).collect::<Vec<_>>(), &xs_cols);
    let feedforward = oxs * checked_inverse(&mxs, "homodyne x_s response")?;

    // sequential conditioning; the covariance path does not depend on outcomes
    let mut labels: Vec<usize> = (0..k).collect();
    let mut cur = state.clone();
    let mut steps = Vec::with_capacity(schedule.len());
    let mut dummy = ChaCha8Rng::seed_from_u64(0);
    for &(mode, th) in &schedule {
        let pos = labels.iter().position(|&l| l == mode).expect("mode measured twice");
        let kk = cur.modes();
        let c = homodyne_vector(pos, th, kk);
        let sc = &cur.covariance * &c;
        let var = c.dot(&sc);
        let (next, _) = homodyne_measure(&cur, pos, th, Some(0.0), &mut dummy)?;
        steps.push(Step { c, gain: &sc / var, sd: var.sqrt(), mode: pos });
        labels.remove(pos);
        cur = next;
    }
    let kk = cur.modes();
    let out_pos: Vec<usize> =
        outputs.iter().map(|o| labels.iter().position(|l| l == o).expect("output measured")).collect();
    let out_idx: Vec<usize> = out_pos.iter().copied().chain(out_pos.iter().map(|p| kk + p)).collect();
    let cond_cov = crate::matrix::select(&cur.covariance, &out_idx, &out_idx);
    Ok(Unrolled { state, steps, cond_cov, out_idx, feedforward, beta: a.local_oscillator_amplitude })
}

fn remove_mode(v: &DVector<f64>, mode: usize) -> DVector<f64> {
    let k = v.len() / 2;
    DVector::from_iterator(v.len() - 2, (0..v.len()).filter(|&i| i != mode && i != k + mode).map(|i| v[i]))
}

impl Unrolled {
    /// Output mean after feedforward for given raw quadrature outcomes,
    /// with the standardized noise `z` when outcomes are drawn.
    fn corrected_mean(&self, outcomes: &mut [f64], z: Option<&[f64]>) -> DVector<f64> {
        let mut mean = self.state.mean.clone();
        for (t, step) in self.steps.iter().enumerate() {
            let mu = step.c.dot(&mean);
            if let Some(z) = z {
                outcomes[t] = mu + step.sd * z[t];
            }
            mean += &step.gain * (outcomes[t] - mu);
            mean = remove_mode(&mean, step.mode);
        }
        // photocurrents are β₀ times the quadrature outcomes; the applied
        // displacement is (G/β₀)·current, so β₀ drops out
        let currents = DVector::from_iterator(outcomes.len(), outcomes.iter().map(|o| o * self.beta));
        let out = DVector::from_iterator(self.out_idx.len(), self.out_idx.iter().map(|&i| mean[i]));
        out - (&self.feedforward / self.beta) * currents
    }

    fn exact(&self) -> (DVector<f64>, Mat) {
        let d = self.steps.len();
        let mut zero = vec![0.0; d];
        let base = self.corrected_mean(&mut zero, None);
        // corrected mean is affine in the outcomes: base + A·o
        let mut slope = Mat::zeros(self.out_idx.len(), d);
        for t in 0..d {
            let mut e = vec![0.0; d];
            e[t] = 1.0;
            let col = self.corrected_mean(&mut e, None) - &base;
            slope.set_column(t, &col);
        }
        // the outcomes are the measured quadratures of the pre-measurement state
        let (mrows, mu) = self.outcome_projection();
        let s_pp = &mrows * &self.state.covariance * mrows.transpose();
        let mean = &base + &slope * mu;
        let cov = &self.cond_cov + &slope * s_pp * slope.transpose();
        (mean, (&cov + cov.transpose()) * 0.5)
    }

    /// Measurement rows on the pre-measurement state and the outcome means.
    fn outcome_projection(&self) -> (Mat, DVector<f64>) {
        // replay mode removals to map each step back to a full-state mode
        let k = self.state.modes();
        let mut labels: Vec<usize> = (0..k).collect();
        let mut rows = Mat::zeros(self.steps.len(), 2 * k);
        for (t, step) in self.steps.iter().enumerate() {
            let kk = labels.len();
            let mode = labels[step.mode];
            rows[(t, mode)] = step.c[step.mode];
            rows[(t, k + mode)] = step.c[kk + step.mode];
            labels.remove(step.mode);
        }
        let mu = &rows * &self.state.mean;
        (rows, mu)
    }
}

const SOBOL_BLOCK: usize = 1 << 16;
/// Replicate count below which the block standard error is itself too noisy
/// to be useful.
const MIN_BLOCKS: usize = 16;

fn normal_quantile() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Monte Carlo moments with independent blocks run in parallel. Each block is
/// a separately seeded stream (a scrambled Sobol sequence or a ChaCha stream);
/// block sums are merged in block order so the result does not depend on
/// thread scheduling. The covariance estimate is the conditional covariance
/// plus the sample covariance of the corrected conditional means.
fn monte_carlo(u: &Unrolled, settings: &MonteCarloSettings) -> Result<(DVector<f64>, Mat, Mat)> {
    let n = settings.samples;
    if n < 2 {
        return Err(OwqcError::DimensionMismatch("need at least two samples".into()));
    }
    let d = u.steps.len();
    if d > 256 {
        return Err(OwqcError::TooLarge(format!("{d} homodyne steps")));
    }
    // at least two samples per block
    let blocks = n.div_ceil(SOBOL_BLOCK).max(MIN_BLOCKS).min(n / 2);
    let sizes: Vec<usize> = (0..blocks).map(|b| n / blocks + usize::from(b < n % blocks)).collect();
    let dim = u.out_idx.len();
    let quantile = normal_quantile();
    let per_block: Vec<(DVector<f64>, Mat)> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &size)| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(b as u64));
            let scramble = (settings.seed as u32).wrapping_mul(0x9E37_79B9).wrapping_add(b as u32);
            let mut z = vec![0.0; d];
            let mut outcomes = vec![0.0; d];
            let mut sum = DVector::zeros(dim);
            let mut sq = Mat::zeros(dim, dim);
            for i in 0..size {
                for (t, zt) in z.iter_mut().enumerate() {
                    *zt = match settings.sampler {
                        Sampler::Pseudo => rng.sample(StandardNormal),
                        Sampler::Sobol => {
                            let v = sobol_burley::sample(i as u32, t as u32, scramble) as f64;
                            // centre the f32 cell to stay inside (0, 1)
                            let v = (v * 16_777_216.0).floor() + 0.5;
                            quantile.inverse_cdf(v / 16_777_216.0)
                        }
                    };
                }
                let mu = u.corrected_mean(&mut outcomes, Some(&z));
                sum += &mu;
                sq.ger(1.0, &mu, &mu, 1.0);
            }
            (sum, sq)
        })
        .collect();
    let total = n as f64;
    let mut sum = DVector::zeros(dim);
    let mut sq = Mat::zeros(dim, dim);
    for (s, q) in &per_block {
        sum += s;
        sq += q;
    }
    let mean = &sum / total;
    let spread = (&sq - &mean * mean.transpose() * total) / (total - 1.0);
    let cov = &u.cond_cov + &spread;
    // spread of the per-block covariance estimates
    let block_covs: Vec<Mat> = per_block
        .iter()
        .zip(&sizes)
        .map(|((s, q), &size)| {
            let nb = size as f64;
            let mb = s / nb;
            (q - &mb * mb.transpose() * nb) / (nb - 1.0)
        })
        .collect();
    let nb = blocks as f64;
    let mut se = Mat::zeros(dim, dim);
    for bc in &block_covs {
        let dev = bc - &spread;
        se += dev.component_mul(&dev);
    }
    let se =
        if blocks < 2 { Mat::from_element(dim, dim, f64::INFINITY) } else { (se / (nb * (nb - 1.0))).map(f64::sqrt) };
    Ok((mean, (&cov + cov.transpose()) * 0.5, se))
}

pub fn simulate_owqc(
    program: &SchemeProgram,
    mode: SimulationMode,
    monte_carlo_settings: Option<MonteCarloSettings>,
) -> Result<SimulationStats> {
    let u = unroll(program)?;
    match mode {
        SimulationMode::CovarianceExact => {
            let (mean, cov) = u.exact();
            Ok(SimulationStats {
                mode,
                mean,
                covariance: cov,
                standard_error: None,
                samples: 0,
                seed: None,
                feedforward: u.feedforward.clone(),
            })
        }
        SimulationMode::MonteCarlo => {
            let settings = monte_carlo_settings
                .ok_or_else(|| OwqcError::DimensionMismatch("monte_carlo mode needs sample settings".into()))?;
            let (mean, cov, se) = monte_carlo(&u, &settings)?;
            Ok(SimulationStats {
                mode,
                mean,
                covariance: cov,
                standard_error: Some(se),
                samples: settings.samples,
                seed: Some(settings.seed),
                feedforward: u.feedforward.clone(),
            })
        }
    }
}

/// Output moments predicted by (Ũ, E): mean Ũ μ_in and covariance
/// Ũ Σ_in Ũᵀ + (e^{−2r}/4) E_s E_sᵀ.
pub fn predicted_moments(solution: &CaseSolution, program: &SchemeProgram) -> Result<(DVector<f64>, Mat)> {
    let es = effective_error_on_ys(solution, &program.model)?;
    let u = &solution.u_tilde;
    if u.ncols() != program.input_state.mean.len() {
        return Err(OwqcError::DimensionMismatch("solution and input state differ in size".into()));
    }
    let noise = (-2.0 * program.squeezing).exp() / 4.0;
    let cov = u * &program.input_state.covariance * u.transpose() + &es * es.transpose() * noise;
    Ok((u * &program.input_state.mean, cov))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    /// ‖Σ_sim − Σ_pred‖ (largest absolute entry)
    pub covariance_defect: f64,
    /// covariance_defect / ‖Σ_pred‖
    pub relative_defect: f64,
    pub mean_defect: f64,
    /// largest |Σ_sim − Σ_pred| / standard error (Monte Carlo only)
    pub max_sigma: Option<f64>,
    pub tolerance: f64,
    pub relative: bool,
    pub pass: bool,
}

/// Compare a simulation with the analytic prediction. With `relative` the
/// tolerance applies to the defect divided by the largest predicted entry.
pub fn compare_with_analytic(
    solution: &CaseSolution,
    program: &SchemeProgram,
    stats: &SimulationStats,
    tolerance: f64,
    relative: bool,
) -> Result<DefectReport> {
    let (mean, cov) = predicted_moments(solution, program)?;
    if cov.shape() != stats.covariance.shape() {
        return Err(OwqcError::DimensionMismatch("simulated and predicted covariances differ in size".into()));
    }
    let covariance_defect = max_abs_diff(&stats.covariance, &cov);
    let relative_defect = covariance_defect / max_abs(&cov).max(f64::MIN_POSITIVE);
    let mean_defect = (&stats.mean - &mean).amax();
    let max_sigma = stats.standard_error.as_ref().map(|se| {
        (&stats.covariance - &cov).iter().zip(se.iter()).map(|(d, s)| d.abs() / s.max(1e-300)).fold(0.0, f64::max)
    });
    let measure = if relative { relative_defect } else { covariance_defect };
    Ok(DefectReport {
        covariance_defect,
        relative_defect,
        mean_defect,
        max_sigma,
        tolerance,
        relative,
        pass: measure < tolerance,
    })
}
