//! JSON configuration ingest and report documents.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cluster::{build_cluster, ClusterGraph, ClusterModel, NodePartition};
use crate::engine::{effective_error_on_ys, CaseSolution, CaseTag, MeasurementAngles, Variant};
use crate::error::{OwqcError, Result};
use crate::gates::{euler_decompose, four_node_angles_for, four_node_matrix, EulerFactors, FourNodeAngles};
use crate::matrix::{from_rows, max_abs_diff, symplectic_defect, to_rows, Mat};
use crate::oracle::{db_to_r, DefectReport, GaussianState, Sampler, SchemeProgram, SimulationMode, SimulationStats};

/// Homodyne angles as written in a config: either per port, or as
/// (Θ₊, Θ₋) pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnglesConfig {
    #[serde(default)]
    pub input_port: Option<Vec<f64>>,
    #[serde(default)]
    pub cluster_port: Option<Vec<f64>>,
    #[serde(default)]
    pub theta_plus: Option<Vec<f64>>,
    #[serde(default)]
    pub theta_minus: Option<Vec<f64>>,
    #[serde(default)]
    pub measured: Vec<f64>,
    #[serde(default)]
    pub local_oscillator_amplitude: Option<f64>,
}

impl AnglesConfig {
    pub fn resolve(&self) -> Result<MeasurementAngles> {
        let ports = self.input_port.is_some() || self.cluster_port.is_some();
        let pm = self.theta_plus.is_some() || self.theta_minus.is_some();
        let mut a = match (ports, pm) {
            (true, true) => {
                return Err(OwqcError::Parse("give port angles or theta_plus/theta_minus, not both".into()))
            }
            (false, true) => {
                let (Some(tp), Some(tm)) = (&self.theta_plus, &self.theta_minus) else {
                    return Err(OwqcError::Parse("theta_plus and theta_minus must be given together".into()));
                };
                if tp.len() != tm.len() {
                    return Err(OwqcError::DimensionMismatch("theta_plus and theta_minus differ in length".into()));
                }
                MeasurementAngles::from_plus_minus(tp, tm, self.measured.clone())
            }
            _ => MeasurementAngles::ports(
                self.input_port.clone().unwrap_or_default(),
                self.cluster_port.clone().unwrap_or_default(),
                self.measured.clone(),
            ),
        };
        if let Some(b) = self.local_oscillator_amplitude {
            if !(b.is_finite() && b > 0.0) {
                return Err(OwqcError::Parse(format!("local oscillator amplitude must be positive, got {b}")));
            }
            a.local_oscillator_amplitude = b;
        }
        Ok(a)
    }
}

/// One JSON document describing a graph, its roles, the homodyne angles and
/// optionally the simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub adjacency: Vec<Vec<f64>>,
    pub partition: NodePartition,
    #[serde(default)]
    pub orthogonal_freedom: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub angles: Option<AnglesConfig>,
    #[serde(default)]
    pub squeezing_db: Option<f64>,
    #[serde(default)]
    pub input_covariance: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub input_mean: Option<Vec<f64>>,
    #[serde(default)]
    pub mode: Option<SimulationMode>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sampler: Option<Sampler>,
}

pub fn parse_config(text: &str) -> Result<SchemeConfig> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_config(path: &Path) -> Result<SchemeConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| OwqcError::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

impl SchemeConfig {
    pub fn graph(&self) -> Result<ClusterGraph> {
        ClusterGraph::new(from_rows(&self.adjacency)?)
    }

    pub fn model(&self) -> Result<ClusterModel> {
        let o = self.orthogonal_freedom.as_ref().map(|r| from_rows(r)).transpose()?;
        let g = self.graph()?;
        self.partition.validate(g.n())?;
        build_cluster(&g, o.as_ref())
    }

    pub fn angles(&self) -> Result<MeasurementAngles> {
        self.angles.as_ref().ok_or_else(|| OwqcError::Parse("config has no \"angles\" section".into()))?.resolve()
    }

    /// Squeezing r; the config gives it in dB.
    pub fn squeezing(&self) -> Result<f64> {
        let db = self.squeezing_db.unwrap_or(0.0);
        if !db.is_finite() {
            return Err(OwqcError::Parse("squeezing_db must be finite".into()));
        }
        Ok(db_to_r(db))
    }

    /// Input state on the m input modes; vacuum unless given.
    pub fn input_state(&self) -> Result<GaussianState> {
        let m = self.partition.m();
        let cov = match &self.input_covariance {
            Some(rows) => from_rows(rows)?,
            None => Mat::identity(2 * m, 2 * m) * 0.25,
        };
        if cov.shape() != (2 * m, 2 * m) {
            return Err(OwqcError::DimensionMismatch(format!(
                "input_covariance must be {0}x{0} for {m} inputs",
                2 * m
            )));
        }
        let mean = match &self.input_mean {
            Some(v) if v.len() == 2 * m => DVector::from_vec(v.clone()),
            Some(v) => {
                return Err(OwqcError::DimensionMismatch(format!(
                    "input_mean has {} entries, expected {}",
                    v.len(),
                    2 * m
                )))
            }
            None => DVector::zeros(2 * m),
        };
        GaussianState::new(mean, cov)
    }

    pub fn program(&self) -> Result<SchemeProgram> {
        Ok(SchemeProgram {
            model: self.model()?,
            partition: self.partition.clone(),
            angles: self.angles()?,
            input_state: self.input_state()?,
            squeezing: self.squeezing()?,
        })
    }
}

/// Seconds since the Unix epoch; the one field allowed to differ between
/// reruns.
pub fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub case: CaseTag,
    pub variant: Option<Variant>,
    pub u_tilde: Vec<Vec<f64>>,
    /// E on y_s, that is E·Re U.
    pub error_on_ys: Vec<Vec<f64>>,
    /// E on y_r, columns in node order.
    pub error_on_yr: Vec<Vec<f64>>,
    pub symplectic_defect: f64,
    pub intermediates: BTreeMap<String, Vec<Vec<f64>>>,
    pub timestamp: u64,
}

impl SolutionReport {
    pub fn new(solution: &CaseSolution, model: &ClusterModel, variant: Option<Variant>) -> Result<Self> {
        Ok(Self {
            case: solution.case_tag,
            variant,
            u_tilde: to_rows(&solution.u_tilde),
            error_on_ys: to_rows(&effective_error_on_ys(solution, model)?),
            error_on_yr: to_rows(&solution.e_on_yr),
            symplectic_defect: symplectic_defect(&solution.u_tilde)?,
            intermediates: solution.intermediates.iter().map(|(k, v)| (k.clone(), to_rows(v))).collect(),
            timestamp: timestamp(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub mode: SimulationMode,
    pub squeezing_r: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub standard_error: Option<Vec<Vec<f64>>>,
    pub samples: usize,
    pub seed: Option<u64>,
    pub feedforward: Vec<Vec<f64>>,
    pub timestamp: u64,
}

impl SimulationReport {
    pub fn new(stats: &SimulationStats, squeezing_r: f64) -> Self {
        Self {
            mode: stats.mode,
            squeezing_r,
            mean: stats.mean.iter().copied().collect(),
            covariance: to_rows(&stats.covariance),
            standard_error: stats.standard_error.as_ref().map(to_rows),
            samples: stats.samples,
            seed: stats.seed,
            feedforward: to_rows(&stats.feedforward),
            timestamp: timestamp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub case: CaseTag,
    pub defect: DefectReport,
    pub predicted_covariance: Vec<Vec<f64>>,
    pub simulation: SimulationReport,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateAngles {
    pub config_id: u8,
    pub angles: Option<FourNodeAngles>,
    /// Residual of Ũ_j at these angles against the matrix.
    pub residual: Option<f64>,
    /// Error code when no closed-form branch applies.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeReport {
    pub matrix: Vec<Vec<f64>>,
    pub euler: EulerFactors,
    pub reconstruction_residual: f64,
    pub four_node: Vec<TemplateAngles>,
    pub timestamp: u64,
}

/// Euler factors of a 2×2 symplectic matrix, and for each four-node template
/// the closed-form angles that realize it, where they exist.
pub fn decompose_report(m: &Mat) -> Result<DecomposeReport> {
    let euler = euler_decompose(m)?;
    let reconstruction_residual = max_abs_diff(&euler.reconstruct(), m);
    let family_angles = |j: u8| -> TemplateAngles {
        use crate::search::Family;
        let fam = crate::search::TemplateFamily { config_id: j };
        match fam.analytic(m) {
            Some(p) => {
                let angles = FourNodeAngles { theta3: p[0], theta4: p[1], theta_plus: p[2], theta_minus: p[3] };
                let residual = four_node_matrix(j, &angles).ok().map(|u| max_abs_diff(&u, m));
                TemplateAngles { config_id: j, angles: Some(angles), residual, error: None }
            }
            None => TemplateAngles {
                config_id: j,
                angles: None,
                residual: None,
                error: Some(
                    four_node_angles_for(j, euler.phi1, euler.r)
                        .err()
                        .map_or("out_of_branch", |e| e.code())
                        .to_string(),
                ),
            },
        }
    };
    Ok(DecomposeReport {
        matrix: to_rows(m),
        euler,
        reconstruction_residual,
        four_node: (1..=5).map(family_angles).collect(),
        timestamp: timestamp(),
    })
}

/// Machine-readable error document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl From<&OwqcError> for ErrorReport {
    fn from(e: &OwqcError) -> Self {
        Self { error: ErrorBody { code: e.code().to_string(), message: e.to_string() } }
    }
}

/// Parse a JSON matrix literal. The Unicode minus sign is accepted.
pub fn parse_matrix(text: &str) -> Result<Mat> {
    let cleaned = text.replace('\u{2212}', "-");
    let rows: Vec<Vec<f64>> = serde_json::from_str(&cleaned)?;
    from_rows(&rows)
}
