//! Analytic one-way quantum computation on continuous-variable cluster states.
//!
//! The engine computes, for a cluster graph and a node-role partition, the
//! input→output map `(X, Y)_out = Ũ (x, y)_in + E y_r` and cross-checks it
//! against a brute-force Gaussian simulation.

pub mod cluster;
pub mod engine;
pub mod error;
pub mod gates;
pub mod io;
pub mod matrix;
pub mod oracle;
pub mod search;

pub use cluster::{
    build_cluster, nullifier_map, partition_blocks, BlockSet, ClusterGraph, ClusterModel, Layout, NodePartition,
};
pub use engine::{
    case1_cz_squeeze, effective_error_on_ys, four_node_transform, solve_auto, solve_case1, solve_case2, solve_case3,
    three_node_family, three_node_weights_for_z, z_target, CaseSolution, CaseTag, IntermediateBlocks,
    MeasurementAngles, Variant,
};
pub use error::{OwqcError, Result};
pub use gates::{euler_decompose, four_node_angles_for, EulerFactors, FourNodeAngles};
pub use matrix::{symplectic_defect, BlockPartition2x2, Mat};
pub use oracle::{
    compare_with_analytic, db_to_r, homodyne_measure, init_squeezed, simulate_owqc, DefectReport, GaussianState,
    MonteCarloSettings, Sampler, SchemeProgram, SimulationMode, SimulationStats,
};
pub use search::{
    enumerate_graphs, euler_targets, infeasibility_probe, search_four_node, single_mode_partition, universality_score,
    ConfigurationClass, Family, FourNodeReport, FourNodeSettings, ReachabilityReport, SchemeFamily, SearchBudget,
    TemplateFamily,
};
