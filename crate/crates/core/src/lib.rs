//! Joint community detection and group synchronization over O(d) / SO(d).
//!
//! The crate generates block observation matrices from a planted model,
//! solves for the planted clustering and rotations with a projected power
//! iteration, measures recovery in the exact quotient metric, and checks the
//! deterministic conditions under which the iteration provably contracts.

pub mod blockmat;
pub mod conditions;
pub mod error;
pub mod gpm;
pub mod harness;
pub mod metrics;
pub mod projections;
pub mod seeds;
pub mod sgbm;
pub mod spectral;

pub use blockmat::{
    det, haar_sample, qr, svd, sym_eigen, BlockMat, GroupKind, GroupStack, Mat, ObservationMatrix,
    OrthoBlock, Svd, ORTHO_TOL,
};
pub use conditions::{
    check_conditions, check_magnitude, check_separation, red_boundary_beta, region_verdict,
    rho_required, sbm_threshold_alpha, spectral_deviation, ConditionReport, RegionVerdict,
};
pub use error::{Error, Result};
pub use gpm::{round_special, run as run_gpm, GpmConfig, GpmTrace};
pub use harness::{
    blue_boundary_beta, build_init, convergence_csv, emit_heatmap, phase_csv, run_convergence,
    run_phase, run_timing, timing_csv, ConvergenceRun, ExperimentGrid, GridResult, InitKind,
    TimingRow, TimingSize, TimingPlan, TrialFailure,
};
pub use metrics::{clustering_error, estimation_error, quotient_distance};
pub use projections::{
    mu, nuclear_norm, project_clustering, project_feasible, project_orthogonal,
    AssignmentSolution, OrthoProjection, Projected, ScoreMatrix,
};
pub use sgbm::{
    assemble_state, generate, is_in_e, read_instance, write_instance, GroundTruth, JointState,
    Rates, SgbmParams,
};
pub use spectral::{greedy_cluster, identity_init, initialize, top_eigs, EigBasis, InitConfig};
