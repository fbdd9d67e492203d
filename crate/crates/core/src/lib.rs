//! Optimal recovery regression in finite-dimensional Hilbert spaces and
//! Gaussian-kernel reproducing kernel Hilbert spaces.
//!
//! The crate provides the closed-form locally optimal recovery map over the
//! model set `{ f : dist(f, V) <= epsilon }`, kernel ridge/ridgeless and ERM
//! baselines, an exact evaluator for the local worst-case error of any
//! recovery output, and the experiment harness used by the `optrec` CLI.

pub mod dataset;
pub mod erm;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod linalg;
pub mod recovery;
pub mod rkhs;
pub mod worst_case;

pub use dataset::{load_csv, noniid_split, Dataset, LoadedCsv, Split, Standardizer, TargetColumn};
pub use erm::{erm1, erm1_gram, erm2, erm2_constrained, erm2_gram, ConstrainedErm, ErmSolution};
pub use error::{Error, ErrorClass, Result};
pub use experiments::{
    compare, sigma_grid_search, test_error_curve, wce_sweep, Comparison, Dims, ErrorCurve,
    ExperimentConfig, FitMethod, GridSearch, WceSweep,
};
pub use hilbert::{
    check_model_assumption, gram, kernel_basis, project, HilbertVector, ModelAssumption, ModelSet,
    ObservationSetup,
};
pub use recovery::{
    compute_mu, generalized_recover, minimal_local_wce, optimal_recover, optimal_recover_gram,
    ridge_recover, ridge_recover_gram, ridgeless_recover, ridgeless_recover_gram,
    GeneralizedProblem, GeneralizedRecovery, RecoveryCoefficients,
};
pub use rkhs::{KernelSpec, RecoveredFunction, TaylorBasisSpec};
pub use worst_case::{brute_force_wce, local_wce, min_norm_interpolant, WceCertificate};
