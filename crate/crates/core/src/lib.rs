//! Secrecy rate regions of Gaussian MIMO broadcast channels with an external
//! eavesdropper.
//!
//! Rates are in bits per channel use. The modules build on each other:
//! [`linalg`] (symmetric matrices, log-determinants, generalized
//! eigenpairs), [`channel`] (instances and classification), [`regions`]
//! (closed-form rates and convex closure), [`optimizer`] (weighted-sum
//! maximization and KKT multipliers), [`enhance`] (enhanced degraded channel
//! certificates) and [`misome`] (single-antenna receivers).

pub mod channel;
pub mod enhance;
pub mod error;
pub mod linalg;
pub mod misome;
pub mod optimizer;
pub mod regions;

pub use channel::{
    aligned_from_general, classify, ChannelClass, ChannelInstance, ChannelTag, InputConstraint, Receiver,
};
pub use enhance::{
    build_enhanced, certify_enhancement, certify_enhancement_with, proportionality, CertTolerances, EnhancedNoise,
    EnhancementCertificate, ProportionalityCert,
};
pub use error::{Error, Result};
pub use linalg::{gen_eigen_max, is_psd, log_det, psd_leq, GenEigenPair, SymMatrix, DEFAULT_PSD_TOL};
pub use misome::{
    build_pencils, misome_highsnr, misome_rates, misome_rates_m, misome_region, HighSnrBounds, MisomeChannel,
    MisomeRegion, PencilSet, PowerSplit,
};
pub use optimizer::{
    default_mu_grid, kkt_residual, maximize_weighted_sum, maximize_weighted_sum_with, project_feasible,
    recover_multipliers, trace_boundary, trace_boundary_with, KktMultipliers, Refinement, SearchBudget, SolveReport,
    SweptRegion, WeightedObjective,
};
pub use regions::{
    convex_closure, dpc_matrix, gaussian_rates, sdpc_rates, CovarianceSplit, Permutation, Provenance, RatePair,
    RegionPoint, RegionPointSet,
};
