//! Known-sample attack: match the principal axes of an independent sample
//! to those of the release, resolve the per-axis mirror ambiguity with a
//! two-sample test, and invert the recovered map.

mod attack;
pub mod diagnostics;
pub mod energy;
pub mod signs;

pub use attack::{
    paired_differences, pca_attack_general, pca_attack_orthogonal, MeanEstimates, PcaAttackResult,
    PcaDiagnostics, PcaOptions,
};
pub use diagnostics::{invariance_gaussian, min_eigen_ratio, sym_kl_gaussian};
pub use energy::{energy_statistic, energy_two_sample_p, EnergyOutcome, PooledDistances};
pub use signs::{
    score_signs, sign_search, SignEvaluation, SignMatrix, SignSearchOptions, SignSearchResult,
};
