//! Numerics for EPR-type and separability criteria on two-mode
//! continuous-variable states.
//!
//! Quadratures follow `x = a + a†`, `p = -i(a - a†)`, so the vacuum has unit
//! variance and `Δx Δp ≥ 1`. A rotated quadrature is
//! `x_θ = a e^{-iθ} + a† e^{iθ} = cos θ x + sin θ p`.
//!
//! The crate is organised bottom-up:
//!
//! * [`states`] builds and validates two-mode states (truncated Fock density
//!   matrices, Gaussian moments, explicit separable mixtures).
//! * [`quadrature`] computes gridded joint and conditional homodyne statistics.
//! * [`inference`] turns those into inference variances (conditional and linear).
//! * [`criteria`] evaluates the product, sum and squeezing inequalities.
//! * [`lhv`] samples the positive-Wigner hidden-variable model.
//! * [`experiment`] draws finite measurement records and estimates criteria
//!   with bootstrap errors.

pub mod criteria;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod lhv;
pub mod quadrature;
pub mod report;
pub mod states;
pub mod stats;

pub use criteria::{
    any_g_product_criterion, any_violation, duan_sum_criterion, evaluate_all,
    linear_product_criterion, linear_product_optimal, reid_epr_criterion,
    two_mode_squeezing_criterion, CriteriaConfig, CriterionKind, CriterionReport,
};
pub use error::{Error, Result};
pub use experiment::{
    estimate_criteria, estimate_linear_inference, run_experiment, CriterionEstimate,
    EstimateOptions, EstimateSummary, MeasurementRecord,
};
pub use inference::{
    inference_variance_conditional, inference_variance_conditional_auto, inference_variance_linear,
    optimal_gain, optimal_linear, optimal_offset, InferenceResult, LinearEstimator, Method,
    QuadraturePair,
};
pub use lhv::{
    check_uncertainty_proviso, compare_with_source, lhv_predicts, lhv_record, wigner_sample,
    HiddenVariableSample, LhvEnsemble, ProvisoReport, ResponseModel,
};
pub use quadrature::{
    conditional_profile, joint_distribution, joint_distribution_auto,
    joint_distribution_integrated, marginal_moments, ConditionalProfile, GridSpec,
    JointQuadratureDistribution, Mode, QuadratureGrid,
};
pub use states::{
    load_state_spec, parse_state_spec, ppt_diagnostic, FockDensityMatrix, GaussianState,
    LocalState, MixtureFamily, MixtureTerm, PptDiagnostic, SeparableMixture, SingleModeFock,
    SingleModeGaussian, State, StateSpec, UncertaintyBounds,
};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
