//! Semiparametric estimation of extreme quantiles of `ξ = h(X₁, …, X_p)`.
//!
//! The pipeline rank-transforms the data ([`marginals`]), fits a D-vine copula
//! ([`bicop`], [`dvine`]), draws a large bootstrap sample by inverse Rosenblatt
//! transformation ([`sampler`]) and reads off the upper sample quantile of the
//! target function ([`quantile`]). [`gof`] provides goodness-of-fit tests for
//! the fitted vine and [`sim`] the simulation harness used to assess the
//! estimator.

pub mod bicop;
pub mod dvine;
pub mod error;
pub mod gof;
pub mod marginals;
pub mod math;
pub mod optim;
pub mod quantile;
pub mod rng;
pub mod sampler;
pub mod sim;

pub use bicop::{Family, PairCopula, PairFit};
pub use dvine::{
    conditional_pseudo, fit_sequential, select_truncation, CopulaPolicy, DVineModel, FamilyPolicy, ModelSummary,
    TreeSelection,
};
pub use error::{Error, Result};
pub use gof::{empirical_copula, gof_statistics, model_copula_cdf, parametric_bootstrap_pvalue, GofResult};
pub use marginals::{inverse_empirical, inverse_empirical_midpoint, pseudo_observations, MarginalInverse, PseudoSample};
pub use quantile::{
    estimate_extreme_quantile, estimate_with, mare, quantile_from_model, sample_quantile, BootstrapOptions,
    QuantileEstimate, Scale, TargetFunction, UniformEval,
};
pub use rng::RngStream;
pub use sampler::{sample_data, sample_independent, sample_uniform_vine};
