//! Boundary-corrected kernel density estimation on point clouds sampled from
//! embedded manifolds whose boundary is unknown.
//!
//! At each query point the crate estimates the distance and direction to the
//! boundary from the data alone, then produces four density estimates: the
//! standard manifold KDE, a boundary-renormalized KDE, a cut-and-normalize
//! KDE, and a Richardson-extrapolated cut-and-normalize KDE that targets the
//! order-`h` boundary bias. With a known boundary distance the extrapolation
//! is second order under [`RatioForm::MomentQuotient`]; with the estimated
//! distance the error in `b_hat` keeps a first-order term.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod kernel;
pub mod pointcloud;
pub mod quadrature;
pub mod scalar;
pub mod tuning;

pub use datasets::{
    disk_initial_norm_check, hemisphere_alpha, rejection_sample, sample_disk,
    sample_halfplane_gaussian, sample_hemisphere, GeneratorKind, GeneratorSpec, LabeledCloud,
    SampleCount,
};
pub use error::{Error, Result};
pub use estimators::{
    bde, boundary_info, boundary_normalized_kde, cut_kde, estimate_all, second_order_kde,
    standard_kde, BoundaryInfo, DensityEstimator, EstimateBundle,
};
pub use kernel::{
    bde_magnitude_model, distance_objective, erf, erfc, gaussian_kernel, m0_boundary,
    richardson_ratio, richardson_ratio_with, solve_boundary_distance, DistanceSolveResult,
    KernelParams, RatioForm, SolverOptions,
};
pub use pointcloud::{kernel_sums, load_csv, save_csv, AccumulatorSpec, KernelSums, PointCloud};
pub use scalar::Scalar;
pub use tuning::{
    dimension_curve, kernel_sum_curve, tune, tune_with_rule, CurveSite, TuningGrid, TuningResult,
    TuningRule,
};

pub type PointCloud64 = PointCloud<f64>;
pub type PointCloud32 = PointCloud<f32>;
pub type KernelParams64 = KernelParams<f64>;
pub type KernelParams32 = KernelParams<f32>;
pub type BoundaryInfo64 = BoundaryInfo<f64>;
pub type EstimateBundle64 = EstimateBundle<f64>;
pub type EstimateBundle32 = EstimateBundle<f32>;
pub type TuningResult64 = TuningResult<f64>;
