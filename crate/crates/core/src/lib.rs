//! Box-counting dimension profiles of finite point clouds.
//!
//! For a kernel exponent `s > 0` and scale `r > 0` the capacity `C_r^s(E)` is the
//! reciprocal of the minimal energy `∫∫ min{1, (r/|x-y|)^s} dμ dμ` over probability
//! measures on `E`. The exponent of `C_r^s(E)` as `r -> 0` is the s-box dimension profile
//! `d(s)`, which determines box dimensions of projections and of fractional Brownian
//! images of `E`.
//!
//! Every estimator is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix the
//! scalar type for the common cases.

pub mod boxcount;
pub mod capacity;
pub mod error;
pub mod pointcloud;
pub mod profile;
pub mod projection;
pub mod regression;
pub mod report;
pub mod scalar;
pub mod stochastic;

pub use boxcount::{box_dimension, mesh_count, mesh_counts, CoverCount, ScaleGrid};
pub use capacity::{
    atom_potentials, certificate_gap, energy, equilibrium, kernel_value, potential, EquilibriumResult, KernelSpec,
    SolverOptions, WeightVector,
};
pub use error::{Error, Result};
pub use pointcloud::{resolution, Generator, IfsSystem, PointSet, ResolutionStats, Similarity};
pub use profile::{
    capacity_sweep, inequality_report, profile_estimate, sandwich_report, CapacitySweep, DimensionEstimate,
    InequalityReport, SandwichReport,
};
pub use projection::{
    project, projection_experiment, sample_subspace, tube_fraction, ProjectionReport, Subspace, TubeCheck,
};
pub use report::{Check, CheckStatus};
pub use scalar::Scalar;
pub use stochastic::{
    fbm_image, holder_snowflake, image_dimension_experiment, FbmSampler, FbmSpec, HolderSpec, ImageMap, ImageReport,
};

pub type PointSet64 = PointSet<f64>;
pub type PointSet32 = PointSet<f32>;
pub type ScaleGrid64 = ScaleGrid<f64>;
pub type ScaleGrid32 = ScaleGrid<f32>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type KernelSpec32 = KernelSpec<f32>;
pub type SolverOptions64 = SolverOptions<f64>;
pub type SolverOptions32 = SolverOptions<f32>;
pub type EquilibriumResult64 = EquilibriumResult<f64>;
pub type CapacitySweep64 = CapacitySweep<f64>;
pub type DimensionEstimate64 = DimensionEstimate<f64>;
pub type Subspace64 = Subspace<f64>;
