//! Boundary conditions from DVC slices, FE-versus-DVC comparison, exclusion
//! criteria and displacement-to-strain error propagation.

mod bc;
mod compare;
mod exclusion;
mod metrics;
mod propagate;

pub use bc::{
    build_dirichlet_from_dvc, extract_bc_slices, slice_bilinear, BcOptions, BcSlices,
    BoundaryConditions,
};
pub use compare::{
    direction_reliability, fe_at_dvc_points, subset_trabecular, DirectionReliability,
    PairedSamples, AXES,
};
pub use exclusion::{
    exclusion_check, CorrelationCriterion, DirectionDependence, ExclusionConfig, ExclusionReport,
    StrainCriterion, UncertaintyCriterion,
};
pub use metrics::{regression_metrics, RegressionMetrics};
pub use propagate::{propagate_displacement_error, ErrorPropagation};

/// Central axial fraction of the vertebra used for comparisons.
pub const DEFAULT_CENTRAL_FRACTION: f64 = 0.75;
/// DVC image voxel size (mm) used for direction reliability.
pub const DEFAULT_VOXEL_SIZE: f64 = 0.039;
