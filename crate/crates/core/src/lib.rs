//! Finsler metrics, Busemann–Hausdorff densities, osculating Riemannian
//! metrics, Finsler distances, and Sobolev-space approximation experiments on
//! discretized charts and spheres.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod container;
pub mod counterexample;
pub mod density;
pub mod dirichlet;
pub mod distance;
pub mod domain;
pub mod error;
pub mod field;
pub mod indicatrix;
pub mod metric;
pub mod mollifier;
pub mod osculating;
pub mod partition;
pub mod quadrature;
pub mod report;
pub mod sobolev;
pub mod sparse;

pub use config::{parse_config, Command, RunConfig};
pub use counterexample::{run_counterexample, CounterexampleReport};
pub use density::{
    approximate_boundary, approximate_interior, cutoff, truncate, ApproximationReport, BoundaryParams, InteriorParams,
};
pub use dirichlet::{
    assemble_weak_laplacian, compatibility_check, smooth_approximate_solution, solve_dirichlet, SolveReport,
    WeakProblem,
};
pub use distance::{
    curve_length, distance_field, forward_ball_mask, geodesic_spray, integrate_geodesic, DistanceField,
};
pub use domain::{build_box_chart, build_icosphere, BoxGrid, DiscreteDomain, DomainKind, IcoMesh};
pub use error::{Error, Result};
pub use field::ScalarField;
pub use indicatrix::{busemann_density, indicatrix_moments, monte_carlo_moments, osculating_metric, MomentResult};
pub use metric::{FinslerMetric, MetricKind};
pub use mollifier::{mollifier_kernel, mollify};
pub use osculating::{integrate, osculating_field, OsculatingField};
pub use partition::{partition_of_unity, Chart, PartitionOfUnity};
pub use report::{emit_report, Report};
pub use sobolev::{gradient_magnitude, hessian_magnitude, hkp_norm, lp_norm, SobolevReport};
