//! Laplacian spectra of compact metric graphs with standard (Kirchhoff)
//! vertex conditions.
//!
//! The pipeline: a combinatorial graph with positive edge lengths
//! ([`graph`]) is turned into its fixed bond scattering system ([`scattering`]),
//! whose secular polynomial `P(z) = det(I - U(z))` ([`secular`]) vanishes on
//! the torus exactly at the points `exp(ik l)` with `k` in the spectrum.
//! Eigenvalues are located by monotone eigenphase tracking ([`solver`]),
//! eigenfunction trace vectors live in [`trace`], and [`experiments`] runs
//! the statistical genericity and common-spectrum scans built on top.

pub mod experiments;
pub mod graph;
mod linalg;
pub mod scattering;
pub mod secular;
pub mod solver;
pub mod trace;

pub use experiments::{
    common_spectrum, common_spectrum_with, genericity_density, genericity_density_with,
    match_sorted, random_lengths, DensityReport, ExperimentError, GenericityProperty, MatchReport,
};
pub use graph::{AssumptionViolation, Edge, GraphClass, GraphError, MetricGraph};
pub use linalg::{C64, TAU};
pub use scattering::{BondSystem, ScatteringError};
pub use secular::{
    expand_polynomial, mandarin_factors, rank_one_a, secular_gradient, secular_value,
    verify_factorization, verify_factorization_with, FactorizationReport, PolyTable, Regularity,
    SecularError, SecularValue,
};
pub use solver::{
    eigenphases, multiplicity, multiplicity_with, solve_spectrum, solve_spectrum_with, weyl_check,
    EigenvalueRecord, SolverConfig, SolverError, SpectrumWindow, WeylReport,
};
pub use trace::{
    classify_symmetry, edge_support, eigenfunction_eval, eigenfunction_eval_from_end,
    kernel_traces, nonvanishing_test, symmetric_on_all_loops, trace_residuals,
    traces_from_kernel, EdgeSupportReport, NonvanishingReport, ResidualReport, SymmetryClass,
    TraceError, TraceVector,
};
