//! Exact cut-and-project construction, substitution, deformation and
//! diffraction of the silver-mean chain.

pub mod cutproject;
pub mod deform;
pub mod diffraction;
pub mod error;
pub mod quadfield;
pub mod quadrature;
pub mod substitution;
pub mod summation;

pub use cutproject::{
    project_patch, sigma_estimate, silver_window, silver_windows, solve_windows, CutProjectScheme, IfsSystem,
    Interval, Window,
};
pub use deform::{
    deform_measure, deform_patch, delone_check, density, detect_periods, interval_ratio, Atom, DeformationKind,
    DeformationMap, DiracComb, KernelRule,
};
pub use diffraction::{
    amplitude_closed, amplitude_quadrature, autocorrelation_finite, compare_empirical_analytic, extinction_report,
    spectrum_scan, weyl_sum, Spectrum, SpectrumEntry,
};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use quadfield::{AlgebraicNumber, Real};
pub use substitution::{fixed_point_patch, LabeledPatch, Letter, PatchPoint, SubstitutionRule};
