//! Below-threshold quantum correlations of two evanescently coupled
//! intracavity χ⁽²⁾ downconverters.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] – physical parameters, steady states, analytic stability
//!   eigenvalues and oscillation thresholds.
//! * [`linearized`] – drift and noise matrices of the linearised
//!   Ornstein-Uhlenbeck fluctuation equations (8×8 and the 4×4 combined-mode
//!   form used when the detunings equal the couplings).
//! * [`spectrum`] – intracavity spectral matrix and output quadrature spectra.
//! * [`analytic`] – closed-form spectra used as cross-checks.
//! * [`criteria`] – squeezing, Duan inseparability sum and Reid EPR product,
//!   with local-oscillator angle optimisation.
//! * [`sde`] – positive-P stochastic integrator of the full nonlinear
//!   equations, used as an independent oracle.
//!
//! All rates are measured in units of the low-frequency cavity decay rate.
//! Output quadrature variances use a coherent-state baseline of 1 per mode
//! (2 for a two-mode sum or difference), so the Duan separability bound is 4.

pub mod analytic;
pub mod criteria;
pub mod error;
pub mod linearized;
pub mod model;
pub mod sde;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Number of real (complex) variables in the doubled phase space.
pub const DIM: usize = 8;

pub type Matrix8 = nalgebra::SMatrix<C64, 8, 8>;
pub type Vector8 = nalgebra::SVector<C64, 8>;
pub type Matrix4 = nalgebra::SMatrix<C64, 4, 4>;

pub use analytic::{analytic_combined, analytic_variances, CombinedVariances, ResonantVariances};
pub use criteria::{
    duan_sum, epr_product, optimize_angle, theta_optimal, CorrelationRecord, Objective, Pairing,
};
pub use linearized::{build_combined_model, build_linear_model, numeric_eigenvalues};
pub use model::{
    derived_scales, fixed_point, stability_eigenvalues, steady_state, threshold_bisection,
    DerivedScales, Regime, SteadyState, SystemParams,
};
pub use spectrum::{
    quadrature_variance_out, spectral_matrix, Mode, QuadratureCombination, QuadratureSelector,
    SpectralMatrix,
};
