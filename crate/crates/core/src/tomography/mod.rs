//! Analysis chain from raw homodyne windows to photon-number populations:
//! variance trace, low-pass, mode estimate, projection onto a mode, vacuum
//! normalization, the constrained Fock-mixture fit and the Wigner center.

mod fit;
mod project;
mod variance;

pub use fit::{
    fit_binned_least_squares, fit_fock_mixture, run_em, wigner_center, DiagonalDensityMatrix,
    EmOutcome, EmStep, FitOptions, FockFit, MixtureLikelihood,
};
pub use project::{project, MarginalHistogram, QuadratureSet};
pub use variance::{estimate_mode_from_variance, lowpass, variance_trace, VarianceTrace};
