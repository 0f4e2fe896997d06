//! Brownian-sheet sampling, stochastic integrals of the heat kernel, the
//! covariance operators of (U, ∂ₓU), and the pathwise identities built on them.

mod cameron_martin;
mod covariance;
mod drift;
mod green;
mod pairing;
mod sheet;
mod weakform;

pub use covariance::{apply_c1, apply_c2, bilinear_quadrature, cov_u, cov_u_cross, cov_u_gram, cov_v_gram, cov_v_kernel, psd_factor, CovKind};
pub use green::{cell_kernel_energy, gaussian_reach, greenrep_eval, greenrep_functional, KernelRule, DEFAULT_TAIL_TOL};
pub use pairing::{effective_extent, pair_functional, pair_u, pair_v, FieldObservable, PairKind};
pub use sheet::{sheet_sample, sheet_sample_with_budget, Rect, SheetFunctional, SheetGeometry, SheetSample, DEFAULT_CELL_BUDGET};
pub use cameron_martin::{cameron_martin_error, cameron_martin_target, laplace_of_cy, verify_cameron_martin_laplace, CM_PANELS, CM_TOL};
pub use drift::{
    drift_extent, drift_field_form, drift_field_functional, drift_integral_form, drift_integral_functional, drift_variance_closed_form,
    drift_variance_quadrature,
};
pub use weakform::{weakform_functional, weakform_residual, weakform_residual_tabulated, SpaceBump, TensorTestFunction};
