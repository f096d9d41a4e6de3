//! Fractional calculus on the circle: spectral and singular-integral
//! fractional Laplacians, the two-point gradient/divergence calculus on
//! off-diagonal kernels, seminorms, the Riesz transform and commutators.

mod identities;
mod kernel;
mod singular;
mod spectral;

pub use identities::{
    commutator_alt_residual, commutator_c, product_laplacian_residual, MatrixField,
};
pub use kernel::{
    frac_divergence, frac_gradient, gagliardo_seminorm, leibniz_residual, od_lp_norm, od_norm,
    od_pairing, OffDiagKernel,
};
pub(crate) use kernel::od_integrate;
pub use singular::{
    calibrate_constant, calibration, duality_constant, frac_laplacian_singular,
    install_calibration, singular_eigenvalue, Calibration,
};
pub use spectral::{
    derivative, energy_density, energy_half, frac_laplacian_spectral, fractional_power,
    half_laplacian, quarter_laplacian, riesz_transform,
};
