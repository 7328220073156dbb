//! Dense matrices, spectra, decompositions and quadrature.

mod decomp;
mod matrix;
pub mod quad;

pub use decomp::{
    determinant, eig_general, eig_hermitian, eig_hermitian_vectors, hermitian_function, svd_values,
};
pub use matrix::{DataMatrix, Entries, Role, SpectrumKind, SpectrumSample, SpectrumValues, HERMITIAN_TOL};
pub use quad::{bisect_root, quad_integrate, quad_integrate_vec};
