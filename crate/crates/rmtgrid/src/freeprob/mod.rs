//! Operator-valued free probability: linear pencils, subordination, and the
//! spectra of polynomials in free variables.

pub mod checks;
pub mod multiplicative;
pub mod operator;
pub mod pencil;
pub mod polynomial;
pub mod small;

pub use checks::{additive_evaluator, multiplicative_evaluator, verify_r_additivity, verify_s_multiplication, IdentityCheck};
pub use multiplicative::{free_multiplicative_cauchy, MultiplicativeConfig};
pub use operator::{
    free_additive_cauchy, operator_cauchy_semicircle, subordination_solve, OperatorCauchy, OperatorCauchyState,
    OperatorMethod, OperatorVariable, SubordinationConfig, ZeroOperator,
};
pub use pencil::{pencil_anticommutator, pencil_anticommutator_plus_square, pencil_identity, LinearPencil, Polynomial};
pub use polynomial::{
    grid_around, ks_density_vs_samples, lambda_eps, monte_carlo_spectrum, polynomial_spectrum, sample_mc_variable,
    DensityTable, McConfig, McEnsemble, PolySpectrumConfig,
};
pub use small::SmallMat;
