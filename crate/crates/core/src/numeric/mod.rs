//! Numerical substrate: distribution functions, small SPD linear algebra,
//! finite differences.

pub mod diff;
pub mod dist;
pub mod linalg;

pub use dist::{
    chi2_critical, chi2_sf, erf, erfc, ks_test, std_normal_cdf, std_normal_pdf,
    std_normal_quantile, std_normal_sf, two_sided_normal_p, KsResult,
};
pub use linalg::{
    rcond_spd, spd_solve, symmetric_eigenvalues, Cholesky, Matrix, SpdSolveResult, RCOND_THRESHOLD,
};
