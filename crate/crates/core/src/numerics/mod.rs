//! Dense complex linear algebra kernels and the proximal/projection operators
//! composed by every solver.

mod affine;
mod eigen;
mod matrix;
mod prox;

pub use affine::{AffineProjector, HermitianFactor, PIVOT_TOL};
pub use eigen::{anchor_index, hermitian_eig, psd_project, rank_one_extract, HermitianEigen, RankOne};
pub use matrix::{complex_vec_serde, inner, vector_norm, ComplexMatrix, ComplexVector};
pub use prox::{complex_soft_threshold, soft_threshold_in_place};

pub(crate) use eigen::psd_project_in_place;
pub(crate) use prox::shrink;
