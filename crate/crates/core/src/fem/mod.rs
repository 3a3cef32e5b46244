//! Lowest-order finite elements: element matrices, assembly of the cell and
//! cross-section pencils, and the generalized Hermitian eigensolver.

mod assembly;
mod eigen;
pub mod element;
mod locate;
mod sparse;

pub use assembly::{assemble, laplace_system, BlochForms, DofMap, HermitianPencil};
pub use eigen::{solve_lowest, solve_lowest_with, EigenOptions, EigenResult, DENSE_LIMIT};
pub use locate::PointLocator;
pub use sparse::SparseMatrix;
