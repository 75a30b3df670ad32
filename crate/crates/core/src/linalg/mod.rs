//! Dense linear-algebra kernels: LU solves, symmetric (Jacobi) and general
//! (Hessenberg + shifted QR) eigenvalue problems.

mod dense;
mod jacobi;
mod lu;
mod schur;

pub use dense::DenseMatrix;
pub use jacobi::{eig_symmetric, SymmetricEigen, OFF_DIAGONAL_TOL, SYMMETRY_TOL};
pub use lu::{determinant, solve_linear, Lu, PIVOT_REL};
pub use schur::eig_general;
