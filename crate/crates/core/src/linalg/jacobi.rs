//! Cyclic Jacobi eigensolver for real symmetric matrices.
//!
//! Every sweep visits each off-diagonal pair `(p, q)` once and applies the
//! plane rotation that annihilates `A[p][q]`. Rotations are accumulated into
//! the eigenvector matrix. The iteration stops once the Frobenius norm of the
//! off-diagonal part drops below the requested tolerance.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

/// Largest tolerated `max |A - Aᵀ|` on input.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Off-diagonal Frobenius norm at which the sweeps stop.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `A = Q Λ Qᵀ` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: DenseMatrix<T>,
}

impl<T: Real> SymmetricEigen<T> {
    pub fn vector(&self, k: usize) -> Vec<T> {
        self.vectors.column(k)
    }

    /// `Q Λ Qᵀ`, for reconstruction checks.
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let lambda = DenseMatrix::from_diagonal(&self.values);
        self.vectors.matmul(&lambda).matmul(&self.vectors.transpose())
    }
}

fn off_norm<T: Real>(a: &DenseMatrix<T>) -> T {
    let n = a.rows();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
pub fn eig_symmetric<T: Real>(a: &DenseMatrix<T>) -> Result<SymmetricEigen<T>> {
    if !a.is_square() {
        return Err(Error::InvalidInput("eig_symmetric needs a square matrix".into()));
    }
    let asym = a.asymmetry();
    if asym >= T::tol(SYMMETRY_TOL, a.max_abs()) {
        return Err(Error::NotSymmetric {
            asymmetry: asym.to_f64_lossy(),
        });
    }
    let n = a.rows();
    let mut m = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)]) * T::lit(0.5);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let mut q = DenseMatrix::identity(n);
    let tol = T::tol(OFF_DIAGONAL_TOL, m.max_abs());

    let mut sweeps = 0;
    while off_norm(&m) >= tol {
        if sweeps == MAX_SWEEPS {
            return Err(Error::EigenNoConvergence { iterations: sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for r in (p + 1)..n {
                let apq = m[(p, r)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(r, r)] - m[(p, p)]) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                rotate(&mut m, &mut q, p, r, c, s, t);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag = m.diagonal();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, k)] = q[(i, src)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Applies the rotation `J(p, r, θ)` as `Jᵀ A J` and accumulates `Q J`.
fn rotate<T: Real>(m: &mut DenseMatrix<T>, q: &mut DenseMatrix<T>, p: usize, r: usize, c: T, s: T, t: T) {
    let n = m.rows();
    let apq = m[(p, r)];
    m[(p, p)] -= t * apq;
    m[(r, r)] += t * apq;
    m[(p, r)] = T::zero();
    m[(r, p)] = T::zero();
    for k in 0..n {
        if k == p || k == r {
            continue;
        }
        let akp = m[(k, p)];
        let akr = m[(k, r)];
        let new_kp = c * akp - s * akr;
        let new_kr = s * akp + c * akr;
        m[(k, p)] = new_kp;
        m[(p, k)] = new_kp;
        m[(k, r)] = new_kr;
        m[(r, k)] = new_kr;
    }
    for k in 0..n {
        let qkp = q[(k, p)];
        let qkr = q[(k, r)];
        q[(k, p)] = c * qkp - s * qkr;
        q[(k, r)] = s * qkp + c * qkr;
    }
}
