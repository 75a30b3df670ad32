//! Eigenvalues of a general real matrix: balancing, Householder reduction to
//! upper Hessenberg form, then Francis double-shift QR iteration on the
//! Hessenberg matrix until it reaches quasi-triangular (real Schur) form.
//! Real eigenvalues come from 1×1 diagonal blocks and conjugate pairs from
//! 2×2 blocks.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

/// Iteration budget per matrix dimension.
const ITERATIONS_PER_DIM: usize = 100;

/// All eigenvalues of a square real matrix, sorted by (real, imaginary) part.
pub fn eig_general<T: Real>(a: &DenseMatrix<T>) -> Result<Vec<Complex<T>>> {
    if !a.is_square() {
        return Err(Error::InvalidInput("eig_general needs a square matrix".into()));
    }
    if !a.all_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    let mut eig = hqr(&mut h)?;
    eig.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(eig)
}

/// Parlett–Reinsch balancing with radix-2 scaling; a similarity transform.
fn balance<T: Real>(a: &mut DenseMatrix<T>) {
    let n = a.rows();
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let mut g = r / radix;
            let mut f = T::one();
            let s = c + r;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < T::lit(0.95) * s {
                done = false;
                let g = T::one() / f;
                for j in 0..n {
                    a[(i, j)] *= g;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// In-place Householder reduction to upper Hessenberg form.
fn hessenberg<T: Real>(a: &mut DenseMatrix<T>) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![T::zero(); n];
    for k in 0..(n - 2) {
        let alpha_sq: T = ((k + 1)..n).map(|i| a[(i, k)] * a[(i, k)]).sum();
        let norm = alpha_sq.sqrt();
        if norm == T::zero() {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let alpha = if x0 >= T::zero() { -norm } else { norm };
        for i in 0..n {
            v[i] = if i > k { a[(i, k)] } else { T::zero() };
        }
        v[k + 1] -= alpha;
        let vnorm_sq: T = v[(k + 1)..].iter().map(|x| *x * *x).sum();
        if vnorm_sq == T::zero() {
            continue;
        }
        let beta = T::lit(2.0) / vnorm_sq;
        // A ← (I − β v vᵀ) A
        for j in 0..n {
            let s: T = ((k + 1)..n).map(|i| v[i] * a[(i, j)]).sum();
            let s = s * beta;
            for i in (k + 1)..n {
                a[(i, j)] -= s * v[i];
            }
        }
        // A ← A (I − β v vᵀ)
        for i in 0..n {
            let s: T = ((k + 1)..n).map(|j| a[(i, j)] * v[j]).sum();
            let s = s * beta;
            for j in (k + 1)..n {
                a[(i, j)] -= s * v[j];
            }
        }
        a[(k + 1, k)] = alpha;
        for i in (k + 2)..n {
            a[(i, k)] = T::zero();
        }
    }
}

#[inline]
fn sign<T: Real>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed).
fn hqr<T: Real>(a: &mut DenseMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = a.rows();
    let mut wr = vec![T::zero(); n];
    let mut wi = vec![T::zero(); n];

    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }

    let budget = ITERATIONS_PER_DIM * n;
    let mut total = 0usize;
    let mut its = 0usize;
    let mut t = T::zero();
    let mut nn = n as isize - 1;
    let half = T::lit(0.5);

    while nn >= 0 {
        let nu = nn as usize;
        // Locate a negligible subdiagonal element.
        let mut l = nu;
        while l >= 1 {
            let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
            if s == T::zero() {
                s = anorm;
            }
            if a[(l, l - 1)].abs() + s == s {
                a[(l, l - 1)] = T::zero();
                break;
            }
            l -= 1;
        }

        let mut x = a[(nu, nu)];
        if l == nu {
            wr[nu] = x + t;
            wi[nu] = T::zero();
            nn -= 1;
            its = 0;
            continue;
        }
        let mut y = a[(nu - 1, nu - 1)];
        let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
        if l == nu - 1 {
            let p = half * (y - x);
            let q = p * p + w;
            let mut z = q.abs().sqrt();
            x += t;
            if q >= T::zero() {
                z = p + sign(z, p);
                wr[nu - 1] = x + z;
                wr[nu] = x + z;
                if z != T::zero() {
                    wr[nu] = x - w / z;
                }
                wi[nu - 1] = T::zero();
                wi[nu] = T::zero();
            } else {
                wr[nu - 1] = x + p;
                wr[nu] = x + p;
                wi[nu - 1] = -z;
                wi[nu] = z;
            }
            nn -= 2;
            its = 0;
            continue;
        }

        if total >= budget {
            return Err(Error::EigenNoConvergence { iterations: total });
        }
        if its == 10 || its == 20 {
            // Exceptional shift.
            t += x;
            for i in 0..=nu {
                a[(i, i)] -= x;
            }
            let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
            x = T::lit(0.75) * s;
            y = x;
            w = T::lit(-0.4375) * s * s;
        }
        its += 1;
        total += 1;

        // Look for two consecutive small subdiagonal elements.
        let mut m = nu - 2;
        let (mut p, mut q, mut r);
        loop {
            let z = a[(m, m)];
            let rr = x - z;
            let ss = y - z;
            p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
            q = a[(m + 1, m + 1)] - z - rr - ss;
            r = a[(m + 2, m + 1)];
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
            let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
            if u + v == v {
                break;
            }
            m -= 1;
        }
        for i in (m + 2)..=nu {
            a[(i, i - 2)] = T::zero();
            if i != m + 2 {
                a[(i, i - 3)] = T::zero();
            }
        }

        // Double-shift QR sweep on rows/columns l..=nn.
        let mut k = m;
        while k < nu {
            if k != m {
                p = a[(k, k - 1)];
                q = a[(k + 1, k - 1)];
                r = T::zero();
                if k != nu - 1 {
                    r = a[(k + 2, k - 1)];
                }
                x = p.abs() + q.abs() + r.abs();
                if x != T::zero() {
                    p /= x;
                    q /= x;
                    r /= x;
                }
            }
            let s = sign((p * p + q * q + r * r).sqrt(), p);
            if s != T::zero() {
                if k == m {
                    if l != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nu {
                    let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                    if k != nu - 1 {
                        pp += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pp * z;
                    }
                    a[(k + 1, j)] -= pp * y;
                    a[(k, j)] -= pp * x;
                }
                let mmin = if nu < k + 3 { nu } else { k + 3 };
                for i in l..=mmin {
                    let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k != nu - 1 {
                        pp += z * a[(i, k + 2)];
                        a[(i, k + 2)] -= pp * r;
                    }
                    a[(i, k + 1)] -= pp * q;
                    a[(i, k)] -= pp;
                }
            }
            k += 1;
        }
    }

    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex::new(re, im)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(z: Complex<f64>, re: f64, im: f64) -> bool {
        (z.re - re).abs() < 1e-12 && (z.im - im).abs() < 1e-12
    }

    #[test]
    fn companion_of_quadratic() {
        // λ² + 3λ + 2 = 0
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [-2.0, -3.0]]);
        let e = eig_general(&a).unwrap();
        assert!(close(e[0], -2.0, 0.0) && close(e[1], -1.0, 0.0));
    }

    #[test]
    fn rotation_block() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]);
        let e = eig_general(&a).unwrap();
        assert!(close(e[0], 0.0, -1.0) && close(e[1], 0.0, 1.0));
    }

    #[test]
    fn upper_triangular_gives_diagonal() {
        let a = DenseMatrix::from_rows(&[[3.0, 2.0, -1.0], [0.0, -4.0, 5.0], [0.0, 0.0, 0.5]]);
        let e = eig_general(&a).unwrap();
        let re: Vec<f64> = e.iter().map(|z| z.re).collect();
        assert!((re[0] + 4.0).abs() < 1e-12 && (re[1] - 0.5).abs() < 1e-12 && (re[2] - 3.0).abs() < 1e-12);
        assert!(e.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn one_by_one_and_empty() {
        let a = DenseMatrix::from_rows(&[[7.0]]);
        assert_eq!(eig_general(&a).unwrap(), vec![Complex::new(7.0, 0.0)]);
        assert!(eig_general(&DenseMatrix::<f64>::zeros(0, 0)).unwrap().is_empty());
    }
}
