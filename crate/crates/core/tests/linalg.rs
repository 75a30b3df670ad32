use passivity_core::linalg::{determinant, eig_general, eig_symmetric, solve_linear, DenseMatrix};
use proptest::prelude::*;

fn square(n: usize) -> impl Strategy<Value = DenseMatrix<f64>> {
    proptest::collection::vec(-2.0f64..2.0, n * n).prop_map(move |d| DenseMatrix::from_row_major(n, n, d))
}

fn any_square() -> impl Strategy<Value = DenseMatrix<f64>> {
    (1usize..=6).prop_flat_map(square)
}

fn symmetric() -> impl Strategy<Value = DenseMatrix<f64>> {
    any_square().prop_map(|a| {
        let t = a.transpose();
        let n = a.rows();
        let d: Vec<f64> = (0..n * n).map(|k| 0.5 * (a.as_slice()[k] + t.as_slice()[k])).collect();
        DenseMatrix::from_row_major(n, n, d)
    })
}

proptest! {
    #[test]
    fn solve_recovers_known_solution(a in any_square(), seed in proptest::collection::vec(-1.0f64..1.0, 6)) {
        let n = a.rows();
        // Diagonal shift keeps the system well conditioned.
        let mut d = a.as_slice().to_vec();
        for i in 0..n {
            d[i * n + i] += 10.0;
        }
        let a = DenseMatrix::from_row_major(n, n, d);
        let x: Vec<f64> = seed[..n].to_vec();
        let b = a.mul_vec(&x);
        let got = solve_linear(&a, &b).unwrap();
        for (g, e) in got.iter().zip(&x) {
            prop_assert!((g - e).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobi_reconstructs_and_orders(a in symmetric()) {
        let eig = eig_symmetric(&a).unwrap();
        prop_assert!(eig.reconstruct().sub(&a).max_abs() < 1e-10);
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let qtq = eig.vectors.transpose().matmul(&eig.vectors);
        prop_assert!(qtq.sub(&DenseMatrix::identity(a.rows())).max_abs() < 1e-10);
    }

    #[test]
    fn general_solver_agrees_on_symmetric_input(a in symmetric()) {
        let sym = eig_symmetric(&a).unwrap().values;
        let mut gen: Vec<f64> = eig_general(&a).unwrap().iter().map(|c| { assert!(c.im.abs() < 1e-8); c.re }).collect();
        gen.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (s, g) in sym.iter().zip(&gen) {
            prop_assert!((s - g).abs() < 1e-8);
        }
    }

    #[test]
    fn eigenvalues_match_trace_and_determinant(a in any_square()) {
        let eig = eig_general(&a).unwrap();
        let sum_re: f64 = eig.iter().map(|c| c.re).sum();
        let sum_im: f64 = eig.iter().map(|c| c.im).sum();
        prop_assert!((sum_re - a.trace()).abs() < 1e-8);
        prop_assert!(sum_im.abs() < 1e-8);
        let prod = eig.iter().fold(num_complex::Complex64::new(1.0, 0.0), |p, c| p * c);
        let det = determinant(&a);
        prop_assert!((prod.re - det).abs() < 1e-7 * det.abs().max(1.0));
        prop_assert!(prod.im.abs() < 1e-7 * det.abs().max(1.0));
    }
}

#[test]
fn rotation_block_gives_complex_pair() {
    let a: DenseMatrix<f64> = DenseMatrix::from_rows(&[[0.0, -2.0], [2.0, 0.0]]);
    let eig = eig_general(&a).unwrap();
    assert!(eig
        .iter()
        .all(|c| c.re.abs() < 1e-14 && (c.im.abs() - 2.0).abs() < 1e-14));
}

#[test]
fn singular_system_is_reported() {
    let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
    assert!(solve_linear(&a, &[1.0, 1.0]).is_err());
}
