use passivity_harness::case::linspace;
use passivity_harness::experiments::{sweep_lambda, sweep_stability_grid, verify, Study};
use passivity_harness::CaseFile;

#[test]
fn lambda_sweep_matches_direct_solves() {
    let st = Study::new(CaseFile::bundled(), false).unwrap();
    let s = linspace(0.5, 2.5, 5);
    let rows = sweep_lambda(&st, &s);
    for row in rows {
        let direct = st.lambda(&st.solve(row.s, None).unwrap()).unwrap().lambda;
        assert!((row.lambda.unwrap() - direct).abs() < 1e-9);
    }
}

#[test]
fn lossy_study_uses_susceptance_energy() {
    let st = Study::new(CaseFile::bundled(), true).unwrap();
    assert!(!st.net.is_lossless());
    let eq = st.solve(1.0, None).unwrap();
    let lossless = Study::new(CaseFile::bundled(), false).unwrap();
    let l = st.lambda(&eq).unwrap().lambda;
    let l0 = lossless.lambda(&lossless.solve(1.0, None).unwrap()).unwrap().lambda;
    assert!(l < 0.0 && (l - l0).abs() < 0.01);
}

#[test]
fn grid_is_row_major_with_stable_large_rho() {
    let st = Study::new(CaseFile::bundled(), false).unwrap();
    let rows = sweep_stability_grid(&st, &[1.0, 2.0], &[-0.5, 0.0, 0.5]).unwrap();
    let order: Vec<(f64, f64)> = rows.iter().map(|r| (r.s, r.rho)).collect();
    assert_eq!(
        order,
        vec![(1.0, -0.5), (1.0, 0.0), (1.0, 0.5), (2.0, -0.5), (2.0, 0.0), (2.0, 0.5)]
    );
    assert!(rows.iter().filter(|r| r.rho == 0.5).all(|r| r.verdict == "green"));
    assert!(rows.iter().filter(|r| r.rho == -0.5).all(|r| r.verdict == "red"));
    for r in &rows {
        assert!((r.sigma - (r.neg_lambda + r.rho)).abs() < 1e-12);
    }
}

#[test]
fn verify_separates_the_index_condition() {
    let st = Study::new(CaseFile::bundled(), false).unwrap();
    let ok = verify(&st, 1.0, 0.2).unwrap();
    assert!(ok.satisfied());
    assert!(ok.buses.iter().all(|b| b.ofp));
    let short = verify(&st, 1.0, 0.1).unwrap();
    assert!(!short.satisfied());
    assert!(short.buses.iter().all(|b| !b.index));
}
