//! A Phi with two entries in one row, checked level by level.

use num_complex::Complex64;
use quasiboson_core::fock::{build_space, ModeSpec};
use quasiboson_core::phi::matrix_from_entries;
use quasiboson_core::quasiboson::{build_quasiboson, DEFAULT_RANK_TOL};
use quasiboson_core::verify::brute_force_phi;

#[test]
fn row_sharing_is_parallel_until_level_four() {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let row = matrix_from_entries(2, 2, &[(0, 0, s), (0, 1, s)]);
    let space = build_space(ModeSpec::new(2, 2, 0.5, 6).unwrap()).unwrap();
    let pair = build_quasiboson(&space, &row).unwrap();
    let levels = brute_force_phi(&space, &pair, 5, DEFAULT_RANK_TOL).unwrap();
    let phi: Vec<f64> = levels.iter().map(|l| l.phi().unwrap()).collect();
    let defect: Vec<f64> = levels.iter().map(|l| l.defect().unwrap()).collect();

    // the squared q-number would give 0.25 here
    assert!((phi[1] - 0.125).abs() < 1e-12, "{phi:?}");
    assert!((phi[2] - 0.65625).abs() < 1e-12, "{phi:?}");
    assert!(defect[..3].iter().all(|d| *d < 1e-12), "{defect:?}");
    assert!((defect[3] - 0.0579927725748508).abs() < 1e-9, "{defect:?}");
    assert!((defect[4] - 0.0968909935468149).abs() < 1e-9, "{defect:?}");
}
