//! Coefficients of the two-mode expansion read off by projecting operator
//! products onto constituent monomials.

use num_complex::Complex64;
use quasiboson_core::expansion::{c_table, example2_structure_function, example2_system};
use quasiboson_core::fock::{build_space, creation_operator, Family, FockSpace, ModeSpec};
use quasiboson_core::phi::{matrix_from_entries, CMatrix};
use quasiboson_core::quasiboson::build_quasiboson;
use quasiboson_core::sparse::{inner, vec_sub};

const Q: f64 = 0.5;

fn space(cutoff: u32) -> FockSpace {
    build_space(ModeSpec::new(2, 2, Q, cutoff).unwrap()).unwrap()
}

fn generic_phi() -> CMatrix {
    let p = matrix_from_entries(
        2,
        2,
        &[
            (0, 0, Complex64::new(0.6, 0.1)),
            (0, 1, Complex64::new(-0.3, 0.4)),
            (1, 0, Complex64::new(0.2, -0.5)),
            (1, 1, Complex64::new(0.35, 0.25)),
        ],
    );
    let norm = p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    p.map(|z| z / norm)
}

/// `(a2^dag)^k (a1^dag)^(n-k) (b2^dag)^l (b1^dag)^(n-l) |O>`.
fn monomial(space: &FockSpace, n: u32, k: u32, l: u32) -> Vec<Complex64> {
    let mut v = space.vacuum();
    for (family, mode, times) in [(Family::B, 0, n - l), (Family::B, 1, l), (Family::A, 0, n - k), (Family::A, 1, k)] {
        let op = creation_operator(space, family, mode).unwrap();
        for _ in 0..times {
            v = op.apply(&v);
        }
    }
    v
}

fn coefficient(space: &FockSpace, v: &[Complex64], n: u32, k: u32, l: u32) -> Complex64 {
    let m = monomial(space, n, k, l);
    inner(&m, v) / inner(&m, &m)
}

fn level_sign(n: u32) -> f64 {
    if (n * n.saturating_sub(1) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[test]
fn c_table_matches_projected_powers() {
    let space = space(4);
    let phi = generic_phi();
    let pair = build_quasiboson(&space, &phi).unwrap();
    let ct = c_table(&phi, 4).unwrap();
    let mut v = space.vacuum();
    for n in 1..=4u32 {
        v = pair.a_dag.apply(&v);
        for k in 0..=n {
            for l in 0..=n {
                let projected = level_sign(n) * coefficient(&space, &v, n, k, l);
                let err = (projected - ct.get(n, k, l)).norm();
                assert!(err < 1e-11, "n={n} k={k} l={l}: {err}");
            }
        }
    }
}

#[test]
fn monomials_span_the_pair_states() {
    // nothing of (A^dag)^n |O> lies outside the monomials
    let space = space(3);
    let phi = generic_phi();
    let pair = build_quasiboson(&space, &phi).unwrap();
    let mut v = space.vacuum();
    for n in 1..=3u32 {
        v = pair.a_dag.apply(&v);
        let mut rest = v.clone();
        for k in 0..=n {
            for l in 0..=n {
                let m = monomial(&space, n, k, l);
                let c = coefficient(&space, &v, n, k, l);
                rest = vec_sub(&rest, &m.iter().map(|x| x * c).collect::<Vec<_>>());
            }
        }
        let left: f64 = rest.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(left < 1e-12, "n={n}: {left}");
    }
}

#[test]
fn two_mode_system_matches_projected_defect() {
    let space = space(5);
    let phi = generic_phi();
    let pair = build_quasiboson(&space, &phi).unwrap();
    let ct = c_table(&phi, 5).unwrap();
    let mut powers = vec![space.vacuum()];
    for _ in 0..5 {
        let next = pair.a_dag.apply(powers.last().unwrap());
        powers.push(next);
    }
    for n in 1..=3u32 {
        for phi_next in [example2_structure_function(&phi, Q, n + 1).unwrap(), Complex64::new(0.7, 0.0)] {
            let lowered = pair.a.apply(&powers[n as usize + 1]);
            let scaled: Vec<Complex64> = powers[n as usize].iter().map(|x| x * phi_next).collect();
            let defect = vec_sub(&lowered, &scaled);
            for k in 0..=n {
                for l in 0..=n {
                    let projected = level_sign(n) * coefficient(&space, &defect, n, k, l);
                    let system = example2_system(&ct, &phi, Q, n, k, l, phi_next).unwrap();
                    let err = (projected - system).norm();
                    assert!(err < 1e-11, "n={n} k={k} l={l}: {projected} vs {system}");
                }
            }
        }
    }
}
