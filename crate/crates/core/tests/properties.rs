use std::path::PathBuf;

use num_complex::Complex64;
use proptest::prelude::*;
use quasiboson_core::dsf::{check_binomial_recurrence_exact, StructureFunctionSpec};
use quasiboson_core::fock::{build_space, ladder_norm_sq, verify_mode_relations, ModeSpec};
use quasiboson_core::phi::{
    check_constraint_system, classify, deformation_parameter, generate_family_seeded, PhiFileEntry, PhiFileMode,
    Realizability,
};
use quasiboson_core::quasiboson::{build_quasiboson, DEFAULT_RANK_TOL};
use quasiboson_core::verify::{brute_force_phi, weak_equality_suite, PhiSource, RunConfig};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, Just(0.0), Just(1.0), Just(0.1 + 0.2)]
}

fn dsf_spec() -> impl Strategy<Value = StructureFunctionSpec> {
    prop_oneof![
        (1u32..9).prop_map(|m| StructureFunctionSpec::FermionicQuadratic { m }),
        (-0.99..0.99f64).prop_map(|q| StructureFunctionSpec::QFermionSquare { q }),
        (-0.99..0.99f64, finite(), finite(), finite())
            .prop_map(|(q, p1, p2, p3)| StructureFunctionSpec::Parameterized { q, p1, p2, p3 }),
        prop::collection::vec(finite(), 0..6).prop_map(|values| StructureFunctionSpec::Tabulated { values }),
    ]
}

fn phi_source() -> impl Strategy<Value = PhiSource> {
    let entry = (1usize..5, 1usize..5, finite(), finite()).prop_map(|(mu, nu, re, im)| PhiFileEntry { mu, nu, re, im });
    let mode = (1usize..4, prop::collection::vec(entry, 0..4)).prop_map(|(alpha, entries)| PhiFileMode { alpha, entries });
    prop_oneof![
        "[a-z]{1,8}\\.json".prop_map(|p| PhiSource::File { path: PathBuf::from(p) }),
        (1usize..4, 1usize..4, prop::option::of(any::<u64>()))
            .prop_map(|(m, modes, seed)| PhiSource::Generate { m, modes, seed }),
        prop::collection::vec(mode, 0..3).prop_map(|modes| PhiSource::Inline { modes }),
    ]
}

fn run_config() -> impl Strategy<Value = RunConfig> {
    (
        (1usize..6, 1usize..6, prop_oneof![Just(1.0), -0.99..0.99f64], 1u32..6),
        phi_source(),
        dsf_spec(),
        0u32..10,
        prop::option::of(1e-14..1e-2f64),
        prop::option::of(1e-14..1e-2f64),
        prop::option::of("[a-z]{1,8}\\.json"),
    )
        .prop_map(|((d_a, d_b, q, cutoff), phi, dsf, n_max, tol, rank_tol, output)| RunConfig {
            space: ModeSpec { d_a, d_b, q, cutoff },
            phi,
            dsf,
            n_max,
            tol,
            rank_tol,
            output: output.map(PathBuf::from),
        })
}

/// `(d, m, modes)` within the block capacity.
fn block_shape() -> impl Strategy<Value = (usize, usize, usize)> {
    (2usize..5, 1usize..4).prop_flat_map(|(d, m)| {
        let m = m.min(d);
        (Just(d), Just(m), 1..=d / m)
    })
}

proptest! {
    #[test]
    fn config_round_trips(cfg in run_config()) {
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn q_square_is_the_parameterized_point(q in -0.99..0.99f64, n in 0u32..12) {
        let square = StructureFunctionSpec::QFermionSquare { q }.eval(n).unwrap();
        let param = StructureFunctionSpec::Parameterized { q, p1: 1.0, p2: 1.0, p3: 2.0 }.eval(n).unwrap();
        prop_assert!((square - param).abs() <= 1e-12 * square.abs().max(1.0), "{} vs {}", square, param);
    }

    #[test]
    fn fermionic_family_obeys_binomial_recurrence(m in 1u32..8) {
        let spec = StructureFunctionSpec::FermionicQuadratic { m };
        let set = check_binomial_recurrence_exact(&spec.table_exact(21).unwrap(), 20).unwrap();
        prop_assert!(set.residuals.iter().all(|r| r.value == 0.0));
    }

    #[test]
    fn ladder_norms_stay_positive(q in -0.99..0.99f64, k in 0u32..8) {
        prop_assert!(ladder_norm_sq(k, q).unwrap() > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_families_are_sound((d, m, modes) in block_shape(), seed in any::<u64>()) {
        let family = generate_family_seeded(d, d, m, modes, Some(seed)).unwrap();
        prop_assert!(check_constraint_system(&family).unwrap().passed());
        for p in family.matrices() {
            prop_assert!((deformation_parameter(p).f - 2.0 / m as f64).abs() < 1e-12);
        }
        let verdict = classify(&family, 1.0).unwrap().verdict;
        let is_m = matches!(verdict, Realizability::RealizableQ1 { m: got, .. } if got as usize == m);
        prop_assert!(is_m);
    }

    #[test]
    fn graded_relations_hold(d_a in 1usize..3, d_b in 1usize..3, q in -0.95..0.95f64, cutoff in 1u32..4) {
        let space = build_space(ModeSpec::new(d_a, d_b, q, cutoff).unwrap()).unwrap();
        let set = verify_mode_relations(&space).unwrap();
        prop_assert!(set.passed(), "{:?}", set.failures().collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The structure function is forced: the oracle reproduces `m`, and the
    /// relations fail for every other quadratic.
    #[test]
    fn realized_structure_function_is_unique(m in 1usize..3, other in 1u32..5, seed in any::<u64>()) {
        let space = build_space(ModeSpec::new(4, 4, 1.0, 1).unwrap()).unwrap();
        let family = generate_family_seeded(4, 4, m, 4 / m, Some(seed)).unwrap();
        let pair = build_quasiboson(&space, &family.matrices()[0]).unwrap();
        let spec = StructureFunctionSpec::FermionicQuadratic { m: m as u32 };
        for level in brute_force_phi(&space, &pair, 3, DEFAULT_RANK_TOL).unwrap() {
            if let Some(phi) = level.phi() {
                prop_assert!((phi - spec.eval(level.n()).unwrap()).abs() < 1e-10);
            }
        }
        prop_assert!(weak_equality_suite(&space, &family, &spec, 2).unwrap().passed());
        prop_assume!(other != m as u32);
        let wrong = StructureFunctionSpec::FermionicQuadratic { m: other };
        prop_assert!(!weak_equality_suite(&space, &family, &wrong, 2).unwrap().passed());
    }

    #[test]
    fn mode_phases_change_nothing(seed in any::<u64>(), theta in -3.2..3.2f64, q_low in prop::bool::ANY) {
        let (space, family, spec) = if q_low {
            let e = |i, j| quasiboson_core::phi::matrix_from_entries(2, 2, &[(i, j, Complex64::new(1.0, 0.0))]);
            let f = quasiboson_core::phi::PhiFamily::new(2, 2, 0.5, vec![e(0, 1), e(1, 0)]).unwrap();
            (
                build_space(ModeSpec::new(2, 2, 0.5, 3).unwrap()).unwrap(),
                f,
                StructureFunctionSpec::QFermionSquare { q: 0.5 },
            )
        } else {
            (
                build_space(ModeSpec::new(4, 4, 1.0, 1).unwrap()).unwrap(),
                generate_family_seeded(4, 4, 2, 2, Some(seed)).unwrap(),
                StructureFunctionSpec::FermionicQuadratic { m: 2 },
            )
        };
        let turned = family.with_phase(0, theta);
        let q = space.q();
        prop_assert_eq!(
            classify(&family, q).unwrap().is_realizable(),
            classify(&turned, q).unwrap().is_realizable()
        );
        let a = weak_equality_suite(&space, &family, &spec, 2).unwrap();
        let b = weak_equality_suite(&space, &turned, &spec, 2).unwrap();
        prop_assert!(a.passed() && b.passed());
        let pa = build_quasiboson(&space, &family.matrices()[0]).unwrap();
        let pb = build_quasiboson(&space, &turned.matrices()[0]).unwrap();
        let la = brute_force_phi(&space, &pa, 2, DEFAULT_RANK_TOL).unwrap();
        let lb = brute_force_phi(&space, &pb, 2, DEFAULT_RANK_TOL).unwrap();
        for (x, y) in la.iter().zip(&lb) {
            prop_assert!((x.phi().unwrap() - y.phi().unwrap()).abs() < 1e-12);
        }
    }
}
