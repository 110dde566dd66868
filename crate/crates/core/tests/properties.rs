//! Randomized properties: the pretty-printer round trip, reproducibility
//! across execution modes, and the bundled files on disk.

use std::path::Path;

use proptest::prelude::*;
use qcwp::bundles::{basis_state, fdr_phi, ExampleBundle, FDR_SOURCE};
use qcwp::lang::{parse, pretty};
use qcwp::linalg::{DensityPair, Operator, Predicate};
use qcwp::par::Exec;
use qcwp::propcheck::{gen_program, run_suite_with, GenConfig, Suite};
use qcwp::random;

fn gen_config() -> impl Strategy<Value = GenConfig> {
    (any::<u64>(), 1usize..=3, 1usize..=5, 0.0..=0.5f64, 0.0..=0.6f64, any::<bool>(), any::<bool>()).prop_map(
        |(seed, max_vars, max_depth, loop_probability, observe_probability, draining_loops, loop_body_branching)| {
            GenConfig {
                max_vars,
                max_depth,
                loop_probability,
                observe_probability,
                seed,
                draining_loops,
                loop_body_branching,
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pretty_then_parse_is_identity(cfg in gen_config()) {
        let p = gen_program(&cfg);
        let text = pretty(&p);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(pretty(&back), text);
    }

    #[test]
    fn generated_unitaries_are_unitary(seed in any::<u64>(), dim in 1usize..=8) {
        let u = random::gen_unitary(dim, &mut random::rng(seed));
        prop_assert!(u.is_unitary(1e-10));
    }

    #[test]
    fn generated_predicates_and_states_are_valid(seed in any::<u64>(), dim in 1usize..=8) {
        let mut rng = random::rng(seed);
        let p = random::gen_predicate(dim, &mut rng);
        prop_assert!(Predicate::new(p.into_op()).is_ok());
        let rho = random::gen_density(dim, &mut rng);
        prop_assert!(DensityPair::from_state(rho).is_ok());
    }
}

#[test]
fn suites_reproduce_across_execution_modes() {
    for suite in [Suite::Duality, Suite::Equivalence, Suite::Rewards, Suite::Hoare] {
        let seq = run_suite_with(suite, 30, 99, Exec::Sequential);
        let par = run_suite_with(suite, 30, 99, Exec::Parallel);
        assert!(seq.ok(), "{}", seq.table());
        assert_eq!((seq.passed, seq.failed, seq.skipped), (par.passed, par.failed, par.skipped), "{suite}");
        assert!((seq.max_deviation - par.max_deviation).abs() <= 1e-12, "{suite}");
        let again = run_suite_with(suite, 30, 99, Exec::Sequential);
        assert_eq!(seq.max_deviation, again.max_deviation, "{suite}");
    }
}

fn bundle_file(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("bundles").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn bundled_files_match_the_built_in_bundle() {
    assert_eq!(bundle_file("fdr.qwp"), FDR_SOURCE);
    let phi: Operator = serde_json::from_str(&bundle_file("fdr_phi.json")).unwrap();
    assert!(phi.approx_eq(fdr_phi().op(), 1e-15));
    for x in 0..8 {
        let bits = format!("{x:03b}");
        let pair: DensityPair = serde_json::from_str(&bundle_file(&format!("rho_{bits}.json"))).unwrap();
        assert!(pair.rho.approx_eq(&basis_state(&bits).unwrap(), 0.0), "{bits}");
        assert_eq!(pair.p, 0.0);
    }
    let id: Operator = serde_json::from_str(&bundle_file("identity_8.json")).unwrap();
    assert_eq!(id, Operator::identity(8));
    for name in ["xflip.qwp", "geometric.qwp"] {
        parse(&bundle_file(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn fdr_goldens_regenerate() {
    let checks = ExampleBundle::fdr().verify(&fdr_phi(), 1e-4).unwrap();
    assert_eq!(checks.len(), 8);
    for c in checks {
        assert!(c.ok, "{}: expected {:?}, got {:?}", c.input, c.expected, c.actual);
    }
}
