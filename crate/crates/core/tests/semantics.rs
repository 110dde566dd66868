//! Worked examples for each layer, checked against values computed by hand
//! or by small independent oracles.

use num_complex::Complex64 as C;
use qcwp::bundles::{basis_state, fdr_phi, fdr_program};
use qcwp::denot::{eval, eval_unfolding, EvalConfig};
use qcwp::lang::{self, builtin_gate, parse, Stmt};
use qcwp::linalg::gates::{cz, hadamard, pauli_x};
use qcwp::linalg::{cylinder_extend, loewner_leq, DensityPair, Factor, Layout, Operator, Predicate};
use qcwp::opsem::{self, Configuration, ExploreConfig};
use qcwp::propcheck::{gen_loop_program, gen_program, GenConfig};
use qcwp::random::{self, gen_density, gen_partial_density, gen_predicate};
use qcwp::transformers::{self as tf, HoareMode, PredicatePair, TransformerConfig, Verdict};
use qcwp::Error;

const TOL: f64 = 1e-10;

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

fn pair(rho: Operator, p: f64) -> DensityPair {
    DensityPair::new(rho, p).unwrap()
}

fn plus() -> Operator {
    Operator::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap()
}

fn pred(op: Operator) -> Predicate {
    Predicate::new(op).unwrap()
}

fn first_loop(s: &Stmt) -> Option<&Stmt> {
    match s {
        Stmt::While { .. } => Some(s),
        Stmt::Seq(parts) => parts.iter().find_map(first_loop),
        Stmt::Measure { branches, .. } => branches.iter().find_map(|(_, b)| first_loop(b)),
        _ => None,
    }
}

const XFLIP: &str = "bool q; while {P0, P1}[q] = 1 do { q := X q }";

// Operators

#[test]
fn adjoint_of_hadamard_matches_entrywise_conjugate_transpose() {
    let h = hadamard();
    let adj = h.adjoint();
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(adj.get(i, j), h.get(j, i).conj());
        }
    }
    assert!(adj.approx_eq(&h, 0.0));
    let flip = Operator::ket_bra(0, 1, 2).adjoint();
    assert_eq!(flip, Operator::ket_bra(1, 0, 2));
}

#[test]
fn kron_of_projector_and_x_on_01() {
    let k = Operator::ket_bra(0, 0, 2).kron(&pauli_x()).unwrap();
    let ket01 = [c(0.0), c(1.0), c(0.0), c(0.0)];
    assert_eq!(k.apply(&ket01), vec![c(1.0), c(0.0), c(0.0), c(0.0)]);
}

#[test]
fn trace_examples() {
    assert_eq!(Operator::identity(4).trace(), c(4.0));
    assert!((plus().trace() - c(1.0)).norm() < TOL);
    let mut rng = random::rng(5);
    let a = random::ginibre(3, &mut rng);
    let b = random::ginibre(3, &mut rng);
    let ab = a.checked_mul(&b).unwrap().trace();
    let ba = b.checked_mul(&a).unwrap().trace();
    assert!((ab - ba).norm() < 1e-12);
}

#[test]
fn loewner_order_agrees_with_trace_sampling() {
    let mut rng = random::rng(17);
    let mut agreements = 0;
    for _ in 0..20 {
        let p = gen_predicate(4, &mut rng);
        let q = gen_predicate(4, &mut rng);
        // Also exercise a comparable pair.
        let half = Predicate::new(p.op().scale_real(0.5)).unwrap();
        for (a, b) in [(&p, &q), (&half, &p)] {
            let exact = loewner_leq(a.op(), b.op(), 1e-9).unwrap();
            let sampled = (0..1000).all(|_| {
                let rho = gen_density(4, &mut rng);
                a.expectation(&rho) <= b.expectation(&rho) + 1e-9
            });
            // Sampling can miss a violation, never invent one.
            if sampled == exact {
                agreements += 1;
            } else {
                assert!(sampled && !exact);
            }
        }
    }
    assert!(agreements >= 30, "only {agreements} of 40 agree");
    assert!(loewner_leq(&Operator::zeros(2), &Operator::identity(2), 0.0).unwrap());
    assert!(!loewner_leq(&Operator::identity(2), &Operator::identity(2).scale_real(0.5), 0.0).unwrap());
}

#[test]
fn cylinder_extension_matches_permutation_oracle() {
    let layout = Layout::new(vec![Factor::new("q", 2), Factor::new("p", 2), Factor::new("r", 2)]);
    let ext = cylinder_extend(&cz(), &["q", "r"], &layout).unwrap();
    let gate = cz();
    let bits = |i: usize| ((i >> 2) & 1, (i >> 1) & 1, i & 1);
    for i in 0..8 {
        for j in 0..8 {
            let ((qi, pi, ri), (qj, pj, rj)) = (bits(i), bits(j));
            let expected = if pi == pj { gate.get(2 * qi + ri, 2 * qj + rj) } else { c(0.0) };
            assert_eq!(ext.get(i, j), expected, "entry ({i}, {j})");
        }
    }
    let solo = Layout::new(vec![Factor::new("q", 2)]);
    assert!(cylinder_extend(&pauli_x(), &["q"], &solo).unwrap().approx_eq(&pauli_x(), 0.0));
    assert!(matches!(
        cylinder_extend(&pauli_x(), &["w"], &solo),
        Err(Error::UnknownVariable(_))
    ));
}

#[test]
fn normalize_div_rejects_tiny_scalars() {
    assert!(matches!(plus().normalize_div(1e-13), Err(Error::DivisionByNearZero(_))));
    assert!(plus().normalize_div(0.5).unwrap().approx_eq(&plus().scale_real(2.0), TOL));
}

// Language

#[test]
fn skip_parses_to_skip() {
    assert_eq!(parse("skip").unwrap().body, Stmt::Skip);
}

#[test]
fn fdr_parses_to_three_unitaries_and_an_observe() {
    let p = fdr_program();
    let Stmt::Seq(parts) = &p.body else { panic!("not a sequence: {:?}", p.body) };
    let kinds: Vec<&str> = parts
        .iter()
        .map(|s| match s {
            Stmt::Unitary { .. } => "unitary",
            Stmt::Observe { .. } => "observe",
            _ => "other",
        })
        .collect();
    assert_eq!(kinds, ["unitary", "unitary", "observe", "unitary"]);
}

#[test]
fn loop_with_zero_exit_behaves_as_diverge() {
    let p = parse("bool q; while {0 * I2, I2}[q] = 1 do { skip }").unwrap();
    assert!(matches!(p.body, Stmt::While { .. }));
    let out = eval(&p, &pair(plus().scale_real(0.5), 0.25), &EvalConfig::default()).unwrap();
    assert!(out.pair.rho.approx_eq(&Operator::zeros(2), TOL));
    assert_eq!(out.pair.p, 0.25);
}

#[test]
fn typecheck_accepts_and_rejects() {
    assert!(parse("bool q; q := H q").is_ok());
    let err = parse("bool q; observe(q, [[0, 1], [0, 0]])").unwrap_err();
    assert!(err.to_string().contains("projector"), "{err}");
    let err = parse("bool q; measure [q] { 0.5 * I2 => { skip }, 0.5 * I2 => { skip } }").unwrap_err();
    assert!(err.to_string().contains("not complete"), "{err}");
    assert!(parse("bool q; measure [q] { P0 => { skip }, P1 => { q := X q } }").is_ok());
}

#[test]
fn builtin_gates() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r0 = Operator::from_real_rows(&[&[s, -s], &[s, s]]).unwrap();
    assert!(builtin_gate("R", &[0.0]).unwrap().approx_eq(&r0, 1e-15));
    let h = builtin_gate("H", &[]).unwrap();
    assert!(h.checked_mul(&h).unwrap().approx_eq(&Operator::identity(2), 1e-15));
    let ch = builtin_gate("CH", &[]).unwrap();
    let out = ch.apply(&[c(0.0), c(0.0), c(0.0), c(1.0)]);
    let expected = [c(0.0), c(0.0), c(s), c(-s)];
    for (a, b) in out.iter().zip(expected) {
        assert!((a - b).norm() < 1e-15);
    }
}

#[test]
fn uninterpreted_register_for_ch_is_rejected_with_hint() {
    let err = parse("bool z, y; z y := CH").unwrap_err().to_string();
    assert!(err.contains("z y := ... z y"), "{err}");
}

// Forward semantics

#[test]
fn eval_skip_and_observe() {
    let input = pair(plus(), 0.0);
    let out = eval(&parse("bool q; skip").unwrap(), &input, &EvalConfig::default()).unwrap();
    assert_eq!(out.pair, input);
    assert_eq!(out.residual, 0.0);

    let out = eval(&parse("bool q; observe(q, P0)").unwrap(), &input, &EvalConfig::default()).unwrap();
    assert!(out.pair.rho.approx_eq(&Operator::ket_bra(0, 0, 2).scale_real(0.5), TOL));
    assert!((out.pair.p - 0.5).abs() < TOL);
}

#[test]
fn eval_fdr_from_000() {
    let out = eval(&fdr_program(), &pair(basis_state("000").unwrap(), 0.0), &EvalConfig::default()).unwrap();
    assert!((out.pair.trace() - 0.75).abs() < TOL);
    assert!((out.pair.p - 0.25).abs() < TOL);
}

#[test]
fn xflip_loop_terminates_in_zero_after_two_unfoldings() {
    let p = parse(XFLIP).unwrap();
    let one = Operator::ket_bra(1, 1, 2);
    let out = eval(&p, &pair(one.clone(), 0.0), &EvalConfig::default()).unwrap();
    assert!(out.pair.rho.approx_eq(&Operator::ket_bra(0, 0, 2), TOL));
    assert_eq!(out.pair.p, 0.0);
    assert_eq!(out.unfoldings_used, 2);

    let input = pair(one, 0.0);
    let zeroth = eval_unfolding(&p, &p.body, 0, &input).unwrap();
    assert!(zeroth.rho.approx_eq(&Operator::zeros(2), 0.0));
    let first = eval_unfolding(&p, &p.body, 1, &input).unwrap();
    assert!(first.rho.approx_eq(&Operator::zeros(2), TOL));
    assert_eq!(first.p, 0.0);
    let second = eval_unfolding(&p, &p.body, 2, &input).unwrap();
    assert!(second.rho.approx_eq(&Operator::ket_bra(0, 0, 2), TOL));
}

#[test]
fn unfoldings_increase_on_random_loops() {
    let cfg = GenConfig::default();
    let mut rng = random::rng(23);
    for trial in 0..100 {
        let p = gen_loop_program(&cfg, &mut rng);
        let w = first_loop(&p.body).expect("generated loop").clone();
        let input = pair(gen_density(p.total_dim(), &mut rng), 0.0);
        let mut prev = eval_unfolding(&p, &w, 0, &input).unwrap();
        for n in 1..4 {
            let next = eval_unfolding(&p, &w, n, &input).unwrap();
            assert!(loewner_leq(&prev.rho, &next.rho, 1e-9).unwrap(), "trial {trial}, n {n}");
            assert!(prev.p <= next.p + 1e-12, "trial {trial}, n {n}");
            prev = next;
        }
    }
}

// Operational semantics

#[test]
fn single_steps() {
    let skip = qcwp::compile::compile(&parse("bool q; skip").unwrap()).unwrap();
    let next = Configuration::initial(&skip, plus()).step();
    assert_eq!(next.len(), 1);
    assert_eq!(next[0].prob, 1.0);
    assert!(matches!(&next[0].target, Configuration::Terminated(s) if s.approx_eq(&plus(), TOL)));

    let obs = qcwp::compile::compile(&parse("bool q; observe(q, P0)").unwrap()).unwrap();
    let next = Configuration::initial(&obs, plus()).step();
    assert_eq!(next.len(), 2);
    let kept = next.iter().find(|t| matches!(t.target, Configuration::Terminated(_))).unwrap();
    let lost = next.iter().find(|t| matches!(t.target, Configuration::Violated)).unwrap();
    assert!((kept.prob - 0.5).abs() < TOL && (lost.prob - 0.5).abs() < TOL);
    let Configuration::Terminated(s) = &kept.target else { unreachable!() };
    assert!(s.approx_eq(&Operator::ket_bra(0, 0, 2), TOL));
    assert!(matches!(lost.target.step()[0].target, Configuration::Sink));
}

#[test]
fn fdr_observe_step_keeps_three_quarters() {
    let c = qcwp::compile::compile(&fdr_program()).unwrap();
    let mut conf = Configuration::initial(&c, basis_state("000").unwrap());
    for _ in 0..2 {
        let next = conf.step();
        assert_eq!(next.len(), 1);
        conf = next.into_iter().next().unwrap().target;
    }
    let next = conf.step();
    let kept: f64 = next.iter().filter(|t| !matches!(t.target, Configuration::Violated)).map(|t| t.prob).sum();
    assert!((kept - 0.75).abs() < TOL);
}

#[test]
fn explore_examples() {
    let skip = parse("bool q; skip").unwrap();
    let r = opsem::explore(&skip, &plus(), &ExploreConfig::default()).unwrap();
    assert_eq!(r.terminal_mass.len(), 1);
    assert!(r.terminal_mass[0].0.approx_eq(&plus(), TOL));
    assert_eq!((r.violation_prob, r.residual), (0.0, 0.0));

    let r = opsem::explore(&fdr_program(), &basis_state("000").unwrap(), &ExploreConfig::default()).unwrap();
    assert!((r.violation_prob - 0.25).abs() < TOL);
}

#[test]
fn rewards() {
    let post = pred(Operator::ket_bra(0, 0, 2));
    let skip = parse("bool q; skip").unwrap();
    let (v, bound) = opsem::expected_reward(&skip, &plus(), &post, false, &ExploreConfig::default()).unwrap();
    assert!((v - 0.5).abs() < TOL && bound == 0.0);

    let diverge = parse("bool q; diverge").unwrap();
    let (v, _) = opsem::expected_reward(&diverge, &plus(), &post, true, &ExploreConfig::with_depth(50)).unwrap();
    assert!((v - 1.0).abs() < TOL);
    let (v, _) = opsem::expected_reward(&diverge, &plus(), &post, false, &ExploreConfig::with_depth(50)).unwrap();
    assert_eq!(v, 0.0);

    let rho = basis_state("000").unwrap();
    let (v, _) = opsem::expected_reward(&fdr_program(), &rho, &fdr_phi(), false, &ExploreConfig::default()).unwrap();
    assert!((v - 0.75).abs() < TOL);
}

#[test]
fn conditional_rewards() {
    let cfg = ExploreConfig::default();
    let cer = |bits| opsem::conditional_expected_reward(&fdr_program(), &basis_state(bits).unwrap(), &fdr_phi(), false, &cfg);
    assert!((cer("000").unwrap().unwrap() - 1.0).abs() < TOL);
    assert!((cer("010").unwrap().unwrap() - 1.0 / 9.0).abs() < TOL);

    let p = parse("bool q; observe(q, P1)").unwrap();
    let zero = Operator::ket_bra(0, 0, 2);
    let r = opsem::conditional_expected_reward(&p, &zero, &Predicate::identity(2), false, &cfg).unwrap();
    assert_eq!(r, None);
}

#[test]
fn subnormalized_initial_states_are_rejected() {
    let p = parse("bool q; skip").unwrap();
    assert!(opsem::explore(&p, &plus().scale_real(0.5), &ExploreConfig::default()).is_err());
}

// Predicate transformers

#[test]
fn wp_examples() {
    let cfg = TransformerConfig::default();
    let post = pred(plus());
    let skip = parse("bool q; skip").unwrap();
    assert!(tf::qwp(&skip, &post, &cfg).unwrap().op().approx_eq(&plus(), TOL));

    let xflip = parse(XFLIP).unwrap();
    let wp = tf::qwp(&xflip, &pred(Operator::ket_bra(0, 0, 2)), &cfg).unwrap();
    assert!(wp.op().approx_eq(&Operator::identity(2), 1e-9));

    let diverge = parse("bool q; diverge").unwrap();
    assert!(tf::qwlp(&diverge, &post, &cfg).unwrap().op().approx_eq(&Operator::identity(2), TOL));
    assert!(tf::qwp(&diverge, &post, &cfg).unwrap().op().approx_eq(&Operator::zeros(2), TOL));
}

#[test]
fn conditional_transformer_examples() {
    let cfg = TransformerConfig::default();
    let pp = PredicatePair::new(pred(plus()), pred(Operator::ket_bra(1, 1, 2))).unwrap();
    let skip = parse("bool q; skip").unwrap();
    assert_eq!(tf::qcwp(&skip, &pp, &cfg).unwrap(), pp);
    assert_eq!(tf::qcwlp(&skip, &pp, &cfg).unwrap(), pp);

    let diverge = parse("bool q; diverge").unwrap();
    let out = tf::qcwlp(&diverge, &PredicatePair::bottom(2), &cfg).unwrap();
    assert!(out.first.op().approx_eq(&Operator::identity(2), TOL));
    assert!(out.second.op().approx_eq(&Operator::identity(2), TOL));

    let fdr = fdr_program();
    let phi_pair = PredicatePair::new(fdr_phi(), Predicate::identity(8)).unwrap();
    let cwp = tf::qcwp(&fdr, &phi_pair, &cfg).unwrap();
    let cwlp = tf::qcwlp(&fdr, &phi_pair, &cfg).unwrap();
    assert!(cwp.second.op().approx_eq(cwlp.second.op(), 1e-12));
    assert!((tf::hat_tr(&cwp, &basis_state("010").unwrap()).unwrap() - 1.0 / 9.0).abs() < TOL);
    assert!((tf::hat_tr(&cwp, &basis_state("000").unwrap()).unwrap() - 1.0).abs() < TOL);
}

#[test]
fn hat_tr_examples() {
    let mut rng = random::rng(31);
    let p = gen_predicate(2, &mut rng);
    let rho = gen_density(2, &mut rng);
    let with_identity = PredicatePair::new(p.clone(), Predicate::identity(2)).unwrap();
    assert!((tf::hat_tr(&with_identity, &rho).unwrap() - p.expectation(&rho)).abs() < 1e-12);
    let with_zero = PredicatePair::new(p, Predicate::zero(2)).unwrap();
    assert_eq!(tf::hat_tr(&with_zero, &rho), None);
}

#[test]
fn hoare_examples() {
    let mut rng = random::rng(41);
    let q = gen_predicate(4, &mut rng);
    let cfg = GenConfig { max_vars: 2, ..GenConfig::with_seed(41) };
    let s = gen_program(&cfg);
    let dim = s.total_dim();
    let q = if q.dim() == dim { q } else { gen_predicate(dim, &mut rng) };
    let v = tf::check_hoare(&Predicate::zero(dim), &s, &q, HoareMode::Total, 50, 1).unwrap();
    assert!(v.holds());

    let wp = tf::qwp(&s, &q, &TransformerConfig::default()).unwrap();
    assert!(tf::check_hoare(&wp, &s, &q, HoareMode::Total, 50, 2).unwrap().holds());
    assert!(tf::check_hoare_exact(&wp, &s, &q, HoareMode::Total, &TransformerConfig::default()).unwrap());

    let obs = parse("bool q; observe(q, P1)").unwrap();
    let id = Predicate::identity(2);
    match tf::check_hoare(&id, &obs, &id, HoareMode::Partial, 10, 3).unwrap() {
        Verdict::Refuted { witness, .. } => assert!(witness.approx_eq(&Operator::ket_bra(0, 0, 2), 0.0)),
        v => panic!("expected a refutation, got {v:?}"),
    }
    assert!(!tf::check_hoare_exact(&id, &obs, &id, HoareMode::Partial, &TransformerConfig::default()).unwrap());
}

#[test]
fn partial_densities_satisfy_invariants() {
    let mut rng = random::rng(3);
    for _ in 0..50 {
        let rho = gen_partial_density(4, &mut rng);
        assert!(rho.trace().re <= 1.0 + 1e-12);
        assert!(rho.min_eigenvalue() >= -1e-12);
    }
}

// Generator

fn collect_ops<'a>(s: &'a Stmt, unitaries: &mut Vec<&'a Operator>, families: &mut Vec<Vec<&'a Operator>>) {
    match s {
        Stmt::Unitary { op, .. } => unitaries.push(&op.op),
        Stmt::Seq(parts) => parts.iter().for_each(|p| collect_ops(p, unitaries, families)),
        Stmt::Measure { branches, .. } => {
            families.push(branches.iter().map(|(m, _)| &m.op).collect());
            branches.iter().for_each(|(_, b)| collect_ops(b, unitaries, families));
        }
        Stmt::While { m0, m1, body, .. } => {
            families.push(vec![&m0.op, &m1.op]);
            collect_ops(body, unitaries, families);
        }
        _ => {}
    }
}

#[test]
fn generated_programs_are_well_formed() {
    let mut unitaries_seen = 0;
    for seed in 0..1000 {
        let p = gen_program(&GenConfig::with_seed(seed));
        assert!(lang::typecheck(&p).is_empty(), "seed {seed}");
        let (mut us, mut fams) = (Vec::new(), Vec::new());
        collect_ops(&p.body, &mut us, &mut fams);
        for u in &us {
            assert!(u.is_unitary(1e-10), "seed {seed}");
        }
        for fam in &fams {
            let mut sum = Operator::zeros(fam[0].dim());
            for m in fam {
                sum.add_assign(&m.adjoint().checked_mul(m).unwrap());
            }
            assert!(sum.approx_eq(&Operator::identity(sum.dim()), 1e-10), "seed {seed}");
        }
        unitaries_seen += us.len();
    }
    assert!(unitaries_seen > 1000);
}

#[test]
fn generator_restrictions_and_determinism() {
    for seed in 0..200 {
        let cfg = GenConfig { loop_probability: 0.0, observe_probability: 0.0, ..GenConfig::with_seed(seed) };
        let p = gen_program(&cfg);
        assert!(!p.body.contains_loop() && !p.body.contains_observe(), "seed {seed}");
        assert_eq!(p, gen_program(&cfg));
    }
}
