//! Random programs and the cross-semantics property suites.
//!
//! Each suite draws one program per trial from a seed derived from the run
//! seed and the trial index, so verdicts are reproducible and trials can run
//! in any order.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::compile::compile;
use crate::denot::{eval, eval_unfolding, EvalConfig, EvalResult, OnNonConvergence};
use crate::error::{Error, Result};
use crate::lang::{pretty, OpExpr, OpRef, Program, Stmt, VarDecl};
use crate::linalg::{cylinder_extend, gates, loewner_leq, DensityPair, Operator, Predicate, C64, EPS_ZERO};
use crate::opsem::{self, ExploreConfig};
use crate::par::{self, Exec};
use crate::random::{self, TestRng};
use crate::transformers::{self as tf, HoareMode, PredicatePair, TransformerConfig};

pub use crate::random::{gen_density, gen_partial_density, gen_predicate};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GenConfig {
    /// Number of Boolean variables is drawn from `1..=max_vars`.
    pub max_vars: usize,
    pub max_depth: usize,
    pub loop_probability: f64,
    pub observe_probability: f64,
    pub seed: u64,
    /// Allow measurements inside loop bodies.
    pub loop_body_branching: bool,
    /// Loops leave with probability at least ½ per iteration; otherwise guards
    /// and bodies are unconstrained and `diverge` may appear.
    pub draining_loops: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_vars: 3,
            max_depth: 5,
            loop_probability: 0.2,
            observe_probability: 0.3,
            seed: 0,
            loop_body_branching: false,
            draining_loops: true,
        }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64) -> Self {
        GenConfig { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.loop_probability) || !unit(self.observe_probability) {
            return Err(Error::InvalidInput("generator probabilities must lie in [0, 1]".into()));
        }
        if self.max_vars == 0 {
            return Err(Error::InvalidInput("max_vars must be positive".into()));
        }
        Ok(())
    }
}

/// Loops per generated program are capped to keep exploration trees small.
const MAX_LOOPS: usize = 2;

struct Gen<'a> {
    cfg: &'a GenConfig,
    rng: &'a mut TestRng,
    loops: usize,
}

pub fn gen_program(cfg: &GenConfig) -> Program {
    gen_program_with(cfg, &mut random::rng(cfg.seed))
}

pub fn gen_program_with(cfg: &GenConfig, rng: &mut TestRng) -> Program {
    let n = rng.random_range(1..=cfg.max_vars.max(1));
    let vars: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    let mut g = Gen { cfg, rng, loops: 0 };
    let parts = g.rng.random_range(2..=4);
    let depth = cfg.max_depth.saturating_sub(1);
    let body = Stmt::seq((0..parts).map(|_| g.stmt(depth, &vars, false)).collect());
    Program::new(vars.iter().map(VarDecl::bool).collect(), body)
}

/// A program whose body is a single loop.
pub fn gen_loop_program(cfg: &GenConfig, rng: &mut TestRng) -> Program {
    let n = rng.random_range(1..=cfg.max_vars.max(1));
    let vars: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    let mut g = Gen { cfg, rng, loops: 0 };
    let body = g.while_loop(cfg.max_depth.saturating_sub(1), &vars);
    Program::new(vars.iter().map(VarDecl::bool).collect(), body)
}

fn refs(vars: &[&String]) -> Vec<String> {
    vars.iter().map(|s| s.to_string()).collect()
}

fn names(vars: &[String]) -> Vec<&str> {
    vars.iter().map(String::as_str).collect()
}

impl Gen<'_> {
    fn pick<'v>(&mut self, vars: &'v [String], k: usize) -> Vec<&'v String> {
        rand::seq::index::sample(self.rng, vars.len(), k).into_iter().map(|i| &vars[i]).collect()
    }

    fn stmt(&mut self, depth: usize, vars: &[String], in_loop: bool) -> Stmt {
        if depth == 0 || vars.is_empty() {
            return self.atomic(vars);
        }
        if !in_loop && self.loops < MAX_LOOPS && self.rng.random_bool(self.cfg.loop_probability) {
            return self.while_loop(depth - 1, vars);
        }
        let branching = !in_loop || self.cfg.loop_body_branching;
        let r: f64 = self.rng.random();
        if r < 0.5 {
            self.atomic(vars)
        } else if r < 0.8 || !branching {
            let k = self.rng.random_range(2..=3);
            Stmt::seq((0..k).map(|_| self.stmt(depth - 1, vars, in_loop)).collect())
        } else {
            let q = refs(&self.pick(vars, 1));
            let p = Operator::projector(&random::pure_state(2, self.rng));
            let s1 = self.stmt(depth - 1, vars, in_loop);
            let s0 = self.stmt(depth - 1, vars, in_loop);
            Stmt::if_then_else(&names(&q), OpRef::literal(&Operator::identity(2) - &p), OpRef::literal(p), s1, s0)
        }
    }

    fn while_loop(&mut self, depth: usize, vars: &[String]) -> Stmt {
        self.loops += 1;
        let g = refs(&self.pick(vars, 1));
        if !self.cfg.draining_loops {
            let m1 = Operator::projector(&random::pure_state(2, self.rng));
            let body = self.stmt(depth, vars, true);
            return Stmt::while_loop(&names(&g), OpRef::literal(&Operator::identity(2) - &m1), OpRef::literal(m1), body);
        }
        // The body leaves the guard alone until a final unitary that maps the
        // continue state |v⟩ back onto itself with probability at most ½.
        let v = random::pure_state(2, self.rng);
        let m1 = Operator::projector(&v);
        let u = loop {
            let u = random::gen_unitary(2, self.rng);
            let amp: C64 = v.iter().zip(u.apply(&v)).map(|(a, b)| a.conj() * b).sum();
            if amp.norm_sqr() <= 0.5 {
                break u;
            }
        };
        let others: Vec<String> = vars.iter().filter(|x| **x != g[0]).cloned().collect();
        let mut parts = Vec::new();
        if !others.is_empty() && depth > 0 {
            parts.push(self.stmt(depth, &others, true));
        }
        parts.push(Stmt::unitary(&names(&g), OpRef::literal(u)));
        Stmt::while_loop(&names(&g), OpRef::literal(&Operator::identity(2) - &m1), OpRef::literal(m1), Stmt::seq(parts))
    }

    fn atomic(&mut self, vars: &[String]) -> Stmt {
        if vars.is_empty() {
            return Stmt::Skip;
        }
        if self.rng.random_bool(self.cfg.observe_probability) {
            let two = vars.len() >= 2 && self.rng.random_bool(0.4);
            let q = refs(&self.pick(vars, if two { 2 } else { 1 }));
            let op = if two {
                random::gen_projector(4, self.rng.random_range(1..=2), self.rng)
            } else {
                Operator::projector(&random::pure_state(2, self.rng))
            };
            return Stmt::observe(&names(&q), OpRef::literal(op));
        }
        let r: f64 = self.rng.random();
        if !self.cfg.draining_loops && r < 0.03 {
            return Stmt::Diverge;
        }
        let q = refs(&self.pick(vars, 1));
        match r {
            r if r < 0.08 => Stmt::Skip,
            r if r < 0.22 => Stmt::init(q[0].clone()),
            r if r < 0.42 => Stmt::unitary(&names(&q), OpRef::new(OpExpr::name("H"), gates::hadamard())),
            r if r < 0.55 => Stmt::unitary(&names(&q), OpRef::new(OpExpr::name("X"), gates::pauli_x())),
            r if r < 0.75 && vars.len() >= 2 => {
                let q = refs(&self.pick(vars, 2));
                Stmt::unitary(&names(&q), OpRef::new(OpExpr::name("CH"), gates::controlled_hadamard()))
            }
            _ => Stmt::unitary(&names(&q), OpRef::literal(random::gen_unitary(2, self.rng))),
        }
    }
}

/// Plain density-operator semantics of an observe-free program, built from
/// full-register matrices. Used as an independent reference.
pub fn reference_eval(p: &Program, rho: &Operator) -> Result<Operator> {
    let layout = p.layout();
    reference_stmt(p, &layout, &p.body, rho)
}

fn reference_stmt(p: &Program, layout: &crate::linalg::Layout, s: &Stmt, rho: &Operator) -> Result<Operator> {
    let full = |vars: &[String], op: &Operator| cylinder_extend(op, vars, layout);
    let conj = |a: &Operator, x: &Operator| &(a * x) * &a.adjoint();
    Ok(match s {
        Stmt::Skip => rho.clone(),
        Stmt::Diverge => Operator::zeros(rho.dim()),
        Stmt::Init { var, .. } => {
            let decl = p.decl(var).ok_or_else(|| Error::UnknownVariable(var.clone()))?;
            let d = decl.local_dim();
            let mut acc = Operator::zeros(rho.dim());
            for n in 0..d {
                let k = full(std::slice::from_ref(var), &Operator::ket_bra(decl.zero_index(), n, d))?;
                acc.add_assign(&conj(&k, rho));
            }
            acc
        }
        Stmt::Unitary { vars, op, .. } => conj(&full(vars, &op.op)?, rho),
        Stmt::Observe { .. } => return Err(Error::InvalidInput("reference evaluator is observe-free".into())),
        Stmt::Seq(parts) => {
            let mut acc = rho.clone();
            for s in parts {
                acc = reference_stmt(p, layout, s, &acc)?;
            }
            acc
        }
        Stmt::Measure { vars, branches, .. } => {
            let mut acc = Operator::zeros(rho.dim());
            for (m, b) in branches {
                acc.add_assign(&reference_stmt(p, layout, b, &conj(&full(vars, &m.op)?, rho))?);
            }
            acc
        }
        Stmt::While { vars, m0, m1, body, .. } => {
            let (m0, m1) = (full(vars, &m0.op)?, full(vars, &m1.op)?);
            let mut acc = Operator::zeros(rho.dim());
            let mut cur = rho.clone();
            for _ in 0..100_000 {
                acc.add_assign(&conj(&m0, &cur));
                let next = conj(&m1, &cur);
                if next.trace().re < 1e-15 {
                    break;
                }
                cur = reference_stmt(p, layout, body, &next)?;
            }
            acc
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Duality,
    AllClaims,
    Equivalence,
    Health,
    Rewards,
    Regression,
    Adversarial,
    Unfolding,
    Hoare,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Duality,
        Suite::AllClaims,
        Suite::Equivalence,
        Suite::Health,
        Suite::Rewards,
        Suite::Regression,
        Suite::Adversarial,
        Suite::Unfolding,
        Suite::Hoare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Duality => "duality",
            Suite::AllClaims => "allclaims",
            Suite::Equivalence => "equivalence",
            Suite::Health => "health",
            Suite::Rewards => "rewards",
            Suite::Regression => "regression",
            Suite::Adversarial => "adversarial",
            Suite::Unfolding => "unfolding",
            Suite::Hoare => "hoare",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialFailure {
    pub seed: u64,
    pub message: String,
    pub deviation: f64,
    pub source: String,
    pub input: Option<Operator>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    /// Checks that did not apply to a trial, such as ratios with a tiny
    /// denominator.
    pub skipped: usize,
    pub max_deviation: f64,
    pub failures: Vec<TrialFailure>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>7} {:>7} {:>7} {:>7} {:>12}\n",
            "suite", "trials", "passed", "failed", "skipped", "max dev"
        );
        out += &format!(
            "{:<12} {:>7} {:>7} {:>7} {:>7} {:>12.3e}\n",
            self.suite.name(),
            self.trials,
            self.passed,
            self.failed,
            self.skipped,
            self.max_deviation
        );
        for f in &self.failures {
            out += &format!("  seed {}: {} (deviation {:.3e})\n", f.seed, f.message, f.deviation);
        }
        out
    }
}

/// Tracks the worst deviation of a trial and its first failed check.
#[derive(Default)]
struct Checker {
    deviation: f64,
    failure: Option<String>,
    skipped: bool,
    input: Option<Operator>,
}

impl Checker {
    fn close(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let gap = (got - want).abs();
        self.deviation = self.deviation.max(gap);
        if !(gap <= tol) && self.failure.is_none() {
            self.failure = Some(format!("{label}: got {got}, expected {want} (tolerance {tol:e})"));
        }
    }

    fn gap(&mut self, label: &str, gap: f64, tol: f64) {
        self.close(label, gap, 0.0, tol);
    }

    fn holds(&mut self, label: &str, cond: bool) {
        if !cond && self.failure.is_none() {
            self.failure = Some(label.to_string());
        }
    }
}

const TOL: f64 = 1e-9;

fn eval_cfg() -> EvalConfig {
    EvalConfig {
        loop_eps: 1e-14,
        on_nonconvergence: OnNonConvergence::ReturnWithResidual,
        exec: Exec::Sequential,
        ..EvalConfig::default()
    }
}

fn tf_cfg() -> TransformerConfig {
    TransformerConfig { loop_eps: 1e-13, exec: Exec::Sequential, ..TransformerConfig::default() }
}

fn run(p: &Program, rho: &Operator, p_in: f64) -> Result<EvalResult> {
    eval(p, &DensityPair::new_unchecked(rho.clone(), p_in), &eval_cfg())
}

fn trace_dist(a: &Operator, b: &Operator) -> f64 {
    (a - b).hermitian_part().trace_norm_hermitian()
}

/// `P + √(I−P) R √(I−P)`, which lies between `P` and `I`.
fn above(p: &Operator, rng: &mut TestRng) -> Predicate {
    let dim = p.dim();
    let s = (&Operator::identity(dim) - p).psd_sqrt();
    let r = gen_predicate(dim, rng);
    let q = p + &(&(&s * r.op()) * &s);
    Predicate::new(q.hermitian_part()).expect("between P and I")
}

fn suite_config(suite: Suite, seed: u64) -> GenConfig {
    let base = GenConfig::with_seed(seed);
    match suite {
        Suite::Duality => GenConfig { loop_probability: 0.0, ..base },
        Suite::Regression => GenConfig { observe_probability: 0.0, loop_probability: 0.3, ..base },
        Suite::Adversarial | Suite::Unfolding => GenConfig { draining_loops: false, ..base },
        Suite::Equivalence | Suite::Rewards | Suite::AllClaims => GenConfig { loop_probability: 0.35, ..base },
        _ => base,
    }
}

fn trial(suite: Suite, seed: u64) -> (Checker, Program) {
    let cfg = suite_config(suite, seed);
    let mut rng = random::rng(seed);
    let prog = match suite {
        Suite::Unfolding => gen_loop_program(&cfg, &mut rng),
        _ => gen_program_with(&cfg, &mut rng),
    };
    let mut ck = Checker::default();
    let outcome = match suite {
        Suite::Duality => duality(&prog, &mut rng, &mut ck),
        Suite::AllClaims => allclaims(&prog, &mut rng, &mut ck),
        Suite::Equivalence => equivalence(&prog, &mut rng, &mut ck),
        Suite::Health => health(&prog, &mut rng, &mut ck),
        Suite::Rewards => rewards(&prog, &mut rng, &mut ck),
        Suite::Regression => regression(&prog, &mut rng, &mut ck),
        Suite::Adversarial => adversarial(&prog, &mut rng, &mut ck),
        Suite::Unfolding => unfolding(&prog, &mut rng, &mut ck),
        Suite::Hoare => hoare(&prog, &mut rng, &mut ck),
    };
    if let Err(e) = outcome {
        ck.holds(&format!("error: {e}"), false);
    }
    (ck, prog)
}

fn duality(p: &Program, rng: &mut TestRng, ck: &mut Checker) -> Result<()> {
    let dim = p.total_dim();
    let c = compile(p)?;
    for _ in 0..5 {
        let rho = gen_partial_density(dim, rng);
        let post = gen_predicate(dim, rng);
        ck.input = Some(rho.clone());
        let out = run(p, &rho, 0.0)?;
        let reached = post.expectation(&out.pair.rho);
        let wp = tf::qwp_compiled(&c, &post, &tf_cfg())?;
        ck.close("qwp duality", wp.expectation(&rho), reached, TOL);
        let wlp = tf::qwlp_compiled(&c, &post, &tf_cfg())?;
        let want = reached + rho.trace().re - out.pair.trace() - out.pair.p;
        ck.close("qwlp duality", wlp.expectation(&rho), want, TOL);
    }
    ck.input = None;
    Ok(())
}

fn allclaims(p: &Program, rng: &mut TestRng, ck: &mut Checker) -> Result<()> {
    let dim = p.total_dim();
    let rho = gen_partial_density(dim, rng);
    let t = rho.trace().re;
    let pa = (1.0 - t) * rng.random::<f64>() * 0.5;
    let pb = (1.0 - t) * rng.random::<f64>() * 0.5;
    ck.input = Some(rho.clone());
    let a = run(p, &rho, pa)?;
    let b = run(p, &rho, pb)?;
    let zero = run(p, &rho, 0.0)?;
    let sum = run(p, &rho, pa + pb)?;
    let slack = TOL + a.residual + b.residual;
    ck.gap("first component independent of p", a.pair.rho.max_abs_diff(&b.pair.rho), TOL);
    ck.holds("violation mass never decreases", a.pair.p >= pa - TOL);
    ck.close("violation offset additive", sum.pair.p, zero.pair.p + pa + pb, TOL);
    ck.holds("tilde-trace contracts", a.pair.tilde_trace() <= t + pa + TOL);
    ck.holds("trace-reducing", a.pair.trace() <= t + TOL);
    ck.holds("violation bounded", a.pair.p <= 1.0 - a.pair.trace() + slack);

    let r1 = gen_partial_density(dim, rng);
    let r2 = gen_partial_density(dim, rng);
    let x: f64 = rng.random();
    let y = (1.0 - x) * rng.random::<f64>();
    let mix = &r1.scale_real(x) + &r2.scale_real(y);
    let (o1, o2, om) = (run(p, &r1, 0.0)?, run(p, &r2, 0.0)?, run(p, &mix, 0.0)?);
    let lin = &o1.pair.rho.scale_real(x) + &o2.pair.rho.scale_real(y);
    let slack = TOL + o1.residual + o2.residual + om.residual;
    ck.gap("linear in the state", trace_dist(&om.pair.rho, &lin), slack);
    ck.close("violation linear in the state", om.pair.p, x * o1.pair.p + y * o2.pair.p, slack);
    ck.input = None;
    Ok(())
}

fn equivalence(p: &Program, rng: &mut TestRng, ck: &mut Checker) -> Result<()> {
    let dim = p.total_dim();
    let rho = gen_density(dim, rng);
    ck.input = Some(rho.clone());
    let den = run(p, &rho, 0.0)?;
    let ex = opsem::explore(p, &rho, &ExploreConfig { exec: Exec::Sequential, ..ExploreConfig::default() })?;
    let tol = 1e-6 + den.residual + ex.residual;
    let total = ex.terminal_prob() + ex.violation_prob + ex.diverged_prob + ex.residual;
    ck.close("exploration totals", total, 1.0, 1e-8);
    ck.gap("terminal mass vs ρ′", trace_dist(&ex.aggregate(dim), &den.pair.rho), tol);
    ck.close("violation vs p′", ex.violation_prob, den.pair.p, tol);
    ck.close("Pr(◇sink) vs tr(ρ′) + p′", ex.terminal_prob() + ex.violation_prob, den.pair.tilde_trace(), tol);
    Ok(())
}

fn health(p: &Program, rng: &mut TestRng, ck: &mut Checker) -> Result<()> {
    let dim = p.total_dim();
    let c = compile(p)?;
    let cfg = tf_cfg();
    let wp = |q: &Predicate| tf::qwp_compiled(&c, q, &cfg);
    let wlp = |q: &Predicate| tf::qwlp_compiled(&c, q, &cfg);
    let id = Predicate::identity(dim);
    let leq = |a: &Predicate, b: &Predicate| loewner_leq(a.op(), b.op(), TOL);

    ck.holds("qwp subunital", leq(&wp(&id)?, &id)?);
    ck.holds("qwlp subunital", leq(&wlp(&id)?, &id)?);

    let lo = gen_predicate(dim, rng);
    let hi = above(lo.op(), rng);
    ck.holds("qwp monotone", leq(&wp(&lo)?, &wp(&hi)?)?);
    ck.holds("qwlp monotone", leq(&wlp(&lo)?, &wlp(&hi)?)?);

    // (lo, hi2) ⊴ (hi, lo2) and (lo, lo2) ⊴̇ (hi, hi2)
    let lo2 = gen_predicate(dim, rng);
    let hi2 = above(lo2.op(), rng);
    let small = PredicatePair::new(lo.clone(), hi2.clone())?;
    let big = PredicatePair::new(hi.clone(), lo2.clone())?;
    let a = tf::qcwp_compiled(&c, &small, &cfg)?;
    let b = tf::qcwp_compiled(&c, &big, &cfg)?;
    ck.holds("qcwp monotone under ⊴", a.precedes(&b, TOL)?);
    let small = PredicatePair::new(lo.clone(), lo2)?;
    let big = PredicatePair::new(hi, hi2)?;
    let a = tf::qcwlp_compiled(&c, &small, &cfg)?;
    let b = tf::qcwlp_compiled(&c, &big, &cfg)?;
    ck.holds("qcwlp monotone under ⊴̇", a.precedes_pointwise(&b, TOL)?);

    let p1 = gen_predicate(dim, rng);
    let p2 = gen_predicate(dim, rng);
    let x: f64 = rng.random();
    let y = (1.0 - x) * rng.random::<f64>();
    let mix = Predicate::new((&p1.op().scale_real(x) + &p2.op().scale_real(y)).hermitian_part())?;
    let rho = gen_partial_density(dim, rng);
    ck.input = Some(rho.clone());
    let e = |q: &Predicate| q.expectation(&rho);
    let (w1, w2, wm) = (wp(&p1)?, wp(&p2)?, wp(&mix)?);
    ck.close("qwp linear", e(&wm), x * e(&w1) + y * e(&w2), TOL);
    let z = wlp(&Predicate::zero(dim))?;
    let (l1, l2, lm) = (wlp(&p1)?, wlp(&p2)?, wlp(&mix)?);
    ck.close("qwlp affine", e(&lm) - e(&z), x * (e(&l1) - e(&z)) + y * (e(&l2) - e(&z)), TOL);

    let state = gen_density(dim, rng);
    let ratio = |q: &Predicate| -> Result<Option<f64>> {
        Ok(tf::hat_tr(&tf::qcwp_compiled(&c, &PredicatePair::new(q.clone(), id.clone())?, &cfg)?, &state))
    };
    match (ratio(&mix)?, ratio(&p1)?, ratio(&p2)?) {
        (Some(m), Some(r1), Some(r2)) => ck.close("qcwp linear interpretation", m, x * r1 + y * r2, TOL),
        (None, None, None) => {}
        _ => ck.holds("qcwp ratios defined together", false),
    }

    let pair = PredicatePair::new(p1, p2)?;
    let direct = tf::qcwp_compiled(&c, &pair, &cfg)?;
    let paired = tf::qcwp_paired_compiled(&c, &pair, &cfg)?;
    ck.gap("paired recursion, first", direct.first.op().max_abs_diff(paired.first.op()), TOL);
    ck.gap("paired recursion, second", direct.second.op().max_abs_diff(paired.second.op()), TOL);
    Ok(())
}

/// Denominators below this are only checked for agreement on undefinedness.
pub const REWARD_MIN_DENOMINATOR: f64 = 1e-3;

fn rewards(p: &Program, rng: &mut TestRng, ck: &mut Checker) -> Result<()> {
    let dim = p.total_dim();
    let c = compile(p)?;
    let cfg = tf_cfg();
    let rho = gen_density(dim, rng);
    let post = gen_predicate(dim, rng);
    ck.input = Some(rho.clone());
    let ex = opsem::explore_compiled(&c, &rho, &ExploreConfig { exec: Exec::Sequential, ..ExploreConfig::default() })?;
    let tol = 1e-6 + ex.residual;
    let id = Predicate::identity(dim);
    let not_violated = tf::qwlp_compiled(&c, &id, &cfg)?.expectation(&rho);
    ck.close("Pr(¬◇↯) = tr(qwlp(I)ρ)", ex.not_violated_prob(), not_violated, tol);
    let (er, _) = opsem::reward_of(&ex, &post, false);
    ck.close("ER = tr(qwp(P)ρ)", er, tf::qwp_compiled(&c, &post, &cfg)?.expectation(&rho), tol);
    let (ler, _) = opsem::reward_of(&ex, &post, true);
    ck.close("LER = tr(qwlp(P)ρ)", ler, tf::qwlp_compiled(&c, &post, &cfg)?.expectation(&rho), tol);

    let pair = PredicatePair::new(post.clone(), id)?;
    for liberal in [false, true] {
        let exact = if liberal { tf::qcwlp_compiled(&c, &pair, &cfg)? } else { tf::qcwp_compiled(&c, &pair, &cfg)? };
        let want = tf::hat_tr(&exact, &rho);
        let got = opsem::conditional_reward_of(&ex, &post, liberal);
        if not_violated > REWARD_MIN_DENOMINATOR {
            match (got, want) {
                (Some(g), Some(w)) => {
                    ck.close("C(L)ER = hat-tr", g, w, 2e-6 / not_violated + ex.residual / not_violated)
                }
                _ => ck.holds("conditional reward defined", false),
            }
        } else if not_violated <= EPS_ZERO {
            ck.holds("undefined on both sides", got.is_none() && want.is_none());
        } else {
            ck.skipped = true;
        }
    }
    Ok(())
}

fn regression(p: &Program, rng: &mut TestRng, ck: &mut Checker) -> Result<()> {
    let dim = p.total_dim();
    let rho = gen_partial_density(dim, rng);
    ck.input = Some(rho.clone());
    let out = run(p, &rho, 0.0)?;
    ck.holds("observe-free program has p′ = 0 exactly", out.pair.p == 0.0);
    let reference = reference_eval(p, &rho)?;
    ck.gap("matches plain density semantics", trace_dist(&out.pair.rho, &reference), TOL + out.residual);
    let wlp = tf::qwlp(p, &Predicate::identity(dim), &tf_cfg())?;
    ck.gap("qwlp(S, I) = I", wlp.op().max_abs_diff(&Operator::identity(dim)), TOL);
    let state = gen_density(dim, rng);
    let post = gen_predicate(dim, rng);
    let pair = PredicatePair::new(post.clone(), Predicate::identity(dim))?;
    let cw = tf::hat_tr(&tf::qcwp(p, &pair, &tf_cfg())?, &state).unwrap_or(f64::NAN);
    ck.close("hat-tr(qcwp) = tr(qwp)", cw, tf::qwp(p, &post, &tf_cfg())?.expectation(&state), TOL);
    Ok(())
}

fn adversarial(p: &Program, rng: &mut TestRng, ck: &mut Checker) -> Result<()> {
    let dim = p.total_dim();
    let rho = gen_density(dim, rng);
    ck.input = Some(rho.clone());
    let cfg = EvalConfig { max_unfoldings: 5_000, ..eval_cfg() };
    let den = eval(p, &DensityPair::new_unchecked(rho.clone(), 0.0), &cfg)?;
    let ex = opsem::explore(p, &rho, &ExploreConfig { depth_cap: 3_000, max_frontier: 1 << 12, exec: Exec::Sequential, ..ExploreConfig::default() })?;
    ck.holds("tr(ρ′) + p′ ≤ 1", den.pair.tilde_trace() <= 1.0 + TOL);
    let total = ex.terminal_prob() + ex.violation_prob + ex.diverged_prob + ex.residual;
    ck.close("exploration totals", total, 1.0, 1e-8);
    let tol = 1e-6 + den.residual + ex.residual;
    ck.close("terminal mass brackets overlap", ex.terminal_prob(), den.pair.trace(), tol);
    ck.close("violation brackets overlap", ex.violation_prob, den.pair.p, tol);
    Ok(())
}

fn unfolding(p: &Program, rng: &mut TestRng, ck: &mut Checker) -> Result<()> {
    let dim = p.total_dim();
    let rho = gen_partial_density(dim, rng);
    ck.input = Some(rho.clone());
    let input = DensityPair::new_unchecked(rho.clone(), 0.0);
    let cfg = EvalConfig { max_unfoldings: 5_000, ..eval_cfg() };
    let lub = eval(p, &input, &cfg)?;
    let mut prev = DensityPair::new_unchecked(Operator::zeros(dim), 0.0);
    for n in 0..8 {
        let cur = eval_unfolding(p, &p.body, n, &input)?;
        ck.holds(&format!("unfolding {n} below unfolding {}", n + 1), loewner_leq(&prev.rho, &cur.rho, TOL)? && prev.p <= cur.p + TOL);
        let tol = TOL + lub.residual;
        ck.holds(&format!("unfolding {n} below the limit"), loewner_leq(&cur.rho, &lub.pair.rho, tol)? && cur.p <= lub.pair.p + tol);
        prev = cur;
    }
    Ok(())
}

fn hoare(p: &Program, rng: &mut TestRng, ck: &mut Checker) -> Result<()> {
    let dim = p.total_dim();
    let post = gen_predicate(dim, rng);
    let seed = rng.random();
    let wp = tf::qwp(p, &post, &tf_cfg())?;
    let wlp = tf::qwlp(p, &post, &tf_cfg())?;
    let zero = Predicate::zero(dim);
    ck.holds("{0} S {Q} holds", tf::check_hoare(&zero, p, &post, HoareMode::Total, 5, seed)?.holds());
    ck.holds("{qwp} S {Q} holds (total)", tf::check_hoare(&wp, p, &post, HoareMode::Total, 5, seed)?.holds());
    ck.holds("{qwlp} S {Q} holds (partial)", tf::check_hoare(&wlp, p, &post, HoareMode::Partial, 5, seed)?.holds());
    ck.holds("exact total check of qwp", tf::check_hoare_exact(&wp, p, &post, HoareMode::Total, &tf_cfg())?);
    ck.holds("exact partial check of qwlp", tf::check_hoare_exact(&wlp, p, &post, HoareMode::Partial, &tf_cfg())?);
    Ok(())
}

pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> SuiteReport {
    run_suite_with(suite, trials, seed, Exec::default())
}

pub fn run_suite_with(suite: Suite, trials: usize, seed: u64, exec: Exec) -> SuiteReport {
    let results = par::map_range(exec, trials, |i| {
        let s = random::derive_seed(seed, i as u64);
        let (ck, prog) = trial(suite, s);
        (s, ck, prog)
    });
    let mut report = SuiteReport {
        suite,
        seed,
        trials,
        passed: 0,
        failed: 0,
        skipped: 0,
        max_deviation: 0.0,
        failures: Vec::new(),
    };
    for (s, ck, prog) in results {
        report.max_deviation = report.max_deviation.max(ck.deviation);
        report.skipped += usize::from(ck.skipped);
        match ck.failure {
            None => report.passed += 1,
            Some(message) => {
                report.failed += 1;
                report.failures.push(TrialFailure {
                    seed: s,
                    message,
                    deviation: ck.deviation,
                    source: pretty(&prog),
                    input: ck.input,
                });
            }
        }
    }
    report
}

/// Writes each failure as `<suite>-<seed>.qwp` plus a JSON file with the
/// message and input state.
pub fn write_repro_bundles(report: &SuiteReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |e: std::io::Error| Error::InvalidInput(format!("cannot write repro bundle: {e}"));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut written = Vec::new();
    for f in &report.failures {
        let stem = format!("{}-{}", report.suite.name(), f.seed);
        let src = dir.join(format!("{stem}.qwp"));
        std::fs::write(&src, &f.source).map_err(io)?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, serde_json::to_string_pretty(f)?).map_err(io)?;
        written.extend([src, json]);
    }
    Ok(written)
}
