//! Operational semantics as a Markov chain over configurations.
//!
//! Every statement takes one step; `↓; S` is identified with `S`. Paths are
//! explored as a weighted tree without merging states.

use rand::Rng;
use serde::Serialize;

use crate::compile::{compile, Compiled, Node};
use crate::error::{Error, Result};
use crate::lang::Program;
use crate::linalg::{Operator, Predicate, EPS_ZERO};
use crate::par::{self, Exec};
use crate::random;

pub const DEFAULT_DEPTH_CAP: usize = 10_000;

static SKIP: Node = Node::Skip;

#[derive(Clone, Debug)]
pub enum Configuration<'a> {
    /// `⟨S, σ⟩`; `cont` is the remaining program, next statement last.
    Running { cont: Vec<&'a Node>, sigma: Operator },
    /// `⟨↓, σ⟩`
    Terminated(Operator),
    /// `⟨↯⟩`
    Violated,
    Sink,
}

#[derive(Clone, Debug)]
pub struct Transition<'a> {
    pub target: Configuration<'a>,
    pub prob: f64,
}

impl<'a> Configuration<'a> {
    /// `⟨S, σ⟩` for the whole program.
    pub fn initial(c: &'a Compiled, sigma: Operator) -> Self {
        let mut cont = Vec::new();
        push(&mut cont, &c.root);
        Configuration::Running { cont, sigma }
    }

    /// Whether the next statement is `diverge`, whose only successor is itself.
    pub fn is_diverging(&self) -> bool {
        matches!(self, Configuration::Running { cont, .. } if matches!(cont.last(), Some(Node::Diverge)))
    }

    /// The successors of one step, omitting branches of probability at most
    /// `εzero`.
    pub fn step(&self) -> Vec<Transition<'a>> {
        let (cont, sigma) = match self {
            Configuration::Running { cont, sigma } => (cont, sigma),
            _ => return vec![Transition { target: Configuration::Sink, prob: 1.0 }],
        };
        let mut rest = cont.clone();
        let node = rest.pop().expect("running configurations are non-empty");
        let mut out = Vec::new();
        match node {
            Node::Skip => out.push(Transition { target: resume(rest, sigma.clone()), prob: 1.0 }),
            Node::Diverge => out.push(Transition { target: self.clone(), prob: 1.0 }),
            Node::Reset(kraus) => {
                let mut next = Operator::zeros(sigma.dim());
                for k in kraus {
                    next.add_assign(&k.conjugate(sigma));
                }
                let t = next.trace().re;
                out.push(Transition { target: resume(rest, next.scale_real(1.0 / t)), prob: 1.0 });
            }
            Node::Unitary(u) => out.push(Transition { target: resume(rest, u.conjugate(sigma)), prob: 1.0 }),
            Node::Observe(o) => {
                let kept = o.conjugate(sigma);
                let pr = kept.trace().re.clamp(0.0, 1.0);
                if pr > EPS_ZERO {
                    out.push(Transition { target: resume(rest, kept.scale_real(1.0 / pr)), prob: pr });
                }
                if 1.0 - pr > EPS_ZERO {
                    out.push(Transition { target: Configuration::Violated, prob: 1.0 - pr });
                }
            }
            Node::Measure { ops, branches } => {
                for (m, branch) in ops.iter().zip(branches) {
                    let post = m.conjugate(sigma);
                    let pr = post.trace().re;
                    if pr > EPS_ZERO {
                        let mut next = rest.clone();
                        push(&mut next, branch);
                        out.push(Transition { target: resume(next, post.scale_real(1.0 / pr)), prob: pr });
                    }
                }
            }
            Node::While { m0, m1, body } => {
                let exit = m0.conjugate(sigma);
                let pr = exit.trace().re;
                if pr > EPS_ZERO {
                    out.push(Transition { target: resume(rest.clone(), exit.scale_real(1.0 / pr)), prob: pr });
                }
                let again = m1.conjugate(sigma);
                let pr = again.trace().re;
                if pr > EPS_ZERO {
                    let mut next = rest;
                    next.push(node);
                    push(&mut next, body);
                    out.push(Transition { target: resume(next, again.scale_real(1.0 / pr)), prob: pr });
                }
            }
            Node::Seq(_) => unreachable!("sequences are flattened when pushed"),
        }
        out
    }
}

fn push<'a>(cont: &mut Vec<&'a Node>, node: &'a Node) {
    match node {
        Node::Seq(parts) if parts.is_empty() => cont.push(&SKIP),
        Node::Seq(parts) => parts.iter().rev().for_each(|s| push(cont, s)),
        _ => cont.push(node),
    }
}

fn resume(cont: Vec<&Node>, sigma: Operator) -> Configuration<'_> {
    if cont.is_empty() {
        Configuration::Terminated(sigma)
    } else {
        Configuration::Running { cont, sigma }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExploreConfig {
    /// Maximum number of steps along any path.
    pub depth_cap: usize,
    /// Frontier size beyond which the lightest paths are cut off.
    pub max_frontier: usize,
    /// Paths lighter than this are cut off.
    pub min_path_prob: f64,
    pub exec: Exec,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig { depth_cap: DEFAULT_DEPTH_CAP, max_frontier: 1 << 16, min_path_prob: 1e-15, exec: Exec::default() }
    }
}

impl ExploreConfig {
    pub fn with_depth(depth_cap: usize) -> Self {
        ExploreConfig { depth_cap, ..Self::default() }
    }
}

/// Reachability probabilities of the chain started in `⟨S, ρ₀⟩`.
///
/// `terminal + violation + diverged + residual = 1`, where `diverged` is the
/// mass that reached `diverge` and `residual` the mass of paths cut off by the
/// depth cap, the frontier budget or pruning.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExplorationResult {
    pub terminal_mass: Vec<(Operator, f64)>,
    pub violation_prob: f64,
    pub diverged_prob: f64,
    pub residual: f64,
    pub depth_used: usize,
}

impl ExplorationResult {
    /// `Σ Pr(◇⟨↓, σ⟩) σ`.
    pub fn aggregate(&self, dim: usize) -> Operator {
        let mut acc = Operator::zeros(dim);
        for (sigma, p) in &self.terminal_mass {
            acc.add_scaled(*p, sigma);
        }
        acc
    }

    pub fn terminal_prob(&self) -> f64 {
        self.terminal_mass.iter().map(|(_, p)| p).sum()
    }

    /// `Pr(¬◇⟨↯⟩)`.
    pub fn not_violated_prob(&self) -> f64 {
        1.0 - self.violation_prob
    }

    /// `ER`: expected `tr(Pσ)` over terminal configurations.
    pub fn reward(&self, post: &Predicate) -> f64 {
        self.terminal_mass.iter().map(|(sigma, p)| p * post.expectation(sigma)).sum()
    }
}

fn check_input(c: &Compiled, rho0: &Operator) -> Result<()> {
    if rho0.dim() != c.dim() {
        return Err(Error::DimensionMismatch { expected: c.dim(), found: rho0.dim() });
    }
    let t = rho0.trace().re;
    if (t - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDensity(format!("operational semantics needs trace 1, found {t}")));
    }
    if !rho0.is_hermitian(1e-9) || !rho0.psd_within(1e-9) {
        return Err(Error::InvalidDensity("initial state is not positive semidefinite".into()));
    }
    Ok(())
}

pub fn explore(p: &Program, rho0: &Operator, cfg: &ExploreConfig) -> Result<ExplorationResult> {
    explore_compiled(&compile(p)?, rho0, cfg)
}

pub fn explore_compiled(c: &Compiled, rho0: &Operator, cfg: &ExploreConfig) -> Result<ExplorationResult> {
    check_input(c, rho0)?;
    let mut res = ExplorationResult {
        terminal_mass: Vec::new(),
        violation_prob: 0.0,
        diverged_prob: 0.0,
        residual: 0.0,
        depth_used: 0,
    };
    let mut frontier = vec![(Configuration::initial(c, rho0.clone()), 1.0)];
    while !frontier.is_empty() {
        frontier.retain(|(conf, w)| {
            if conf.is_diverging() {
                res.diverged_prob += w;
                false
            } else {
                true
            }
        });
        if frontier.is_empty() {
            break;
        }
        if res.depth_used >= cfg.depth_cap {
            res.residual += frontier.iter().map(|(_, w)| w).sum::<f64>();
            break;
        }
        res.depth_used += 1;
        let exec = if frontier.len() >= 32 { cfg.exec } else { Exec::Sequential };
        let expanded = par::map_slice(exec, &frontier, |(conf, w)| (conf.step(), *w));
        let mut next = Vec::new();
        for (succ, w) in expanded {
            let mut kept = 0.0;
            for t in succ {
                let mass = w * t.prob;
                kept += t.prob;
                match t.target {
                    Configuration::Terminated(sigma) => res.terminal_mass.push((sigma, mass)),
                    Configuration::Violated => res.violation_prob += mass,
                    Configuration::Sink => unreachable!("only running configurations are expanded"),
                    conf if mass < cfg.min_path_prob => {
                        drop(conf);
                        res.residual += mass;
                    }
                    conf => next.push((conf, mass)),
                }
            }
            res.residual += w * (1.0 - kept).max(0.0);
        }
        if next.len() > cfg.max_frontier {
            next.sort_by(|a, b| b.1.total_cmp(&a.1));
            res.residual += next.drain(cfg.max_frontier..).map(|(_, w)| w).sum::<f64>();
        }
        frontier = next;
    }
    Ok(res)
}

/// `(L)ER` with its error bound: `ER = Σ Pr(◇⟨↓, σ⟩) tr(Pσ)`; the liberal
/// version adds the mass of non-terminating paths. The exact value lies in
/// `[value, value + error_bound]`.
pub fn expected_reward(
    p: &Program,
    rho0: &Operator,
    post: &Predicate,
    liberal: bool,
    cfg: &ExploreConfig,
) -> Result<(f64, f64)> {
    let c = compile(p)?;
    check_reward_dim(&c, post)?;
    Ok(reward_of(&explore_compiled(&c, rho0, cfg)?, post, liberal))
}

fn check_reward_dim(c: &Compiled, post: &Predicate) -> Result<()> {
    if post.dim() != c.dim() {
        return Err(Error::DimensionMismatch { expected: c.dim(), found: post.dim() });
    }
    Ok(())
}

pub fn reward_of(r: &ExplorationResult, post: &Predicate, liberal: bool) -> (f64, f64) {
    let er = r.reward(post);
    if liberal {
        (er + r.diverged_prob, r.residual)
    } else {
        (er, r.residual)
    }
}

/// `C(L)ER = (L)ER / Pr(¬◇⟨↯⟩)`, undefined when the denominator is at most
/// `εzero`.
pub fn conditional_expected_reward(
    p: &Program,
    rho0: &Operator,
    post: &Predicate,
    liberal: bool,
    cfg: &ExploreConfig,
) -> Result<Option<f64>> {
    let c = compile(p)?;
    check_reward_dim(&c, post)?;
    Ok(conditional_reward_of(&explore_compiled(&c, rho0, cfg)?, post, liberal))
}

pub fn conditional_reward_of(r: &ExplorationResult, post: &Predicate, liberal: bool) -> Option<f64> {
    let den = r.not_violated_prob();
    (den > EPS_ZERO).then(|| reward_of(r, post, liberal).0 / den)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Outcome {
    Terminated { state: Operator },
    Violated,
    Diverged,
    Cutoff,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRecord {
    /// Probability of each transition taken.
    pub probs: Vec<f64>,
    pub path_prob: f64,
    pub outcome: Outcome,
}

/// One random walk through the chain, at most `max_steps` long.
pub fn sample_path(p: &Program, rho0: &Operator, seed: u64, max_steps: usize) -> Result<PathRecord> {
    let c = compile(p)?;
    check_input(&c, rho0)?;
    Ok(walk(&c, rho0, &mut random::rng(seed), max_steps))
}

fn walk(c: &Compiled, rho0: &Operator, rng: &mut random::TestRng, max_steps: usize) -> PathRecord {
    let mut conf = Configuration::initial(c, rho0.clone());
    let mut probs = Vec::new();
    loop {
        if conf.is_diverging() {
            break finish(probs, Outcome::Diverged);
        }
        if probs.len() >= max_steps {
            break finish(probs, Outcome::Cutoff);
        }
        let succ = conf.step();
        let total: f64 = succ.iter().map(|t| t.prob).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = succ.len() - 1;
        for (i, t) in succ.iter().enumerate() {
            u -= t.prob;
            if u < 0.0 {
                pick = i;
                break;
            }
        }
        let t = succ.into_iter().nth(pick).expect("a running configuration has a successor");
        probs.push(t.prob);
        match t.target {
            Configuration::Terminated(state) => break finish(probs, Outcome::Terminated { state }),
            Configuration::Violated => break finish(probs, Outcome::Violated),
            other => conf = other,
        }
    }
}

fn finish(probs: Vec<f64>, outcome: Outcome) -> PathRecord {
    PathRecord { path_prob: probs.iter().product(), probs, outcome }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub runs: usize,
    pub terminated: usize,
    pub violated: usize,
    pub diverged: usize,
    pub cutoff: usize,
    /// Mean of `tr(Pσ)` over terminated runs, when a postcondition is given.
    pub mean_reward: Option<f64>,
}

/// Monte-Carlo estimate from `runs` independent walks.
pub fn simulate(
    p: &Program,
    rho0: &Operator,
    post: Option<&Predicate>,
    runs: usize,
    seed: u64,
    max_steps: usize,
    exec: Exec,
) -> Result<SimulationSummary> {
    let c = compile(p)?;
    check_input(&c, rho0)?;
    if let Some(post) = post {
        check_reward_dim(&c, post)?;
    }
    let paths = par::map_range(exec, runs, |i| {
        walk(&c, rho0, &mut random::rng(random::derive_seed(seed, i as u64)), max_steps)
    });
    let mut s = SimulationSummary { runs, terminated: 0, violated: 0, diverged: 0, cutoff: 0, mean_reward: None };
    let mut reward = 0.0;
    for path in &paths {
        match &path.outcome {
            Outcome::Terminated { state } => {
                s.terminated += 1;
                reward += post.map_or(0.0, |q| q.expectation(state));
            }
            Outcome::Violated => s.violated += 1,
            Outcome::Diverged => s.diverged += 1,
            Outcome::Cutoff => s.cutoff += 1,
        }
    }
    if post.is_some() && s.terminated > 0 {
        s.mean_reward = Some(reward / s.terminated as f64);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    fn plus() -> Operator {
        Operator::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap()
    }

    #[test]
    fn skip_steps_to_terminated() {
        let c = compile(&parse("bool q; skip").unwrap()).unwrap();
        let succ = Configuration::initial(&c, plus()).step();
        assert_eq!(succ.len(), 1);
        assert!(matches!(&succ[0].target, Configuration::Terminated(s) if *s == plus()));
        let after = succ[0].target.step();
        assert!(matches!(after[0].target, Configuration::Sink));
        assert!(matches!(Configuration::Sink.step()[0].target, Configuration::Sink));
    }

    #[test]
    fn observe_splits() {
        let c = compile(&parse("bool q; observe(q, P0)").unwrap()).unwrap();
        let succ = Configuration::initial(&c, plus()).step();
        assert_eq!(succ.len(), 2);
        assert!((succ[0].prob - 0.5).abs() < 1e-15);
        assert!(matches!(&succ[0].target, Configuration::Terminated(s) if s.approx_eq(&Operator::ket_bra(0, 0, 2), 1e-15)));
        assert!(matches!(succ[1].target, Configuration::Violated));
        assert!((succ[1].prob - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_branches_are_omitted() {
        let c = compile(&parse("bool q; observe(q, P0)").unwrap()).unwrap();
        let succ = Configuration::initial(&c, Operator::ket_bra(0, 0, 2)).step();
        assert_eq!(succ.len(), 1);
    }

    #[test]
    fn explore_skip() {
        let r = explore(&parse("bool q; skip").unwrap(), &plus(), &ExploreConfig::default()).unwrap();
        assert_eq!(r.terminal_mass, vec![(plus(), 1.0)]);
        assert_eq!((r.violation_prob, r.diverged_prob, r.residual), (0.0, 0.0, 0.0));
    }

    #[test]
    fn geometric_loop_totals() {
        let p = parse("bool q, c; c := H c; while {P0, P1}[c] = 1 do { q := X q; c := H c }").unwrap();
        let rho = Operator::ket_bra(0, 0, 4);
        let r = explore(&p, &rho, &ExploreConfig::default()).unwrap();
        let total = r.terminal_prob() + r.violation_prob + r.diverged_prob + r.residual;
        assert!((total - 1.0).abs() < 1e-12);
        assert!(r.residual < 1e-12);
        let capped = explore(&p, &rho, &ExploreConfig::with_depth(5)).unwrap();
        assert!(capped.residual > 0.1);
        let total = capped.terminal_prob() + capped.violation_prob + capped.residual;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diverge_rewards() {
        let p = parse("bool q; diverge").unwrap();
        let post = Predicate::zero(2);
        let cfg = ExploreConfig::default();
        assert_eq!(expected_reward(&p, &plus(), &post, true, &cfg).unwrap(), (1.0, 0.0));
        assert_eq!(expected_reward(&p, &plus(), &post, false, &cfg).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn undefined_conditional_reward() {
        let p = parse("bool q; observe(q, P1)").unwrap();
        let r = conditional_expected_reward(&p, &Operator::ket_bra(0, 0, 2), &Predicate::identity(2), false, &ExploreConfig::default());
        assert_eq!(r.unwrap(), None);
    }

    #[test]
    fn rejects_subnormalized_input() {
        let p = parse("bool q; skip").unwrap();
        let half = Operator::ket_bra(0, 0, 2).scale_real(0.5);
        assert!(matches!(explore(&p, &half, &ExploreConfig::default()), Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = parse("bool q; q := H q; observe(q, P0)").unwrap();
        let a = sample_path(&p, &Operator::ket_bra(0, 0, 2), 7, 100).unwrap();
        assert_eq!(a, sample_path(&p, &Operator::ket_bra(0, 0, 2), 7, 100).unwrap());
        let s = simulate(&p, &Operator::ket_bra(0, 0, 2), None, 2000, 3, 100, Exec::Parallel).unwrap();
        assert_eq!(s.terminated + s.violated, 2000);
        assert!((s.violated as f64 / 2000.0 - 0.5).abs() < 0.05);
        assert_eq!(s, simulate(&p, &Operator::ket_bra(0, 0, 2), None, 2000, 3, 100, Exec::Sequential).unwrap());
    }
}
