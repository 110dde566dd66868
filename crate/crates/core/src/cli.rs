//! The `qcwp` command line.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bundles::{first_support, majsat_row, MajsatRow};
use crate::compile::compile;
use crate::denot::{eval, EvalConfig, OnNonConvergence};
use crate::error::{Error, Result};
use crate::lang::{parse, Program};
use crate::linalg::{set_dim_cap, DensityPair, Operator, Predicate, DEFAULT_DIM_CAP};
use crate::opsem::{self, ExploreConfig, DEFAULT_DEPTH_CAP};
use crate::par::Exec;
use crate::propcheck::{run_suite_with, write_repro_bundles, Suite};
use crate::random;
use crate::transformers::{self as tf, HoareMode, PredicatePair, TransformerConfig, Verdict};

#[derive(Parser, Debug)]
#[command(name = "qcwp", version, about = "Semantics and weakest preconditions for quantum while-programs with observe")]
pub struct Cli {
    /// Largest register dimension any command will build.
    #[arg(long, global = true, env = "QCWP_DIM_CAP", default_value_t = DEFAULT_DIM_CAP)]
    pub dim_cap: usize,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run fan-out work on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a program forward on a state: ⟦S⟧(ρ, p).
    Eval(EvalArgs),
    /// Weakest precondition qwp(S, P).
    Wp(WpArgs),
    /// Weakest liberal precondition qwlp(S, P).
    Wlp(WpArgs),
    /// Conditional weakest precondition qcwp(S, (P, Q)).
    Cwp(CwpArgs),
    /// Conditional weakest liberal precondition qcwlp(S, (P, Q)).
    Cwlp(CwpArgs),
    /// Exhaustively explore the operational Markov chain.
    Explore(ExploreArgs),
    /// Sample random paths through the operational Markov chain.
    Simulate(SimulateArgs),
    /// Run a property suite on random programs.
    Check(CheckArgs),
    /// Test a Hoare triple {P} S {Q}.
    CheckHoare(HoareArgs),
    /// Success probabilities of the MAJ-SAT inner loop body.
    Majsat(MajsatArgs),
}

#[derive(Args, Debug)]
pub struct Common {
    /// Program source file, or `-` for stdin.
    pub program: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input state as a density-pair or operator JSON file (default |0…0⟩).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    pub loop_eps: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_unfoldings: usize,
    /// Report unconverged loops as a residual instead of failing.
    #[arg(long)]
    pub allow_residual: bool,
}

#[derive(Args, Debug)]
pub struct WpArgs {
    #[command(flatten)]
    pub common: Common,
    /// Postcondition as operator JSON.
    #[arg(long)]
    pub post: PathBuf,
    /// Also print tr(result · ρ) for this state.
    #[arg(long)]
    pub rho: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    pub loop_eps: f64,
}

#[derive(Args, Debug)]
pub struct CwpArgs {
    #[command(flatten)]
    pub common: Common,
    /// First postcondition P.
    #[arg(long)]
    pub post: PathBuf,
    /// Second postcondition Q (default I).
    #[arg(long)]
    pub post2: Option<PathBuf>,
    /// Print hat-tr of the result on this state.
    #[arg(long)]
    pub ratio: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    pub loop_eps: f64,
}

#[derive(Args, Debug)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial state (trace 1; default |0…0⟩).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DEPTH_CAP)]
    pub depth: usize,
    /// Reward predicate for (L)ER and C(L)ER.
    #[arg(long)]
    pub post: Option<PathBuf>,
    /// Count non-terminating paths as rewarded.
    #[arg(long)]
    pub liberal: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Maximum steps per path.
    #[arg(long, default_value_t = DEFAULT_DEPTH_CAP)]
    pub depth: usize,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub post: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Suite name, or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
    /// Write failing programs and inputs here.
    #[arg(long)]
    pub repro_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Total,
    Partial,
}

#[derive(Args, Debug)]
pub struct HoareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub pre: PathBuf,
    #[arg(long)]
    pub post: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Total)]
    pub mode: Mode,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Decide the triple with the transformer instead of sampling.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Args, Debug)]
pub struct MajsatArgs {
    /// Number of formula variables.
    #[arg(long)]
    pub n: usize,
    /// Number of satisfying assignments.
    #[arg(long)]
    pub s: usize,
    /// Smallest k (default −n).
    #[arg(long, allow_hyphen_values = true)]
    pub k_min: Option<i32>,
    /// Largest k (default n).
    #[arg(long, allow_hyphen_values = true)]
    pub k_max: Option<i32>,
    /// Use a random support of size s drawn from this seed.
    #[arg(long)]
    pub support_seed: Option<u64>,
    #[arg(long)]
    pub json: bool,
}

/// Exit status for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => 2,
        _ => 1,
    }
}

/// Exit status when a check or triple is refuted.
pub const EXIT_REFUTED: i32 = 3;

/// Parses `args` and runs the command, writing results to `out` (or the
/// `--out` file) and diagnostics to `err`. Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    set_dim_cap(cli.dim_cap);
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let mut text = String::new();
    let status = match dispatch(&cli.command, exec, &mut text) {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &text),
        None => out.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: cannot write output: {e}");
        return 1;
    }
    status
}

fn dispatch(cmd: &Command, exec: Exec, out: &mut String) -> Result<i32> {
    match cmd {
        Command::Eval(a) => cmd_eval(a, exec, out),
        Command::Wp(a) => cmd_wp(a, false, exec, out),
        Command::Wlp(a) => cmd_wp(a, true, exec, out),
        Command::Cwp(a) => cmd_cwp(a, false, exec, out),
        Command::Cwlp(a) => cmd_cwp(a, true, exec, out),
        Command::Explore(a) => cmd_explore(a, exec, out),
        Command::Simulate(a) => cmd_simulate(a, exec, out),
        Command::Check(a) => cmd_check(a, exec, out),
        Command::CheckHoare(a) => cmd_check_hoare(a, out),
        Command::Majsat(a) => cmd_majsat(a, exec, out),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("cannot read {}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| io_error(path, e))?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| io_error(path, e))
    }
}

fn load_program(path: &Path) -> Result<Program> {
    parse(&read_text(path)?)
}

/// A density pair `{"rho": …, "p": …}` or a bare operator.
fn load_state(path: &Path) -> Result<DensityPair> {
    let value: serde_json::Value = serde_json::from_str(&read_text(path)?)?;
    if value.get("rho").is_some() {
        let pair: DensityPair = serde_json::from_value(value)?;
        pair.validate()?;
        Ok(pair)
    } else {
        DensityPair::from_state(serde_json::from_value(value)?)
    }
}

fn load_predicate(path: &Path) -> Result<Predicate> {
    let op: Operator = serde_json::from_str(&read_text(path)?)?;
    Predicate::new(op)
}

fn state_or_zero(path: &Option<PathBuf>, dim: usize) -> Result<DensityPair> {
    match path {
        Some(p) => load_state(p),
        None => Ok(DensityPair::basis(0, dim)),
    }
}

fn fmt_num(x: f64) -> String {
    format!("{:.4}", if x == 0.0 { 0.0 } else { x })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_string(), fmt_num)
}

/// Matrix rows with four decimals.
pub fn format_operator(op: &Operator) -> String {
    let cell = |z: crate::linalg::C64| {
        if z.im.abs() < 5e-5 {
            fmt_num(z.re)
        } else {
            format!("{}{:+.4}i", fmt_num(z.re), z.im)
        }
    };
    let cells: Vec<Vec<String>> = op.rows().into_iter().map(|r| r.into_iter().map(cell).collect()).collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(0);
    cells
        .iter()
        .map(|r| r.iter().map(|c| format!("{c:>width$}")).collect::<Vec<_>>().join("  ") + "\n")
        .collect()
}

fn push_json(out: &mut String, v: &impl serde::Serialize) -> Result<()> {
    *out += &serde_json::to_string_pretty(v)?;
    out.push('\n');
    Ok(())
}

fn cmd_eval(a: &EvalArgs, exec: Exec, out: &mut String) -> Result<i32> {
    let p = load_program(&a.common.program)?;
    let input = state_or_zero(&a.input, p.total_dim())?;
    let on_nonconvergence = if a.allow_residual { OnNonConvergence::ReturnWithResidual } else { OnNonConvergence::Fail };
    let cfg = EvalConfig { loop_eps: a.loop_eps, max_unfoldings: a.max_unfoldings, on_nonconvergence, exec };
    let r = eval(&p, &input, &cfg)?;
    if a.common.json {
        push_json(out, &json!({
            "trace": r.pair.trace(),
            "p": r.pair.p,
            "residual": r.residual,
            "unfoldings_used": r.unfoldings_used,
            "rho": r.pair.rho,
        }))?;
    } else {
        *out += &format!("tr(rho') = {}\np'       = {}\nresidual = {:.3e}\nrho' =\n", fmt_num(r.pair.trace()), fmt_num(r.pair.p), r.residual);
        *out += &format_operator(&r.pair.rho);
    }
    Ok(0)
}

fn tf_cfg(loop_eps: f64, exec: Exec) -> Result<TransformerConfig> {
    if !(loop_eps > 0.0) {
        return Err(Error::InvalidInput("loop_eps must be positive".into()));
    }
    Ok(TransformerConfig { loop_eps, exec, ..TransformerConfig::default() })
}

fn cmd_wp(a: &WpArgs, liberal: bool, exec: Exec, out: &mut String) -> Result<i32> {
    let p = load_program(&a.common.program)?;
    let post = load_predicate(&a.post)?;
    let cfg = tf_cfg(a.loop_eps, exec)?;
    let pre = if liberal { tf::qwlp(&p, &post, &cfg)? } else { tf::qwp(&p, &post, &cfg)? };
    let expectation = match &a.rho {
        Some(path) => Some(pre.expectation(&load_state(path)?.rho)),
        None => None,
    };
    if a.common.json {
        push_json(out, &json!({ "pre": pre, "expectation": expectation }))?;
    } else {
        *out += &format_operator(pre.op());
        if let Some(e) = expectation {
            *out += &format!("tr(pre * rho) = {}\n", fmt_num(e));
        }
    }
    Ok(0)
}

fn cmd_cwp(a: &CwpArgs, liberal: bool, exec: Exec, out: &mut String) -> Result<i32> {
    let p = load_program(&a.common.program)?;
    let first = load_predicate(&a.post)?;
    let second = match &a.post2 {
        Some(path) => load_predicate(path)?,
        None => Predicate::identity(first.dim()),
    };
    let pair = PredicatePair::new(first, second)?;
    let cfg = tf_cfg(a.loop_eps, exec)?;
    let res = if liberal { tf::qcwlp(&p, &pair, &cfg)? } else { tf::qcwp(&p, &pair, &cfg)? };
    let ratio = match &a.ratio {
        Some(path) => Some(tf::hat_tr(&res, &load_state(path)?.rho)),
        None => None,
    };
    if a.common.json {
        let mut v = json!({ "first": res.first, "second": res.second });
        if let Some(r) = ratio {
            v["ratio"] = json!(r);
        }
        push_json(out, &v)?;
    } else if let Some(r) = ratio {
        *out += &fmt_opt(r);
        out.push('\n');
    } else {
        *out += "first =\n";
        *out += &format_operator(res.first.op());
        *out += "second =\n";
        *out += &format_operator(res.second.op());
    }
    Ok(0)
}

fn cmd_explore(a: &ExploreArgs, exec: Exec, out: &mut String) -> Result<i32> {
    let p = load_program(&a.common.program)?;
    let c = compile(&p)?;
    let rho = state_or_zero(&a.input, c.dim())?.rho;
    let post = a.post.as_deref().map(load_predicate).transpose()?;
    let cfg = ExploreConfig { depth_cap: a.depth, exec, ..ExploreConfig::default() };
    let r = opsem::explore_compiled(&c, &rho, &cfg)?;
    let reward = post.as_ref().map(|q| opsem::reward_of(&r, q, a.liberal));
    let conditional = post.as_ref().map(|q| opsem::conditional_reward_of(&r, q, a.liberal));
    if a.common.json {
        let mut v = serde_json::to_value(&r)?;
        if let (Some((value, bound)), Some(cond)) = (reward, conditional) {
            v["reward"] = json!({ "value": value, "error_bound": bound, "liberal": a.liberal });
            v["conditional_reward"] = json!(cond);
        }
        push_json(out, &v)?;
    } else {
        *out += &format!(
            "terminated  {}\nviolated    {}\ndiverged    {}\nresidual    {:.3e}\ndepth       {}\npaths       {}\n",
            fmt_num(r.terminal_prob()),
            fmt_num(r.violation_prob),
            fmt_num(r.diverged_prob),
            r.residual,
            r.depth_used,
            r.terminal_mass.len()
        );
        if let (Some((value, bound)), Some(cond)) = (reward, conditional) {
            let tag = if a.liberal { "LER" } else { "ER" };
            *out += &format!("{tag:<11} {} (+{bound:.3e})\nC{tag:<10} {}\n", fmt_num(value), fmt_opt(cond));
        }
    }
    Ok(0)
}

fn cmd_simulate(a: &SimulateArgs, exec: Exec, out: &mut String) -> Result<i32> {
    let p = load_program(&a.common.program)?;
    let rho = state_or_zero(&a.input, p.total_dim())?.rho;
    let post = a.post.as_deref().map(load_predicate).transpose()?;
    let s = opsem::simulate(&p, &rho, post.as_ref(), a.runs, a.seed, a.depth, exec)?;
    if a.common.json {
        push_json(out, &s)?;
    } else {
        let frac = |k: usize| fmt_num(k as f64 / s.runs.max(1) as f64);
        *out += &format!(
            "runs        {}\nterminated  {}\nviolated    {}\ndiverged    {}\ncutoff      {}\n",
            s.runs,
            frac(s.terminated),
            frac(s.violated),
            frac(s.diverged),
            frac(s.cutoff)
        );
        if post.is_some() {
            *out += &format!("mean reward {}\n", fmt_opt(s.mean_reward));
        }
    }
    Ok(0)
}

fn cmd_check(a: &CheckArgs, exec: Exec, out: &mut String) -> Result<i32> {
    let suites = if a.suite == "all" { Suite::ALL.to_vec() } else { vec![a.suite.parse()?] };
    let reports: Vec<_> = suites.into_iter().map(|s| run_suite_with(s, a.trials, a.seed, exec)).collect();
    if let Some(dir) = &a.repro_dir {
        for r in &reports {
            write_repro_bundles(r, dir)?;
        }
    }
    if a.json {
        push_json(out, &reports)?;
    } else {
        for (i, r) in reports.iter().enumerate() {
            let table = r.table();
            // keep the header only once
            *out += if i == 0 { &table } else { table.split_once('\n').map_or("", |x| x.1) };
        }
    }
    Ok(if reports.iter().all(|r| r.ok()) { 0 } else { EXIT_REFUTED })
}

fn cmd_check_hoare(a: &HoareArgs, out: &mut String) -> Result<i32> {
    let p = load_program(&a.common.program)?;
    let pre = load_predicate(&a.pre)?;
    let post = load_predicate(&a.post)?;
    let mode = match a.mode {
        Mode::Total => HoareMode::Total,
        Mode::Partial => HoareMode::Partial,
    };
    let holds = if a.exact {
        let holds = tf::check_hoare_exact(&pre, &p, &post, mode, &TransformerConfig::default())?;
        if a.common.json {
            push_json(out, &json!({ "verdict": if holds { "holds" } else { "refuted" }, "exact": true }))?;
        } else {
            *out += if holds { "holds\n" } else { "refuted\n" };
        }
        holds
    } else {
        let v = tf::check_hoare(&pre, &p, &post, mode, a.samples, a.seed)?;
        if a.common.json {
            push_json(out, &v)?;
        } else {
            match &v {
                Verdict::Holds { checked } => *out += &format!("holds on {checked} states\n"),
                Verdict::Refuted { witness, lhs, rhs } => {
                    *out += &format!("refuted: {} > {} on\n", fmt_num(*lhs), fmt_num(*rhs));
                    *out += &format_operator(witness);
                }
            }
        }
        v.holds()
    };
    Ok(if holds { 0 } else { EXIT_REFUTED })
}

fn cmd_majsat(a: &MajsatArgs, exec: Exec, out: &mut String) -> Result<i32> {
    let n = a.n as i32;
    let ks: Vec<i32> = (a.k_min.unwrap_or(-n)..=a.k_max.unwrap_or(n)).collect();
    if a.n == 0 || a.n > 16 {
        return Err(Error::InvalidInput("n must be between 1 and 16".into()));
    }
    let support = match a.support_seed {
        Some(seed) if a.s <= 1 << a.n => {
            let mut rng = random::rng(seed);
            let mut v = rand::seq::index::sample(&mut rng, 1 << a.n, a.s).into_vec();
            v.sort_unstable();
            v
        }
        _ => first_support(a.s),
    };
    let row = majsat_row(a.n, a.s, &ks, &support, exec)?;
    if a.json {
        push_json(out, &row)?;
    } else {
        *out += &majsat_table(&row);
    }
    Ok(0)
}

fn majsat_table(row: &MajsatRow) -> String {
    let mut s = format!("{:>4}  {:>8}  {:>8}  {:>8}\n", "k", "c", "c'", "Pr");
    for p in &row.points {
        s += &format!("{:>4}  {:>8}  {:>8}  {:>8}\n", p.k, fmt_num(p.c), fmt_num(p.c_prime), fmt_opt(p.pr));
    }
    let mark = if row.minority { "  (s < 2^(n-1))" } else { "" };
    s += &format!("n={} s={} max Pr = {} at k = {}{mark}\n", row.n, row.s, fmt_num(row.max_pr), row.argmax_k);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn help_prints_usage() {
        let (code, out, _) = run_args(&["qcwp", "cwp", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("Usage"), "{out}");
        assert!(out.contains("--ratio"));
    }

    #[test]
    fn unknown_command_fails() {
        let (code, _, err) = run_args(&["qcwp", "frobnicate"]);
        assert_eq!(code, 1);
        assert!(!err.is_empty());
    }

    #[test]
    fn majsat_row_output() {
        let (code, out, err) = run_args(&["qcwp", "--sequential", "majsat", "--n", "2", "--s", "2"]);
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("max Pr = 0.5000"), "{out}");
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(1.0 / 9.0), "0.1111");
        assert_eq!(fmt_num(-0.0), "0.0000");
        assert_eq!(fmt_opt(None), "undefined");
        let s = format_operator(&crate::linalg::gates::pauli_y());
        assert_eq!(s, "        0.0000  0.0000-1.0000i\n0.0000+1.0000i          0.0000\n");
    }
}
