//! Worked examples: the fast dice roller and the MAJ-SAT inner loop.

use serde::Serialize;

use crate::compile::compile;
use crate::error::{Error, Result};
use crate::lang::{parse, Program};
use crate::linalg::{cylinder_extend, DensityPair, Operator, Predicate, C64};
use crate::par::{self, Exec};
use crate::transformers::{hat_tr, qcwp_compiled, PredicatePair, TransformerConfig};

/// Fast dice roller: samples a uniform value in `{0, …, 5}` by rejecting `11`
/// on the first two qubits.
pub const FDR_SOURCE: &str = "\
# Fast dice roller: uniform superposition over six of the eight basis states.
bool q, p, r;
q := H q;
p := H p;
observe(q ⊗ p, I4 - P11);
r := H r
";

pub fn fdr_program() -> Program {
    parse(FDR_SOURCE).expect("bundled source is well-formed")
}

/// `|φ⟩ = (|000⟩ + |001⟩ + |010⟩ + |011⟩ + |100⟩ + |101⟩)/√6`.
pub fn fdr_phi() -> Predicate {
    let amp = C64::new(1.0 / 6f64.sqrt(), 0.0);
    let v: Vec<C64> = (0..8).map(|i| if i < 6 { amp } else { C64::new(0.0, 0.0) }).collect();
    Predicate::new(Operator::projector(&v)).expect("rank-one projector")
}

/// `|b⟩⟨b|` for a bit string such as `"010"`.
pub fn basis_state(bits: &str) -> Result<Operator> {
    let index = usize::from_str_radix(bits, 2)
        .map_err(|_| Error::InvalidInput(format!("`{bits}` is not a bit string")))?;
    Ok(Operator::ket_bra(index, index, 1 << bits.len()))
}

/// Named inputs with golden outputs, regenerated from `source`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleBundle {
    pub name: String,
    pub source: String,
    pub inputs: Vec<(String, DensityPair)>,
    /// Golden value for the input of the same name.
    pub expected: Vec<(String, Option<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoldenCheck {
    pub input: String,
    pub expected: Option<f64>,
    pub actual: Option<f64>,
    pub ok: bool,
}

impl ExampleBundle {
    /// `hat_tr(qcwp(S)(|φ⟩⟨φ|, I)·ρ)` for every basis input.
    pub fn fdr() -> Self {
        let ratios = [1.0, 0.0, 1.0 / 9.0, 0.0, 1.0 / 9.0, 0.0, 1.0 / 9.0, 0.0];
        let names: Vec<String> = (0..8).map(|i| format!("rho_{i:03b}")).collect();
        ExampleBundle {
            name: "fdr".into(),
            source: FDR_SOURCE.into(),
            inputs: names.iter().enumerate().map(|(i, n)| (n.clone(), DensityPair::basis(i, 8))).collect(),
            expected: names.into_iter().zip(ratios.map(Some)).collect(),
        }
    }

    /// Recomputes every golden value and compares within `tol`.
    pub fn verify(&self, post: &Predicate, tol: f64) -> Result<Vec<GoldenCheck>> {
        let c = compile(&parse(&self.source)?)?;
        let pair = PredicatePair::new(post.clone(), Predicate::identity(c.dim()))?;
        let out = qcwp_compiled(&c, &pair, &TransformerConfig::default())?;
        let mut checks = Vec::new();
        for ((name, input), (_, expected)) in self.inputs.iter().zip(&self.expected) {
            let actual = hat_tr(&out, &input.rho);
            let ok = match (actual, expected) {
                (Some(a), Some(e)) => (a - e).abs() <= tol,
                (None, None) => true,
                _ => false,
            };
            checks.push(GoldenCheck { input: name.clone(), expected: *expected, actual, ok });
        }
        Ok(checks)
    }
}

/// Source of the MAJ-SAT inner loop body `S_k` for a formula on `n` variables
/// whose satisfying assignments are the basis indices in `support`.
pub fn majsat_source(n: usize, k: i32, support: &[usize]) -> Result<String> {
    if n == 0 || support.iter().any(|&x| x >= 1 << n) {
        return Err(Error::InvalidInput(format!("support must be a set of {n}-bit assignments")));
    }
    let qs: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
    let reg = qs.join(" ");
    let hs = vec!["H"; n].join(" ⊗ ");
    let zeros = "0".repeat(n);
    // |x⟩|y⟩ ↦ |x⟩|y ⊕ f(x)⟩
    let dim = 1 << (n + 1);
    let mut rows = vec![vec![0u8; dim]; dim];
    for x in 0..1usize << n {
        let flip = usize::from(support.contains(&x));
        for y in 0..2 {
            rows[(x << 1) | (y ^ flip)][(x << 1) | y] = 1;
        }
    }
    let uf: Vec<String> = rows
        .iter()
        .map(|r| format!("[{}]", r.iter().map(u8::to_string).collect::<Vec<_>>().join(", ")))
        .collect();
    let resets: Vec<String> = qs.iter().map(|q| format!("{q} := 0;")).collect();
    Ok(format!(
        "bool {vars}, y, z;\n\
         let Uf = [{uf}];\n\
         {resets}\n\
         y := 0;\n\
         {reg} := {hs} {reg};\n\
         {reg} y := Uf {reg} y;\n\
         {reg} := {hs} {reg};\n\
         observe({reg}, P{zeros});\n\
         z := 0;\n\
         z := R({k}) z;\n\
         z y := CH z y;\n\
         observe(y, P1)\n",
        vars = qs.join(", "),
        uf = uf.join(",\n  "),
        resets = resets.join(" "),
    ))
}

/// The lexicographically first `s` assignments.
pub fn first_support(s: usize) -> Vec<usize> {
    (0..s).collect()
}

pub fn majsat_program(n: usize, k: i32, support: &[usize]) -> Result<Program> {
    parse(&majsat_source(n, k, support)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MajsatPoint {
    pub k: i32,
    /// `qcwp(S_k)(P, I) = (c·I, c′·I)`.
    pub c: f64,
    pub c_prime: f64,
    /// `c / c′`, undefined when `c′ ≈ 0`.
    pub pr: Option<f64>,
    /// Largest entry of either component minus its scalar part.
    pub scalar_deviation: f64,
}

fn scalar_part(a: &Operator) -> (f64, f64) {
    let c = a.trace().re / a.dim() as f64;
    (c, a.max_abs_diff(&Operator::identity(a.dim()).scale_real(c)))
}

pub fn majsat_point(n: usize, k: i32, support: &[usize]) -> Result<MajsatPoint> {
    let p = majsat_program(n, k, support)?;
    let c = compile(&p)?;
    let plus = Operator::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])?;
    let post = Predicate::new(cylinder_extend(&plus, &["z"], &c.layout)?)?;
    let pair = PredicatePair::new(post, Predicate::identity(c.dim()))?;
    let cfg = TransformerConfig { exec: Exec::Sequential, ..TransformerConfig::default() };
    let out = qcwp_compiled(&c, &pair, &cfg)?;
    let (cw, d1) = scalar_part(out.first.op());
    let (cl, d2) = scalar_part(out.second.op());
    let rho = Operator::ket_bra(0, 0, c.dim());
    Ok(MajsatPoint { k, c: cw, c_prime: cl, pr: hat_tr(&out, &rho), scalar_deviation: d1.max(d2) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MajsatRow {
    pub n: usize,
    pub s: usize,
    pub points: Vec<MajsatPoint>,
    pub max_pr: f64,
    pub argmax_k: i32,
    /// `s < 2ⁿ⁻¹`: a minority of assignments satisfy the formula.
    pub minority: bool,
}

/// `max_k Pr_nsk` over `k ∈ ks`, with the `k` sweep fanned out.
pub fn majsat_row(n: usize, s: usize, ks: &[i32], support: &[usize], exec: Exec) -> Result<MajsatRow> {
    if s == 0 || s > 1 << n || support.len() != s {
        return Err(Error::InvalidInput(format!("need 1 ≤ s ≤ 2^n and a support of size s, got s = {s}")));
    }
    if ks.is_empty() {
        return Err(Error::InvalidInput("empty k range".into()));
    }
    let points = par::map_slice(exec, ks, |&k| majsat_point(n, k, support)).into_iter().collect::<Result<Vec<_>>>()?;
    let (argmax_k, max_pr) = points
        .iter()
        .filter_map(|p| p.pr.map(|x| (p.k, x)))
        .fold((ks[0], f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(MajsatRow { n, s, points, max_pr, argmax_k, minority: 2 * s < 1 << n })
}

/// The default sweep `k ∈ [−n, n]` with the first `s` assignments satisfying.
pub fn majsat_table_row(n: usize, s: usize, exec: Exec) -> Result<MajsatRow> {
    let ks: Vec<i32> = (-(n as i32)..=n as i32).collect();
    majsat_row(n, s, &ks, &first_support(s), exec)
}

/// The printed table: `(n, s, max_k Pr_nsk)` to four decimals.
pub const MAJSAT_TABLE: &[(usize, &[(usize, f64)])] = &[
    (2, &[(2, 0.5), (3, 0.3838), (4, 0.3286)]),
    (3, &[(2, 0.9714), (3, 0.9991), (4, 0.5), (7, 0.4247), (8, 0.4123)]),
    (4, &[(2, 0.9991), (3, 0.9933), (4, 0.9714), (7, 0.9889), (8, 0.5)]),
    (5, &[(2, 0.9889), (3, 0.9828), (4, 0.9991), (7, 0.9977), (8, 0.9714)]),
];
