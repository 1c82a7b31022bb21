//! SMT-LIB2 emission, external solver processes, model parsing, and a
//! brute-force grid oracle for small real systems.
//!
//! Both solver paths consume the same lowered forms: `IntSystem` (multiset
//! sizes over ℕ) and `RealSystem` (stage components over ℝ). The oracle
//! evaluates `RealSystem` directly in exact rationals, independent of any
//! solver.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num::{BigInt, One, Signed, Zero};
use thiserror::Error;

use crate::rational::{smt_rational, Q};
use crate::semiring::Stage;

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("no SMT solver available; set PIA_SOLVER or install z3")]
    NoSolver,
    #[error("solver process failed: {0}")]
    Process(String),
    #[error("could not parse solver output: {0}")]
    BadOutput(String),
    #[error("model assigns non-rational value to `{0}`; re-ask with a decimal-representable instance")]
    NonRational(String),
}

// ---------------------------------------------------------------------------
// Scripts

/// Structured SMT-LIB2 text: declarations, assertions, final commands.
#[derive(Debug, Clone, Default)]
pub struct SmtScript {
    pub logic: String,
    pub declarations: Vec<String>,
    pub assertions: Vec<String>,
    pub commands: Vec<String>,
}

impl SmtScript {
    pub fn new(logic: &str) -> SmtScript {
        SmtScript {
            logic: logic.into(),
            declarations: Vec::new(),
            assertions: Vec::new(),
            commands: vec!["(check-sat)".into(), "(get-model)".into()],
        }
    }

    pub fn declare(&mut self, name: &str, sort: &str) {
        self.declarations
            .push(format!("(declare-const {name} {sort})"));
    }

    pub fn assert(&mut self, body: impl Into<String>) {
        self.assertions.push(format!("(assert {})", body.into()));
    }

    pub fn variable_count(&self) -> usize {
        self.declarations.len()
    }

    pub fn assertion_count(&self) -> usize {
        self.assertions.len()
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("(set-logic {})\n", self.logic));
        for d in &self.declarations {
            out.push_str(d);
            out.push('\n');
        }
        for a in &self.assertions {
            out.push_str(a);
            out.push('\n');
        }
        for c in &self.commands {
            out.push_str(c);
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Lowered systems

/// Integer expression for the size abstraction.
#[derive(Debug, Clone, PartialEq)]
pub enum IntExpr {
    Lit(u64),
    Var(String),
    Add(Box<IntExpr>, Box<IntExpr>),
    Mul(Box<IntExpr>, Box<IntExpr>),
}

impl IntExpr {
    fn smt(&self) -> String {
        match self {
            IntExpr::Lit(n) => n.to_string(),
            IntExpr::Var(v) => v.clone(),
            IntExpr::Add(a, b) => format!("(+ {} {})", a.smt(), b.smt()),
            IntExpr::Mul(a, b) => format!("(* {} {})", a.smt(), b.smt()),
        }
    }
}

/// Size system over ℕ: every variable is bounded by the (iterated) global
/// bound unless pinned.
#[derive(Debug, Clone, Default)]
pub struct IntSystem {
    /// (name, lower bound)
    pub vars: Vec<(String, u64)>,
    pub pins: Vec<(String, u64)>,
    pub equations: Vec<(IntExpr, IntExpr)>,
}

/// Emit the size system as QF_NIA with global bound `bound`.
pub fn emit_nat(sys: &IntSystem, bound: u64) -> SmtScript {
    let mut s = SmtScript::new("QF_NIA");
    for (v, lo) in &sys.vars {
        s.declare(v, "Int");
        s.assert(format!("(>= {v} {lo})"));
        if !sys.pins.iter().any(|(p, _)| p == v) {
            s.assert(format!("(<= {v} {bound})"));
        }
    }
    for (v, n) in &sys.pins {
        s.assert(format!("(= {v} {n})"));
    }
    for (a, b) in &sys.equations {
        s.assert(format!("(= {} {})", a.smt(), b.smt()));
    }
    s
}

/// One stage-valued atom of a composition chain.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainAtom {
    Var(String),
    Const(Stage),
}

/// Composition chain `a₁ ∘ a₂ ∘ …` (left factor outermost).
pub type Chain = Vec<ChainAtom>;

#[derive(Debug, Clone, PartialEq)]
pub enum RealConstraint {
    /// Composed stages equal componentwise.
    ChainEq(Chain, Chain),
    NeqIdentity(Chain),
    /// Egli-Milner ≤.
    Leq(Chain, Chain),
    /// Strictly FIFO ◁ (adjacent links of pipeline chains).
    StrictFifo(Chain, Chain),
    /// x < y: end of x strictly before start of y.
    StrictlyBefore(Chain, Chain),
    NonZeroScale(Chain),
}

/// Stage system over ℝ. Every variable carries the contractivity box
/// constraints; extra pins fix individual components (the write stage).
#[derive(Debug, Clone, Default)]
pub struct RealSystem {
    pub vars: Vec<String>,
    /// (var, scale pin, phase pin)
    pub pins: Vec<(String, Option<Q>, Option<Q>)>,
    pub constraints: Vec<RealConstraint>,
}

fn scale_smt(c: &Chain) -> String {
    if c.is_empty() {
        return "1.0".into();
    }
    let parts: Vec<String> = c
        .iter()
        .map(|a| match a {
            ChainAtom::Var(v) => format!("{v}_s"),
            ChainAtom::Const(st) => smt_rational(st.scale()),
        })
        .collect();
    if parts.len() == 1 {
        parts.into_iter().next().unwrap()
    } else {
        format!("(* {})", parts.join(" "))
    }
}

fn phase_smt(c: &[ChainAtom]) -> String {
    // phase(a∘rest) = a.phase + a.scale · phase(rest)
    match c.split_first() {
        None => "0.0".into(),
        Some((a, rest)) => {
            let (s, p) = match a {
                ChainAtom::Var(v) => (format!("{v}_s"), format!("{v}_p")),
                ChainAtom::Const(st) => (smt_rational(st.scale()), smt_rational(st.phase())),
            };
            if rest.is_empty() {
                p
            } else {
                format!("(+ {p} (* {s} {}))", phase_smt(rest))
            }
        }
    }
}

fn end_smt(c: &Chain) -> String {
    format!("(+ {} {})", scale_smt(c), phase_smt(c))
}

/// Emit the stage system as QF_NRA.
pub fn emit_real(sys: &RealSystem) -> SmtScript {
    let mut s = SmtScript::new("QF_NRA");
    for v in &sys.vars {
        s.declare(&format!("{v}_s"), "Real");
        s.declare(&format!("{v}_p"), "Real");
        s.assert(format!("(<= 0.0 {v}_s)"));
        s.assert(format!("(<= {v}_s 1.0)"));
        s.assert(format!("(<= 0.0 {v}_p)"));
        s.assert(format!("(<= (+ {v}_s {v}_p) 1.0)"));
    }
    for (v, scale, phase) in &sys.pins {
        if let Some(x) = scale {
            s.assert(format!("(= {v}_s {})", smt_rational(x)));
        }
        if let Some(x) = phase {
            s.assert(format!("(= {v}_p {})", smt_rational(x)));
        }
    }
    for c in &sys.constraints {
        match c {
            RealConstraint::ChainEq(a, b) => {
                s.assert(format!("(= {} {})", scale_smt(a), scale_smt(b)));
                s.assert(format!("(= {} {})", phase_smt(a), phase_smt(b)));
            }
            RealConstraint::NeqIdentity(x) => {
                s.assert(format!(
                    "(not (and (= {} 1.0) (= {} 0.0)))",
                    scale_smt(x),
                    phase_smt(x)
                ));
            }
            RealConstraint::Leq(x, y) => {
                s.assert(format!("(<= {} {})", phase_smt(x), phase_smt(y)));
                s.assert(format!("(<= {} {})", end_smt(x), end_smt(y)));
            }
            RealConstraint::StrictFifo(x, y) => {
                s.assert(format!("(< {} {})", phase_smt(x), phase_smt(y)));
                s.assert(format!("(< {} {})", end_smt(x), end_smt(y)));
            }
            RealConstraint::StrictlyBefore(x, y) => {
                s.assert(format!("(< {} {})", end_smt(x), phase_smt(y)));
            }
            RealConstraint::NonZeroScale(x) => {
                s.assert(format!("(not (= {} 0.0))", scale_smt(x)));
            }
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Exact evaluation of real systems (shared by the oracle and residual checks)

pub type StageAssignment = BTreeMap<String, Stage>;

pub fn eval_chain(c: &Chain, asgn: &StageAssignment) -> Option<Stage> {
    let mut acc = Stage::identity();
    for a in c {
        let st = match a {
            ChainAtom::Var(v) => asgn.get(v)?.clone(),
            ChainAtom::Const(s) => s.clone(),
        };
        acc = acc.compose(&st);
    }
    Some(acc)
}

pub fn eval_real_constraint(c: &RealConstraint, asgn: &StageAssignment) -> Option<bool> {
    Some(match c {
        RealConstraint::ChainEq(a, b) => eval_chain(a, asgn)? == eval_chain(b, asgn)?,
        RealConstraint::NeqIdentity(x) => !eval_chain(x, asgn)?.is_identity(),
        RealConstraint::Leq(x, y) => eval_chain(x, asgn)?
            .orders(&eval_chain(y, asgn)?)
            .egli_milner_leq,
        RealConstraint::StrictFifo(x, y) => eval_chain(x, asgn)?
            .orders(&eval_chain(y, asgn)?)
            .strict_fifo,
        RealConstraint::StrictlyBefore(x, y) => eval_chain(x, asgn)?
            .orders(&eval_chain(y, asgn)?)
            .strictly_before,
        RealConstraint::NonZeroScale(x) => !eval_chain(x, asgn)?.scale().is_zero(),
    })
}

/// Exhaustive grid search over `{0, step, 2·step, …, 1}²` per unknown stage.
/// Intended for ≤ 6 unknowns; returns the first grid model in lexicographic
/// order that satisfies every constraint exactly, or `None`.
pub fn brute_oracle(sys: &RealSystem, step: &Q) -> Result<Option<StageAssignment>, SmtError> {
    if sys.vars.len() > 6 {
        return Err(SmtError::Process(format!(
            "brute oracle limited to 6 unknown stages, got {}",
            sys.vars.len()
        )));
    }
    let mut grid = Vec::new();
    let mut x = Q::zero();
    while x <= Q::one() {
        grid.push(x.clone());
        x += step.clone();
    }
    let mut candidates: Vec<Vec<Stage>> = Vec::new();
    for v in &sys.vars {
        let pin = sys.pins.iter().find(|(n, _, _)| n == v);
        let mut opts = Vec::new();
        for s in &grid {
            for p in &grid {
                if let Some((_, ps, pp)) = pin {
                    if ps.as_ref().is_some_and(|x| x != s) || pp.as_ref().is_some_and(|x| x != p) {
                        continue;
                    }
                }
                if let Ok(st) = Stage::new(s.clone(), p.clone()) {
                    opts.push(st);
                }
            }
        }
        candidates.push(opts);
    }
    let mut asgn = StageAssignment::new();
    fn search(
        vars: &[String],
        candidates: &[Vec<Stage>],
        sys: &RealSystem,
        asgn: &mut StageAssignment,
        depth: usize,
    ) -> Option<StageAssignment> {
        if depth == vars.len() {
            let ok = sys
                .constraints
                .iter()
                .all(|c| eval_real_constraint(c, asgn).unwrap_or(false));
            return if ok { Some(asgn.clone()) } else { None };
        }
        for st in &candidates[depth] {
            asgn.insert(vars[depth].clone(), st.clone());
            // Prune on constraints whose variables are all assigned.
            let ok = sys.constraints.iter().all(|c| {
                eval_real_constraint(c, asgn).unwrap_or(true)
            });
            if ok {
                if let Some(m) = search(vars, candidates, sys, asgn, depth + 1) {
                    return Some(m);
                }
            }
            asgn.remove(&vars[depth]);
        }
        None
    }
    Ok(search(&sys.vars, &candidates, sys, &mut asgn, 0))
}

// ---------------------------------------------------------------------------
// Solver process

#[derive(Debug, Clone)]
pub struct SolverCmd {
    pub argv: Vec<String>,
    pub timeout_ms: u64,
}

impl SolverCmd {
    pub fn new(argv: Vec<String>) -> SolverCmd {
        SolverCmd {
            argv,
            timeout_ms: 60_000,
        }
    }
}

/// Locate a solver: `PIA_SOLVER` (whitespace-split command), `z3` on PATH,
/// or the bundled WebAssembly shim under `tools/solver/`.
pub fn default_solver() -> Option<SolverCmd> {
    if let Ok(cmd) = std::env::var("PIA_SOLVER") {
        let argv: Vec<String> = cmd.split_whitespace().map(|s| s.to_string()).collect();
        if !argv.is_empty() {
            return Some(SolverCmd::new(argv));
        }
    }
    if let Ok(out) = Command::new("z3").arg("--version").output() {
        if out.status.success() {
            return Some(SolverCmd::new(vec!["z3".into(), "-in".into(), "-smt2".into()]));
        }
    }
    let mut dir = std::env::current_dir().ok()?;
    loop {
        let shim = dir.join("tools/solver/z3shim.mjs");
        if shim.exists() {
            return Some(SolverCmd::new(vec![
                "node".into(),
                shim.to_string_lossy().into_owned(),
            ]));
        }
        if !dir.pop() {
            return None;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverOutcome {
    Sat(BTreeMap<String, Q>),
    Unsat,
    Timeout,
}

/// Run the external solver on the script's text, feeding stdin and parsing
/// the `sat`/`unsat` verdict plus the model s-expression.
pub fn run_solver(script: &SmtScript, cmd: &SolverCmd) -> Result<SolverOutcome, SmtError> {
    let text = script.text();
    let mut argv = cmd.argv.clone();
    // The bundled shim takes the timeout as its only argument.
    if argv
        .first()
        .is_some_and(|a| a == "node")
    {
        argv.push(cmd.timeout_ms.to_string());
    } else if argv.first().is_some_and(|a| a.contains("z3")) {
        argv.push(format!("-T:{}", cmd.timeout_ms.div_ceil(1000)));
    }
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SmtError::Process(format!("spawn {:?}: {e}", argv[0])))?;
    child
        .stdin
        .take()
        .expect("piped stdin")
        .write_all(text.as_bytes())
        .map_err(|e| SmtError::Process(format!("write stdin: {e}")))?;

    let deadline = Instant::now() + Duration::from_millis(cmd.timeout_ms + 15_000);
    let out = loop {
        match child.try_wait() {
            Ok(Some(_)) => {
                break child
                    .wait_with_output()
                    .map_err(|e| SmtError::Process(e.to_string()))?
            }
            Ok(None) => {
                if Instant::now() > deadline {
                    let _ = child.kill();
                    return Ok(SolverOutcome::Timeout);
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(SmtError::Process(e.to_string())),
        }
    };
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    if stdout.contains("timeout") && !stdout.contains("sat") {
        return Ok(SolverOutcome::Timeout);
    }
    let mut lines = stdout.lines();
    let verdict = loop {
        match lines.next() {
            Some(l) if l.trim() == "sat" => break "sat",
            Some(l) if l.trim() == "unsat" => break "unsat",
            Some(l) if l.trim() == "unknown" || l.trim() == "timeout" => {
                return Ok(SolverOutcome::Timeout)
            }
            Some(l) if l.trim().is_empty() || l.starts_with("(error") => continue,
            Some(l) => {
                return Err(SmtError::BadOutput(format!("unexpected line `{l}`")));
            }
            None => {
                let err = String::from_utf8_lossy(&out.stderr);
                return Err(SmtError::BadOutput(format!(
                    "no verdict in solver output; stderr: {err}"
                )));
            }
        }
    };
    if verdict == "unsat" {
        return Ok(SolverOutcome::Unsat);
    }
    let rest: String = lines.collect::<Vec<_>>().join("\n");
    let model = parse_model(&rest)?;
    Ok(SolverOutcome::Sat(model))
}

// ---------------------------------------------------------------------------
// Model parsing

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(s: &str) -> Vec<String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
                toks.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks
}

fn parse_sexps(toks: &[String], pos: &mut usize) -> Result<Vec<Sexp>, SmtError> {
    let mut out = Vec::new();
    while *pos < toks.len() {
        match toks[*pos].as_str() {
            "(" => {
                *pos += 1;
                let inner = parse_sexps(toks, pos)?;
                if *pos >= toks.len() || toks[*pos] != ")" {
                    return Err(SmtError::BadOutput("unbalanced parens in model".into()));
                }
                *pos += 1;
                out.push(Sexp::List(inner));
            }
            ")" => return Ok(out),
            a => {
                out.push(Sexp::Atom(a.to_string()));
                *pos += 1;
            }
        }
    }
    Ok(out)
}

fn sexp_to_q(e: &Sexp) -> Result<Q, SmtError> {
    match e {
        Sexp::Atom(a) => crate::rational::parse_rational(a)
            .ok_or_else(|| SmtError::BadOutput(format!("bad numeral `{a}`"))),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), x] if op == "-" => Ok(-sexp_to_q(x)?),
            [Sexp::Atom(op), x] if op == "to_real" || op == "to_int" => sexp_to_q(x),
            [Sexp::Atom(op), a, b] if op == "/" => {
                let d = sexp_to_q(b)?;
                if d.is_zero() {
                    return Err(SmtError::BadOutput("division by zero in model".into()));
                }
                Ok(sexp_to_q(a)? / d)
            }
            [Sexp::Atom(op), ..] if op == "root-obj" => {
                Err(SmtError::NonRational("algebraic root value".into()))
            }
            _ => Err(SmtError::BadOutput(format!("unparsed value {e:?}"))),
        },
    }
}

/// Accepts both `(model (define-fun x () Real v) …)` / bare define-fun lists
/// and `get-value` style `((x v) (y v))` output.
pub fn parse_model(s: &str) -> Result<BTreeMap<String, Q>, SmtError> {
    let toks = tokenize(s);
    let mut pos = 0;
    let sexps = parse_sexps(&toks, &mut pos)?;
    let mut out = BTreeMap::new();
    fn harvest(items: &[Sexp], out: &mut BTreeMap<String, Q>) -> Result<(), SmtError> {
        for e in items {
            if let Sexp::List(l) = e {
                match l.as_slice() {
                    [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(_), Sexp::Atom(_), value]
                        if kw == "define-fun" =>
                    {
                        out.insert(name.clone(), sexp_to_q(value)?);
                    }
                    [Sexp::Atom(kw), rest @ ..] if kw == "model" => {
                        harvest(rest, out)?;
                    }
                    [Sexp::Atom(name), value] if !name.starts_with('(') => {
                        if let Ok(v) = sexp_to_q(value) {
                            out.insert(name.clone(), v);
                        }
                    }
                    other => {
                        harvest(other, out)?;
                    }
                }
            }
        }
        Ok(())
    }
    harvest(&sexps, &mut out)?;
    Ok(out)
}

/// Convert a rational model value to a natural number (size models).
pub fn q_to_u64(x: &Q) -> Option<u64> {
    if !x.is_integer() || x.is_negative() {
        return None;
    }
    let n: BigInt = x.to_integer();
    let (_, digits) = n.to_u64_digits();
    match digits.len() {
        0 => Some(0),
        1 => Some(digits[0]),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn nat_script_shape() {
        let sys = IntSystem {
            vars: vec![("n1".into(), 1), ("n2".into(), 0)],
            pins: vec![],
            equations: vec![(
                IntExpr::Add(Box::new(IntExpr::Var("n1".into())), Box::new(IntExpr::Var("n2".into()))),
                IntExpr::Lit(4),
            )],
        };
        let s = emit_nat(&sys, 4);
        assert_eq!(s.variable_count(), 2);
        assert!(s.text().contains("(assert (= (+ n1 n2) 4))"));
        assert!(s.text().contains("(<= n1 4)"));
        // byte-stable across calls
        assert_eq!(s.text(), emit_nat(&sys, 4).text());
    }

    #[test]
    fn real_script_contractivity_and_neq_identity() {
        let sys = RealSystem {
            vars: vec!["x".into()],
            pins: vec![],
            constraints: vec![RealConstraint::NeqIdentity(vec![ChainAtom::Var("x".into())])],
        };
        let s = emit_real(&sys);
        let t = s.text();
        assert!(t.contains("(assert (<= 0.0 x_s))"));
        assert!(t.contains("(assert (<= x_s 1.0))"));
        assert!(t.contains("(assert (<= 0.0 x_p))"));
        assert!(t.contains("(assert (<= (+ x_s x_p) 1.0))"));
        assert!(t.contains("(assert (not (and (= x_s 1.0) (= x_p 0.0))))"));
    }

    #[test]
    fn model_parsing_styles() {
        let define_fun = "(\n  (define-fun p () Real 0.0)\n  (define-fun s () Real (/ 3.0 4.0))\n)";
        let m = parse_model(define_fun).unwrap();
        assert_eq!(m["p"], q(0, 1));
        assert_eq!(m["s"], q(3, 4));
        let get_value = "((x 0.265625) (n 7) (y (- (/ 1.0 2.0))))";
        let m = parse_model(get_value).unwrap();
        assert_eq!(m["x"], q(17, 64));
        assert_eq!(m["n"], q(7, 1));
        assert_eq!(m["y"], q(-1, 2));
        assert_eq!(q_to_u64(&m["n"]), Some(7));
    }

    #[test]
    fn oracle_finds_grid_model() {
        // single stage with {contractive, ≠I, s ≥ 1/2}: encode s ≥ 1/2 via a
        // Leq against a constant start window.
        let sys = RealSystem {
            vars: vec!["x".into()],
            pins: vec![("x".into(), Some(q(1, 2)), None)],
            constraints: vec![RealConstraint::NeqIdentity(vec![ChainAtom::Var("x".into())])],
        };
        let m = brute_oracle(&sys, &q(1, 4)).unwrap().expect("model");
        assert_eq!(m["x"].scale(), &q(1, 2));
    }

    #[test]
    fn oracle_reports_unsat_toy_system() {
        let x = vec![ChainAtom::Var("x".into())];
        let y = vec![ChainAtom::Var("y".into())];
        let sys = RealSystem {
            vars: vec!["x".into(), "y".into()],
            pins: vec![],
            constraints: vec![
                RealConstraint::StrictlyBefore(x.clone(), y.clone()),
                RealConstraint::StrictlyBefore(y, x),
            ],
        };
        assert!(brute_oracle(&sys, &q(1, 4)).unwrap().is_none());
    }
}
