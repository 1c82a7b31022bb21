//! PIA constant signatures with their intrinsic side conditions, the
//! pipeline (FIFO) augmentation, and the two-stage solving driver: multiset
//! sizes over ℕ first, then stage components over ℝ under guessed ◁-orders.

use std::collections::BTreeMap;
use std::time::Instant;

use num::Zero;
use thiserror::Error;

use crate::constraint::{
    substitute, violated_constraints, ConcreteJudgment, Constraint, ConstraintSystem, Judgment,
    StagePred,
};
use crate::expr::{Model, SemiringExpr, StageExpr};
use crate::infer::{generate, GenError};
use crate::rational::{q, Q};
use crate::semiring::{Instance, Schedule, SemiringElement, Stage, Zoi};
use crate::simple::{infer_simple, SimpleType, TypeError};
use crate::smt::{
    emit_nat, emit_real, q_to_u64, run_solver, Chain, ChainAtom, IntExpr, IntSystem,
    RealConstraint, RealSystem, SmtError, SmtScript, SolverCmd, SolverOutcome,
};
use crate::syntax::{ConstId, ConstParam, ParseError, ResourceType, SourceFile};

// ---------------------------------------------------------------------------
// Constant signatures

/// Fresh-variable source used when instantiating constant templates; the
/// constraint generator implements it.
pub trait VarSource {
    fn stage_param(&mut self, prefix: &str) -> StageExpr;
    fn sched_param(&mut self, prefix: &str) -> SemiringExpr;
    /// Called when a template mentions the global write stage.
    fn need_write_stage(&mut self);
}

fn base_of(t: &SimpleType, what: &'static str) -> Result<ResourceType, GenError> {
    match t {
        SimpleType::Com => Ok(ResourceType::com()),
        SimpleType::Exp => Ok(ResourceType::exp()),
        other => Err(GenError::NotBaseType(what, other.to_string())),
    }
}

/// Instantiate a constant occurrence: its annotated type template with fresh
/// stage/schedule parameters, the parameter list, and the intrinsic
/// constraint set χ_k. Contractivity of every parameter is implicit (the
/// causality condition) and enforced globally by the solver lowering.
pub fn constant_constraints(
    vs: &mut dyn VarSource,
    id: ConstId,
    node_ty: &SimpleType,
) -> Result<(ResourceType, Vec<ConstParam>, Vec<Constraint>), GenError> {
    use SemiringExpr as E;
    let single = |x: &StageExpr| E::Singleton(x.clone());
    match id {
        ConstId::One => Ok((ResourceType::exp(), vec![], vec![])),
        ConstId::Skip => Ok((ResourceType::com(), vec![], vec![])),
        ConstId::Comp => {
            let x = vs.stage_param("x");
            let y = vs.stage_param("y");
            let ty = ResourceType::arrow(
                single(&x),
                ResourceType::com(),
                ResourceType::arrow(single(&y), ResourceType::com(), ResourceType::com()),
            );
            Ok((
                ty,
                vec![ConstParam::Stage(x), ConstParam::Stage(y)],
                vec![],
            ))
        }
        ConstId::Seq => {
            let x = vs.stage_param("x");
            let y = vs.stage_param("y");
            let ty = ResourceType::arrow(
                single(&x),
                ResourceType::com(),
                ResourceType::arrow(single(&y), ResourceType::com(), ResourceType::com()),
            );
            let side = vec![Constraint::StagePred(StagePred::StrictlyBefore(
                x.clone(),
                y.clone(),
            ))];
            Ok((ty, vec![ConstParam::Stage(x), ConstParam::Stage(y)], side))
        }
        ConstId::Par => {
            let x = vs.stage_param("x");
            let ty = ResourceType::arrow(
                single(&x),
                ResourceType::com(),
                ResourceType::arrow(single(&x), ResourceType::com(), ResourceType::com()),
            );
            Ok((ty, vec![ConstParam::Stage(x)], vec![]))
        }
        ConstId::Op => {
            let x = vs.stage_param("x");
            let y = vs.stage_param("y");
            let ty = ResourceType::arrow(
                single(&x),
                ResourceType::exp(),
                ResourceType::arrow(single(&y), ResourceType::exp(), ResourceType::exp()),
            );
            let side = vec![
                Constraint::StagePred(StagePred::NeqIdentity(x.clone())),
                Constraint::StagePred(StagePred::NeqIdentity(y.clone())),
            ];
            Ok((ty, vec![ConstParam::Stage(x), ConstParam::Stage(y)], side))
        }
        ConstId::If => {
            // node type: exp -> σ -> σ -> σ
            let sigma = match node_ty {
                SimpleType::Arrow(_, c1) => match &**c1 {
                    SimpleType::Arrow(s, _) => base_of(s, "if")?,
                    _ => return Err(GenError::Internal("if skeleton".into())),
                },
                _ => return Err(GenError::Internal("if skeleton".into())),
            };
            let x = vs.stage_param("x");
            let y = vs.stage_param("y");
            let ty = ResourceType::arrow(
                single(&x),
                ResourceType::exp(),
                ResourceType::arrow(
                    single(&y),
                    sigma.clone(),
                    ResourceType::arrow(single(&y), sigma.clone(), sigma),
                ),
            );
            let side = vec![Constraint::StagePred(StagePred::StrictlyBefore(
                x.clone(),
                y.clone(),
            ))];
            Ok((ty, vec![ConstParam::Stage(x), ConstParam::Stage(y)], side))
        }
        ConstId::New => {
            // node type: (exp -> (exp -> com) -> σ) -> σ
            let sigma = match node_ty {
                SimpleType::Arrow(body, _) => match &**body {
                    SimpleType::Arrow(_, rest) => match &**rest {
                        SimpleType::Arrow(_, s) => base_of(s, "new")?,
                        _ => return Err(GenError::Internal("new skeleton".into())),
                    },
                    _ => return Err(GenError::Internal("new skeleton".into())),
                },
                _ => return Err(GenError::Internal("new skeleton".into())),
            };
            let j = vs.sched_param("N");
            let k = vs.sched_param("K");
            vs.need_write_stage();
            let body = ResourceType::arrow(
                j.clone(),
                ResourceType::exp(),
                ResourceType::arrow(k.clone(), ResourceType::acc(), sigma.clone()),
            );
            let ty = ResourceType::arrow(SemiringExpr::one(), body, sigma);
            let side = vec![Constraint::StagePred(StagePred::NoZeroStage(k.clone()))];
            Ok((ty, vec![ConstParam::Sched(j), ConstParam::Sched(k)], side))
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Scale of the system write stage `w` (default 1/8).
    pub write_scale: Q,
    /// Phase of `w`; left to the solver when absent.
    pub write_phase: Option<Q>,
    pub size_bound_start: u64,
    pub size_bound_max: u64,
    pub order_retry_budget: u64,
    /// Add Pipe constraints for every schedule.
    pub pipeline: bool,
    /// Issue order-guess retries one at a time instead of in parallel batches.
    pub sequential: bool,
    pub solver: SolverCmd,
}

impl SolveConfig {
    pub fn new(solver: SolverCmd) -> SolveConfig {
        SolveConfig {
            write_scale: q(1, 8),
            write_phase: None,
            size_bound_start: 1,
            size_bound_max: 16,
            order_retry_budget: 64,
            pipeline: false,
            sequential: false,
            solver,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub size_variables: usize,
    pub size_assertions: usize,
    pub size_attempts: u64,
    pub stage_variables: usize,
    pub stage_assertions: usize,
    pub stage_attempts: u64,
    pub wall_ms: u128,
}

impl SolveStats {
    pub fn variables(&self) -> usize {
        self.size_variables + self.stage_variables
    }

    pub fn assertions(&self) -> usize {
        self.size_assertions + self.stage_assertions
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Type(#[from] TypeError),
    #[error("{0}")]
    Gen(#[from] GenError),
    #[error("size-unsatisfiable up to bound {bound}")]
    SizeUnsat { bound: u64 },
    #[error("pipeline-unsatisfiable after {attempts} order guesses")]
    PipelineUnsat { attempts: u64 },
    #[error("solver timeout during {0}")]
    Timeout(&'static str),
    #[error("{0}")]
    Solver(#[from] SmtError),
    #[error("solver model rejected: {0}")]
    ModelRejected(String),
    #[error("declared schedule is not a pipeline: {0}")]
    NotAPipeline(String),
    #[error("{0}")]
    Substitute(#[from] crate::constraint::SubstError),
    #[error("checker rejected the solved judgment: {0}")]
    Check(String),
}

// ---------------------------------------------------------------------------
// Size phase

fn size_of_expr(e: &SemiringExpr) -> IntExpr {
    match e {
        SemiringExpr::Var(v) => IntExpr::Var(format!("n_{v}")),
        SemiringExpr::Const(s) => IntExpr::Lit(s.size()),
        SemiringExpr::Singleton(_) => IntExpr::Lit(1),
        SemiringExpr::Add(a, b) => IntExpr::Add(Box::new(size_of_expr(a)), Box::new(size_of_expr(b))),
        SemiringExpr::Mul(a, b) => IntExpr::Mul(Box::new(size_of_expr(a)), Box::new(size_of_expr(b))),
    }
}

/// Abstract every schedule expression to its multiset size.
pub fn size_abstraction(system: &ConstraintSystem) -> IntSystem {
    let mut sys = IntSystem::default();
    for v in &system.schedule_vars {
        sys.vars
            .push((format!("n_{}", v.name), u64::from(v.is_occurrence)));
    }
    for (name, n) in &system.size_pins {
        sys.pins.push((format!("n_{name}"), *n));
    }
    for c in &system.constraints {
        match c {
            Constraint::SemiringEq(a, b) => {
                sys.equations.push((size_of_expr(a), size_of_expr(b)));
            }
            Constraint::SizeEq(e, n) => {
                sys.equations.push((size_of_expr(e), IntExpr::Lit(*n)));
            }
            Constraint::StagePred(_) | Constraint::Pipe(_) => {}
        }
    }
    sys
}

/// Solve the size abstraction over ℕ with an iterated global bound.
pub fn solve_sizes(
    system: &ConstraintSystem,
    cfg: &SolveConfig,
    stats: &mut SolveStats,
) -> Result<BTreeMap<String, u64>, PipelineError> {
    let ints = size_abstraction(system);
    let mut bound = cfg.size_bound_start;
    loop {
        let script = emit_nat(&ints, bound);
        stats.size_variables = script.variable_count();
        stats.size_assertions = script.assertion_count();
        stats.size_attempts += 1;
        match run_solver(&script, &cfg.solver)? {
            SolverOutcome::Sat(raw) => {
                let mut out = BTreeMap::new();
                for v in &system.schedule_vars {
                    let key = format!("n_{}", v.name);
                    let val = raw
                        .get(&key)
                        .and_then(q_to_u64)
                        .ok_or_else(|| PipelineError::ModelRejected(format!("no size for {key}")))?;
                    out.insert(v.name.clone(), val);
                }
                return Ok(out);
            }
            SolverOutcome::Unsat => {
                if bound >= cfg.size_bound_max {
                    return Err(PipelineError::SizeUnsat { bound });
                }
                bound += 1;
            }
            SolverOutcome::Timeout => return Err(PipelineError::Timeout("size phase")),
        }
    }
}

// ---------------------------------------------------------------------------
// Pipeline augmentation

/// Add Pipe constraints for every schedule in the system: every schedule
/// variable, every context annotation and every annotation of the judgment's
/// type.
pub fn augment_with_pipes(j: &Judgment) -> ConstraintSystem {
    let mut system = j.system.clone();
    let mut seen: Vec<SemiringExpr> = Vec::new();
    let mut push = |system: &mut ConstraintSystem, e: &SemiringExpr| {
        if !seen.contains(e) {
            seen.push(e.clone());
            system.constraints.push(Constraint::Pipe(e.clone()));
        }
    };
    for v in &system.schedule_vars.clone() {
        push(&mut system, &SemiringExpr::Var(v.name.clone()));
    }
    for e in &j.context {
        push(&mut system, &e.annotation);
        let mut anns = Vec::new();
        e.ty.annotations(&mut anns);
        for a in anns {
            push(&mut system, a);
        }
    }
    let mut anns = Vec::new();
    j.ty.annotations(&mut anns);
    for a in anns {
        push(&mut system, a);
    }
    system
}

// ---------------------------------------------------------------------------
// Stage phase

/// Expand an expression to its list of composition chains, one per stage of
/// the (size-resolved) multiset. Multiplication is the convolution of
/// Eq-style term lists, left factor outermost.
fn expr_chains(
    e: &SemiringExpr,
    sizes: &BTreeMap<String, u64>,
) -> Result<Vec<Chain>, PipelineError> {
    Ok(match e {
        SemiringExpr::Var(v) => {
            let n = *sizes
                .get(v)
                .ok_or_else(|| PipelineError::ModelRejected(format!("no size for schedule {v}")))?;
            (0..n).map(|i| vec![ChainAtom::Var(format!("{v}.{i}"))]).collect()
        }
        SemiringExpr::Const(s) => s
            .stages()
            .into_iter()
            .map(|st| vec![ChainAtom::Const(st)])
            .collect(),
        SemiringExpr::Singleton(StageExpr::Var(v)) => vec![vec![ChainAtom::Var(v.clone())]],
        SemiringExpr::Singleton(StageExpr::Const(s)) => vec![vec![ChainAtom::Const(s.clone())]],
        SemiringExpr::Add(a, b) => {
            let mut out = expr_chains(a, sizes)?;
            out.extend(expr_chains(b, sizes)?);
            out
        }
        SemiringExpr::Mul(a, b) => {
            let left = expr_chains(a, sizes)?;
            let right = expr_chains(b, sizes)?;
            let mut out = Vec::with_capacity(left.len() * right.len());
            for l in &left {
                for r in &right {
                    let mut c = l.clone();
                    c.extend(r.iter().cloned());
                    out.push(c);
                }
            }
            out
        }
    })
}

/// Permutation sites: equalities and pipe chains whose stage pairing is
/// guessed. Ranks are cycled lexicographically on retry.
#[derive(Debug, Clone, Default)]
pub struct OrderGuess {
    ranks: Vec<u64>,
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product::<u64>().max(1)
}

fn unrank_permutation(n: usize, rank: u64) -> Vec<usize> {
    let mut items: Vec<usize> = (0..n).collect();
    let mut rank = rank % factorial(n);
    let mut out = Vec::with_capacity(n);
    for i in (1..=n).rev() {
        let f = factorial(i - 1);
        let idx = (rank / f) as usize;
        rank %= f;
        out.push(items.remove(idx));
    }
    out
}

struct StageLowering {
    real: RealSystem,
    sites: usize,
}

fn lower_stages(
    system: &ConstraintSystem,
    sizes: &BTreeMap<String, u64>,
    cfg: &SolveConfig,
    guess: &OrderGuess,
) -> Result<StageLowering, PipelineError> {
    let mut real = RealSystem::default();
    for v in &system.schedule_vars {
        let n = sizes.get(&v.name).copied().unwrap_or(0);
        for i in 0..n {
            real.vars.push(format!("{}.{i}", v.name));
        }
    }
    for v in &system.stage_vars {
        real.vars.push(v.clone());
    }
    if system.stage_vars.iter().any(|v| v == "w") {
        real.pins.push((
            "w".into(),
            Some(cfg.write_scale.clone()),
            cfg.write_phase.clone(),
        ));
    }
    let mut site = 0usize;
    let rank_for = |site: &mut usize| -> u64 {
        let r = guess.ranks.get(*site).copied().unwrap_or(0);
        *site += 1;
        r
    };
    for c in &system.constraints {
        match c {
            Constraint::SemiringEq(a, b) => {
                let left = expr_chains(a, sizes)?;
                let right = expr_chains(b, sizes)?;
                if left.len() != right.len() {
                    return Err(PipelineError::ModelRejected(format!(
                        "size model inconsistent for `{c}`: {} vs {} stages",
                        left.len(),
                        right.len()
                    )));
                }
                if left.is_empty() {
                    continue;
                }
                let perm = if left.len() > 1 {
                    unrank_permutation(right.len(), rank_for(&mut site))
                } else {
                    vec![0]
                };
                for (i, l) in left.into_iter().enumerate() {
                    real.constraints
                        .push(RealConstraint::ChainEq(l, right[perm[i]].clone()));
                }
            }
            Constraint::StagePred(p) => {
                let atom = |x: &StageExpr| -> Chain {
                    match x {
                        StageExpr::Var(v) => vec![ChainAtom::Var(v.clone())],
                        StageExpr::Const(s) => vec![ChainAtom::Const(s.clone())],
                    }
                };
                match p {
                    StagePred::NeqIdentity(x) => {
                        real.constraints.push(RealConstraint::NeqIdentity(atom(x)))
                    }
                    StagePred::Leq(x, y) => real
                        .constraints
                        .push(RealConstraint::Leq(atom(x), atom(y))),
                    StagePred::StrictFifo(x, y) => real
                        .constraints
                        .push(RealConstraint::StrictFifo(atom(x), atom(y))),
                    StagePred::StrictlyBefore(x, y) => real
                        .constraints
                        .push(RealConstraint::StrictlyBefore(atom(x), atom(y))),
                    StagePred::NoZeroStage(e) => {
                        for chain in expr_chains(e, sizes)? {
                            real.constraints.push(RealConstraint::NonZeroScale(chain));
                        }
                    }
                }
            }
            Constraint::Pipe(e) => {
                let chains = expr_chains(e, sizes)?;
                if chains.len() < 2 {
                    continue;
                }
                // A pipe over a bare schedule variable orders its own fresh
                // slots: the identity chain is complete. Composite schedules
                // get a guessed order.
                let perm = if matches!(e, SemiringExpr::Var(_)) {
                    (0..chains.len()).collect()
                } else {
                    unrank_permutation(chains.len(), rank_for(&mut site))
                };
                for w in perm.windows(2) {
                    real.constraints.push(RealConstraint::StrictFifo(
                        chains[w[0]].clone(),
                        chains[w[1]].clone(),
                    ));
                }
            }
            Constraint::SizeEq(..) => {}
        }
    }
    Ok(StageLowering { real, sites: site })
}

fn advance_guess(guess: &mut OrderGuess, sites: usize, attempt: u64) {
    if sites == 0 {
        return;
    }
    guess.ranks.resize(sites, 0);
    let slot = ((attempt - 1) as usize) % sites;
    guess.ranks[slot] += 1;
}

fn model_from_raw(
    system: &ConstraintSystem,
    sizes: &BTreeMap<String, u64>,
    raw: &BTreeMap<String, Q>,
) -> Result<Model, PipelineError> {
    let mut model = Model::default();
    let stage_of = |name: &str| -> Result<Stage, PipelineError> {
        let s = raw
            .get(&format!("{name}_s"))
            .cloned()
            .unwrap_or_else(Q::zero);
        let p = raw
            .get(&format!("{name}_p"))
            .cloned()
            .unwrap_or_else(Q::zero);
        Stage::new(s, p).map_err(|e| PipelineError::ModelRejected(e.to_string()))
    };
    for v in &system.stage_vars {
        model.stages.insert(v.clone(), stage_of(v)?);
    }
    for v in &system.schedule_vars {
        let n = sizes.get(&v.name).copied().unwrap_or(0);
        let mut sched = Schedule::zero();
        for i in 0..n {
            sched.insert(stage_of(&format!("{}.{i}", v.name))?, 1);
        }
        model.schedules.insert(v.name.clone(), sched);
        model.sizes.insert(v.name.clone(), n);
    }
    Ok(model)
}

/// Solve the stage phase: expand schedules to their known sizes, translate to
/// real arithmetic under a guessed stage order, and retry with the next order
/// on unsat.
pub fn solve_stages(
    system: &ConstraintSystem,
    sizes: &BTreeMap<String, u64>,
    cfg: &SolveConfig,
    stats: &mut SolveStats,
) -> Result<Model, PipelineError> {
    let mut guess = OrderGuess::default();
    let mut attempt: u64 = 0;
    let batch = if cfg.sequential { 1 } else { 4 };
    loop {
        // Build the next batch of candidate lowerings.
        let mut scripts = Vec::new();
        let mut sites = 0;
        while scripts.len() < batch && attempt + (scripts.len() as u64) < cfg.order_retry_budget {
            let idx = attempt + scripts.len() as u64;
            if idx > 0 {
                advance_guess(&mut guess, sites, idx);
            }
            let lowering = lower_stages(system, sizes, cfg, &guess)?;
            sites = lowering.sites;
            let script = emit_real(&lowering.real);
            stats.stage_variables = script.variable_count();
            stats.stage_assertions = script.assertion_count();
            scripts.push(script);
            if sites == 0 {
                break;
            }
        }
        if scripts.is_empty() {
            return Err(PipelineError::PipelineUnsat { attempts: attempt });
        }
        let n = scripts.len() as u64;
        let outcomes: Vec<Result<SolverOutcome, SmtError>> = if scripts.len() == 1 {
            vec![run_solver(&scripts[0], &cfg.solver)]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = scripts
                    .iter()
                    .map(|s| {
                        let solver = cfg.solver.clone();
                        scope.spawn(move || run_solver(s, &solver))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            })
        };
        let mut saw_timeout = false;
        for outcome in outcomes {
            match outcome? {
                SolverOutcome::Sat(raw) => {
                    stats.stage_attempts = attempt + 1;
                    let model = model_from_raw(system, sizes, &raw)?;
                    let bad = violated_constraints(system, &model)
                        .map_err(|e| PipelineError::ModelRejected(e.to_string()))?;
                    if !bad.is_empty() {
                        return Err(PipelineError::ModelRejected(format!(
                            "exact re-check failed: {}",
                            bad.join("; ")
                        )));
                    }
                    return Ok(model);
                }
                SolverOutcome::Unsat => {
                    attempt += 1;
                }
                SolverOutcome::Timeout => {
                    saw_timeout = true;
                    attempt += 1;
                }
            }
        }
        if sites == 0 || attempt >= cfg.order_retry_budget {
            if saw_timeout {
                return Err(PipelineError::Timeout("stage phase"));
            }
            return Err(PipelineError::PipelineUnsat { attempts: attempt });
        }
        let _ = n;
    }
}

// ---------------------------------------------------------------------------
// End-to-end driver

#[derive(Debug)]
pub struct InferOutcome {
    pub source: SourceFile,
    pub judgment: Judgment,
    /// The system actually solved (pipe-augmented when requested).
    pub solved_system: ConstraintSystem,
    pub sizes: BTreeMap<String, u64>,
    pub model: Model,
    pub concrete: ConcreteJudgment,
    pub stats: SolveStats,
}

/// parse → simple types → generate.
pub fn prepare(source: &str) -> Result<(SourceFile, Judgment), PipelineError> {
    let file = crate::syntax::parse_file(source)?;
    let simple = infer_simple(&file.term, &file.decls)?;
    let judgment = generate(&file.term, &simple, &file.decls, &file.size_pins)?;
    Ok((file, judgment))
}

/// Full pipeline on a source file; `extra_pins` lets callers assert known
/// values (schedules or stages) on top of the generated system.
pub fn infer_end_to_end_with_pins(
    source: &str,
    cfg: &SolveConfig,
    extra_pins: &[(String, SemiringElement)],
) -> Result<InferOutcome, PipelineError> {
    let started = Instant::now();
    let (file, judgment) = prepare(source)?;
    let mut system = if cfg.pipeline {
        augment_with_pipes(&judgment)
    } else {
        judgment.system.clone()
    };
    for (name, value) in extra_pins {
        let lhs = if system.stage_vars.iter().any(|v| v == name) {
            SemiringExpr::Singleton(StageExpr::Var(name.clone()))
        } else {
            SemiringExpr::Var(name.clone())
        };
        let rhs = match value {
            SemiringElement::Sched(s) => SemiringExpr::Const(s.clone()),
            other => {
                return Err(PipelineError::ModelRejected(format!(
                    "cannot pin non-schedule value {other:?}"
                )))
            }
        };
        system.constraints.push(Constraint::SemiringEq(lhs, rhs));
    }
    if cfg.pipeline {
        for e in &judgment.context {
            if let SemiringExpr::Const(s) = &e.annotation {
                if !s.is_pipeline() {
                    return Err(PipelineError::NotAPipeline(format!("{s}")));
                }
            }
        }
    }
    let mut stats = SolveStats::default();
    let sizes = solve_sizes(&system, cfg, &mut stats)?;
    let model = solve_stages(&system, &sizes, cfg, &mut stats)?;
    let concrete = substitute(&judgment, &model)?;
    stats.wall_ms = started.elapsed().as_millis();
    Ok(InferOutcome {
        source: file,
        judgment,
        solved_system: system,
        sizes,
        model,
        concrete,
        stats,
    })
}

pub fn infer_end_to_end(source: &str, cfg: &SolveConfig) -> Result<InferOutcome, PipelineError> {
    infer_end_to_end_with_pins(source, cfg, &[])
}

// ---------------------------------------------------------------------------
// Scalar instances (SCC sizes over ℕ, affine usage over {0,1,∞})

fn zoi_smt(e: &IntExpr) -> String {
    match e {
        IntExpr::Lit(n) => n.min(&2).to_string(),
        IntExpr::Var(v) => v.clone(),
        IntExpr::Add(a, b) => {
            let (a, b) = (zoi_smt(a), zoi_smt(b));
            format!("(ite (>= (+ {a} {b}) 2) 2 (+ {a} {b}))")
        }
        IntExpr::Mul(a, b) => {
            let (a, b) = (zoi_smt(a), zoi_smt(b));
            format!("(ite (>= (* {a} {b}) 2) 2 (* {a} {b}))")
        }
    }
}

/// Emit the size system in saturating {0,1,∞} arithmetic ({0,1,2} integers).
pub fn emit_zoi(sys: &IntSystem) -> SmtScript {
    let mut s = SmtScript::new("QF_NIA");
    for (v, lo) in &sys.vars {
        s.declare(v, "Int");
        s.assert(format!("(>= {v} {lo})"));
        s.assert(format!("(<= {v} 2)"));
    }
    for (v, n) in &sys.pins {
        s.assert(format!("(= {v} {})", n.min(&2)));
    }
    for (a, b) in &sys.equations {
        s.assert(format!("(= {} {})", zoi_smt(a), zoi_smt(b)));
    }
    s
}

/// Solve only the scalar abstraction of the system, in the chosen instance.
pub fn solve_scalar(
    system: &ConstraintSystem,
    instance: Instance,
    cfg: &SolveConfig,
    stats: &mut SolveStats,
) -> Result<BTreeMap<String, SemiringElement>, PipelineError> {
    match instance {
        Instance::Schedule => Err(PipelineError::ModelRejected(
            "scalar solving applies to the nat/zoi instances".into(),
        )),
        Instance::Nat => {
            let sizes = solve_sizes(system, cfg, stats)?;
            Ok(sizes
                .into_iter()
                .map(|(k, v)| (k, SemiringElement::Nat(v)))
                .collect())
        }
        Instance::Zoi => {
            let ints = size_abstraction(system);
            let script = emit_zoi(&ints);
            stats.size_variables = script.variable_count();
            stats.size_assertions = script.assertion_count();
            stats.size_attempts += 1;
            match run_solver(&script, &cfg.solver)? {
                SolverOutcome::Sat(raw) => {
                    let mut out = BTreeMap::new();
                    for v in &system.schedule_vars {
                        let val = raw
                            .get(&format!("n_{}", v.name))
                            .and_then(q_to_u64)
                            .ok_or_else(|| {
                                PipelineError::ModelRejected(format!("no value for {}", v.name))
                            })?;
                        let z = match val {
                            0 => Zoi::Zero,
                            1 => Zoi::One,
                            _ => Zoi::Inf,
                        };
                        out.insert(v.name.clone(), SemiringElement::Zoi(z));
                    }
                    Ok(out)
                }
                SolverOutcome::Unsat => Err(PipelineError::SizeUnsat { bound: 2 }),
                SolverOutcome::Timeout => Err(PipelineError::Timeout("zoi phase")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{SemiringExpr, StageExpr};

    struct Counter(u32);

    impl VarSource for Counter {
        fn stage_param(&mut self, prefix: &str) -> StageExpr {
            self.0 += 1;
            StageExpr::Var(format!("{prefix}{}", self.0))
        }
        fn sched_param(&mut self, prefix: &str) -> SemiringExpr {
            self.0 += 1;
            SemiringExpr::Var(format!("{prefix}{}", self.0))
        }
        fn need_write_stage(&mut self) {}
    }

    #[test]
    fn op_constant_side_conditions() {
        let mut vs = Counter(0);
        let (_ty, params, side) =
            constant_constraints(&mut vs, ConstId::Op, &SimpleType::Exp).unwrap();
        assert_eq!(params.len(), 2);
        assert_eq!(side.len(), 2);
        assert!(matches!(
            side[0],
            Constraint::StagePred(StagePred::NeqIdentity(_))
        ));
    }

    #[test]
    fn skip_constant_is_unconstrained() {
        let mut vs = Counter(0);
        let (ty, params, side) =
            constant_constraints(&mut vs, ConstId::Skip, &SimpleType::Com).unwrap();
        assert_eq!(ty, ResourceType::com());
        assert!(params.is_empty() && side.is_empty());
    }

    #[test]
    fn new_constant_no_zero_stage() {
        let mut vs = Counter(0);
        let skel = SimpleType::arrow(
            SimpleType::arrow(
                SimpleType::Exp,
                SimpleType::arrow(SimpleType::arrow(SimpleType::Exp, SimpleType::Com), SimpleType::Com),
            ),
            SimpleType::Com,
        );
        let (_ty, params, side) = constant_constraints(&mut vs, ConstId::New, &skel).unwrap();
        assert_eq!(params.len(), 2);
        assert!(matches!(
            side[0],
            Constraint::StagePred(StagePred::NoZeroStage(_))
        ));
    }

    #[test]
    fn permutation_unranking_is_lexicographic() {
        assert_eq!(unrank_permutation(3, 0), vec![0, 1, 2]);
        assert_eq!(unrank_permutation(3, 1), vec![0, 2, 1]);
        assert_eq!(unrank_permutation(3, 5), vec![2, 1, 0]);
        assert_eq!(unrank_permutation(3, 6), vec![0, 1, 2]);
    }
}
