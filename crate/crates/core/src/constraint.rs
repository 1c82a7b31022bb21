//! Constraint language over schedule expressions, the judgment structure
//! carrying a generated system, and exact model checking of constraints.

use std::fmt;

use thiserror::Error;

use crate::expr::{eval, eval_stage, Model, SemiringExpr, StageExpr};
use crate::semiring::{Schedule, Stage};
use crate::syntax::{ConstParam, Ident, ResourceType, Term};

/// Stage-level side conditions attached by constants and orderings.
#[derive(Debug, Clone, PartialEq)]
pub enum StagePred {
    /// x ≠ I
    NeqIdentity(StageExpr),
    /// Egli-Milner order x ≤ y
    Leq(StageExpr, StageExpr),
    /// Strictly FIFO x ◁ y
    StrictFifo(StageExpr, StageExpr),
    /// x < y : Egli-Milner plus disjoint intervals
    StrictlyBefore(StageExpr, StageExpr),
    /// No stage of the schedule has scale 0 (the `new` rule's `0 ∉ K`).
    NoZeroStage(SemiringExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    SemiringEq(SemiringExpr, SemiringExpr),
    StagePred(StagePred),
    /// The schedule must be a proper ◁-ordered set.
    Pipe(SemiringExpr),
    /// Multiset size pinned by the source header.
    SizeEq(SemiringExpr, u64),
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::SemiringEq(a, b) => write!(f, "(= {a} {b})"),
            Constraint::StagePred(StagePred::NeqIdentity(x)) => write!(f, "(neq-I {x})"),
            Constraint::StagePred(StagePred::Leq(x, y)) => write!(f, "(em-leq {x} {y})"),
            Constraint::StagePred(StagePred::StrictFifo(x, y)) => write!(f, "(fifo< {x} {y})"),
            Constraint::StagePred(StagePred::StrictlyBefore(x, y)) => write!(f, "(< {x} {y})"),
            Constraint::StagePred(StagePred::NoZeroStage(j)) => write!(f, "(no-zero-stage {j})"),
            Constraint::Pipe(j) => write!(f, "(pipe {j})"),
            Constraint::SizeEq(j, n) => write!(f, "(size= {j} {n})"),
        }
    }
}

/// A schedule unknown of the system. Occurrence-use variables carry a lower
/// bound of one stage; anything else may resolve to the empty schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedVar {
    pub name: String,
    pub is_occurrence: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSystem {
    pub constraints: Vec<Constraint>,
    pub schedule_vars: Vec<SchedVar>,
    pub stage_vars: Vec<String>,
    pub size_pins: Vec<(String, u64)>,
}

impl ConstraintSystem {
    /// One constraint per line, stable emission order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in &self.constraints {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }
}

/// How an occurrence's leaf use was fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccurrenceKind {
    /// λ-bound or concretely declared: the identity axiom's 𝟙.
    Unit,
    /// Acceptor in head position: the write stage.
    WriteStage,
    /// Open-port free identifier: a fresh schedule unknown.
    Open,
}

/// Record of one identifier occurrence in the linearized term.
#[derive(Debug, Clone, PartialEq)]
pub struct Occurrence {
    pub owner: Ident,
    pub index: u32,
    pub kind: OccurrenceKind,
    pub use_expr: SemiringExpr,
    /// Total contribution to the owner's context annotation: the leaf use
    /// multiplied by every arrow annotation along the application spine.
    pub product: SemiringExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextEntry {
    pub name: Ident,
    pub annotation: SemiringExpr,
    pub ty: ResourceType,
}

/// ⟨Γ ⊢ M : θ | χ⟩ plus the linearization record needed to rebuild the
/// stratified derivation.
#[derive(Debug, Clone, PartialEq)]
pub struct Judgment {
    pub context: Vec<ContextEntry>,
    pub term: Term,
    pub ty: ResourceType,
    pub system: ConstraintSystem,
    pub occurrences: Vec<Occurrence>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SubstError {
    #[error("{0}")]
    Eval(#[from] crate::expr::EvalError),
    #[error("annotation did not become concrete: {0}")]
    NotConcrete(String),
}

fn subst_type(ty: &ResourceType, model: &Model) -> Result<ResourceType, SubstError> {
    Ok(match ty {
        ResourceType::Base(b) => ResourceType::Base(*b),
        ResourceType::Arrow(ann, d, c) => ResourceType::arrow(
            SemiringExpr::Const(eval(ann, model)?),
            subst_type(d, model)?,
            subst_type(c, model)?,
        ),
    })
}

fn subst_term(term: &Term, model: &Model) -> Result<Term, SubstError> {
    Ok(match term {
        Term::Var(x) => Term::Var(x.clone()),
        Term::Lambda(x, ann, b) => Term::Lambda(
            x.clone(),
            match ann {
                Some(t) => Some(subst_type(t, model)?),
                None => None,
            },
            Box::new(subst_term(b, model)?),
        ),
        Term::App(f, a) => Term::app(subst_term(f, model)?, subst_term(a, model)?),
        Term::Const(c, params) => {
            let mut out = Vec::with_capacity(params.len());
            for p in params {
                out.push(match p {
                    ConstParam::Stage(se) => ConstParam::Stage(StageExpr::Const(eval_stage(se, model)?)),
                    ConstParam::Sched(e) => ConstParam::Sched(SemiringExpr::Const(eval(e, model)?)),
                });
            }
            Term::Const(*c, out)
        }
    })
}

/// A judgment with every annotation evaluated to a concrete schedule.
/// One linearized occurrence with its concrete leaf use and its total
/// contribution to the owner's context annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteOccurrence {
    pub owner: Ident,
    pub index: u32,
    pub leaf_use: Schedule,
    pub product: Schedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteJudgment {
    pub context: Vec<(Ident, Schedule, ResourceType)>,
    pub term: Term,
    pub ty: ResourceType,
    pub occurrence_uses: Vec<ConcreteOccurrence>,
    /// Concrete write stage, when the term mentions the store.
    pub write_stage: Option<Stage>,
}

/// Textual substitution of a model into the judgment; every semiring
/// expression is evaluated to its concrete value.
pub fn substitute(j: &Judgment, model: &Model) -> Result<ConcreteJudgment, SubstError> {
    let mut context = Vec::new();
    for e in &j.context {
        context.push((
            e.name.clone(),
            eval(&e.annotation, model)?,
            subst_type(&e.ty, model)?,
        ));
    }
    let term = subst_term(&j.term, model)?;
    let ty = subst_type(&j.ty, model)?;
    let mut occurrence_uses = Vec::new();
    for o in &j.occurrences {
        occurrence_uses.push(ConcreteOccurrence {
            owner: o.owner.clone(),
            index: o.index,
            leaf_use: eval(&o.use_expr, model)?,
            product: eval(&o.product, model)?,
        });
    }
    let write_stage = model.stages.get("w").cloned();
    Ok(ConcreteJudgment {
        context,
        term,
        ty,
        occurrence_uses,
        write_stage,
    })
}

/// Evaluate one constraint exactly under a total model.
pub fn eval_constraint(c: &Constraint, model: &Model) -> Result<bool, crate::expr::EvalError> {
    Ok(match c {
        Constraint::SemiringEq(a, b) => eval(a, model)? == eval(b, model)?,
        Constraint::StagePred(p) => match p {
            StagePred::NeqIdentity(x) => !eval_stage(x, model)?.is_identity(),
            StagePred::Leq(x, y) => eval_stage(x, model)?.orders(&eval_stage(y, model)?).egli_milner_leq,
            StagePred::StrictFifo(x, y) => eval_stage(x, model)?.orders(&eval_stage(y, model)?).strict_fifo,
            StagePred::StrictlyBefore(x, y) => {
                eval_stage(x, model)?.orders(&eval_stage(y, model)?).strictly_before
            }
            StagePred::NoZeroStage(j) => {
                use num::Zero;
                eval(j, model)?.entries().all(|(s, _)| !s.scale().is_zero())
            }
        },
        Constraint::Pipe(j) => eval(j, model)?.is_pipeline(),
        Constraint::SizeEq(j, n) => eval(j, model)?.size() == *n,
    })
}

/// Re-evaluate every constraint in exact rational arithmetic; returns the
/// pretty-printed constraints that fail.
pub fn violated_constraints(
    system: &ConstraintSystem,
    model: &Model,
) -> Result<Vec<String>, crate::expr::EvalError> {
    let mut bad = Vec::new();
    for c in &system.constraints {
        if !eval_constraint(c, model)? {
            bad.push(c.to_string());
        }
    }
    Ok(bad)
}
