//! Symbolic stage and schedule expressions: the language type annotations and
//! constraints are written in before a solver model makes them concrete.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::semiring::{Schedule, Stage};

/// Kind of an annotation unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarKind {
    Schedule,
    Stage,
    Size,
}

/// A named unknown, registered in the run's symbol table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AnnotVar {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum StageExpr {
    Var(String),
    Const(Stage),
}

impl StageExpr {
    pub fn write_stage() -> StageExpr {
        StageExpr::Var("w".into())
    }
}

/// Schedule-valued expression over unknowns, concrete schedules, + and ×.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SemiringExpr {
    Var(String),
    Const(Schedule),
    /// Singleton schedule `[x]` of a (possibly unknown) stage.
    Singleton(StageExpr),
    Add(Box<SemiringExpr>, Box<SemiringExpr>),
    Mul(Box<SemiringExpr>, Box<SemiringExpr>),
}

impl SemiringExpr {
    pub fn one() -> SemiringExpr {
        SemiringExpr::Const(Schedule::one())
    }

    pub fn zero() -> SemiringExpr {
        SemiringExpr::Const(Schedule::zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, SemiringExpr::Const(s) if *s == Schedule::one())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SemiringExpr::Const(s) if s.is_zero())
    }

    /// Sum with unit elision.
    pub fn add(self, other: SemiringExpr) -> SemiringExpr {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        SemiringExpr::Add(Box::new(self), Box::new(other))
    }

    /// Product with unit elision.
    pub fn mul(self, other: SemiringExpr) -> SemiringExpr {
        if self.is_one() {
            return other;
        }
        if other.is_one() {
            return self;
        }
        if self.is_zero() || other.is_zero() {
            return SemiringExpr::zero();
        }
        SemiringExpr::Mul(Box::new(self), Box::new(other))
    }

    pub fn sum<I: IntoIterator<Item = SemiringExpr>>(terms: I) -> SemiringExpr {
        let mut it = terms.into_iter();
        match it.next() {
            None => SemiringExpr::zero(),
            Some(first) => it.fold(first, |acc, t| acc.add(t)),
        }
    }

    pub fn schedule_vars(&self, out: &mut Vec<String>) {
        match self {
            SemiringExpr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            SemiringExpr::Const(_) => {}
            SemiringExpr::Singleton(_) => {}
            SemiringExpr::Add(a, b) | SemiringExpr::Mul(a, b) => {
                a.schedule_vars(out);
                b.schedule_vars(out);
            }
        }
    }

    pub fn stage_vars(&self, out: &mut Vec<String>) {
        match self {
            SemiringExpr::Singleton(StageExpr::Var(v)) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            SemiringExpr::Add(a, b) | SemiringExpr::Mul(a, b) => {
                a.stage_vars(out);
                b.stage_vars(out);
            }
            _ => {}
        }
    }

    pub fn is_concrete(&self) -> bool {
        match self {
            SemiringExpr::Var(_) => false,
            SemiringExpr::Const(_) => true,
            SemiringExpr::Singleton(StageExpr::Const(_)) => true,
            SemiringExpr::Singleton(StageExpr::Var(_)) => false,
            SemiringExpr::Add(a, b) | SemiringExpr::Mul(a, b) => a.is_concrete() && b.is_concrete(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unknown {kind} variable `{name}` is not covered by the model")]
    Missing { kind: &'static str, name: String },
}

/// Assignment of concrete values to annotation unknowns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Model {
    pub schedules: BTreeMap<String, Schedule>,
    pub stages: BTreeMap<String, Stage>,
    pub sizes: BTreeMap<String, u64>,
}

impl Model {
    pub fn stage(&self, name: &str) -> Result<Stage, EvalError> {
        self.stages.get(name).cloned().ok_or(EvalError::Missing {
            kind: "stage",
            name: name.into(),
        })
    }

    pub fn schedule(&self, name: &str) -> Result<Schedule, EvalError> {
        self.schedules.get(name).cloned().ok_or(EvalError::Missing {
            kind: "schedule",
            name: name.into(),
        })
    }

    pub fn merge(&mut self, other: Model) {
        self.schedules.extend(other.schedules);
        self.stages.extend(other.stages);
        self.sizes.extend(other.sizes);
    }
}

pub fn eval_stage(e: &StageExpr, model: &Model) -> Result<Stage, EvalError> {
    match e {
        StageExpr::Var(v) => model.stage(v),
        StageExpr::Const(s) => Ok(s.clone()),
    }
}

/// Evaluate to a concrete schedule; exact arithmetic throughout.
pub fn eval(e: &SemiringExpr, model: &Model) -> Result<Schedule, EvalError> {
    match e {
        SemiringExpr::Var(v) => model.schedule(v),
        SemiringExpr::Const(s) => Ok(s.clone()),
        SemiringExpr::Singleton(se) => Ok(Schedule::singleton(eval_stage(se, model)?)),
        SemiringExpr::Add(a, b) => Ok(eval(a, model)?.add(&eval(b, model)?)),
        SemiringExpr::Mul(a, b) => Ok(eval(a, model)?.mul(&eval(b, model)?)),
    }
}

/// Replace solved unknowns by constants, leaving unsolved ones symbolic.
pub fn subst(e: &SemiringExpr, model: &Model) -> SemiringExpr {
    match e {
        SemiringExpr::Var(v) => match model.schedules.get(v) {
            Some(s) => SemiringExpr::Const(s.clone()),
            None => e.clone(),
        },
        SemiringExpr::Const(_) => e.clone(),
        SemiringExpr::Singleton(StageExpr::Var(v)) => match model.stages.get(v) {
            Some(s) => SemiringExpr::Singleton(StageExpr::Const(s.clone())),
            None => e.clone(),
        },
        SemiringExpr::Singleton(StageExpr::Const(_)) => e.clone(),
        SemiringExpr::Add(a, b) => subst(a, model).add(subst(b, model)),
        SemiringExpr::Mul(a, b) => subst(a, model).mul(subst(b, model)),
    }
}

impl fmt::Display for StageExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageExpr::Var(v) => write!(f, "{v}"),
            StageExpr::Const(s) if s.is_identity() => write!(f, "I"),
            StageExpr::Const(s) => write!(f, "{s}"),
        }
    }
}

impl fmt::Display for SemiringExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemiringExpr::Var(v) => write!(f, "{v}"),
            SemiringExpr::Const(s) => write!(f, "{s}"),
            SemiringExpr::Singleton(se) => write!(f, "[{se}]"),
            SemiringExpr::Add(a, b) => write!(f, "(+ {a} {b})"),
            SemiringExpr::Mul(a, b) => write!(f, "(* {a} {b})"),
        }
    }
}
