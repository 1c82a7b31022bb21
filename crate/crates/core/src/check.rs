//! Derivation checking: rebuild the unique stratified derivation of a fully
//! concrete judgment and verify every rule's semiring side condition by
//! exact evaluation. Weakening and contraction sit at the root; abstractions
//! use Abs-con/Abs-weak according to binder occurrence.

use std::collections::HashMap;
use std::fmt::Write as _;

use num::Zero;
use thiserror::Error;

use crate::constraint::ConcreteJudgment;
use crate::expr::SemiringExpr;
use crate::semiring::{Schedule, Stage};
use crate::simple::{infer_simple, SimpleType};
use crate::syntax::{
    pretty_schedule, pretty_type, BaseType, ConstId, ConstParam, Decl, Ident, ResourceType, Term,
};

#[derive(Debug, Error, PartialEq)]
pub enum RejectReason {
    #[error("annotation sum mismatch for `{name}`: expected {expected}, derivation gives {derived}")]
    AnnotationSumMismatch {
        name: String,
        expected: String,
        derived: String,
    },
    #[error("scaling mismatch at `{at}`: expected {expected}, found {found}")]
    ScalingMismatch {
        at: String,
        expected: String,
        found: String,
    },
    #[error("context/term variable mismatch: {0}")]
    ContextVarMismatch(String),
    #[error("non-contractive stage in `{0}`")]
    NonContractiveStage(String),
    #[error("constant side condition violated: {0}")]
    ConstantSideCondition(String),
    #[error("applied λ-abstraction with unconstrained weakening annotation")]
    UnresolvedWeakening,
    #[error("occurrence record mismatch: {0}")]
    OccurrenceMismatch(String),
    #[error("acceptor used but no write stage recorded in the judgment")]
    MissingWriteStage,
    #[error("symbolic annotation in a supposedly concrete judgment: {0}")]
    NotConcrete(String),
    #[error("malformed term: {0}")]
    Malformed(String),
}

// ---------------------------------------------------------------------------
// Partial types: annotations possibly left free by weakening

#[derive(Debug, Clone, PartialEq)]
enum PAnn {
    Known(Schedule),
    Free,
}

#[derive(Debug, Clone, PartialEq)]
enum PTy {
    Base(BaseType),
    Arrow(PAnn, Box<PTy>, Box<PTy>),
}

impl PTy {
    fn of_resource(t: &ResourceType) -> Result<PTy, RejectReason> {
        match t {
            ResourceType::Base(b) => Ok(PTy::Base(*b)),
            ResourceType::Arrow(ann, d, c) => {
                let SemiringExpr::Const(s) = ann else {
                    return Err(RejectReason::NotConcrete(ann.to_string()));
                };
                Ok(PTy::Arrow(
                    PAnn::Known(s.clone()),
                    Box::new(PTy::of_resource(d)?),
                    Box::new(PTy::of_resource(c)?),
                ))
            }
        }
    }

    fn to_resource(&self) -> Result<ResourceType, RejectReason> {
        match self {
            PTy::Base(b) => Ok(ResourceType::Base(*b)),
            PTy::Arrow(PAnn::Free, ..) => Err(RejectReason::UnresolvedWeakening),
            PTy::Arrow(PAnn::Known(s), d, c) => Ok(ResourceType::arrow(
                SemiringExpr::Const(s.clone()),
                d.to_resource()?,
                c.to_resource()?,
            )),
        }
    }

    /// Merge two partial types; `Free` annotations are wildcards.
    fn merge(&self, other: &PTy) -> Option<PTy> {
        match (self, other) {
            (PTy::Base(a), PTy::Base(b)) if a == b => Some(PTy::Base(*a)),
            (PTy::Arrow(j1, d1, c1), PTy::Arrow(j2, d2, c2)) => {
                let j = match (j1, j2) {
                    (PAnn::Free, j) | (j, PAnn::Free) => j.clone(),
                    (PAnn::Known(a), PAnn::Known(b)) => {
                        if a == b {
                            PAnn::Known(a.clone())
                        } else {
                            return None;
                        }
                    }
                };
                Some(PTy::Arrow(j, Box::new(d1.merge(d2)?), Box::new(c1.merge(c2)?)))
            }
            _ => None,
        }
    }

    fn show(&self) -> String {
        match self.to_resource() {
            Ok(rt) => pretty_type(&rt),
            Err(_) => "<partially annotated>".into(),
        }
    }
}

// ---------------------------------------------------------------------------
// Derivations

/// One entry of a linear context: a single identifier occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEntry {
    /// Index into the judgment's occurrence list.
    pub occ: usize,
    pub owner: Ident,
    /// Product accumulated between the leaf and this node.
    pub annotation: Schedule,
    pub ty: ResourceType,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DNode {
    Identity,
    ConstIntro {
        id: ConstId,
        params: Vec<ConstParam>,
    },
    App {
        fun: Box<Derivation>,
        arg: Box<Derivation>,
        scale: Schedule,
    },
    AbsCon {
        binder: Ident,
        annotation: Schedule,
        parts: Vec<Schedule>,
        body: Box<Derivation>,
    },
    AbsWeak {
        binder: Ident,
        annotation: Schedule,
        body: Box<Derivation>,
    },
}

/// A stratified derivation node: linear context, subject term, type.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    pub node: DNode,
    pub ctx: Vec<LinearEntry>,
    pub term: Term,
    pub ty: ResourceType,
}

/// Root grouping: Contraction+ / Weakening+ down to the declared context.
#[derive(Debug, Clone, PartialEq)]
pub struct RootGroup {
    pub name: Ident,
    pub annotation: Schedule,
    pub parts: Vec<Schedule>,
    pub occs: Vec<usize>,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedDerivation {
    pub groups: Vec<RootGroup>,
    pub root: Derivation,
}

// ---------------------------------------------------------------------------
// Checker

struct Usage {
    occ: usize,
    owner: Ident,
    bound: bool,
    product: Schedule,
}

struct Checked {
    ty: PTy,
    usages: Vec<Usage>,
    der: Derivation,
}

struct Checker<'a> {
    j: &'a ConcreteJudgment,
    next_occ: usize,
    skel: Vec<SimpleType>,
    next_node: usize,
    write_stage: Option<Stage>,
    /// Occurrences whose recorded leaf use is the write stage; each must be
    /// consumed by an application head.
    pending_acc: Vec<usize>,
}

fn concrete_stage(p: &ConstParam) -> Result<Stage, RejectReason> {
    match p {
        ConstParam::Stage(crate::expr::StageExpr::Const(s)) => Ok(s.clone()),
        other => Err(RejectReason::NotConcrete(format!("{other:?}"))),
    }
}

fn concrete_sched_param(p: &ConstParam) -> Result<Schedule, RejectReason> {
    match p {
        ConstParam::Sched(SemiringExpr::Const(s)) => Ok(s.clone()),
        other => Err(RejectReason::NotConcrete(format!("{other:?}"))),
    }
}

fn base_of_simple(t: &SimpleType, what: &str) -> Result<BaseType, RejectReason> {
    match t {
        SimpleType::Com => Ok(BaseType::Com),
        SimpleType::Exp => Ok(BaseType::Exp),
        other => Err(RejectReason::Malformed(format!(
            "{what} instantiated at non-base type {other}"
        ))),
    }
}

impl<'a> Checker<'a> {
    fn take_skel(&mut self) -> SimpleType {
        let t = self.skel[self.next_node].clone();
        self.next_node += 1;
        t
    }

    fn const_type(&self, id: ConstId, params: &[ConstParam], skel: &SimpleType) -> Result<PTy, RejectReason> {
        let known = |s: Stage| PAnn::Known(Schedule::singleton(s));
        let base = |b: BaseType| Box::new(PTy::Base(b));
        match id {
            ConstId::One => Ok(PTy::Base(BaseType::Exp)),
            ConstId::Skip => Ok(PTy::Base(BaseType::Com)),
            ConstId::Comp | ConstId::Seq => {
                let [x, y] = params else {
                    return Err(RejectReason::Malformed(format!(
                        "{} needs 2 stage parameters",
                        id.name()
                    )));
                };
                let (x, y) = (concrete_stage(x)?, concrete_stage(y)?);
                if id == ConstId::Seq && !x.orders(&y).strictly_before {
                    return Err(RejectReason::ConstantSideCondition(format!(
                        "seq requires {x} < {y}"
                    )));
                }
                Ok(PTy::Arrow(
                    known(x),
                    base(BaseType::Com),
                    Box::new(PTy::Arrow(known(y), base(BaseType::Com), base(BaseType::Com))),
                ))
            }
            ConstId::Par => {
                let [x] = params else {
                    return Err(RejectReason::Malformed("par needs 1 stage parameter".into()));
                };
                let x = concrete_stage(x)?;
                Ok(PTy::Arrow(
                    known(x.clone()),
                    base(BaseType::Com),
                    Box::new(PTy::Arrow(known(x), base(BaseType::Com), base(BaseType::Com))),
                ))
            }
            ConstId::Op => {
                let [x, y] = params else {
                    return Err(RejectReason::Malformed("op needs 2 stage parameters".into()));
                };
                let (x, y) = (concrete_stage(x)?, concrete_stage(y)?);
                if x.is_identity() || y.is_identity() {
                    return Err(RejectReason::ConstantSideCondition(
                        "op stages must differ from the identity".into(),
                    ));
                }
                Ok(PTy::Arrow(
                    known(x),
                    base(BaseType::Exp),
                    Box::new(PTy::Arrow(known(y), base(BaseType::Exp), base(BaseType::Exp))),
                ))
            }
            ConstId::If => {
                let [x, y] = params else {
                    return Err(RejectReason::Malformed("if needs 2 stage parameters".into()));
                };
                let (x, y) = (concrete_stage(x)?, concrete_stage(y)?);
                if !x.orders(&y).strictly_before {
                    return Err(RejectReason::ConstantSideCondition(format!(
                        "if requires guard stage {x} < branch stage {y}"
                    )));
                }
                // skeleton: exp -> σ -> σ -> σ
                let SimpleType::Arrow(_, rest) = skel else {
                    return Err(RejectReason::Malformed("if skeleton".into()));
                };
                let SimpleType::Arrow(s, _) = &**rest else {
                    return Err(RejectReason::Malformed("if skeleton".into()));
                };
                let s = base_of_simple(s, "if")?;
                Ok(PTy::Arrow(
                    known(x),
                    base(BaseType::Exp),
                    Box::new(PTy::Arrow(
                        known(y.clone()),
                        base(s),
                        Box::new(PTy::Arrow(known(y), base(s), base(s))),
                    )),
                ))
            }
            ConstId::New => {
                let [jp, kp] = params else {
                    return Err(RejectReason::Malformed("new needs 2 schedule parameters".into()));
                };
                let (jj, kk) = (concrete_sched_param(jp)?, concrete_sched_param(kp)?);
                if kk.entries().any(|(s, _)| s.scale().is_zero()) {
                    return Err(RejectReason::ConstantSideCondition(
                        "new requires 0 ∉ K: write stages cannot be instantaneous".into(),
                    ));
                }
                let w = self
                    .write_stage
                    .clone()
                    .ok_or(RejectReason::MissingWriteStage)?;
                // skeleton: (exp -> (exp -> com) -> σ) -> σ
                let SimpleType::Arrow(_, s) = skel else {
                    return Err(RejectReason::Malformed("new skeleton".into()));
                };
                let s = base_of_simple(s, "new")?;
                let acc = PTy::Arrow(known(w), base(BaseType::Exp), base(BaseType::Com));
                let body = PTy::Arrow(
                    PAnn::Known(jj),
                    base(BaseType::Exp),
                    Box::new(PTy::Arrow(PAnn::Known(kk), Box::new(acc), base(s))),
                );
                Ok(PTy::Arrow(PAnn::Known(Schedule::one()), Box::new(body), base(s)))
            }
        }
    }

    fn synth(
        &mut self,
        env: &mut Vec<(Ident, PTy)>,
        term: &Term,
        expected: Option<&PTy>,
    ) -> Result<Checked, RejectReason> {
        let skel = self.take_skel();
        let out = match term {
            Term::Var(x) => {
                let bound = env.iter().rev().find(|(n, _)| n == x).map(|(_, t)| t.clone());
                let (ty, is_bound) = match bound {
                    Some(t) => (t, true),
                    None => {
                        let Some((_, _, t)) = self.j.context.iter().find(|(n, _, _)| n == x) else {
                            return Err(RejectReason::ContextVarMismatch(format!(
                                "`{x}` is neither bound nor in the context"
                            )));
                        };
                        (PTy::of_resource(t)?, false)
                    }
                };
                let i = self.next_occ;
                let Some(rec) = self.j.occurrence_uses.get(i) else {
                    return Err(RejectReason::OccurrenceMismatch(format!(
                        "term has more identifier occurrences than recorded (at `{x}`)"
                    )));
                };
                if rec.owner != *x {
                    return Err(RejectReason::OccurrenceMismatch(format!(
                        "occurrence {i} is `{}` in the record but `{x}` in the term",
                        rec.owner
                    )));
                }
                self.next_occ += 1;
                let product = if is_bound {
                    if rec.leaf_use == Schedule::one() {
                        Schedule::one()
                    } else if Some(&rec.leaf_use) == self.acc_schedule().as_ref()
                        && matches!(
                            &ty,
                            PTy::Arrow(_, d, c)
                                if **d == PTy::Base(BaseType::Exp) && **c == PTy::Base(BaseType::Com)
                        )
                    {
                        self.pending_acc.push(i);
                        rec.leaf_use.clone()
                    } else {
                        return Err(RejectReason::OccurrenceMismatch(format!(
                            "bound occurrence of `{x}` must use 𝟙 (or the write stage as an applied acceptor), found {}",
                            pretty_schedule(&rec.leaf_use)
                        )));
                    }
                } else {
                    rec.leaf_use.clone()
                };
                let der_ty = ty.to_resource().or_else(|_| match expected {
                    Some(e) => ty.merge(e).ok_or(RejectReason::UnresolvedWeakening)?.to_resource(),
                    None => Err(RejectReason::UnresolvedWeakening),
                })?;
                Checked {
                    ty,
                    usages: vec![Usage {
                        occ: i,
                        owner: x.clone(),
                        bound: is_bound,
                        product: product.clone(),
                    }],
                    der: Derivation {
                        node: DNode::Identity,
                        ctx: vec![LinearEntry {
                            occ: i,
                            owner: x.clone(),
                            annotation: product,
                            ty: der_ty.clone(),
                        }],
                        term: term.clone(),
                        ty: der_ty,
                    },
                }
            }
            Term::Const(id, params) => {
                let ty = self.const_type(*id, params, &skel)?;
                let der_ty = ty.to_resource()?;
                Checked {
                    ty,
                    usages: Vec::new(),
                    der: Derivation {
                        node: DNode::ConstIntro {
                            id: *id,
                            params: params.clone(),
                        },
                        ctx: Vec::new(),
                        term: term.clone(),
                        ty: der_ty,
                    },
                }
            }
            Term::Lambda(x, ann, body) => {
                let Some(binder_rt) = ann else {
                    return Err(RejectReason::Malformed(format!(
                        "λ{x} carries no binder type; checking requires elaborated terms"
                    )));
                };
                let binder = PTy::of_resource(binder_rt)?;
                let (exp_j, exp_c) = match expected {
                    Some(PTy::Arrow(j, d, c)) => {
                        if binder.merge(d).is_none() {
                            return Err(RejectReason::ScalingMismatch {
                                at: format!("λ{x} binder"),
                                expected: d.show(),
                                found: binder.show(),
                            });
                        }
                        (Some(j.clone()), Some((**c).clone()))
                    }
                    Some(b @ PTy::Base(_)) => {
                        return Err(RejectReason::ScalingMismatch {
                            at: format!("λ{x}"),
                            expected: b.show(),
                            found: "an abstraction".into(),
                        })
                    }
                    None => (None, None),
                };
                env.push((x.clone(), binder.clone()));
                let body_checked = self.synth(env, body, exp_c.as_ref())?;
                env.pop();
                let mut usages = body_checked.usages;
                let mine: Vec<&Usage> = usages
                    .iter()
                    .filter(|u| u.bound && u.owner == *x)
                    .collect();
                let parts: Vec<Schedule> = mine.iter().map(|u| u.product.clone()).collect();
                let occs: Vec<usize> = mine.iter().map(|u| u.occ).collect();
                let ctx: Vec<LinearEntry> = body_checked
                    .der
                    .ctx
                    .iter()
                    .filter(|e| !occs.contains(&e.occ))
                    .cloned()
                    .collect();
                let (ann_p, annotation, node) = if parts.is_empty() {
                    let ann_p = exp_j.unwrap_or(PAnn::Free);
                    let annotation = match &ann_p {
                        PAnn::Known(s) => s.clone(),
                        PAnn::Free => Schedule::zero(),
                    };
                    (
                        ann_p,
                        annotation.clone(),
                        DNode::AbsWeak {
                            binder: x.clone(),
                            annotation,
                            body: Box::new(body_checked.der.clone()),
                        },
                    )
                } else {
                    let sum = parts.iter().fold(Schedule::zero(), |acc, s| acc.add(s));
                    if let Some(PAnn::Known(exp)) = &exp_j {
                        if *exp != sum {
                            return Err(RejectReason::AnnotationSumMismatch {
                                name: x.clone(),
                                expected: pretty_schedule(exp),
                                derived: pretty_schedule(&sum),
                            });
                        }
                    }
                    (
                        PAnn::Known(sum.clone()),
                        sum.clone(),
                        DNode::AbsCon {
                            binder: x.clone(),
                            annotation: sum,
                            parts,
                            body: Box::new(body_checked.der.clone()),
                        },
                    )
                };
                usages.retain(|u| !(u.bound && u.owner == *x));
                let ty = PTy::Arrow(
                    ann_p,
                    Box::new(binder.clone()),
                    Box::new(body_checked.ty.clone()),
                );
                let der_ty = ResourceType::arrow(
                    SemiringExpr::Const(annotation),
                    binder_rt.clone(),
                    body_checked.der.ty.clone(),
                );
                Checked {
                    ty,
                    usages,
                    der: Derivation {
                        node,
                        ctx,
                        term: term.clone(),
                        ty: der_ty,
                    },
                }
            }
            Term::App(f, a) => {
                let mut fun = self.synth(env, f, None)?;
                let PTy::Arrow(j, dom, cod) = fun.ty.clone() else {
                    return Err(RejectReason::Malformed("application of a non-function".into()));
                };
                // An applied acceptor's occurrence is legitimately at [w].
                if let Term::Var(_) = &**f {
                    if let Some(u) = fun.usages.first() {
                        if let Some(pos) = self.pending_acc.iter().position(|o| *o == u.occ) {
                            self.pending_acc.remove(pos);
                        }
                    }
                }
                let arg = self.synth(env, a, Some(&dom))?;
                if arg.ty.merge(&dom).is_none() {
                    return Err(RejectReason::ScalingMismatch {
                        at: crate::syntax::pretty_term(f),
                        expected: dom.show(),
                        found: arg.ty.show(),
                    });
                }
                let scale = match &j {
                    PAnn::Known(s) => s.clone(),
                    PAnn::Free => return Err(RejectReason::UnresolvedWeakening),
                };
                let mut usages = std::mem::take(&mut fun.usages);
                let mut ctx = fun.der.ctx.clone();
                for mut u in arg.usages {
                    u.product = scale.mul(&u.product);
                    usages.push(u);
                }
                for e in &arg.der.ctx {
                    ctx.push(LinearEntry {
                        occ: e.occ,
                        owner: e.owner.clone(),
                        annotation: scale.mul(&e.annotation),
                        ty: e.ty.clone(),
                    });
                }
                let der_ty = cod.to_resource().or_else(|_| match expected {
                    Some(e) => cod
                        .merge(e)
                        .ok_or(RejectReason::UnresolvedWeakening)?
                        .to_resource(),
                    None => Err(RejectReason::UnresolvedWeakening),
                })?;
                Checked {
                    ty: *cod,
                    usages,
                    der: Derivation {
                        node: DNode::App {
                            fun: Box::new(fun.der),
                            arg: Box::new(arg.der),
                            scale,
                        },
                        ctx,
                        term: term.clone(),
                        ty: der_ty,
                    },
                }
            }
        };
        if let Some(exp) = expected {
            if out.ty.merge(exp).is_none() {
                return Err(RejectReason::ScalingMismatch {
                    at: crate::syntax::pretty_term(term),
                    expected: exp.show(),
                    found: out.ty.show(),
                });
            }
        }
        Ok(out)
    }

    fn acc_schedule(&self) -> Option<Schedule> {
        self.write_stage.clone().map(Schedule::singleton)
    }
}

/// Check a concrete judgment: rebuild the stratified derivation, verify the
/// contraction sums, application scalings, type equalities and constant side
/// conditions by exact evaluation.
pub fn check_judgment(j: &ConcreteJudgment) -> Result<CheckedDerivation, RejectReason> {
    let decls: Vec<Decl> = j
        .context
        .iter()
        .map(|(n, _, t)| Decl {
            name: n.clone(),
            outer: None,
            ty: t.clone(),
        })
        .collect();
    let skel = infer_simple(&j.term, &decls)
        .map_err(|e| RejectReason::Malformed(e.to_string()))?;
    let mut checker = Checker {
        j,
        next_occ: 0,
        skel: skel.node_types,
        next_node: 0,
        write_stage: j.write_stage.clone(),
        pending_acc: Vec::new(),
    };
    let expected = PTy::of_resource(&j.ty)?;
    let mut env = Vec::new();
    let checked = checker.synth(&mut env, &j.term, Some(&expected))?;
    if checker.next_occ != j.occurrence_uses.len() {
        return Err(RejectReason::OccurrenceMismatch(format!(
            "judgment records {} occurrences, term has {}",
            j.occurrence_uses.len(),
            checker.next_occ
        )));
    }
    if let Some(occ) = checker.pending_acc.first() {
        return Err(RejectReason::OccurrenceMismatch(format!(
            "occurrence {occ} claims the write stage but is not an application head"
        )));
    }
    for u in &checked.usages {
        if u.bound {
            return Err(RejectReason::ContextVarMismatch(format!(
                "bound variable `{}` escaped its binder",
                u.owner
            )));
        }
        let rec = &j.occurrence_uses[u.occ];
        if rec.product != u.product {
            return Err(RejectReason::OccurrenceMismatch(format!(
                "occurrence {} of `{}`: recorded product {} but derivation gives {}",
                rec.index,
                u.owner,
                pretty_schedule(&rec.product),
                pretty_schedule(&u.product)
            )));
        }
    }
    let mut groups = Vec::new();
    let mut grouped: HashMap<&str, Vec<&Usage>> = HashMap::new();
    for u in &checked.usages {
        grouped.entry(u.owner.as_str()).or_default().push(u);
    }
    for (name, expected_ann, _ty) in &j.context {
        let us = grouped.remove(name.as_str()).unwrap_or_default();
        let used = !us.is_empty();
        let parts: Vec<Schedule> = us.iter().map(|u| u.product.clone()).collect();
        if used {
            let sum = parts.iter().fold(Schedule::zero(), |acc, s| acc.add(s));
            if &sum != expected_ann {
                return Err(RejectReason::AnnotationSumMismatch {
                    name: name.clone(),
                    expected: pretty_schedule(expected_ann),
                    derived: pretty_schedule(&sum),
                });
            }
        }
        groups.push(RootGroup {
            name: name.clone(),
            annotation: expected_ann.clone(),
            parts,
            occs: us.iter().map(|u| u.occ).collect(),
            used,
        });
    }
    if let Some((name, _)) = grouped.into_iter().next() {
        return Err(RejectReason::ContextVarMismatch(format!(
            "term uses `{name}` which is not in the context"
        )));
    }
    Ok(CheckedDerivation {
        groups,
        root: checked.der,
    })
}

/// Indented proof-tree rendering for debugging.
pub fn print_derivation(d: &CheckedDerivation) -> String {
    let mut out = String::new();
    for g in &d.groups {
        if g.used {
            let _ = writeln!(
                out,
                "contract+ {} : {} = {}",
                g.name,
                pretty_schedule(&g.annotation),
                g.parts
                    .iter()
                    .map(pretty_schedule)
                    .collect::<Vec<_>>()
                    .join(" + ")
            );
        } else {
            let _ = writeln!(out, "weaken+ {} : {}", g.name, pretty_schedule(&g.annotation));
        }
    }
    fn go(d: &Derivation, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        let label = match &d.node {
            DNode::Identity => "id".to_string(),
            DNode::ConstIntro { id, .. } => format!("const {}", id.name()),
            DNode::App { scale, .. } => format!("app ×{}", pretty_schedule(scale)),
            DNode::AbsCon {
                binder, annotation, ..
            } => format!("abs-con λ{binder} : {}", pretty_schedule(annotation)),
            DNode::AbsWeak { binder, .. } => format!("abs-weak λ{binder}"),
        };
        let _ = writeln!(
            out,
            "{pad}{label} ⊢ {} : {}",
            crate::syntax::pretty_term(&d.term),
            pretty_type(&d.ty)
        );
        match &d.node {
            DNode::App { fun, arg, .. } => {
                go(fun, depth + 1, out);
                go(arg, depth + 1, out);
            }
            DNode::AbsCon { body, .. } | DNode::AbsWeak { body, .. } => go(body, depth + 1, out),
            _ => {}
        }
    }
    go(&d.root, 0, &mut out);
    out
}
