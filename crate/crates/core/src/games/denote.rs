//! Interpretation of concrete judgments as strategies: type and context
//! arenas, the PIA constant strategies, and structural recursion over the
//! checked stratified derivation (δ for contraction, dummy-out for
//! weakening, currying for abstraction, eval for application).

use std::collections::BTreeSet;
use std::sync::Arc;

use super::build::{arrow, disjoint_union, multi_union_slots, schedule_action, tensor};
use super::play::{all_plays, Play};
use super::strategy::{compose, pairing_strategy, tensor_morphism, GamesError, Morphism};
use super::{Actuality, Arena, MoveId, MoveKind, Polarity};
use crate::check::{CheckedDerivation, Derivation, DNode, LinearEntry};
use crate::constraint::ConcreteJudgment;
use crate::expr::SemiringExpr;
use crate::semiring::Schedule;
use crate::syntax::{BaseType, ConstId, ConstParam, ResourceType};

/// Interpretation parameters: expression answers range over `0..=max_int`.
#[derive(Debug, Clone, Copy)]
pub struct Interp {
    pub max_int: u64,
}

impl Default for Interp {
    fn default() -> Self {
        Interp { max_int: 2 }
    }
}

/// Order of the root contraction folds; coherence says all routes denote the
/// same strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootPlan {
    /// One n-ary split per contracted identifier.
    Canonical,
    /// Split off occurrence parts left to right, one pairwise δ at a time.
    FoldLeft,
    /// Split right to left.
    FoldRight,
}

fn concrete(e: &SemiringExpr) -> Result<Schedule, GamesError> {
    match e {
        SemiringExpr::Const(s) => Ok(s.clone()),
        other => Err(GamesError::Other(format!(
            "annotation `{other}` is not concrete"
        ))),
    }
}

impl Interp {
    /// ⟦θ⟧: base arenas and the arrow construction over schedule actions.
    pub fn type_arena(&self, rt: &ResourceType) -> Result<Arena, GamesError> {
        Ok(match rt {
            ResourceType::Base(BaseType::Exp) => super::build::exp_arena(self.max_int),
            ResourceType::Base(BaseType::Com) => super::build::com_arena(),
            ResourceType::Arrow(ann, d, c) => {
                let j = concrete(ann)?;
                let dom = schedule_action(&j, &self.type_arena(d)?);
                let cod = self.type_arena(c)?;
                arrow(&dom, &cod)?.arena
            }
        })
    }

    /// ⟦Γ⟧: tensor of schedule-actioned entry arenas, tagged `g{i}.`.
    pub fn entries_arena(
        &self,
        entries: &[(Schedule, ResourceType)],
    ) -> Result<Arena, GamesError> {
        let mut parts = Vec::new();
        for (j, ty) in entries {
            parts.push(schedule_action(j, &self.type_arena(ty)?));
        }
        Ok(disjoint_union(&parts, "g"))
    }

    fn entry_of(&self, e: &LinearEntry) -> (Schedule, ResourceType) {
        (e.annotation.clone(), e.ty.clone())
    }

    /// Denote one stratified derivation node: ⟦ctx⟧ ⊸ ⟦type⟧.
    pub fn denote(&self, d: &Derivation) -> Result<Morphism, GamesError> {
        match &d.node {
            DNode::Identity => {
                let entry = &d.ctx[0];
                if entry.annotation.size() != 1 {
                    return Err(GamesError::Other(format!(
                        "occurrence of `{}` has non-singleton use {}; no retiming copycat exists",
                        entry.owner, entry.annotation
                    )));
                }
                let dom = Arc::new(self.entries_arena(&[self.entry_of(entry)])?);
                let cod = Arc::new(self.type_arena(&d.ty)?);
                let base = self.type_arena(&entry.ty)?;
                let pairs: Vec<(MoveId, MoveId)> = base
                    .moves
                    .iter()
                    .map(|m| {
                        let dm = dom.move_by_tag(&format!("g0.s0.{}", m.tag)).expect("copy");
                        let cm = cod.move_by_tag(&m.tag).expect("base");
                        (dm, cm)
                    })
                    .collect();
                let m = pairing_strategy(dom, cod, &pairs)?;
                m.validate().map_err(|e| {
                    GamesError::Other(format!(
                        "retiming copycat for `{}` at {} is not a strategy: {e}",
                        entry.owner, entry.annotation
                    ))
                })?;
                Ok(m)
            }
            DNode::ConstIntro { id, params } => self.constant(*id, params, &d.ty),
            DNode::App { fun, arg, scale } => {
                let f = self.denote(fun)?;
                let a = self.denote(arg)?;
                let ja = self.schedule_functor(scale, &a)?;
                let t = tensor_morphism(&f, &ja)?;
                let ev = self.eval_morphism(&f.cod, scale, &arg.ty, &d.ty)?;
                let applied = compose(&t, &ev)?;
                // Context fix-up: ⊗((scale×Jᵢ)·Aᵢ) ≅ Γf ⊗ scale·(⊗ Jᵢ·Aᵢ).
                let adaptor = self.app_context_adaptor(d, fun, arg, scale, &applied)?;
                compose(&adaptor, &applied)
            }
            DNode::AbsCon {
                binder: _,
                annotation,
                parts,
                body,
            } => {
                let b = self.denote(body)?;
                let outer: Vec<(Schedule, ResourceType)> =
                    d.ctx.iter().map(|e| self.entry_of(e)).collect();
                let binder_ty = self.binder_type(&d.ty)?;
                let adaptor = self.lambda_adaptor(
                    &outer,
                    annotation,
                    parts,
                    &binder_ty,
                    body,
                    d,
                    false,
                )?;
                let uncurried = compose(&adaptor, &b)?;
                self.curry(&uncurried, &outer, (annotation.clone(), binder_ty), &d.ty)
            }
            DNode::AbsWeak {
                binder: _,
                annotation,
                body,
            } => {
                let b = self.denote(body)?;
                let outer: Vec<(Schedule, ResourceType)> =
                    d.ctx.iter().map(|e| self.entry_of(e)).collect();
                let binder_ty = self.binder_type(&d.ty)?;
                let adaptor = self.lambda_adaptor(
                    &outer,
                    annotation,
                    &[],
                    &binder_ty,
                    body,
                    d,
                    true,
                )?;
                let uncurried = compose(&adaptor, &b)?;
                self.curry(&uncurried, &outer, (annotation.clone(), binder_ty), &d.ty)
            }
        }
    }

    fn binder_type(&self, lambda_ty: &ResourceType) -> Result<ResourceType, GamesError> {
        match lambda_ty {
            ResourceType::Arrow(_, d, _) => Ok((**d).clone()),
            _ => Err(GamesError::Other("λ node with non-arrow type".into())),
        }
    }

    /// J·σ: the tensor of retimed copies of σ, as a single morphism on
    /// J·dom ⊸ J·cod.
    fn schedule_functor(&self, j: &Schedule, a: &Morphism) -> Result<Morphism, GamesError> {
        let dom = Arc::new(schedule_action(j, &a.dom));
        let cod = Arc::new(schedule_action(j, &a.cod));
        let mut out = Morphism::new(dom, cod)?;
        let copies = j.size() as usize;
        // Per-copy projection maps into a's arrow arena.
        let mut maps: Vec<Vec<Option<MoveId>>> = vec![vec![None; out.arrow.len()]; copies];
        for i in 0..copies {
            for (mid, mv) in a.dom.moves.iter().enumerate() {
                let big = out
                    .arrow
                    .move_by_tag(&format!("d.s{i}.{}", mv.tag))
                    .expect("copy move");
                maps[i][big] = Some(a.inj_dom[mid]);
            }
            for (mid, mv) in a.cod.moves.iter().enumerate() {
                let big = out
                    .arrow
                    .move_by_tag(&format!("c.s{i}.{}", mv.tag))
                    .expect("copy move");
                maps[i][big] = Some(a.inj_cod[mid]);
            }
        }
        for p in all_plays(&out.arrow) {
            let ok = maps.iter().all(|map| {
                let proj: Vec<MoveId> = p.iter().filter_map(|&m| map[m]).collect();
                a.plays.contains(&proj)
            });
            if ok {
                out.plays.insert(p);
            }
        }
        Ok(out)
    }

    /// eval : (JA ⊸ B) ⊗ J·A ⊸ B as two copycat pairings.
    fn eval_morphism(
        &self,
        fun_ty_arena: &Arc<Arena>,
        j: &Schedule,
        arg_ty: &ResourceType,
        result_ty: &ResourceType,
    ) -> Result<Morphism, GamesError> {
        let arg_part = schedule_action(j, &self.type_arena(arg_ty)?);
        let dom = Arc::new(tensor(fun_ty_arena, &arg_part));
        let cod = Arc::new(self.type_arena(result_ty)?);
        let mut pairs: Vec<(MoveId, MoveId)> = Vec::new();
        // Function's own copy of J·A pairs with the tensored argument copy.
        for (mid, mv) in arg_part.moves.iter().enumerate() {
            let f_side = dom
                .move_by_tag(&format!("g0.d.{}", mv.tag))
                .ok_or_else(|| GamesError::Other(format!("missing g0.d.{}", mv.tag)))?;
            let a_side = dom
                .move_by_tag(&format!("g1.{}", mv.tag))
                .ok_or_else(|| GamesError::Other(format!("missing g1.{}", mv.tag)))?;
            let _ = mid;
            pairs.push((f_side, a_side));
        }
        // Function's result copy pairs with the codomain.
        let mut dc_pairs: Vec<(MoveId, MoveId)> = Vec::new();
        for (cid, cv) in cod.moves.iter().enumerate() {
            let f_side = dom
                .move_by_tag(&format!("g0.c.{}", cv.tag))
                .ok_or_else(|| GamesError::Other(format!("missing g0.c.{}", cv.tag)))?;
            dc_pairs.push((f_side, cid));
        }
        // pairing_strategy pairs dom-moves with dom-moves via a small trick:
        // we filter plays manually instead.
        let mut out = Morphism::new(dom, cod)?;
        let mut mate = vec![usize::MAX; out.arrow.len()];
        for (x, y) in pairs {
            let (xi, yi) = (out.inj_dom[x], out.inj_dom[y]);
            mate[xi] = yi;
            mate[yi] = xi;
        }
        for (x, c) in dc_pairs {
            let (xi, ci) = (out.inj_dom[x], out.inj_cod[c]);
            mate[xi] = ci;
            mate[ci] = xi;
        }
        if mate.iter().any(|&x| x == usize::MAX) {
            return Err(GamesError::Other("eval pairing incomplete".into()));
        }
        for p in all_plays(&out.arrow) {
            let ok = p.iter().enumerate().all(|(i, &mv)| {
                let partner = mate[mv];
                match p.iter().position(|&x| x == partner) {
                    None => false,
                    Some(jj) => {
                        if out.arrow.moves[mv].polarity == Polarity::O {
                            i < jj
                        } else {
                            jj < i
                        }
                    }
                }
            });
            if ok {
                out.plays.insert(p);
            }
        }
        Ok(out)
    }

    /// Adaptor ⟦ctx_app⟧ ⊸ Γf ⊗ J·Γa: π per argument entry plus the
    /// distribution of the schedule action over the tensor.
    fn app_context_adaptor(
        &self,
        d: &Derivation,
        fun: &Derivation,
        arg: &Derivation,
        scale: &Schedule,
        applied: &Morphism,
    ) -> Result<Morphism, GamesError> {
        let dom = Arc::new(self.entries_arena(
            &d.ctx.iter().map(|e| self.entry_of(e)).collect::<Vec<_>>(),
        )?);
        let cod = applied.dom.clone();
        let mut tag_pairs: Vec<(String, String)> = Vec::new();
        let nf = fun.ctx.len();
        for (i, e) in fun.ctx.iter().enumerate() {
            let base = self.type_arena(&e.ty)?;
            for q in 0..e.annotation.size() as usize {
                for m in &base.moves {
                    tag_pairs.push((
                        format!("g{i}.s{q}.{}", m.tag),
                        format!("g0.g{i}.s{q}.{}", m.tag),
                    ));
                }
            }
        }
        for (i, e) in arg.ctx.iter().enumerate() {
            let base = self.type_arena(&e.ty)?;
            let slots = super::build::product_slots(scale, &e.annotation);
            for (p, row) in slots.iter().enumerate() {
                for (q, &slot) in row.iter().enumerate() {
                    for m in &base.moves {
                        tag_pairs.push((
                            format!("g{}.s{slot}.{}", nf + i, m.tag),
                            format!("g1.s{p}.g{i}.s{q}.{}", m.tag),
                        ));
                    }
                }
            }
        }
        adaptor(dom, cod, &tag_pairs, &[])
    }

    /// Adaptor (outer ⊗ (ΣJᵢ)·θ) ⊸ body context: splits the binder's copies
    /// to its occurrence entries (or dummies them out for weakening) and
    /// reorders parent entries to their interleaved body positions.
    #[allow(clippy::too_many_arguments)]
    fn lambda_adaptor(
        &self,
        outer: &[(Schedule, ResourceType)],
        annotation: &Schedule,
        parts: &[Schedule],
        binder_ty: &ResourceType,
        body: &Derivation,
        lam: &Derivation,
        weaken: bool,
    ) -> Result<Morphism, GamesError> {
        let mut dom_entries = outer.to_vec();
        dom_entries.push((annotation.clone(), binder_ty.clone()));
        let dom = Arc::new(self.entries_arena(&dom_entries)?);
        let cod_entries: Vec<(Schedule, ResourceType)> =
            body.ctx.iter().map(|e| self.entry_of(e)).collect();
        let cod = Arc::new(self.entries_arena(&cod_entries)?);
        let mut tag_pairs = Vec::new();
        // Parent entries: lam.ctx order (= outer order) to body positions.
        let lam_occs: BTreeSet<usize> = lam.ctx.iter().map(|e| e.occ).collect();
        let mut outer_idx = 0usize;
        let mut binder_positions: Vec<usize> = Vec::new();
        for (bpos, e) in body.ctx.iter().enumerate() {
            if lam_occs.contains(&e.occ) {
                let base = self.type_arena(&e.ty)?;
                for q in 0..e.annotation.size() as usize {
                    for m in &base.moves {
                        tag_pairs.push((
                            format!("g{outer_idx}.s{q}.{}", m.tag),
                            format!("g{bpos}.s{q}.{}", m.tag),
                        ));
                    }
                }
                outer_idx += 1;
            } else {
                binder_positions.push(bpos);
            }
        }
        let lam_n = outer.len();
        let mut dummies = Vec::new();
        if weaken {
            dummies.push(format!("g{lam_n}."));
        } else {
            let slots = multi_union_slots(parts);
            let base = self.type_arena(binder_ty)?;
            for (pi, &bpos) in binder_positions.iter().enumerate() {
                for (q, &slot) in slots[pi].iter().enumerate() {
                    for m in &base.moves {
                        tag_pairs.push((
                            format!("g{lam_n}.s{slot}.{}", m.tag),
                            format!("g{bpos}.s{q}.{}", m.tag),
                        ));
                    }
                }
            }
        }
        adaptor(dom, cod, &tag_pairs, &dummies)
    }

    /// Λ: X ⊗ A ⊸ B becomes X ⊸ (A ⊸ B) by retagging.
    fn curry(
        &self,
        m: &Morphism,
        outer: &[(Schedule, ResourceType)],
        lambda_entry: (Schedule, ResourceType),
        lambda_ty: &ResourceType,
    ) -> Result<Morphism, GamesError> {
        let dom = Arc::new(self.entries_arena(outer)?);
        let cod = Arc::new(self.type_arena(lambda_ty)?);
        let mut out = Morphism::new(dom, cod)?;
        let n = outer.len();
        let _ = lambda_entry;
        // Old arrow tags → new arrow tags.
        let map_tag = |tag: &str| -> String {
            if let Some(rest) = tag.strip_prefix(&format!("d.g{n}.")) {
                format!("c.d.{rest}")
            } else if let Some(rest) = tag.strip_prefix("d.") {
                format!("d.{rest}")
            } else if let Some(rest) = tag.strip_prefix("c.") {
                format!("c.c.{rest}")
            } else {
                tag.to_string()
            }
        };
        let mut id_map = vec![usize::MAX; m.arrow.len()];
        for (i, mv) in m.arrow.moves.iter().enumerate() {
            let new_tag = map_tag(&mv.tag);
            id_map[i] = out.arrow.move_by_tag(&new_tag).ok_or_else(|| {
                GamesError::Other(format!("currying lost move `{}` → `{new_tag}`", mv.tag))
            })?;
        }
        for p in &m.plays {
            out.plays.insert(p.iter().map(|&x| id_map[x]).collect());
        }
        Ok(out)
    }

    // -- constants ---------------------------------------------------------

    fn constant(
        &self,
        id: ConstId,
        params: &[ConstParam],
        ty: &ResourceType,
    ) -> Result<Morphism, GamesError> {
        let _ = params;
        let dom = Arc::new(Arena::empty());
        let cod = Arc::new(self.type_arena(ty)?);
        let mut out = Morphism::new(dom, cod)?;
        let arena = out.arrow.clone();
        for p in all_plays(&arena) {
            if self.constant_play_ok(id, &arena, &p)? {
                out.plays.insert(p);
            }
        }
        Ok(out)
    }

    fn constant_play_ok(&self, id: ConstId, a: &Arena, p: &Play) -> Result<bool, GamesError> {
        let tag = |m: MoveId| a.moves[m].tag.as_str();
        let outer_actual = p.iter().any(|&m| {
            a.moves[m].actuality == Actuality::Actual && a.initials.contains(&m)
        });
        let value_of = |t: &str| -> Option<u64> {
            t.rsplit('.')
                .next()
                .and_then(|last| last.strip_prefix('v'))
                .and_then(|v| v.parse().ok())
        };
        match id {
            ConstId::Skip => Ok(true),
            ConstId::One => {
                // P answers 1 to the actual question.
                if !outer_actual {
                    return Ok(true);
                }
                Ok(p
                    .iter()
                    .any(|&m| value_of(tag(m)) == Some(1.min(self.max_int))))
            }
            ConstId::Comp | ConstId::Seq | ConstId::Par => {
                // P plays actual argument runs exactly when the outer run is
                // actual.
                let arg_actual = |prefix: &str| {
                    p.iter().any(|&m| {
                        tag(m).starts_with(prefix)
                            && tag(m).ends_with(".q")
                            && a.moves[m].actuality == Actuality::Actual
                    })
                };
                Ok(arg_actual("c.d.s0.") == outer_actual
                    && arg_actual("c.c.d.s0.") == outer_actual)
            }
            ConstId::Op => {
                let q1 = has_actual_question(a, p, "c.d.s0.");
                let q2 = has_actual_question(a, p, "c.c.d.s0.");
                if !outer_actual {
                    return Ok(!q1 && !q2);
                }
                if !(q1 && q2) {
                    return Ok(false);
                }
                let v1 = answer_value(a, p, "c.d.s0.");
                let v2 = answer_value(a, p, "c.c.d.s0.");
                let out = answer_value(a, p, "c.c.c.");
                match (v1, v2, out) {
                    (Some(x), Some(y), Some(r)) => Ok(r == (x + y).min(self.max_int)),
                    _ => Ok(false),
                }
            }
            ConstId::If => {
                let guard_q = has_actual_question(a, p, "c.d.s0.");
                if !outer_actual {
                    return Ok(!guard_q
                        && !has_actual_question(a, p, "c.c.d.s0.")
                        && !has_actual_question(a, p, "c.c.c.d.s0."));
                }
                if !guard_q {
                    return Ok(false);
                }
                let Some(v) = answer_value(a, p, "c.d.s0.") else {
                    return Ok(false);
                };
                let (taken, dropped) = if v != 0 {
                    ("c.c.d.s0.", "c.c.c.d.s0.")
                } else {
                    ("c.c.c.d.s0.", "c.c.d.s0.")
                };
                if !has_actual_question(a, p, taken) || has_actual_question(a, p, dropped) {
                    return Ok(false);
                }
                // Final answer copies the taken branch's answer (exp only;
                // com answers carry no value).
                match (answer_value(a, p, taken), answer_value(a, p, "c.c.c.c.")) {
                    (Some(x), Some(r)) => Ok(r == x),
                    (None, None) => Ok(true),
                    _ => Ok(false),
                }
            }
            ConstId::New => self.new_play_ok(a, p, outer_actual),
        }
    }

    /// History-sensitive cell: reads answer the most recent write (0 before
    /// any write); write commands demand their value within the write window
    /// and complete; the body result is echoed outward.
    fn new_play_ok(&self, a: &Arena, p: &Play, outer_actual: bool) -> Result<bool, GamesError> {
        let tag = |m: MoveId| a.moves[m].tag.as_str();
        let body_prefix = "c.d.s0.";
        let launch = p.iter().any(|&m| {
            tag(m) == format!("{body_prefix}c.c.q")
                && a.moves[m].actuality == Actuality::Actual
        });
        if launch != outer_actual {
            return Ok(false);
        }
        if !outer_actual {
            // all-dummy play: no actual move anywhere
            return Ok(p.iter().all(|&m| a.moves[m].actuality == Actuality::Dummy));
        }
        let mut cell: u64 = 0;
        for &m in p {
            let t = tag(m);
            let mv = &a.moves[m];
            // write value arrives: c.d.s0.c.d.s{k}.d.s0.v{n}
            if let Some(rest) = t.strip_prefix(body_prefix) {
                if let Some(rest2) = rest.strip_prefix("c.d.") {
                    if rest2.contains(".d.s0.v") {
                        if let Some(v) = rest2.rsplit('.').next().and_then(|x| x.strip_prefix('v'))
                        {
                            cell = v.parse().unwrap_or(0);
                        }
                    }
                    // write run actual ⇒ P asks the value and completes: the
                    // play structure enforces q/a presence; nothing to check
                    // beyond the value flow.
                }
                // read answered by P: c.d.s0.d.s{i}.v{n}
                if let Some(rest2) = rest.strip_prefix("d.") {
                    if mv.kind == MoveKind::Answer && mv.actuality == Actuality::Actual {
                        if let Some(v) = rest2.rsplit('.').next().and_then(|x| x.strip_prefix('v'))
                        {
                            let v: u64 = v.parse().unwrap_or(0);
                            if v != cell {
                                return Ok(false);
                            }
                        }
                    }
                }
            }
        }
        // P-discipline: every actual write-window question and read answer is
        // forced by an actual O-move; the arena's enabling takes care of it.
        // Body result echo: σ_in answer value = outer answer value (exp).
        let body_result = answer_value(a, p, &format!("{body_prefix}c.c."));
        let outer = answer_value(a, p, "c.c.");
        match (body_result, outer) {
            (Some(x), Some(r)) => Ok(r == x),
            (None, None) => Ok(true),
            _ => Ok(false),
        }
    }

    /// Denotation of a checked judgment along the chosen contraction plan.
    pub fn denote_judgment(
        &self,
        checked: &CheckedDerivation,
        judgment: &ConcreteJudgment,
        plan: RootPlan,
    ) -> Result<Morphism, GamesError> {
        let root = self.denote(&checked.root)?;
        let adaptors = self.root_adaptors(checked, judgment, plan)?;
        let mut acc = root;
        for a in adaptors.into_iter().rev() {
            acc = compose(&a, &acc)?;
        }
        Ok(acc)
    }

    /// The chain of context adaptors from ⟦Γ_judgment⟧ to the linear context,
    /// shaped by the contraction plan.
    fn root_adaptors(
        &self,
        checked: &CheckedDerivation,
        judgment: &ConcreteJudgment,
        plan: RootPlan,
    ) -> Result<Vec<Morphism>, GamesError> {
        // Entry lists as (schedule, type, destination): destinations are
        // linear positions for fully split entries.
        let lin = &checked.root.ctx;
        let group_ty = |name: &str| -> Result<ResourceType, GamesError> {
            judgment
                .context
                .iter()
                .find(|(n, _, _)| n == name)
                .map(|(_, _, t)| t.clone())
                .ok_or_else(|| GamesError::Other(format!("no context entry `{name}`")))
        };
        // Current state: per group, the list of not-yet-split part blocks
        // (each block = contiguous occurrence parts summed).
        #[derive(Clone)]
        struct Block {
            sched: Schedule,
            parts: Vec<(usize, Schedule)>, // (linear position, part)
        }
        let mut groups: Vec<(String, ResourceType, Vec<Block>, bool)> = Vec::new();
        for g in &checked.groups {
            let ty = group_ty(&g.name)?;
            let parts: Vec<(usize, Schedule)> = g
                .occs
                .iter()
                .map(|occ| {
                    let pos = lin.iter().position(|e| e.occ == *occ).expect("linear entry");
                    (pos, lin[pos].annotation.clone())
                })
                .collect();
            groups.push((
                g.name.clone(),
                ty,
                vec![Block {
                    sched: g.annotation.clone(),
                    parts,
                }],
                g.used,
            ));
        }
        let lin_entries: Vec<(Schedule, ResourceType)> =
            lin.iter().map(|e| self.entry_of(e)).collect();

        // One adaptor from the current state to the next; the final state's
        // arena must be the linear context in linear order.
        let state_entries = |groups: &Vec<(String, ResourceType, Vec<Block>, bool)>| {
            let mut v: Vec<(Schedule, ResourceType, Option<usize>)> = Vec::new();
            for (_, ty, blocks, used) in groups {
                if !used {
                    v.push((blocks[0].sched.clone(), ty.clone(), None));
                    continue;
                }
                for b in blocks {
                    let dest = if b.parts.len() == 1 {
                        Some(b.parts[0].0)
                    } else {
                        None
                    };
                    v.push((b.sched.clone(), ty.clone(), dest));
                }
            }
            v
        };

        let mut adaptors = Vec::new();
        let mut current = state_entries(&groups);
        loop {
            // Find a group with an unsplit block.
            let mut split_at: Option<(usize, usize)> = None;
            for (gi, (_, _, blocks, used)) in groups.iter().enumerate() {
                if !used {
                    continue;
                }
                if let Some(bi) = blocks.iter().position(|b| b.parts.len() > 1) {
                    split_at = Some((gi, bi));
                    break;
                }
            }
            let Some((gi, bi)) = split_at else { break };
            let (_, _, blocks, _) = &groups[gi];
            let block = blocks[bi].clone();
            let new_blocks: Vec<Block> = match plan {
                RootPlan::Canonical => block
                    .parts
                    .iter()
                    .map(|(pos, s)| Block {
                        sched: s.clone(),
                        parts: vec![(*pos, s.clone())],
                    })
                    .collect(),
                RootPlan::FoldLeft => {
                    let first = block.parts[0].clone();
                    let rest: Vec<(usize, Schedule)> = block.parts[1..].to_vec();
                    let rest_sum = rest
                        .iter()
                        .fold(Schedule::zero(), |acc, (_, s)| acc.add(s));
                    vec![
                        Block {
                            sched: first.1.clone(),
                            parts: vec![first],
                        },
                        Block {
                            sched: rest_sum,
                            parts: rest,
                        },
                    ]
                }
                RootPlan::FoldRight => {
                    let last = block.parts.last().unwrap().clone();
                    let init: Vec<(usize, Schedule)> =
                        block.parts[..block.parts.len() - 1].to_vec();
                    let init_sum = init
                        .iter()
                        .fold(Schedule::zero(), |acc, (_, s)| acc.add(s));
                    vec![
                        Block {
                            sched: init_sum,
                            parts: init,
                        },
                        Block {
                            sched: last.1.clone(),
                            parts: vec![last],
                        },
                    ]
                }
            };
            let mut split_entry = 0usize;
            for (k, (_, _, blocks, used)) in groups.iter().enumerate() {
                if k == gi {
                    split_entry += bi;
                    break;
                }
                split_entry += if *used { blocks.len() } else { 1 };
            }
            let mut next_groups = groups.clone();
            next_groups[gi].2.splice(bi..=bi, new_blocks.clone());
            let next = state_entries(&next_groups);
            adaptors.push(self.split_adaptor(&current, &next, split_entry)?);
            groups = next_groups;
            current = next;
        }
        // Final permutation to linear order (plus dummy-out of unused groups).
        adaptors.push(self.final_adaptor(&current, &lin_entries)?);
        Ok(adaptors)
    }

    /// One split step: identical entries except the entry at `split_idx`,
    /// replaced by its refinement; pairs are union-slot bijections.
    fn split_adaptor(
        &self,
        current: &[(Schedule, ResourceType, Option<usize>)],
        next: &[(Schedule, ResourceType, Option<usize>)],
        split_idx: usize,
    ) -> Result<Morphism, GamesError> {
        let dom_entries: Vec<(Schedule, ResourceType)> = current
            .iter()
            .map(|(s, t, _)| (s.clone(), t.clone()))
            .collect();
        let cod_entries: Vec<(Schedule, ResourceType)> = next
            .iter()
            .map(|(s, t, _)| (s.clone(), t.clone()))
            .collect();
        let dom = Arc::new(self.entries_arena(&dom_entries)?);
        let cod = Arc::new(self.entries_arena(&cod_entries)?);
        let inserted = next.len() - current.len() + 1;
        let mut tag_pairs = Vec::new();
        for (i, (s, t, _)) in current.iter().enumerate() {
            let base = self.type_arena(t)?;
            if i < split_idx {
                push_identity_pairs(&mut tag_pairs, &base, s, i, i);
            } else if i > split_idx {
                push_identity_pairs(&mut tag_pairs, &base, s, i, i + inserted - 1);
            } else {
                // Split into `inserted` successor entries via union slots.
                let parts: Vec<Schedule> = next[split_idx..split_idx + inserted]
                    .iter()
                    .map(|(s, _, _)| s.clone())
                    .collect();
                let slots = multi_union_slots(&parts);
                for (pi, part) in parts.iter().enumerate() {
                    for q in 0..part.size() as usize {
                        let slot = slots[pi][q];
                        for m in &base.moves {
                            tag_pairs.push((
                                format!("g{i}.s{slot}.{}", m.tag),
                                format!("g{}.s{q}.{}", split_idx + pi, m.tag),
                            ));
                        }
                    }
                }
            }
        }
        adaptor(dom, cod, &tag_pairs, &[])
    }

    /// Permute fully split entries to linear order; dummy out unused groups.
    fn final_adaptor(
        &self,
        current: &[(Schedule, ResourceType, Option<usize>)],
        lin_entries: &[(Schedule, ResourceType)],
    ) -> Result<Morphism, GamesError> {
        let dom_entries: Vec<(Schedule, ResourceType)> = current
            .iter()
            .map(|(s, t, _)| (s.clone(), t.clone()))
            .collect();
        let dom = Arc::new(self.entries_arena(&dom_entries)?);
        let cod = Arc::new(self.entries_arena(lin_entries)?);
        let mut tag_pairs = Vec::new();
        let mut dummies = Vec::new();
        for (i, (s, t, dest)) in current.iter().enumerate() {
            match dest {
                None => dummies.push(format!("g{i}.")),
                Some(pos) => {
                    let base = self.type_arena(t)?;
                    push_identity_pairs(&mut tag_pairs, &base, s, i, *pos);
                }
            }
        }
        adaptor(dom, cod, &tag_pairs, &dummies)
    }
}

fn push_identity_pairs(
    tag_pairs: &mut Vec<(String, String)>,
    base: &Arena,
    sched: &Schedule,
    from: usize,
    to: usize,
) {
    for q in 0..sched.size() as usize {
        for m in &base.moves {
            tag_pairs.push((
                format!("g{from}.s{q}.{}", m.tag),
                format!("g{to}.s{q}.{}", m.tag),
            ));
        }
    }
}

fn has_actual_question(a: &Arena, p: &Play, prefix: &str) -> bool {
    p.iter().any(|&m| {
        let mv = &a.moves[m];
        mv.tag.starts_with(prefix)
            && mv.tag[prefix.len()..].find('.').is_none()
            && mv.kind == MoveKind::Question
            && mv.actuality == Actuality::Actual
    })
}

fn answer_value(a: &Arena, p: &Play, prefix: &str) -> Option<u64> {
    p.iter().find_map(|&m| {
        let mv = &a.moves[m];
        let rest = mv.tag.strip_prefix(prefix)?;
        if rest.contains('.') || mv.kind != MoveKind::Answer || mv.actuality != Actuality::Actual {
            return None;
        }
        rest.strip_prefix('v').and_then(|v| v.parse().ok())
    })
}

/// Pairing-with-weakening adaptor: paired moves occur together (O first);
/// moves under a dummy prefix occur only as dummies; everything else must be
/// covered.
pub fn adaptor(
    dom: Arc<Arena>,
    cod: Arc<Arena>,
    tag_pairs: &[(String, String)],
    dummy_dom_prefixes: &[String],
) -> Result<Morphism, GamesError> {
    let mut m = Morphism::new(dom, cod)?;
    let mut mate = vec![usize::MAX; m.arrow.len()];
    const DUMMY_OUT: usize = usize::MAX - 1;
    for (dt, ct) in tag_pairs {
        let d = m
            .dom
            .move_by_tag(dt)
            .ok_or_else(|| GamesError::Other(format!("adaptor: no `{dt}` in the domain")))?;
        let c = m
            .cod
            .move_by_tag(ct)
            .ok_or_else(|| GamesError::Other(format!("adaptor: no `{ct}` in the codomain")))?;
        mate[m.inj_dom[d]] = m.inj_cod[c];
        mate[m.inj_cod[c]] = m.inj_dom[d];
    }
    for (d, mv) in m.dom.moves.iter().enumerate() {
        if dummy_dom_prefixes.iter().any(|p| mv.tag.starts_with(p.as_str())) {
            let i = m.inj_dom[d];
            if mate[i] != usize::MAX {
                return Err(GamesError::Other(format!(
                    "adaptor: `{}` both paired and dummied",
                    mv.tag
                )));
            }
            mate[i] = DUMMY_OUT;
        }
    }
    if let Some(i) = mate.iter().position(|&x| x == usize::MAX) {
        return Err(GamesError::Other(format!(
            "adaptor: move `{}` neither paired nor dummied",
            m.arrow.moves[i].tag
        )));
    }
    for p in all_plays(&m.arrow) {
        let ok = p.iter().enumerate().all(|(i, &mv)| match mate[mv] {
            DUMMY_OUT => m.arrow.moves[mv].actuality == Actuality::Dummy,
            partner => match p.iter().position(|&x| x == partner) {
                None => false,
                Some(j) => {
                    if m.arrow.moves[mv].polarity == Polarity::O {
                        i < j
                    } else {
                        j < i
                    }
                }
            },
        });
        if ok {
            m.plays.insert(p);
        }
    }
    Ok(m)
}
