//! Arena constructions: base arenas, stage/schedule actions, tensor, arrow,
//! and the canonical copy-bookkeeping bijections behind δ, π and currying.

use std::collections::BTreeSet;

use super::{Actuality, Arena, ArenaError, MoveData, MoveId, MoveKind, Polarity};
use crate::rational::{format_rational, q0, q1, Q};
use crate::semiring::{Schedule, Stage};

fn md(tag: &str, time: Q, polarity: Polarity, kind: MoveKind, actuality: Actuality) -> MoveData {
    MoveData {
        tag: tag.into(),
        time,
        polarity,
        kind,
        actuality,
    }
}

/// The arena of expressions: an actual question `q` at time 0 answered by a
/// value `v0..vN` at time 1, with dummy alternatives `q~`/`a~`.
pub fn exp_arena(max_int: u64) -> Arena {
    use Actuality::*;
    use MoveKind::*;
    use Polarity::*;
    let mut moves = vec![
        md("q~", q0(), O, Question, Dummy),
        md("a~", q1(), P, Answer, Dummy),
        md("q", q0(), O, Question, Actual),
    ];
    for v in 0..=max_int {
        moves.push(md(&format!("v{v}"), q1(), P, Answer, Actual));
    }
    let n = moves.len();
    let mut enablers: Vec<BTreeSet<MoveId>> = vec![BTreeSet::new(); n];
    enablers[1].insert(0); // q~ ⊢ a~
    for a in 3..n {
        enablers[a].insert(2); // q ⊢ v
    }
    let mut alt = vec![0, 1, 0];
    alt.extend(std::iter::repeat(1).take(n - 3));
    let initials: BTreeSet<MoveId> = [0, 2].into();
    Arena::build(moves, initials, enablers, alt).expect("exp arena is well-formed")
}

/// The arena of commands: run/done with dummy alternatives, mirroring the
/// expression arena with a single answer.
pub fn com_arena() -> Arena {
    use Actuality::*;
    use MoveKind::*;
    use Polarity::*;
    let moves = vec![
        md("q~", q0(), O, Question, Dummy),
        md("a~", q1(), P, Answer, Dummy),
        md("q", q0(), O, Question, Actual),
        md("a", q1(), P, Answer, Actual),
    ];
    let mut enablers: Vec<BTreeSet<MoveId>> = vec![BTreeSet::new(); 4];
    enablers[1].insert(0);
    enablers[3].insert(2);
    let alt = vec![0, 1, 0, 1];
    Arena::build(moves, [0, 2].into(), enablers, alt).expect("com arena is well-formed")
}

/// Retiming by a contractive stage: τ′(m) = scale·τ(m) + phase.
pub fn stage_action(x: &Stage, a: &Arena) -> Arena {
    let mut out = a.clone();
    for m in &mut out.moves {
        m.time = x.apply(&m.time);
    }
    // Retiming preserves the relative order of times, so ≺ is unchanged when
    // the stage is injective (scale > 0); with scale 0 all times collapse and
    // new τ-edges cannot arise, but equalities lose edges — recompute.
    Arena::build(out.moves, out.initials, out.enablers, out.alt_class)
        .expect("stage action preserves arena invariants")
}

/// Disjoint union of one retimed copy of the arena per stage occurrence,
/// tagged `s{i}.` in canonical multiset order.
pub fn schedule_action(j: &Schedule, a: &Arena) -> Arena {
    let parts: Vec<Arena> = j.stages().iter().map(|x| stage_action(x, a)).collect();
    disjoint_union(&parts, "s")
}

/// Disjoint union with `{prefix}{i}.` tags; initials are the unions.
pub fn disjoint_union(parts: &[Arena], prefix: &str) -> Arena {
    let mut moves = Vec::new();
    let mut enablers = Vec::new();
    let mut alt = Vec::new();
    let mut initials = BTreeSet::new();
    let mut class_base = 0;
    let mut id_base = 0;
    for (i, p) in parts.iter().enumerate() {
        for m in &p.moves {
            let mut m = m.clone();
            m.tag = format!("{prefix}{i}.{}", m.tag);
            moves.push(m);
        }
        for es in &p.enablers {
            enablers.push(es.iter().map(|e| e + id_base).collect::<BTreeSet<_>>());
        }
        for &c in &p.alt_class {
            alt.push(c + class_base);
        }
        for &e in &p.initials {
            initials.insert(e + id_base);
        }
        class_base += p.class_count();
        id_base += p.len();
    }
    Arena::build(moves, initials, enablers, alt).expect("disjoint union preserves invariants")
}

/// Binary tensor A ⊗ B, tagged `g0.` / `g1.`.
pub fn tensor(a: &Arena, b: &Arena) -> Arena {
    disjoint_union(&[a.clone(), b.clone()], "g")
}

/// An arrow arena plus the injections of its components.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrowParts {
    pub arena: Arena,
    pub inj_dom: Vec<MoveId>,
    pub inj_cod: Vec<MoveId>,
}

/// A ⊸ B: label flip on A, initials from B, cross-enabling of initial moves
/// (dummy A-initials by every B-initial, actual A-initials by actual
/// B-initials only). Requires the causality inclusion t_M(A) ⊆ t_m(B).
pub fn arrow(a: &Arena, b: &Arena) -> Result<ArrowParts, ArenaError> {
    if !a.is_empty() {
        let (may_lo, may_hi) = a.t_may().expect("nonempty arena has bounds");
        let Some((must_lo, must_hi)) = b.t_must() else {
            return Err(ArenaError::Causality(
                format_rational(&may_lo),
                format_rational(&may_hi),
                "∅".into(),
                "∅".into(),
            ));
        };
        if !(may_lo >= must_lo && may_hi <= must_hi) {
            return Err(ArenaError::Causality(
                format_rational(&may_lo),
                format_rational(&may_hi),
                format_rational(&must_lo),
                format_rational(&must_hi),
            ));
        }
    }
    let mut moves = Vec::new();
    let mut enablers: Vec<BTreeSet<MoveId>> = Vec::new();
    let mut alt = Vec::new();
    let mut initials = BTreeSet::new();
    let mut inj_dom = Vec::new();
    let mut inj_cod = Vec::new();
    for m in &a.moves {
        let mut m = m.clone();
        m.tag = format!("d.{}", m.tag);
        m.polarity = m.polarity.flip();
        inj_dom.push(moves.len());
        moves.push(m);
    }
    for es in &a.enablers {
        enablers.push(es.iter().map(|&e| inj_dom[e]).collect());
    }
    alt.extend(a.alt_class.iter().copied());
    let class_base = a.class_count();
    for m in &b.moves {
        let mut m = m.clone();
        m.tag = format!("c.{}", m.tag);
        inj_cod.push(moves.len());
        moves.push(m);
    }
    for es in &b.enablers {
        enablers.push(es.iter().map(|&e| inj_cod[e]).collect::<BTreeSet<_>>());
    }
    alt.extend(b.alt_class.iter().map(|c| c + class_base));
    for &e in &b.initials {
        initials.insert(inj_cod[e]);
    }
    // Cross-enabling of the domain's ex-initial moves.
    for &ea in &a.initials {
        for &eb in &b.initials {
            let a_dummy = a.moves[ea].actuality == Actuality::Dummy;
            let b_actual = b.moves[eb].actuality == Actuality::Actual;
            if a_dummy || b_actual {
                enablers[inj_dom[ea]].insert(inj_cod[eb]);
            }
        }
    }
    let arena = Arena::build(moves, initials, enablers, alt)?;
    Ok(ArrowParts {
        arena,
        inj_dom,
        inj_cod,
    })
}

// ---------------------------------------------------------------------------
// Canonical copy bookkeeping

/// Slot of the i-th stage of `j` (in `j.stages()` order) within the stages
/// of the union `j + k`, with `j`'s copies preceding `k`'s per equal stage.
pub fn union_slots(j: &Schedule, k: &Schedule) -> (Vec<usize>, Vec<usize>) {
    let union = j.add(k);
    let union_stages = union.stages();
    let start_of = |x: &Stage| union_stages.iter().position(|y| y == x).unwrap();
    let mut j_slots = Vec::new();
    let mut seen: Vec<Stage> = Vec::new();
    for x in j.stages() {
        let rank = seen.iter().filter(|y| **y == x).count();
        j_slots.push(start_of(&x) + rank);
        seen.push(x);
    }
    let mut k_slots = Vec::new();
    let mut seen: Vec<Stage> = Vec::new();
    for x in k.stages() {
        let rank = seen.iter().filter(|y| **y == x).count();
        let j_count = j.stages().iter().filter(|y| **y == x).count();
        k_slots.push(start_of(&x) + j_count + rank);
        seen.push(x);
    }
    (j_slots, k_slots)
}

/// Slot of part `p`'s `i`-th stage within the stages of the fold-sum of all
/// parts; copies of equal stages are ordered by (part, index).
pub fn multi_union_slots(parts: &[Schedule]) -> Vec<Vec<usize>> {
    let total = parts.iter().fold(Schedule::zero(), |acc, s| acc.add(s));
    let total_stages = total.stages();
    let mut out = Vec::new();
    for (pi, part) in parts.iter().enumerate() {
        let mut slots = Vec::new();
        let mut seen_in_part: Vec<Stage> = Vec::new();
        for x in part.stages() {
            let earlier: usize = parts[..pi]
                .iter()
                .map(|p| p.stages().iter().filter(|y| **y == x).count())
                .sum();
            let rank = seen_in_part.iter().filter(|y| **y == x).count();
            let start = total_stages.iter().position(|y| *y == x).unwrap();
            slots.push(start + earlier + rank);
            seen_in_part.push(x);
        }
        out.push(slots);
    }
    out
}

/// Slot of the pair (i, j) — i-th stage of `j`, j-th of `k` — within the
/// stages of the product `j × k`, pairs enumerated left factor outermost.
pub fn product_slots(j: &Schedule, k: &Schedule) -> Vec<Vec<usize>> {
    let product = j.mul(k);
    let product_stages = product.stages();
    let js = j.stages();
    let ks = k.stages();
    let mut seen: Vec<Stage> = Vec::new();
    let mut out = vec![vec![0; ks.len()]; js.len()];
    for (i, x) in js.iter().enumerate() {
        for (jj, y) in ks.iter().enumerate() {
            let v = x.compose(y);
            let rank = seen.iter().filter(|z| **z == v).count();
            let start = product_stages.iter().position(|z| *z == v).unwrap();
            out[i][jj] = start + rank;
            seen.push(v);
        }
    }
    out
}

/// Tag-level bijection checking for arena isomorphism: `pairs` maps tags of
/// `x` to tags of `y`; verifies timing, labelling, initials, enabling and
/// alternatives transport exactly.
pub fn is_isomorphism(x: &Arena, y: &Arena, pairs: &[(String, String)]) -> Result<(), String> {
    if x.len() != y.len() || pairs.len() != x.len() {
        return Err(format!(
            "size mismatch: {} vs {} moves, {} pairs",
            x.len(),
            y.len(),
            pairs.len()
        ));
    }
    let mut map = vec![usize::MAX; x.len()];
    for (xt, yt) in pairs {
        let xi = x
            .move_by_tag(xt)
            .ok_or_else(|| format!("no move `{xt}` in the left arena"))?;
        let yi = y
            .move_by_tag(yt)
            .ok_or_else(|| format!("no move `{yt}` in the right arena"))?;
        if map[xi] != usize::MAX {
            return Err(format!("`{xt}` mapped twice"));
        }
        map[xi] = yi;
    }
    let mut hit = vec![false; y.len()];
    for &m in &map {
        if m == usize::MAX || hit[m] {
            return Err("mapping is not a bijection".into());
        }
        hit[m] = true;
    }
    for i in 0..x.len() {
        let (a, b) = (&x.moves[i], &y.moves[map[i]]);
        if a.time != b.time
            || a.polarity != b.polarity
            || a.kind != b.kind
            || a.actuality != b.actuality
        {
            return Err(format!("labels differ at `{}` ↦ `{}`", a.tag, b.tag));
        }
        if x.initials.contains(&i) != y.initials.contains(&map[i]) {
            return Err(format!("initiality differs at `{}`", a.tag));
        }
        let mapped: BTreeSet<MoveId> = x.enablers[i].iter().map(|&e| map[e]).collect();
        if mapped != y.enablers[map[i]] {
            return Err(format!("enabling differs at `{}`", a.tag));
        }
        for jj in 0..x.len() {
            let same_x = x.alt_class[i] == x.alt_class[jj];
            let same_y = y.alt_class[map[i]] == y.alt_class[map[jj]];
            if same_x != same_y {
                return Err(format!(
                    "alternatives differ at `{}`/`{}`",
                    a.tag, x.moves[jj].tag
                ));
            }
        }
    }
    Ok(())
}

/// The canonical associativity bijection (J⊙K)·A ≅ J·(K·A) as tag pairs:
/// left tags `s{slot}.m`, right tags `s{i}.s{j}.m`.
pub fn action_assoc_pairs(j: &Schedule, k: &Schedule, a: &Arena) -> Vec<(String, String)> {
    let slots = product_slots(j, k);
    let mut out = Vec::new();
    for (i, row) in slots.iter().enumerate() {
        for (jj, &slot) in row.iter().enumerate() {
            for m in &a.moves {
                out.push((
                    format!("s{slot}.{}", m.tag),
                    format!("s{i}.s{jj}.{}", m.tag),
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn st(s: (i64, i64), p: (i64, i64)) -> Stage {
        Stage::new(q(s.0, s.1), q(p.0, p.1)).unwrap()
    }

    #[test]
    fn exp_arena_matches_definition() {
        let a = exp_arena(2);
        assert_eq!(a.len(), 6);
        let qm = a.move_by_tag("q").unwrap();
        assert_eq!(a.moves[qm].time, q0());
        let v1 = a.move_by_tag("v1").unwrap();
        assert_eq!(a.moves[v1].time, q1());
        // q ≍ q~, answers all alternatives
        assert_eq!(a.alt_class[qm], a.alt_class[a.move_by_tag("q~").unwrap()]);
        assert_eq!(a.alt_class[v1], a.alt_class[a.move_by_tag("a~").unwrap()]);
    }

    #[test]
    fn schedule_action_retimes_copies() {
        let jf = Schedule::from_stages([st((1, 2), (1, 10)), st((1, 2), (1, 5))]);
        let a = schedule_action(&jf, &exp_arena(1));
        assert_eq!(a.len(), 10);
        let q0m = a.move_by_tag("s0.q").unwrap();
        assert_eq!(a.moves[q0m].time, q(1, 10));
        let q1m = a.move_by_tag("s1.q").unwrap();
        assert_eq!(a.moves[q1m].time, q(1, 5));
        // 𝟘·A is empty, 𝟙·A is A retimed by the identity
        assert!(schedule_action(&Schedule::zero(), &exp_arena(1)).is_empty());
        let one = schedule_action(&Schedule::one(), &exp_arena(1));
        assert_eq!(one.len(), 5);
        assert_eq!(one.moves[0].time, exp_arena(1).moves[0].time);
    }

    #[test]
    fn arrow_checks_causality() {
        // [0.1, 0.6] ⊆ [0, 1]: fine.
        let dom = stage_action(&st((1, 2), (1, 10)), &exp_arena(1));
        assert!(arrow(&dom, &exp_arena(1)).is_ok());
        // exp ⊸ exp: [0,1] ⊆ [0,1] holds with closed intervals.
        assert!(arrow(&exp_arena(1), &exp_arena(1)).is_ok());
        // a late-starting domain cannot fit inside an early-ending codomain
        let bad_dom = stage_action(&st((1, 2), (1, 2)), &exp_arena(1));
        let tight_cod = stage_action(&st((1, 4), (0, 1)), &exp_arena(1));
        assert!(matches!(
            arrow(&bad_dom, &tight_cod),
            Err(ArenaError::Causality(..))
        ));
    }

    #[test]
    fn arrow_flips_and_cross_enables() {
        let parts = arrow(&exp_arena(1), &exp_arena(1)).unwrap();
        let a = &parts.arena;
        let dq = a.move_by_tag("d.q").unwrap();
        assert_eq!(a.moves[dq].polarity, Polarity::P);
        // actual domain question enabled only by the actual codomain question
        let cq = a.move_by_tag("c.q").unwrap();
        let cqd = a.move_by_tag("c.q~").unwrap();
        assert!(a.enablers[dq].contains(&cq));
        assert!(!a.enablers[dq].contains(&cqd));
        // dummy domain question enabled by both
        let dqd = a.move_by_tag("d.q~").unwrap();
        assert!(a.enablers[dqd].contains(&cq) && a.enablers[dqd].contains(&cqd));
    }

    #[test]
    fn action_assoc_iso_holds() {
        let j = Schedule::from_stages([st((1, 2), (0, 1)), st((1, 2), (1, 2))]);
        let k = Schedule::from_stages([st((1, 2), (1, 10)), st((1, 3), (1, 5))]);
        let a = exp_arena(1);
        let left = schedule_action(&j.mul(&k), &a);
        let right = schedule_action(&k, &a);
        let right = schedule_action(&j, &right);
        let pairs = action_assoc_pairs(&j, &k, &a);
        is_isomorphism(&left, &right, &pairs).unwrap();
    }

    #[test]
    fn union_slots_respect_multiplicity() {
        let x = st((1, 2), (1, 10));
        let y = st((1, 2), (1, 5));
        let j = Schedule::singleton(x.clone());
        let k = Schedule::from_stages([x, y]);
        let (js, ks) = union_slots(&j, &k);
        assert_eq!(js, vec![0]);
        assert_eq!(ks, vec![1, 2]);
    }
}
