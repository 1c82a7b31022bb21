//! Strategies as explicit play sets on arrow arenas: validation (responsive,
//! saturated, deadlock-free), composition by interaction, interleaving,
//! copycat and relabeling strategies.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use thiserror::Error;

use super::build::{arrow, tensor, ArrowParts};
use super::play::{all_plays, can_extend, is_play, Play};
use super::{Arena, ArenaError, MoveId, Polarity};
use crate::rational::format_rational;

#[derive(Debug, Error, PartialEq)]
pub enum GamesError {
    #[error("{0}")]
    Arena(#[from] ArenaError),
    #[error("strategies not composable: codomain/domain arenas differ")]
    NotComposable,
    #[error("not a strategy: {0}")]
    NotAStrategy(String),
    #[error("composition produced an illegal play")]
    IllegalPlay,
    #[error("{0}")]
    Other(String),
}

/// A morphism: a strategy on dom ⊸ cod, with the component injections into
/// the arrow arena.
#[derive(Debug, Clone, PartialEq)]
pub struct Morphism {
    pub dom: Arc<Arena>,
    pub cod: Arc<Arena>,
    pub arrow: Arc<Arena>,
    pub inj_dom: Vec<MoveId>,
    pub inj_cod: Vec<MoveId>,
    pub plays: BTreeSet<Play>,
}

impl Morphism {
    pub fn new(dom: Arc<Arena>, cod: Arc<Arena>) -> Result<Morphism, GamesError> {
        let ArrowParts {
            arena,
            inj_dom,
            inj_cod,
        } = arrow(&dom, &cod)?;
        Ok(Morphism {
            dom,
            cod,
            arrow: Arc::new(arena),
            inj_dom,
            inj_cod,
            plays: BTreeSet::new(),
        })
    }

    /// All positions (prefixes of plays).
    pub fn positions(&self) -> HashSet<Vec<MoveId>> {
        positions_of(&self.plays)
    }

    /// Responsive: any legal O-extension of a position stays within the
    /// strategy's positions.
    pub fn check_responsive(&self) -> Result<(), GamesError> {
        let legal: BTreeSet<Play> = all_plays(&self.arrow).into_iter().collect();
        let legal_positions = positions_of(&legal);
        let mine = self.positions();
        for pos in &mine {
            let mut used = 0u64;
            let mut classes = 0u64;
            for &m in pos {
                used |= 1 << m;
                classes |= 1 << self.arrow.alt_class[m];
            }
            for m in 0..self.arrow.len() {
                if self.arrow.moves[m].polarity != Polarity::O {
                    continue;
                }
                if !can_extend(&self.arrow, pos, used, classes, m) {
                    continue;
                }
                let mut ext = pos.clone();
                ext.push(m);
                if legal_positions.contains(&ext) && !mine.contains(&ext) {
                    return Err(GamesError::NotAStrategy(format!(
                        "not responsive: no continuation after O-move `{}` in {}",
                        self.arrow.moves[m].tag,
                        show_play(&self.arrow, pos)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Saturated: adjacent exchanges moving P-moves later / O-moves earlier
    /// stay in the strategy.
    pub fn check_saturated(&self) -> Result<(), GamesError> {
        for p in &self.plays {
            for i in 0..p.len().saturating_sub(1) {
                let (m, m2) = (p[i], p[i + 1]);
                let swappable = self.arrow.moves[m].polarity == Polarity::P
                    || self.arrow.moves[m2].polarity == Polarity::O;
                if !swappable {
                    continue;
                }
                let mut q = p.clone();
                q.swap(i, i + 1);
                if is_play(&self.arrow, &q) && !self.plays.contains(&q) {
                    return Err(GamesError::NotAStrategy(format!(
                        "not saturated: missing exchange of `{}`/`{}`",
                        self.arrow.moves[m].tag, self.arrow.moves[m2].tag
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), GamesError> {
        for p in &self.plays {
            if !is_play(&self.arrow, p) {
                return Err(GamesError::NotAStrategy(format!(
                    "contains a non-play: {}",
                    show_play(&self.arrow, p)
                )));
            }
        }
        self.check_responsive()?;
        self.check_saturated()
    }

    /// Derive a strategy precedence relation per its defining conditions;
    /// `None` when the minimal candidate is cyclic or violates the
    /// last-common-enabler restriction (a deadlock).
    pub fn strategy_precedence(&self) -> Option<Vec<u64>> {
        let a = &self.arrow;
        let n = a.len();
        let mut prec = a.prec.clone();
        // Forced orderings: Q::m::m′ a position but Q::m′::m not.
        let positions = self.positions();
        for pos in &positions {
            if pos.len() < 2 {
                continue;
            }
            let (m, m2) = (pos[pos.len() - 2], pos[pos.len() - 1]);
            let mut swapped: Vec<MoveId> = pos[..pos.len() - 2].to_vec();
            swapped.push(m2);
            swapped.push(m);
            if !positions.contains(&swapped) {
                prec[m] |= 1 << m2;
            }
        }
        // Close under transitivity and ≍-congruence.
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..n {
                let mut row = prec[i];
                let mut bits = row;
                while bits != 0 {
                    let j = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    row |= prec[j];
                }
                for j in 0..n {
                    if a.alt_class[i] == a.alt_class[j] {
                        row |= prec[j];
                    }
                }
                let mut extra = 0u64;
                let mut bits = row;
                while bits != 0 {
                    let j = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    for k in 0..n {
                        if a.alt_class[k] == a.alt_class[j] {
                            extra |= 1 << k;
                        }
                    }
                }
                row |= extra;
                if row != prec[i] {
                    prec[i] = row;
                    changed = true;
                }
            }
        }
        for (i, row) in prec.iter().enumerate() {
            if row & (1 << i) != 0 {
                return None;
            }
        }
        // Last-common-enabler restriction: the strategy may not impose order
        // on moves it does not control.
        for m in 0..n {
            for m2 in 0..n {
                if m == m2 || a.precedes(m, m2) || prec[m] & (1 << m2) == 0 {
                    continue;
                }
                let (has_common, last) = a.last_common_enablers(m, m2);
                if has_common && last.iter().all(|&e| a.moves[e].polarity != Polarity::O) {
                    return None;
                }
            }
        }
        Some(prec)
    }
}

pub fn positions_of(plays: &BTreeSet<Play>) -> HashSet<Vec<MoveId>> {
    let mut out = HashSet::new();
    for p in plays {
        for i in 0..=p.len() {
            out.insert(p[..i].to_vec());
        }
    }
    out
}

pub fn show_play(arena: &Arena, p: &[MoveId]) -> String {
    p.iter()
        .map(|&m| {
            let mv = &arena.moves[m];
            let (path, name) = match mv.tag.rfind('.') {
                Some(i) => (&mv.tag[..i], &mv.tag[i + 1..]),
                None => ("", mv.tag.as_str()),
            };
            format!("{path}:{name}@{}", format_rational(&mv.time))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Canonical dump: one play per line, set order.
pub fn dump_strategy(m: &Morphism) -> String {
    let mut out = String::new();
    for p in &m.plays {
        out.push_str(&show_play(&m.arrow, p));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Relabeling strategies (copycat and friends)

/// The strategy induced by a total pairing of arrow-arena moves: both members
/// of a pair occur together, O-side first. Copycat, δ, unitors, currying and
/// eval are all instances.
pub fn pairing_strategy(
    dom: Arc<Arena>,
    cod: Arc<Arena>,
    pairs: &[(MoveId, MoveId)],
) -> Result<Morphism, GamesError> {
    let mut m = Morphism::new(dom, cod)?;
    let mut mate = vec![usize::MAX; m.arrow.len()];
    for &(d, c) in pairs {
        let (di, ci) = (m.inj_dom[d], m.inj_cod[c]);
        mate[di] = ci;
        mate[ci] = di;
    }
    if mate.iter().any(|&x| x == usize::MAX) {
        return Err(GamesError::Other("pairing does not cover the arena".into()));
    }
    for p in all_plays(&m.arrow) {
        let ok = p.iter().enumerate().all(|(i, &mv)| {
            let partner = mate[mv];
            match p.iter().position(|&x| x == partner) {
                None => false,
                Some(j) => {
                    if m.arrow.moves[mv].polarity == Polarity::O {
                        i < j
                    } else {
                        j < i
                    }
                }
            }
        });
        if ok {
            m.plays.insert(p);
        }
    }
    Ok(m)
}

/// Copycat: the identity strategy echoing moves between two copies of the
/// arena, O-side first.
pub fn copycat(a: Arc<Arena>) -> Result<Morphism, GamesError> {
    let pairs: Vec<(MoveId, MoveId)> = (0..a.len()).map(|m| (m, m)).collect();
    pairing_strategy(a.clone(), a, &pairs)
}

/// Copycat along a tag bijection between isomorphic (or retimed) arenas.
pub fn copycat_along(
    dom: Arc<Arena>,
    cod: Arc<Arena>,
    tag_pairs: &[(String, String)],
) -> Result<Morphism, GamesError> {
    let mut pairs = Vec::with_capacity(tag_pairs.len());
    for (dt, ct) in tag_pairs {
        let d = dom
            .move_by_tag(dt)
            .ok_or_else(|| GamesError::Other(format!("no `{dt}` in the domain")))?;
        let c = cod
            .move_by_tag(ct)
            .ok_or_else(|| GamesError::Other(format!("no `{ct}` in the codomain")))?;
        pairs.push((d, c));
    }
    pairing_strategy(dom, cod, &pairs)
}

// ---------------------------------------------------------------------------
// Composition and interleaving

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Which {
    A(MoveId),
    B(MoveId),
    C(MoveId),
}

/// σ;τ = { P↾A⊸C | P ∈ σ‖τ }: enumerate interaction sequences whose
/// restrictions to A⊸B and B⊸C are plays of σ and τ.
pub fn compose(f: &Morphism, g: &Morphism) -> Result<Morphism, GamesError> {
    if f.cod != g.dom {
        return Err(GamesError::NotComposable);
    }
    let mut out = Morphism::new(f.dom.clone(), g.cod.clone())?;
    let f_positions = f.positions();
    let g_positions = g.positions();
    let mut result: BTreeSet<Play> = BTreeSet::new();
    let mut interaction: Vec<Which> = Vec::new();
    let mut proj_f: Vec<MoveId> = Vec::new();
    let mut proj_g: Vec<MoveId> = Vec::new();
    compose_dfs(
        f,
        g,
        &f_positions,
        &g_positions,
        &out.inj_dom,
        &out.inj_cod,
        (0, 0, 0),
        &mut interaction,
        &mut proj_f,
        &mut proj_g,
        &mut result,
    );
    for p in &result {
        if !is_play(&out.arrow, p) {
            return Err(GamesError::IllegalPlay);
        }
    }
    out.plays = result;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn compose_dfs(
    f: &Morphism,
    g: &Morphism,
    f_positions: &HashSet<Vec<MoveId>>,
    g_positions: &HashSet<Vec<MoveId>>,
    out_inj_dom: &[MoveId],
    out_inj_cod: &[MoveId],
    used: (u64, u64, u64),
    interaction: &mut Vec<Which>,
    proj_f: &mut Vec<MoveId>,
    proj_g: &mut Vec<MoveId>,
    result: &mut BTreeSet<Play>,
) {
    if f.plays.contains(proj_f) && g.plays.contains(proj_g) {
        let play: Play = interaction
            .iter()
            .filter_map(|w| match *w {
                Which::A(m) => Some(out_inj_dom[m]),
                Which::C(m) => Some(out_inj_cod[m]),
                Which::B(_) => None,
            })
            .collect();
        result.insert(play);
        return;
    }
    let candidates: Vec<Which> = (0..f.dom.len())
        .filter(|m| used.0 & (1 << m) == 0)
        .map(Which::A)
        .chain(
            (0..f.cod.len())
                .filter(|m| used.1 & (1 << m) == 0)
                .map(Which::B),
        )
        .chain(
            (0..g.cod.len())
                .filter(|m| used.2 & (1 << m) == 0)
                .map(Which::C),
        )
        .collect();
    for w in candidates {
        let (pf, pg) = match w {
            Which::A(m) => (Some(f.inj_dom[m]), None),
            Which::B(m) => (Some(f.inj_cod[m]), Some(g.inj_dom[m])),
            Which::C(m) => (None, Some(g.inj_cod[m])),
        };
        if let Some(x) = pf {
            proj_f.push(x);
        }
        if let Some(x) = pg {
            proj_g.push(x);
        }
        if (pf.is_none() || f_positions.contains(proj_f))
            && (pg.is_none() || g_positions.contains(proj_g))
        {
            interaction.push(w);
            let used2 = match w {
                Which::A(m) => (used.0 | (1 << m), used.1, used.2),
                Which::B(m) => (used.0, used.1 | (1 << m), used.2),
                Which::C(m) => (used.0, used.1, used.2 | (1 << m)),
            };
            compose_dfs(
                f,
                g,
                f_positions,
                g_positions,
                out_inj_dom,
                out_inj_cod,
                used2,
                interaction,
                proj_f,
                proj_g,
                result,
            );
            interaction.pop();
        }
        if pf.is_some() {
            proj_f.pop();
        }
        if pg.is_some() {
            proj_g.pop();
        }
    }
}

/// σ ⊗ τ: plays of (A⊗C) ⊸ (B⊗D) whose restrictions lie in σ and τ.
pub fn tensor_morphism(f: &Morphism, g: &Morphism) -> Result<Morphism, GamesError> {
    let dom = Arc::new(tensor(&f.dom, &g.dom));
    let cod = Arc::new(tensor(&f.cod, &g.cod));
    let mut out = Morphism::new(dom, cod)?;
    let mut to_f = vec![usize::MAX; out.arrow.len()];
    let mut to_g = vec![usize::MAX; out.arrow.len()];
    for m in 0..f.dom.len() {
        to_f[out.inj_dom[m]] = f.inj_dom[m];
    }
    for m in 0..g.dom.len() {
        to_g[out.inj_dom[f.dom.len() + m]] = g.inj_dom[m];
    }
    for m in 0..f.cod.len() {
        to_f[out.inj_cod[m]] = f.inj_cod[m];
    }
    for m in 0..g.cod.len() {
        to_g[out.inj_cod[f.cod.len() + m]] = g.inj_cod[m];
    }
    for p in all_plays(&out.arrow) {
        let pf: Vec<MoveId> = p.iter().filter_map(|&m| Some(to_f[m]).filter(|&x| x != usize::MAX)).collect();
        let pg: Vec<MoveId> = p.iter().filter_map(|&m| Some(to_g[m]).filter(|&x| x != usize::MAX)).collect();
        if f.plays.contains(&pf) && g.plays.contains(&pg) {
            out.plays.insert(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::build::{com_arena, exp_arena};
    use super::*;

    #[test]
    fn copycat_is_a_strategy_and_an_identity() {
        let a = Arc::new(exp_arena(1));
        let cc = copycat(a.clone()).unwrap();
        cc.validate().unwrap();
        assert!(cc.strategy_precedence().is_some());
        let cc2 = copycat(a).unwrap();
        let composed = compose(&cc, &cc2).unwrap();
        assert_eq!(composed.plays, cc2.plays);
    }

    #[test]
    fn copycat_identity_against_an_arbitrary_strategy() {
        // A "constant 1" strategy on I ⊸ exp, composed with copycat.
        let empty = Arc::new(Arena::empty());
        let e = Arc::new(exp_arena(2));
        let mut one = Morphism::new(empty, e.clone()).unwrap();
        for p in all_plays(&one.arrow) {
            let relevant = p.iter().all(|&m| {
                let mv = &one.arrow.moves[m];
                !(mv.tag == "c.v0" || mv.tag == "c.v2")
            });
            if relevant {
                one.plays.insert(p);
            }
        }
        one.validate().unwrap();
        let cc = copycat(e).unwrap();
        let left = compose(&one, &cc).unwrap();
        assert_eq!(left.plays, one.plays);
    }

    #[test]
    fn composition_is_associative_on_copycats_and_skips() {
        let c = Arc::new(com_arena());
        let f = copycat(c.clone()).unwrap();
        let g = copycat(c.clone()).unwrap();
        let h = copycat(c).unwrap();
        let left = compose(&compose(&f, &g).unwrap(), &h).unwrap();
        let right = compose(&f, &compose(&g, &h).unwrap()).unwrap();
        assert_eq!(left.plays, right.plays);
    }

    #[test]
    fn tensor_interleaves() {
        let c = Arc::new(com_arena());
        let f = copycat(c.clone()).unwrap();
        let g = copycat(c).unwrap();
        let t = tensor_morphism(&f, &g).unwrap();
        t.validate().unwrap();
        assert!(!t.plays.is_empty());
    }
}
