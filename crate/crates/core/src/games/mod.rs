//! Timed game semantics: arenas with move timings and dummy alternatives,
//! plays, deadlock-free strategies, and the interpretation of concrete
//! judgments. Serves as the semantic oracle for coherence and the category
//! laws, at desk scale (arenas of at most 64 moves, exhaustive play sets).

pub mod build;
pub mod denote;
pub mod play;
pub mod strategy;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::rational::{format_rational, Q};

pub type MoveId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    O,
    P,
}

impl Polarity {
    pub fn flip(self) -> Polarity {
        match self {
            Polarity::O => Polarity::P,
            Polarity::P => Polarity::O,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MoveKind {
    Question,
    Answer,
}

/// Actual moves (M) versus dummy placeholders (N).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Actuality {
    Actual,
    Dummy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoveData {
    /// Hierarchical path ending in the base move name; unique in the arena.
    pub tag: String,
    pub time: Q,
    pub polarity: Polarity,
    pub kind: MoveKind,
    pub actuality: Actuality,
}

impl MoveData {
    pub fn is_o(&self) -> bool {
        self.polarity == Polarity::O
    }

    pub fn is_question(&self) -> bool {
        self.kind == MoveKind::Question
    }

    pub fn is_dummy(&self) -> bool {
        self.actuality == Actuality::Dummy
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ArenaError {
    #[error("arena has {0} moves; at most 64 are supported")]
    TooLarge(usize),
    #[error("duplicate move tag `{0}`")]
    DuplicateTag(String),
    #[error("move `{0}` violates: {1}")]
    Invalid(String, String),
    #[error("precedence relation has a cycle through `{0}`")]
    PrecedenceCycle(String),
    #[error("arrow causality violated: t_M(domain) = [{0}, {1}] ⊄ t_m(codomain) = [{2}, {3}]")]
    Causality(String, String, String, String),
}

/// A timed arena. The enabling relation is stored as per-move enabler sets;
/// `alt_class` partitions moves into ≍-classes; `prec` is the derived
/// precedence relation ≺ as row bitmasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arena {
    pub moves: Vec<MoveData>,
    pub initials: BTreeSet<MoveId>,
    /// enablers[m] = set of n with n ⊢ m.
    pub enablers: Vec<BTreeSet<MoveId>>,
    pub alt_class: Vec<usize>,
    /// prec[m] bit n set iff m ≺ n.
    pub prec: Vec<u64>,
    /// trans_enables[m] bit n set iff m ⊢⁺ n.
    pub trans_enables: Vec<u64>,
}

impl Arena {
    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn empty() -> Arena {
        Arena {
            moves: Vec::new(),
            initials: BTreeSet::new(),
            enablers: Vec::new(),
            alt_class: Vec::new(),
            prec: Vec::new(),
            trans_enables: Vec::new(),
        }
    }

    pub fn precedes(&self, m: MoveId, n: MoveId) -> bool {
        self.prec[m] & (1u64 << n) != 0
    }

    /// Enabled moves: n with m ⊢ n.
    pub fn enabled_by(&self, m: MoveId) -> Vec<MoveId> {
        (0..self.len())
            .filter(|&n| self.enablers[n].contains(&m))
            .collect()
    }

    pub fn move_by_tag(&self, tag: &str) -> Option<MoveId> {
        self.moves.iter().position(|m| m.tag == tag)
    }

    /// Number of ≍-classes.
    pub fn class_count(&self) -> usize {
        self.alt_class.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// [inf τ(E), sup τ(Ē)] — when the arena *may* execute. `None` for the
    /// empty arena.
    pub fn t_may(&self) -> Option<(Q, Q)> {
        let starts: Vec<&Q> = self.initials.iter().map(|&m| &self.moves[m].time).collect();
        let final_answers: Vec<&Q> = self.final_answers().into_iter().map(|m| &self.moves[m].time).collect();
        if starts.is_empty() || final_answers.is_empty() {
            return None;
        }
        Some((
            (*starts.iter().min().unwrap()).clone(),
            (*final_answers.iter().max().unwrap()).clone(),
        ))
    }

    /// [sup τ(E), inf τ(Ē)] — when the arena *must* execute.
    pub fn t_must(&self) -> Option<(Q, Q)> {
        let starts: Vec<&Q> = self.initials.iter().map(|&m| &self.moves[m].time).collect();
        let final_answers: Vec<&Q> = self.final_answers().into_iter().map(|m| &self.moves[m].time).collect();
        if starts.is_empty() || final_answers.is_empty() {
            return None;
        }
        Some((
            (*starts.iter().max().unwrap()).clone(),
            (*final_answers.iter().min().unwrap()).clone(),
        ))
    }

    /// Answers to initial questions.
    pub fn final_answers(&self) -> Vec<MoveId> {
        (0..self.len())
            .filter(|&m| {
                self.moves[m].kind == MoveKind::Answer
                    && self.enablers[m].iter().any(|e| self.initials.contains(e))
            })
            .collect()
    }

    /// Validate the pre-arena conditions and compute the precedence relation;
    /// errors if ≺ is not well-founded.
    pub fn build(
        moves: Vec<MoveData>,
        initials: BTreeSet<MoveId>,
        enablers: Vec<BTreeSet<MoveId>>,
        alt_class: Vec<usize>,
    ) -> Result<Arena, ArenaError> {
        let n = moves.len();
        if n > 64 {
            return Err(ArenaError::TooLarge(n));
        }
        let mut seen = BTreeSet::new();
        for m in &moves {
            if !seen.insert(&m.tag) {
                return Err(ArenaError::DuplicateTag(m.tag.clone()));
            }
        }
        for i in 0..n {
            let me = &moves[i];
            let is_initial = initials.contains(&i);
            if is_initial != enablers[i].is_empty() {
                return Err(ArenaError::Invalid(
                    me.tag.clone(),
                    "a move is initial exactly when it has no enabler".into(),
                ));
            }
            if is_initial && (me.polarity != Polarity::O || me.kind != MoveKind::Question) {
                return Err(ArenaError::Invalid(
                    me.tag.clone(),
                    "initial moves must be O-questions".into(),
                ));
            }
            for &e in &enablers[i] {
                let en = &moves[e];
                if en.polarity == me.polarity {
                    return Err(ArenaError::Invalid(
                        me.tag.clone(),
                        format!("enabler `{}` has the same polarity", en.tag),
                    ));
                }
                if en.kind != MoveKind::Question {
                    return Err(ArenaError::Invalid(
                        me.tag.clone(),
                        format!("enabler `{}` is not a question", en.tag),
                    ));
                }
                if en.actuality == Actuality::Dummy && me.actuality != Actuality::Dummy {
                    return Err(ArenaError::Invalid(
                        me.tag.clone(),
                        "dummy moves enable only dummy moves".into(),
                    ));
                }
            }
        }
        // ≍ conditions.
        for i in 0..n {
            for j in 0..n {
                if alt_class[i] != alt_class[j] {
                    continue;
                }
                let (a, b) = (&moves[i], &moves[j]);
                if a.time != b.time || a.polarity != b.polarity || a.kind != b.kind {
                    return Err(ArenaError::Invalid(
                        a.tag.clone(),
                        format!("alternative `{}` differs in time/polarity/kind", b.tag),
                    ));
                }
            }
        }
        // Enablers of alternatives are alternatives. Cross-enabled ex-initial
        // moves of arrow arenas have enablers spanning several classes (every
        // codomain initial enables them); the condition is only meaningful —
        // and checked — where enablers are unique.
        for i in 0..n {
            for j in 0..n {
                if alt_class[i] == alt_class[j]
                    && i != j
                    && enablers[i].len() == 1
                    && enablers[j].len() == 1
                {
                    let (&ei, &ej) = (
                        enablers[i].iter().next().unwrap(),
                        enablers[j].iter().next().unwrap(),
                    );
                    if alt_class[ei] != alt_class[ej] {
                        return Err(ArenaError::Invalid(
                            moves[i].tag.clone(),
                            format!(
                                "enablers `{}`/`{}` of alternatives are not alternatives",
                                moves[ei].tag, moves[ej].tag
                            ),
                        ));
                    }
                }
            }
        }
        for q in 0..n {
            let answers: Vec<MoveId> = (0..n)
                .filter(|&a| enablers[a].contains(&q) && moves[a].kind == MoveKind::Answer)
                .collect();
            for w in answers.windows(2) {
                if alt_class[w[0]] != alt_class[w[1]] {
                    return Err(ArenaError::Invalid(
                        moves[q].tag.clone(),
                        "co-enabled answers must be alternatives".into(),
                    ));
                }
            }
        }

        let trans_enables = transitive_enables(n, &enablers);
        let prec = compute_precedence(&moves, &enablers, &alt_class);
        for (i, row) in prec.iter().enumerate() {
            if row & (1u64 << i) != 0 {
                return Err(ArenaError::PrecedenceCycle(moves[i].tag.clone()));
            }
        }
        Ok(Arena {
            moves,
            initials,
            enablers,
            alt_class,
            prec,
            trans_enables,
        })
    }

    /// Set of (last) common enablers of two moves. The boolean is true when
    /// at least one common enabler exists.
    pub fn last_common_enablers(&self, m: MoveId, n: MoveId) -> (bool, Vec<MoveId>) {
        let common: Vec<MoveId> = (0..self.len())
            .filter(|&e| {
                self.trans_enables[e] & (1 << m) != 0 && self.trans_enables[e] & (1 << n) != 0
            })
            .collect();
        if common.is_empty() {
            return (false, Vec::new());
        }
        let last: Vec<MoveId> = common
            .iter()
            .copied()
            .filter(|&e| {
                !common
                    .iter()
                    .any(|&f| f != e && self.trans_enables[e] & (1 << f) != 0)
            })
            .collect();
        (true, last)
    }

    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (i, m) in self.moves.iter().enumerate() {
            out.push_str(&format!(
                "{i}: {} @{} {:?}{:?}{:?} class{} enab{:?}\n",
                m.tag,
                format_rational(&m.time),
                m.polarity,
                m.kind,
                m.actuality,
                self.alt_class[i],
                self.enablers[i]
            ));
        }
        out
    }
}

fn transitive_enables(n: usize, enablers: &[BTreeSet<MoveId>]) -> Vec<u64> {
    let mut mat = vec![0u64; n];
    for (m, es) in enablers.iter().enumerate() {
        for &e in es {
            mat[e] |= 1 << m;
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            let mut row = mat[i];
            let mut bits = row;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                row |= mat[j];
            }
            if row != mat[i] {
                mat[i] = row;
                changed = true;
            }
        }
    }
    mat
}

/// Minimum transitive relation closed under the five precedence generators.
fn compute_precedence(
    moves: &[MoveData],
    enablers: &[BTreeSet<MoveId>],
    alt_class: &[usize],
) -> Vec<u64> {
    let n = moves.len();
    let mut prec = vec![0u64; n];
    for (m, es) in enablers.iter().enumerate() {
        for &e in es {
            prec[e] |= 1 << m; // e ⊢ m ⟹ e ≺ m
        }
    }
    for i in 0..n {
        for j in 0..n {
            if moves[i].time < moves[j].time {
                prec[i] |= 1 << j;
            }
        }
    }
    // Fork/Join: q ⊢ a, q′ ⊢ a′, q ⊢ q′ ⟹ a′ ≺ a.
    for q in 0..n {
        for a in 0..n {
            if !(enablers[a].contains(&q) && moves[a].kind == MoveKind::Answer) {
                continue;
            }
            for qp in 0..n {
                if !(enablers[qp].contains(&q) && moves[qp].kind == MoveKind::Question) {
                    continue;
                }
                for ap in 0..n {
                    if enablers[ap].contains(&qp) && moves[ap].kind == MoveKind::Answer {
                        prec[ap] |= 1 << a;
                    }
                }
            }
        }
    }
    // Close under ≍-congruence and transitivity.
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            // transitivity
            let mut row = prec[i];
            let mut bits = row;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                row |= prec[j];
            }
            // m ≍ m′ ≺ n ⟹ m ≺ n
            for j in 0..n {
                if alt_class[i] == alt_class[j] {
                    row |= prec[j];
                }
            }
            // m ≺ n′ ≍ n ⟹ m ≺ n
            let mut extra = 0u64;
            let mut bits = row;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                for k in 0..n {
                    if alt_class[k] == alt_class[j] {
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
    prec
}

impl fmt::Display for Arena {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "arena with {} moves", self.len())
    }
}
