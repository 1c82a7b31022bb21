//! The resource semiring: contractive affine stages, schedules (multisets of
//! stages, the semigroup semiring over ℕ), and the two scalar instances
//! (naturals, {0,1,∞}).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::rational::{format_rational, Q};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SemiringError {
    #[error("stage ({0}, {1}) is not contractive")]
    NotContractive(String, String),
    #[error("semiring instance mismatch: {0} vs {1}")]
    InstanceMismatch(&'static str, &'static str),
    #[error("operation on symbolic semiring element {0}")]
    Symbolic(String),
}

/// A contractive affine transformation `t ↦ scale·t + phase` acting on the
/// unit interval. Ordered by (phase, scale): the canonical multiset order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stage {
    scale: Q,
    phase: Q,
}

impl PartialOrd for Stage {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Stage {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.phase, &self.scale).cmp(&(&other.phase, &other.scale))
    }
}

impl Stage {
    /// Requires 0 ≤ scale ≤ 1, phase ≥ 0 and scale + phase ≤ 1, so the image
    /// of [0,1] is a sub-interval of [0,1].
    pub fn new(scale: Q, phase: Q) -> Result<Stage, SemiringError> {
        let zero = Q::from_integer(0.into());
        let one = Q::from_integer(1.into());
        if scale < zero || scale > one || phase < zero || &scale + &phase > one {
            return Err(SemiringError::NotContractive(
                format_rational(&scale),
                format_rational(&phase),
            ));
        }
        Ok(Stage { scale, phase })
    }

    pub fn identity() -> Stage {
        Stage {
            scale: Q::from_integer(1.into()),
            phase: Q::from_integer(0.into()),
        }
    }

    pub fn is_identity(&self) -> bool {
        self == &Stage::identity()
    }

    pub fn scale(&self) -> &Q {
        &self.scale
    }

    pub fn phase(&self) -> &Q {
        &self.phase
    }

    /// Matrix product of affine transformations: the timing of `other`
    /// re-expressed inside `self`'s window.
    pub fn compose(&self, other: &Stage) -> Stage {
        Stage {
            scale: &self.scale * &other.scale,
            phase: &self.scale * &other.phase + &self.phase,
        }
    }

    /// Action on the unit interval: [phase, scale + phase].
    pub fn interval(&self) -> (Q, Q) {
        (self.phase.clone(), &self.scale + &self.phase)
    }

    /// Apply to a single time point.
    pub fn apply(&self, t: &Q) -> Q {
        &self.scale * t + &self.phase
    }

    pub fn orders(&self, other: &Stage) -> StageOrders {
        let (t0, t1) = self.interval();
        let (u0, u1) = other.interval();
        let leq = t0 <= u0 && t1 <= u1;
        let disjoint = t1 < u0 || u1 < t0;
        StageOrders {
            subset: t0 >= u0 && t1 <= u1,
            egli_milner_leq: leq,
            disjoint,
            fifo: leq,
            strict_fifo: leq && t0 != u0 && t1 != u1,
            strictly_before: leq && disjoint,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {})",
            format_rational(&self.scale),
            format_rational(&self.phase)
        )
    }
}

/// Relations between the interval actions of two stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageOrders {
    pub subset: bool,
    pub egli_milner_leq: bool,
    pub disjoint: bool,
    /// Synonym for the Egli-Milner order.
    pub fifo: bool,
    /// FIFO with distinct start and end times.
    pub strict_fifo: bool,
    /// Egli-Milner plus disjointness; the order imposed on `seq` and `if`.
    pub strictly_before: bool,
}

/// A finite multiset of stages: an element of the semigroup semiring ℕ[Aff₁ᶜ].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct Schedule {
    entries: BTreeMap<Stage, u64>,
}

impl Schedule {
    pub fn zero() -> Schedule {
        Schedule::default()
    }

    pub fn one() -> Schedule {
        Schedule::singleton(Stage::identity())
    }

    pub fn singleton(stage: Stage) -> Schedule {
        let mut entries = BTreeMap::new();
        entries.insert(stage, 1);
        Schedule { entries }
    }

    pub fn from_stages<I: IntoIterator<Item = Stage>>(stages: I) -> Schedule {
        let mut s = Schedule::zero();
        for st in stages {
            s.insert(st, 1);
        }
        s
    }

    pub fn insert(&mut self, stage: Stage, multiplicity: u64) {
        if multiplicity == 0 {
            return;
        }
        *self.entries.entry(stage).or_insert(0) += multiplicity;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Stage, u64)> {
        self.entries.iter().map(|(s, &m)| (s, m))
    }

    /// Stages in canonical order, multiplicities expanded.
    pub fn stages(&self) -> Vec<Stage> {
        let mut out = Vec::new();
        for (s, m) in &self.entries {
            for _ in 0..*m {
                out.push(s.clone());
            }
        }
        out
    }

    /// Total multiplicity.
    pub fn size(&self) -> u64 {
        self.entries.values().sum()
    }

    /// Multiset union.
    pub fn add(&self, other: &Schedule) -> Schedule {
        let mut out = self.clone();
        for (s, m) in &other.entries {
            out.insert(s.clone(), *m);
        }
        out
    }

    /// Multiset convolution under stage composition; not commutative.
    pub fn mul(&self, other: &Schedule) -> Schedule {
        let mut out = Schedule::zero();
        for (x, m) in &self.entries {
            for (y, n) in &other.entries {
                out.insert(x.compose(y), m * n);
            }
        }
        out
    }

    /// True iff the schedule is a proper set totally ordered by ◁.
    pub fn is_pipeline(&self) -> bool {
        if self.entries.values().any(|&m| m > 1) {
            return false;
        }
        let stages: Vec<&Stage> = self.entries.keys().collect();
        for i in 0..stages.len() {
            for j in (i + 1)..stages.len() {
                let o = stages[i].orders(stages[j]);
                let o2 = stages[j].orders(stages[i]);
                if !(o.strict_fifo || o2.strict_fifo) {
                    return false;
                }
            }
        }
        true
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, s) in self.stages().iter().enumerate() {
            if i > 0 {
                write!(f, ";")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "]")
    }
}

/// The {0, 1, ∞} instance; ∞ is a distinguished symbol, not a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Zoi {
    Zero,
    One,
    Inf,
}

impl Zoi {
    pub fn add(self, other: Zoi) -> Zoi {
        use Zoi::*;
        match (self, other) {
            (Zero, x) | (x, Zero) => x,
            (Inf, _) | (_, Inf) => Inf,
            (One, One) => Inf,
        }
    }

    pub fn mul(self, other: Zoi) -> Zoi {
        use Zoi::*;
        match (self, other) {
            (Zero, _) | (_, Zero) => Zero,
            (One, x) | (x, One) => x,
            (Inf, Inf) => Inf,
        }
    }
}

impl fmt::Display for Zoi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Zoi::Zero => write!(f, "0"),
            Zoi::One => write!(f, "1"),
            Zoi::Inf => write!(f, "inf"),
        }
    }
}

/// A concrete element of one of the three instances, or a named unknown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SemiringElement {
    Nat(u64),
    Zoi(Zoi),
    Sched(Schedule),
    /// Named unknown; concrete operations reject it.
    Var(String),
}

impl SemiringElement {
    fn instance(&self) -> &'static str {
        match self {
            SemiringElement::Nat(_) => "nat",
            SemiringElement::Zoi(_) => "zoi",
            SemiringElement::Sched(_) => "schedule",
            SemiringElement::Var(_) => "symbolic",
        }
    }
}

pub fn sr_add(a: &SemiringElement, b: &SemiringElement) -> Result<SemiringElement, SemiringError> {
    use SemiringElement::*;
    match (a, b) {
        (Nat(x), Nat(y)) => Ok(Nat(x + y)),
        (Zoi(x), Zoi(y)) => Ok(Zoi(x.add(*y))),
        (Sched(x), Sched(y)) => Ok(Sched(x.add(y))),
        (Var(v), _) | (_, Var(v)) => Err(SemiringError::Symbolic(v.clone())),
        _ => Err(SemiringError::InstanceMismatch(a.instance(), b.instance())),
    }
}

pub fn sr_mul(a: &SemiringElement, b: &SemiringElement) -> Result<SemiringElement, SemiringError> {
    use SemiringElement::*;
    match (a, b) {
        (Nat(x), Nat(y)) => Ok(Nat(x * y)),
        (Zoi(x), Zoi(y)) => Ok(Zoi(x.mul(*y))),
        (Sched(x), Sched(y)) => Ok(Sched(x.mul(y))),
        (Var(v), _) | (_, Var(v)) => Err(SemiringError::Symbolic(v.clone())),
        _ => Err(SemiringError::InstanceMismatch(a.instance(), b.instance())),
    }
}

/// The three semiring instances, for selecting zeros/units and law suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instance {
    Nat,
    Zoi,
    Schedule,
}

pub fn sr_zero(instance: Instance) -> SemiringElement {
    match instance {
        Instance::Nat => SemiringElement::Nat(0),
        Instance::Zoi => SemiringElement::Zoi(Zoi::Zero),
        Instance::Schedule => SemiringElement::Sched(Schedule::zero()),
    }
}

pub fn sr_one(instance: Instance) -> SemiringElement {
    match instance {
        Instance::Nat => SemiringElement::Nat(1),
        Instance::Zoi => SemiringElement::Zoi(Zoi::One),
        Instance::Schedule => SemiringElement::Sched(Schedule::one()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn st(s: (i64, i64), p: (i64, i64)) -> Stage {
        Stage::new(q(s.0, s.1), q(p.0, p.1)).unwrap()
    }

    #[test]
    fn compose_matches_matrix_product() {
        let id = Stage::identity();
        let x = st((1, 2), (1, 10));
        assert_eq!(id.compose(&x), x);
        assert_eq!(st((1, 2), (1, 4)).compose(&st((1, 2), (1, 10))), st((1, 4), (3, 10)));
        assert_eq!(st((1, 2), (1, 4)).compose(&st((1, 2), (1, 5))), st((1, 4), (7, 20)));
    }

    #[test]
    fn intervals() {
        assert_eq!(Stage::identity().interval(), (q(0, 1), q(1, 1)));
        assert_eq!(st((1, 2), (1, 10)).interval(), (q(1, 10), q(3, 5)));
        assert_eq!(st((1, 2), (1, 5)).interval(), (q(1, 5), q(7, 10)));
    }

    #[test]
    fn contractivity_enforced() {
        assert!(Stage::new(q(1, 2), q(3, 4)).is_err());
        assert!(Stage::new(q(-1, 2), q(0, 1)).is_err());
        assert!(Stage::new(q(1, 2), q(-1, 10)).is_err());
        assert!(Stage::new(q(1, 1), q(0, 1)).is_ok());
    }

    #[test]
    fn orders_of_two_stage_pipeline() {
        let x = st((1, 2), (1, 10));
        let y = st((1, 2), (1, 5));
        let o = x.orders(&y);
        assert!(o.egli_milner_leq && o.strict_fifo);
        assert!(!o.disjoint && !o.strictly_before);

        let refl = x.orders(&x);
        assert!(refl.egli_milner_leq && !refl.strict_fifo);

        let a = st((2, 5), (0, 1));
        let b = st((2, 5), (1, 2));
        assert!(a.orders(&b).strictly_before);
    }

    #[test]
    fn schedule_ops() {
        let x = st((1, 2), (1, 10));
        let y = st((1, 2), (1, 5));
        let z = st((1, 4), (1, 4));
        let j = Schedule::singleton(x.clone());
        let k = Schedule::from_stages([y.clone(), z.clone()]);
        let prod = j.mul(&k);
        assert_eq!(prod, Schedule::from_stages([x.compose(&y), x.compose(&z)]));
        assert_eq!(Schedule::one().mul(&k), k);
        assert_eq!(
            sr_add(&SemiringElement::Nat(2), &SemiringElement::Nat(3)),
            Ok(SemiringElement::Nat(5))
        );
        assert_eq!(
            sr_mul(&SemiringElement::Nat(2), &SemiringElement::Nat(3)),
            Ok(SemiringElement::Nat(6))
        );
        assert!(sr_add(&SemiringElement::Nat(1), &SemiringElement::Zoi(Zoi::One)).is_err());
        assert!(sr_mul(&SemiringElement::Var("J".into()), &SemiringElement::Nat(1)).is_err());
    }

    #[test]
    fn sizes() {
        let f = Schedule::from_stages([st((1, 2), (1, 10)), st((1, 2), (1, 5))]);
        assert_eq!(f.size(), 2);
        assert_eq!(Schedule::zero().size(), 0);
        let j1vi = Schedule::from_stages([
            st((1, 2), (1, 8)),
            st((1, 2), (1, 4)),
            st((1, 2), (3, 8)),
            st((1, 2), (7, 16)),
        ]);
        assert_eq!(j1vi.size(), 4);
        assert!(j1vi.is_pipeline());
    }

    #[test]
    fn pipelines() {
        let x = st((1, 2), (1, 10));
        let y = st((1, 2), (1, 5));
        assert!(Schedule::from_stages([x.clone(), y]).is_pipeline());
        let mut dup = Schedule::zero();
        dup.insert(x, 2);
        assert!(!dup.is_pipeline());
        assert!(Schedule::zero().is_pipeline());
        assert!(Schedule::one().is_pipeline());
    }

    #[test]
    fn zoi_saturates() {
        use Zoi::*;
        assert_eq!(One.add(One), Inf);
        assert_eq!(Inf.add(Zero), Inf);
        assert_eq!(Zero.mul(Inf), Zero);
        assert_eq!(One.mul(Inf), Inf);
    }
}
