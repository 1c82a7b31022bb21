//! Exhaustive play enumeration. A play is a sequence of distinct moves with
//! unique enablers and answers, ordered consistently with ≺, containing
//! exactly one representative of every ≍-class.

use super::{Arena, MoveKind};

pub type Play = Vec<super::MoveId>;

/// Can `m` legally extend the position `p`?
pub fn can_extend(arena: &Arena, p: &[usize], used: u64, classes: u64, m: usize) -> bool {
    if used & (1 << m) != 0 || classes & (1 << arena.alt_class[m]) != 0 {
        return false;
    }
    let enablers_present: Vec<usize> = arena.enablers[m]
        .iter()
        .copied()
        .filter(|&e| used & (1 << e) != 0)
        .collect();
    if arena.initials.contains(&m) {
        // initial moves have no enablers by construction
    } else if enablers_present.is_empty() {
        // Non-initial moves need an enabler already played. Cross-enabled
        // ex-initial questions of arrow arenas may see several (one codomain
        // initial per class); the move is justified by whichever occurred.
        return false;
    }
    // A question may receive at most one answer.
    if arena.moves[m].kind == MoveKind::Answer {
        for q in &enablers_present {
            let answered = p.iter().any(|&a| {
                arena.moves[a].kind == MoveKind::Answer && arena.enablers[a].contains(q)
            });
            if answered {
                return false;
            }
        }
    }
    // Order must respect ≺: nothing already played may be ≺-after m.
    for &n in p {
        if arena.precedes(m, n) {
            return false;
        }
    }
    true
}

fn is_complete(arena: &Arena, p: &[usize], classes: u64) -> bool {
    let all_classes = if arena.class_count() == 64 {
        u64::MAX
    } else {
        (1u64 << arena.class_count()) - 1
    };
    if classes != all_classes {
        return false;
    }
    // every question answered
    for &q in p {
        if arena.moves[q].kind == MoveKind::Question {
            let answered = p.iter().any(|&a| {
                arena.moves[a].kind == MoveKind::Answer && arena.enablers[a].contains(&q)
            });
            if !answered {
                return false;
            }
        }
    }
    true
}

/// All legal plays of the arena, in lexicographic move-id order.
pub fn all_plays(arena: &Arena) -> Vec<Play> {
    let mut out = Vec::new();
    let mut p = Vec::new();
    fn go(
        arena: &Arena,
        p: &mut Vec<usize>,
        used: u64,
        classes: u64,
        out: &mut Vec<Play>,
    ) {
        if is_complete(arena, p, classes) {
            out.push(p.clone());
            return;
        }
        for m in 0..arena.len() {
            if can_extend(arena, p, used, classes, m) {
                p.push(m);
                go(
                    arena,
                    p,
                    used | (1 << m),
                    classes | (1 << arena.alt_class[m]),
                    out,
                );
                p.pop();
            }
        }
    }
    if arena.is_empty() {
        return vec![Vec::new()];
    }
    go(arena, &mut p, 0, 0, &mut out);
    out
}

/// Is the given sequence a legal play?
pub fn is_play(arena: &Arena, play: &[usize]) -> bool {
    let mut used = 0u64;
    let mut classes = 0u64;
    for (i, &m) in play.iter().enumerate() {
        if !can_extend(arena, &play[..i], used, classes, m) {
            return false;
        }
        used |= 1 << m;
        classes |= 1 << arena.alt_class[m];
    }
    is_complete(arena, play, classes)
}

#[cfg(test)]
mod tests {
    use super::super::build::{com_arena, exp_arena};
    use super::*;

    #[test]
    fn com_has_two_plays() {
        let a = com_arena();
        let plays = all_plays(&a);
        assert_eq!(plays.len(), 2);
        for p in &plays {
            assert_eq!(p.len(), 2);
            assert!(is_play(&a, p));
        }
    }

    #[test]
    fn exp_plays_choose_one_answer() {
        let a = exp_arena(2);
        let plays = all_plays(&a);
        // dummy branch plus one play per answer value
        assert_eq!(plays.len(), 1 + 3);
    }

    #[test]
    fn exp_zero_degenerate() {
        let a = exp_arena(0);
        assert_eq!(all_plays(&a).len(), 2);
    }
}
