//! Denotation smoke tests: base constants, a contraction λ-term through the
//! solver, and coherence across root contraction plans.

use pia_core::check::check_judgment;
use pia_core::games::denote::{Interp, RootPlan};
use pia_core::games::strategy::dump_strategy;
use pia_core::pipeline::{infer_end_to_end, SolveConfig};
use pia_core::smt::default_solver;

fn cfg() -> SolveConfig {
    SolveConfig::new(default_solver().expect("solver"))
}

fn denote_src(src: &str, max_int: u64, plan: RootPlan) -> pia_core::games::strategy::Morphism {
    let out = infer_end_to_end(src, &cfg()).expect("inference");
    let checked = check_judgment(&out.concrete).expect("check");
    let interp = Interp { max_int };
    interp
        .denote_judgment(&checked, &out.concrete, plan)
        .expect("denote")
}

#[test]
fn skip_denotes_to_the_run_done_strategy() {
    let m = denote_src("skip", 2, RootPlan::Canonical);
    m.validate().unwrap();
    assert_eq!(m.plays.len(), 2);
    let dump = dump_strategy(&m);
    assert!(dump.contains("c:q@0 c:a@1"), "got: {dump}");
}

#[test]
fn literal_one_answers_one() {
    let m = denote_src("1", 2, RootPlan::Canonical);
    m.validate().unwrap();
    let dump = dump_strategy(&m);
    assert!(dump.contains("c:q@0 c:v1@1"), "got: {dump}");
    assert!(!dump.contains("c:v0@1") && !dump.contains("c:v2@1"));
}

#[test]
fn identity_judgment_denotes_to_copycat() {
    let m = denote_src("free x : exp\nx", 1, RootPlan::Canonical);
    m.validate().unwrap();
    assert!(m.strategy_precedence().is_some());
    // echo: O asks on the right, P forwards left, O answers left, P echoes.
    let dump = dump_strategy(&m);
    assert!(dump.contains("c:q@0 d.g0.s0:q@0 d.g0.s0:v0@1 c:v0@1"), "got: {dump}");
}

#[test]
fn op_term_computes_saturating_sum() {
    // \x. x + x at max_int 2: reading v per occurrence, result = min(2, a+b).
    let m = denote_src("\\x : exp. x + x", 2, RootPlan::Canonical);
    m.validate().unwrap();
    // In every actual play the result answer is the saturating sum of the
    // two argument answers.
    let a = &m.arrow;
    for p in &m.plays {
        let val = |prefix: &str| -> Option<u64> {
            p.iter().find_map(|&mv| {
                let t = &a.moves[mv].tag;
                t.strip_prefix(prefix)
                    .and_then(|r| if r.contains('.') { None } else { r.strip_prefix('v') })
                    .and_then(|v| v.parse().ok())
            })
        };
        let (x1, x2) = (val("c.d.s0."), val("c.d.s1."));
        let out = val("c.c.");
        if let (Some(x1), Some(x2), Some(out)) = (x1, x2, out) {
            assert_eq!(out, (x1 + x2).min(2));
        }
    }
}

#[test]
fn coherence_routes_agree_on_three_way_contraction() {
    let src = "free y : exp\n(y + y) + y";
    let a = denote_src(src, 1, RootPlan::Canonical);
    let b = denote_src(src, 1, RootPlan::FoldLeft);
    let c = denote_src(src, 1, RootPlan::FoldRight);
    assert_eq!(a.plays, b.plays);
    assert_eq!(b.plays, c.plays);
    a.validate().unwrap();
}
