//! End-to-end inference through the external solver: the increment example,
//! solver plumbing, and the checker loop on solved judgments.

use pia_core::check::check_judgment;
use pia_core::constraint::violated_constraints;
use pia_core::expr::SemiringExpr;
use pia_core::pipeline::{infer_end_to_end, SolveConfig};
use pia_core::semiring::Schedule;
use pia_core::smt::default_solver;
use pia_core::syntax::{ConstId, ConstParam, Term};

fn cfg() -> SolveConfig {
    let solver = default_solver().expect("an SMT solver must be available for e2e tests");
    SolveConfig::new(solver)
}

fn find_new_params(t: &Term) -> Option<(&Vec<ConstParam>, &Term)> {
    match t {
        Term::App(f, a) => {
            if let Term::Const(ConstId::New, params) = &**f {
                Some((params, a))
            } else {
                find_new_params(f).or_else(|| find_new_params(a))
            }
        }
        Term::Lambda(_, _, b) => find_new_params(b),
        _ => None,
    }
}

#[test]
fn incx_end_to_end_yields_write_shape_and_checks() {
    let src = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../programs/incx.pia"
    ))
    .unwrap();
    let mut config = cfg();
    config.pipeline = true;
    let started = std::time::Instant::now();
    let out = infer_end_to_end(&src, &config).expect("incx must be typable");
    assert!(started.elapsed().as_secs() < 5, "runtime budget exceeded");

    // Shape: new_{com, [w×b], [w]} with b a non-identity contractive stage.
    let w = out.model.stages.get("w").expect("write stage").clone();
    let (params, _body) = find_new_params(&out.concrete.term).expect("new constant");
    let [ConstParam::Sched(SemiringExpr::Const(j)), ConstParam::Sched(SemiringExpr::Const(k))] =
        params.as_slice()
    else {
        panic!("new parameters not concrete: {params:?}")
    };
    assert_eq!(k, &Schedule::singleton(w.clone()), "K must be [w]");
    assert_eq!(j.size(), 1, "J must be a single composite write-read stage");
    let j_stage = j.stages().remove(0);
    // J = w × b for some non-identity b.
    let b = out
        .model
        .stages
        .iter()
        .find(|(name, _)| name.starts_with('x'))
        .map(|(_, s)| s.clone())
        .expect("op stage parameter");
    assert!(!b.is_identity());
    assert_eq!(j_stage, w.compose(&b), "J must be the composite w×b");

    // The checker accepts the solved judgment.
    let checked = check_judgment(&out.concrete);
    assert!(checked.is_ok(), "checker rejected: {:?}", checked.err());

    // Exact residuals of the solved (pipe-augmented) system are zero.
    let bad = violated_constraints(&out.solved_system, &out.model).unwrap();
    assert!(bad.is_empty(), "violated: {bad:?}");
}

#[test]
fn trivial_identity_judgment_solves() {
    let out = infer_end_to_end("free x : exp\nx", &cfg()).unwrap();
    assert_eq!(out.concrete.context.len(), 1);
    assert_eq!(out.concrete.context[0].1, Schedule::one());
    check_judgment(&out.concrete).unwrap();
}

#[test]
fn skip_solves_with_empty_constraints() {
    let out = infer_end_to_end("skip", &cfg()).unwrap();
    assert!(out.judgment.system.constraints.is_empty());
    check_judgment(&out.concrete).unwrap();
}

#[test]
fn seq_and_par_stage_conditions_hold() {
    let mut config = cfg();
    config.pipeline = false;
    let out = infer_end_to_end(&std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../programs/seqpar.pia"
    ))
    .unwrap(), &config)
    .unwrap();
    check_judgment(&out.concrete).unwrap();
    // seq parameters: first argument strictly before the second.
    let term = &out.concrete.term;
    fn collect<'a>(t: &'a Term, out: &mut Vec<(&'a ConstId, &'a Vec<ConstParam>)>) {
        match t {
            Term::Const(id, p) => out.push((id, p)),
            Term::App(f, a) => {
                collect(f, out);
                collect(a, out);
            }
            Term::Lambda(_, _, b) => collect(b, out),
            Term::Var(_) => {}
        }
    }
    let mut consts = Vec::new();
    collect(term, &mut consts);
    let seq = consts
        .iter()
        .find(|(id, _)| **id == ConstId::Seq)
        .expect("seq constant");
    if let [ConstParam::Stage(pia_core::expr::StageExpr::Const(x)), ConstParam::Stage(pia_core::expr::StageExpr::Const(y))] =
        seq.1.as_slice()
    {
        assert!(x.orders(y).strictly_before, "{x} must be < {y}");
    } else {
        panic!("seq params not concrete");
    }
    let par = consts.iter().find(|(id, _)| **id == ConstId::Par).unwrap();
    assert_eq!(par.1.len(), 1, "par shares one stage across both arguments");
}

#[test]
fn mutated_annotation_is_rejected() {
    let out = infer_end_to_end("free x : exp\n\\f : [?A]·exp -> exp. f x", &cfg()).unwrap();
    let mut broken = out.concrete.clone();
    // Perturb x's context annotation by adding a stage: never neutral.
    let half = pia_core::semiring::Stage::new(
        pia_core::rational::q(1, 2),
        pia_core::rational::q(1, 4),
    )
    .unwrap();
    broken.context[0].1 = broken.context[0].1.add(&Schedule::singleton(half));
    assert!(check_judgment(&broken).is_err());
    check_judgment(&out.concrete).unwrap();
}
