//! The two multi-stage scheduling fixtures: three pipelined adders, and the
//! higher-order convolution with contraction. Both must solve under the
//! pipeline discipline, and the published stage values must remain
//! satisfiable when pinned onto the generated systems.

use std::collections::BTreeMap;
use std::time::Instant;

use pia_core::check::check_judgment;
use pia_core::constraint::violated_constraints;
use pia_core::pipeline::{infer_end_to_end_with_pins, SolveConfig};
use pia_core::rational::parse_rational;
use pia_core::semiring::{Schedule, SemiringElement, Stage};
use pia_core::smt::default_solver;

fn cfg() -> SolveConfig {
    let mut c = SolveConfig::new(default_solver().expect("solver"));
    c.pipeline = true;
    c
}

fn stage(s: &str, p: &str) -> Stage {
    Stage::new(parse_rational(s).unwrap(), parse_rational(p).unwrap()).unwrap()
}

fn sched(stages: &[(&str, &str)]) -> SemiringElement {
    SemiringElement::Sched(Schedule::from_stages(
        stages.iter().map(|(s, p)| stage(s, p)),
    ))
}

fn read(p: &str) -> String {
    std::fs::read_to_string(format!(
        "{}/../../programs/{p}",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap()
}

#[test]
fn adders_solve_under_pipeline_discipline() {
    let started = Instant::now();
    let out = infer_end_to_end_with_pins(&read("adders.pia"), &cfg(), &[]).expect("adders SAT");
    eprintln!(
        "adders: {} vars, {} assertions, {} ms, sizes {:?}",
        out.stats.variables(),
        out.stats.assertions(),
        started.elapsed().as_millis(),
        out.sizes
    );
    let bad = violated_constraints(&out.solved_system, &out.model).unwrap();
    assert!(bad.is_empty(), "violated: {bad:?}");
    check_judgment(&out.concrete).unwrap();
}

#[test]
fn adders_accept_published_stage_values() {
    // +1: (0.5, 0.265625)/(0.5, 0.25), +2: (0.5, 0.21875)/(0.5, 0.25),
    // +3: (0.5, 0.375)/(0.5, 0.25)
    let pins: Vec<(String, SemiringElement)> = vec![
        ("x1".into(), sched(&[("0.5", "0.265625")])),
        ("y1".into(), sched(&[("0.5", "0.25")])),
        ("x2".into(), sched(&[("0.5", "0.21875")])),
        ("y2".into(), sched(&[("0.5", "0.25")])),
        ("x3".into(), sched(&[("0.5", "0.375")])),
        ("y3".into(), sched(&[("0.5", "0.25")])),
    ];
    let started = Instant::now();
    let out =
        infer_end_to_end_with_pins(&read("adders.pia"), &cfg(), &pins).expect("published model");
    eprintln!("adders pinned: {} ms", started.elapsed().as_millis());
    for (name, want) in &pins {
        let SemiringElement::Sched(want) = want else { unreachable!() };
        let got = Schedule::singleton(out.model.stages[name].clone());
        assert_eq!(&got, want, "pin {name}");
    }
    let bad = violated_constraints(&out.solved_system, &out.model).unwrap();
    assert!(bad.is_empty(), "violated: {bad:?}");
}

#[test]
fn convolution_sizes_match_published_cardinalities() {
    let started = Instant::now();
    let out = infer_end_to_end_with_pins(&read("convolution.pia"), &cfg(), &[])
        .expect("convolution SAT");
    eprintln!(
        "convolution: {} vars, {} assertions, {} ms",
        out.stats.variables(),
        out.stats.assertions(),
        started.elapsed().as_millis()
    );
    let expect: BTreeMap<&str, u64> = [
        ("J1i", 1),
        ("J1iv", 1),
        ("J2i", 1),
        ("J2iv", 1),
        ("J1vi", 4),
        ("J2vi", 3),
        ("J3", 4),
        ("J1ii", 2),
        ("J1iii", 2),
    ]
    .into();
    for (name, n) in expect {
        assert_eq!(out.sizes.get(name), Some(&n), "size of {name}");
    }
    let bad = violated_constraints(&out.solved_system, &out.model).unwrap();
    assert!(bad.is_empty(), "violated: {bad:?}");
}

#[test]
fn convolution_accepts_published_model() {
    let id = ("1", "0.0");
    let f_inner = [("0.5", "0.1"), ("0.5", "0.2")];
    let pins: Vec<(String, SemiringElement)> = vec![
        ("J1i".into(), sched(&[id])),
        ("J1iv".into(), sched(&[id])),
        ("J2i".into(), sched(&[id])),
        ("J2iv".into(), sched(&[id])),
        ("J1ii".into(), sched(&f_inner)),
        ("J1iii".into(), sched(&f_inner)),
        ("J1v".into(), sched(&f_inner)),
        ("J2ii".into(), sched(&f_inner)),
        ("J2iii".into(), sched(&f_inner)),
        ("J2v".into(), sched(&f_inner)),
        (
            "J1vi".into(),
            sched(&[
                ("0.5", "0.125"),
                ("0.5", "0.25"),
                ("0.5", "0.375"),
                ("0.5", "0.4375"),
            ]),
        ),
        (
            "J3".into(),
            sched(&[
                ("0.5", "0.125"),
                ("0.5", "0.25"),
                ("0.5", "0.375"),
                ("0.5", "0.4375"),
            ]),
        ),
        (
            "J2vi".into(),
            sched(&[("0.25", "0.25"), ("0.25", "0.5"), ("0.25", "0.625")]),
        ),
    ];
    let started = Instant::now();
    let out = infer_end_to_end_with_pins(&read("convolution.pia"), &cfg(), &pins)
        .expect("published model must satisfy the system");
    eprintln!("convolution pinned: {} ms", started.elapsed().as_millis());
    let bad = violated_constraints(&out.solved_system, &out.model).unwrap();
    assert!(bad.is_empty(), "violated: {bad:?}");
}
