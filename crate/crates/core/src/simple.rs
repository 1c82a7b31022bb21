//! Simple-type skeleton inference: plain unification over `com`, `exp` and
//! arrows, ignoring schedule annotations. Runs before constraint generation
//! so that every application node has a known arrow shape.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::syntax::{BaseType, ConstId, Decl, ResourceType, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimpleType {
    Com,
    Exp,
    Arrow(Box<SimpleType>, Box<SimpleType>),
    Var(u32),
}

impl SimpleType {
    pub fn arrow(d: SimpleType, c: SimpleType) -> SimpleType {
        SimpleType::Arrow(Box::new(d), Box::new(c))
    }

    pub fn of_base(b: BaseType) -> SimpleType {
        match b {
            BaseType::Com => SimpleType::Com,
            BaseType::Exp => SimpleType::Exp,
        }
    }

    /// Skeleton of an annotated resource type.
    pub fn of_resource(t: &ResourceType) -> SimpleType {
        match t {
            ResourceType::Base(b) => SimpleType::of_base(*b),
            ResourceType::Arrow(_, d, c) => {
                SimpleType::arrow(SimpleType::of_resource(d), SimpleType::of_resource(c))
            }
        }
    }
}

impl fmt::Display for SimpleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimpleType::Com => write!(f, "com"),
            SimpleType::Exp => write!(f, "exp"),
            SimpleType::Var(v) => write!(f, "t{v}"),
            SimpleType::Arrow(d, c) => match **d {
                SimpleType::Arrow(..) => write!(f, "({d}) -> {c}"),
                _ => write!(f, "{d} -> {c}"),
            },
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("cannot unify `{0}` with `{1}`")]
    Clash(String, String),
    #[error("occurs check failed: t{0} occurs in `{1}`")]
    Occurs(u32, String),
}

/// Result of skeleton inference: the root type plus one resolved type per
/// term node in pre-order.
#[derive(Debug, Clone)]
pub struct SimpleTyping {
    pub root: SimpleType,
    pub node_types: Vec<SimpleType>,
}

struct Unifier {
    subst: HashMap<u32, SimpleType>,
    next: u32,
}

impl Unifier {
    fn fresh(&mut self) -> SimpleType {
        self.next += 1;
        SimpleType::Var(self.next - 1)
    }

    fn resolve(&self, t: &SimpleType) -> SimpleType {
        match t {
            SimpleType::Var(v) => match self.subst.get(v) {
                Some(u) => self.resolve(u),
                None => t.clone(),
            },
            SimpleType::Arrow(d, c) => SimpleType::arrow(self.resolve(d), self.resolve(c)),
            other => other.clone(),
        }
    }

    fn occurs(&self, v: u32, t: &SimpleType) -> bool {
        match self.resolve(t) {
            SimpleType::Var(u) => u == v,
            SimpleType::Arrow(d, c) => self.occurs(v, &d) || self.occurs(v, &c),
            _ => false,
        }
    }

    fn unify(&mut self, a: &SimpleType, b: &SimpleType) -> Result<(), TypeError> {
        let (a, b) = (self.resolve(a), self.resolve(b));
        match (&a, &b) {
            (SimpleType::Var(v), _) => {
                if a == b {
                    return Ok(());
                }
                if self.occurs(*v, &b) {
                    return Err(TypeError::Occurs(*v, b.to_string()));
                }
                self.subst.insert(*v, b);
                Ok(())
            }
            (_, SimpleType::Var(_)) => self.unify(&b, &a),
            (SimpleType::Com, SimpleType::Com) | (SimpleType::Exp, SimpleType::Exp) => Ok(()),
            (SimpleType::Arrow(d1, c1), SimpleType::Arrow(d2, c2)) => {
                self.unify(d1, d2)?;
                self.unify(c1, c2)
            }
            _ => Err(TypeError::Clash(a.to_string(), b.to_string())),
        }
    }
}

fn const_skeleton(u: &mut Unifier, c: ConstId) -> SimpleType {
    use SimpleType::*;
    let acc = SimpleType::arrow(Exp, Com);
    match c {
        ConstId::One => Exp,
        ConstId::Skip => Com,
        ConstId::Comp | ConstId::Seq | ConstId::Par => {
            SimpleType::arrow(Com, SimpleType::arrow(Com, Com))
        }
        ConstId::Op => SimpleType::arrow(Exp, SimpleType::arrow(Exp, Exp)),
        ConstId::If => {
            let s = u.fresh();
            SimpleType::arrow(Exp, SimpleType::arrow(s.clone(), SimpleType::arrow(s.clone(), s)))
        }
        ConstId::New => {
            let s = u.fresh();
            SimpleType::arrow(
                SimpleType::arrow(Exp, SimpleType::arrow(acc, s.clone())),
                s,
            )
        }
    }
}

fn walk(
    u: &mut Unifier,
    env: &mut Vec<(String, SimpleType)>,
    t: &Term,
    out: &mut Vec<SimpleType>,
) -> Result<SimpleType, TypeError> {
    let idx = out.len();
    out.push(SimpleType::Var(u32::MAX)); // placeholder, patched below
    let ty = match t {
        Term::Var(x) => env
            .iter()
            .rev()
            .find(|(n, _)| n == x)
            .map(|(_, t)| t.clone())
            .ok_or_else(|| TypeError::Unbound(x.clone()))?,
        Term::Const(c, _) => const_skeleton(u, *c),
        Term::Lambda(x, ann, body) => {
            let dom = match ann {
                Some(rt) => SimpleType::of_resource(rt),
                None => u.fresh(),
            };
            env.push((x.clone(), dom.clone()));
            let cod = walk(u, env, body, out)?;
            env.pop();
            SimpleType::arrow(dom, cod)
        }
        Term::App(f, a) => {
            let ft = walk(u, env, f, out)?;
            let at = walk(u, env, a, out)?;
            let cod = u.fresh();
            u.unify(&ft, &SimpleType::arrow(at, cod.clone()))?;
            cod
        }
    };
    out[idx] = ty.clone();
    Ok(ty)
}

/// Defaults any unconstrained type variable to `exp`; the language is
/// monomorphic, so leftover variables only arise from genuinely unconstrained
/// positions.
fn concretize(t: &SimpleType) -> SimpleType {
    match t {
        SimpleType::Var(_) => SimpleType::Exp,
        SimpleType::Arrow(d, c) => SimpleType::arrow(concretize(d), concretize(c)),
        other => other.clone(),
    }
}

pub fn infer_simple(term: &Term, declared: &[Decl]) -> Result<SimpleTyping, TypeError> {
    let mut u = Unifier {
        subst: HashMap::new(),
        next: 0,
    };
    let mut env: Vec<(String, SimpleType)> = declared
        .iter()
        .map(|d| (d.name.clone(), SimpleType::of_resource(&d.ty)))
        .collect();
    let mut out = Vec::new();
    let root = walk(&mut u, &mut env, term, &mut out)?;
    let node_types = out
        .iter()
        .map(|t| concretize(&u.resolve(t)))
        .collect::<Vec<_>>();
    Ok(SimpleTyping {
        root: concretize(&u.resolve(&root)),
        node_types,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_file, parse_term, parse_type};

    #[test]
    fn incx_is_a_command() {
        let t = parse_term("new x. x := !x + 1").unwrap();
        let ty = infer_simple(&t, &[]).unwrap();
        assert_eq!(ty.root, SimpleType::Com);
    }

    #[test]
    fn skip_is_a_command() {
        let t = parse_term("skip").unwrap();
        assert_eq!(infer_simple(&t, &[]).unwrap().root, SimpleType::Com);
    }

    #[test]
    fn convolution_skeleton() {
        let src = "\
free f : exp -> exp
free *1 : (exp -> exp) -> (exp -> exp) -> exp -> exp
free *2 : (exp -> exp) -> (exp -> exp) -> exp -> exp
---
(f *1 f) *2 (f *1 f)
";
        let file = parse_file(src).unwrap();
        let ty = infer_simple(&file.term, &file.decls).unwrap();
        assert_eq!(
            ty.root,
            SimpleType::arrow(SimpleType::Exp, SimpleType::Exp)
        );
    }

    #[test]
    fn alpha_renaming_invariance() {
        let a = parse_term("\\x. x + x").unwrap();
        let b = parse_term("\\y. y + y").unwrap();
        assert_eq!(
            infer_simple(&a, &[]).unwrap().root,
            infer_simple(&b, &[]).unwrap().root
        );
    }

    #[test]
    fn application_nodes_are_consistent() {
        let t = parse_term("\\f : exp -> exp. \\x : exp. f x").unwrap();
        let ty = infer_simple(&t, &[]).unwrap();
        // Every application node's function side is an arrow whose domain is
        // the argument's type.
        fn check(term: &Term, types: &[SimpleType], i: &mut usize) -> SimpleType {
            let my = types[*i].clone();
            *i += 1;
            match term {
                Term::Var(_) | Term::Const(..) => {}
                Term::Lambda(_, _, b) => {
                    check(b, types, i);
                }
                Term::App(f, a) => {
                    let ft = check(f, types, i);
                    let at = check(a, types, i);
                    match ft {
                        SimpleType::Arrow(d, c) => {
                            assert_eq!(*d, at);
                            assert_eq!(*c, my);
                        }
                        other => panic!("function position not an arrow: {other}"),
                    }
                }
            }
            my
        }
        let mut i = 0;
        check(&t, &ty.node_types, &mut i);
    }

    #[test]
    fn type_errors() {
        assert_eq!(
            infer_simple(&parse_term("y").unwrap(), &[]).err(),
            Some(TypeError::Unbound("y".into()))
        );
        let clash = parse_term("skip + 1").unwrap();
        assert!(matches!(
            infer_simple(&clash, &[]),
            Err(TypeError::Clash(..))
        ));
        let selfapp = parse_term("\\x. x x").unwrap();
        assert!(matches!(
            infer_simple(&selfapp, &[]),
            Err(TypeError::Occurs(..))
        ));
        let _ = parse_type("[I]·exp -> exp").unwrap();
    }
}
