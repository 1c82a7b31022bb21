//! Abstract syntax, concrete parser and pretty-printer for PIA terms,
//! resource types and source-file headers.
//!
//! Surface syntax (ASCII): `->` for the annotated arrow, `·` (optional)
//! between an annotation and its type, `;` sequencing, `||` parallel,
//! `+` timed addition, `if E then M else N`, `new x. M`, `x := E`, `!x`,
//! `\x. M` for abstraction, `skip`, and the literal `1`. A header of
//! `free name : type` lines declares free identifiers, with `[?J]` symbolic
//! schedules (`[?J/4]` pins the size), `[@x]` symbolic single-stage
//! schedules, `[w]` the write stage and `[I]` the identity schedule.

use std::fmt;

use thiserror::Error;

use crate::expr::{SemiringExpr, StageExpr};
use crate::rational::parse_rational;
use crate::semiring::{Schedule, Stage};

pub type Ident = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstId {
    One,
    Skip,
    Comp,
    Seq,
    Par,
    Op,
    If,
    New,
}

impl ConstId {
    pub fn name(self) -> &'static str {
        match self {
            ConstId::One => "1",
            ConstId::Skip => "skip",
            ConstId::Comp => "comp",
            ConstId::Seq => "seq",
            ConstId::Par => "par",
            ConstId::Op => "op",
            ConstId::If => "if",
            ConstId::New => "new",
        }
    }
}

/// Stage/schedule parameters of a constant occurrence. Empty on freshly
/// parsed terms; constraint generation fills them with symbolic expressions
/// and substitution makes them concrete.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstParam {
    Stage(StageExpr),
    Sched(SemiringExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Var(Ident),
    Lambda(Ident, Option<ResourceType>, Box<Term>),
    App(Box<Term>, Box<Term>),
    Const(ConstId, Vec<ConstParam>),
}

impl Term {
    pub fn var(n: &str) -> Term {
        Term::Var(n.into())
    }

    pub fn lam(n: &str, body: Term) -> Term {
        Term::Lambda(n.into(), None, Box::new(body))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn cst(id: ConstId) -> Term {
        Term::Const(id, Vec::new())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseType {
    Com,
    Exp,
}

/// θ ::= σ | J·θ ⊸ θ. The acceptor type `acc` is sugar for `[w]·exp ⊸ com`
/// and is expanded at parse time.
#[derive(Debug, Clone, PartialEq)]
pub enum ResourceType {
    Base(BaseType),
    Arrow(SemiringExpr, Box<ResourceType>, Box<ResourceType>),
}

impl ResourceType {
    pub fn exp() -> ResourceType {
        ResourceType::Base(BaseType::Exp)
    }

    pub fn com() -> ResourceType {
        ResourceType::Base(BaseType::Com)
    }

    pub fn arrow(ann: SemiringExpr, dom: ResourceType, cod: ResourceType) -> ResourceType {
        ResourceType::Arrow(ann, Box::new(dom), Box::new(cod))
    }

    pub fn acc() -> ResourceType {
        ResourceType::arrow(
            SemiringExpr::Singleton(StageExpr::write_stage()),
            ResourceType::exp(),
            ResourceType::com(),
        )
    }

    pub fn is_acc(&self) -> bool {
        matches!(
            self,
            ResourceType::Arrow(SemiringExpr::Singleton(StageExpr::Var(w)), d, c)
                if w == "w" && **d == ResourceType::exp() && **c == ResourceType::com()
        )
    }

    pub fn annotations<'a>(&'a self, out: &mut Vec<&'a SemiringExpr>) {
        if let ResourceType::Arrow(ann, d, c) = self {
            out.push(ann);
            d.annotations(out);
            c.annotations(out);
        }
    }
}

/// Header declaration of a free identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub name: Ident,
    /// Usage annotation for the context entry; auto-generated when absent.
    pub outer: Option<SemiringExpr>,
    pub ty: ResourceType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceFile {
    pub decls: Vec<Decl>,
    /// Multiset-size pins harvested from `[?J/n]` annotations.
    pub size_pins: Vec<(String, u64)>,
    pub term: Term,
}

#[derive(Debug, Error, PartialEq)]
#[error("parse error at {line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// Operator-shaped identifier such as `*1` or `+2`.
    OpIdent(String),
    Number(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Dot,
    Colon,
    Assign,
    Bang,
    Lambda,
    Par,
    Plus,
    Arrow,
    Cdot,
    Question,
    At,
    Slash,
    HeaderSep,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::OpIdent(s) | Tok::Number(s) => write!(f, "`{s}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Assign => write!(f, "`:=`"),
            Tok::Bang => write!(f, "`!`"),
            Tok::Lambda => write!(f, "`\\`"),
            Tok::Par => write!(f, "`||`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Cdot => write!(f, "`·`"),
            Tok::Question => write!(f, "`?`"),
            Tok::At => write!(f, "`@`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::HeaderSep => write!(f, "`---`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    _src: &'a str,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

fn is_op_char(c: char) -> bool {
    matches!(c, '*' | '%' | '^' | '&' | '~' | '$')
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
            _src: src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<char> {
        self.chars.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        })
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek() {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '#' || (c == '/' && self.peek2() == Some('/')) {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else {
                out.push((Tok::Eof, line, col));
                return Ok(out);
            };
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                '[' => {
                    self.bump();
                    Tok::LBracket
                }
                ']' => {
                    self.bump();
                    Tok::RBracket
                }
                ';' => {
                    self.bump();
                    Tok::Semi
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                '!' => {
                    self.bump();
                    Tok::Bang
                }
                '\\' | 'λ' => {
                    self.bump();
                    Tok::Lambda
                }
                '·' => {
                    self.bump();
                    Tok::Cdot
                }
                '?' => {
                    self.bump();
                    Tok::Question
                }
                '@' => {
                    self.bump();
                    Tok::At
                }
                '/' => {
                    self.bump();
                    Tok::Slash
                }
                ':' => {
                    self.bump();
                    if self.peek() == Some('=') {
                        self.bump();
                        Tok::Assign
                    } else {
                        Tok::Colon
                    }
                }
                '|' => {
                    self.bump();
                    if self.peek() == Some('|') {
                        self.bump();
                        Tok::Par
                    } else {
                        return self.err("expected `||`");
                    }
                }
                '-' => {
                    self.bump();
                    if self.peek() == Some('>') {
                        self.bump();
                        Tok::Arrow
                    } else if self.peek() == Some('-') && self.peek2() == Some('-') {
                        self.bump();
                        self.bump();
                        Tok::HeaderSep
                    } else if self.peek().map(|c| c.is_ascii_digit()) == Some(true) {
                        let mut s = String::from("-");
                        self.lex_number_into(&mut s);
                        Tok::Number(s)
                    } else {
                        return self.err("expected `->`, `---` or a number after `-`");
                    }
                }
                '+' => {
                    self.bump();
                    if self.peek().map(is_ident_char) == Some(true) {
                        let mut s = String::from("+");
                        while let Some(c) = self.peek() {
                            if is_ident_char(c) {
                                s.push(c);
                                self.bump();
                            } else {
                                break;
                            }
                        }
                        Tok::OpIdent(s)
                    } else {
                        Tok::Plus
                    }
                }
                c if is_op_char(c) => {
                    let mut s = String::new();
                    s.push(c);
                    self.bump();
                    while let Some(c) = self.peek() {
                        if is_ident_char(c) {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::OpIdent(s)
                }
                c if c.is_ascii_digit() => {
                    let mut s = String::new();
                    self.lex_number_into(&mut s);
                    Tok::Number(s)
                }
                c if is_ident_start(c) => {
                    let mut s = String::new();
                    while let Some(c) = self.peek() {
                        if is_ident_char(c) {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(s)
                }
                other => return self.err(format!("unexpected character `{other}`")),
            };
            out.push((tok, line, col));
        }
    }

    fn lex_number_into(&mut self, s: &mut String) {
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if self.peek() == Some('.') && self.peek2().map(|c| c.is_ascii_digit()) == Some(true) {
            s.push('.');
            self.bump();
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    s.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    size_pins: Vec<(String, u64)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (tok, line, col) = &self.toks[self.pos];
        Err(ParseError {
            line: *line,
            col: *col,
            msg: format!("{} (found {tok})", msg.into()),
        })
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {t}"))
        }
    }

    fn eat(&mut self, t: Tok) -> bool {
        if *self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    // -- types --------------------------------------------------------------

    fn parse_rat(&mut self) -> Result<crate::rational::Q, ParseError> {
        let Tok::Number(n) = self.peek().clone() else {
            return self.err("expected a number");
        };
        self.bump();
        let mut text = n;
        if self.eat(Tok::Slash) {
            let Tok::Number(d) = self.peek().clone() else {
                return self.err("expected a denominator");
            };
            self.bump();
            text = format!("{text}/{d}");
        }
        match parse_rational(&text) {
            Some(q) => Ok(q),
            None => self.err(format!("bad rational `{text}`")),
        }
    }

    fn parse_stage_lit(&mut self) -> Result<StageExpr, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "I" => {
                self.bump();
                Ok(StageExpr::Const(Stage::identity()))
            }
            Tok::Ident(s) if s == "w" => {
                self.bump();
                Ok(StageExpr::write_stage())
            }
            Tok::LParen => {
                self.bump();
                let scale = self.parse_rat()?;
                self.expect(Tok::Comma)?;
                let phase = self.parse_rat()?;
                self.expect(Tok::RParen)?;
                match Stage::new(scale, phase) {
                    Ok(st) => Ok(StageExpr::Const(st)),
                    Err(e) => self.err(e.to_string()),
                }
            }
            _ => self.err("expected a stage: `(scale, phase)`, `I` or `w`"),
        }
    }

    /// `[...]` annotation: concrete schedule, `[?J]`, `[?J/4]` or `[@x]`.
    fn parse_annotation(&mut self) -> Result<SemiringExpr, ParseError> {
        self.expect(Tok::LBracket)?;
        if self.eat(Tok::Question) {
            let Tok::Ident(name) = self.peek().clone() else {
                return self.err("expected a schedule variable name after `[?`");
            };
            self.bump();
            if self.eat(Tok::Slash) {
                let Tok::Number(n) = self.peek().clone() else {
                    return self.err("expected a size after `/`");
                };
                self.bump();
                let n: u64 = match n.parse() {
                    Ok(v) => v,
                    Err(_) => return self.err(format!("bad size `{n}`")),
                };
                self.size_pins.push((name.clone(), n));
            }
            self.expect(Tok::RBracket)?;
            return Ok(SemiringExpr::Var(name));
        }
        if self.eat(Tok::At) {
            let Tok::Ident(name) = self.peek().clone() else {
                return self.err("expected a stage variable name after `[@`");
            };
            self.bump();
            self.expect(Tok::RBracket)?;
            return Ok(SemiringExpr::Singleton(StageExpr::Var(name)));
        }
        if self.eat(Tok::RBracket) {
            return Ok(SemiringExpr::zero());
        }
        let mut stages = vec![self.parse_stage_lit()?];
        while self.eat(Tok::Semi) {
            stages.push(self.parse_stage_lit()?);
        }
        self.expect(Tok::RBracket)?;
        // Fully concrete lists collapse to a schedule constant; lists with
        // stage variables stay symbolic sums of singletons.
        if stages.iter().all(|s| matches!(s, StageExpr::Const(_))) {
            let mut sched = Schedule::zero();
            for s in stages {
                if let StageExpr::Const(st) = s {
                    sched.insert(st, 1);
                }
            }
            Ok(SemiringExpr::Const(sched))
        } else {
            Ok(SemiringExpr::sum(
                stages.into_iter().map(SemiringExpr::Singleton),
            ))
        }
    }

    fn starts_annotation(&self) -> bool {
        *self.peek() == Tok::LBracket
    }

    /// θ ::= σ | J·θ -> θ; a missing domain annotation means "fresh unknown"
    /// and is represented by the reserved empty-name variable, renamed during
    /// constraint generation.
    fn parse_type(&mut self) -> Result<ResourceType, ParseError> {
        let (ann, dom) = if self.starts_annotation() {
            let ann = self.parse_annotation()?;
            self.eat(Tok::Cdot);
            (Some(ann), self.parse_atom_type()?)
        } else {
            (None, self.parse_atom_type()?)
        };
        if self.eat(Tok::Arrow) {
            let cod = self.parse_type()?;
            let ann = ann.unwrap_or(SemiringExpr::Var(String::new()));
            Ok(ResourceType::arrow(ann, dom, cod))
        } else {
            match ann {
                None => Ok(dom),
                Some(_) => self.err("annotation without arrow; write `[J]·θ -> θ`"),
            }
        }
    }

    fn parse_atom_type(&mut self) -> Result<ResourceType, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "exp" => {
                self.bump();
                Ok(ResourceType::exp())
            }
            Tok::Ident(s) if s == "com" => {
                self.bump();
                Ok(ResourceType::com())
            }
            Tok::Ident(s) if s == "acc" => {
                self.bump();
                Ok(ResourceType::acc())
            }
            Tok::LParen => {
                self.bump();
                let t = self.parse_type()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            _ => self.err("expected a type"),
        }
    }

    // -- declarations ---------------------------------------------------------

    fn parse_decl(&mut self) -> Result<Decl, ParseError> {
        let name = match self.bump() {
            Tok::Ident(s) => s,
            Tok::OpIdent(s) => s,
            _ => return self.err("expected an identifier after `free`"),
        };
        self.expect(Tok::Colon)?;
        // Outer-usage form: annotation `·` `(` type `)` not followed by `->`,
        // or annotation `·` base type.
        if self.starts_annotation() {
            let save = self.pos;
            let save_pins = self.size_pins.len();
            let ann = self.parse_annotation()?;
            self.eat(Tok::Cdot);
            if self.eat(Tok::LParen) {
                let ty = self.parse_type()?;
                if self.eat(Tok::RParen) && *self.peek() != Tok::Arrow {
                    return Ok(Decl {
                        name,
                        outer: Some(ann),
                        ty,
                    });
                }
            } else if let Ok(ty) = self.parse_atom_type() {
                if *self.peek() != Tok::Arrow {
                    return Ok(Decl {
                        name,
                        outer: Some(ann),
                        ty,
                    });
                }
            }
            self.pos = save;
            self.size_pins.truncate(save_pins);
        }
        let ty = self.parse_type()?;
        Ok(Decl {
            name,
            outer: None,
            ty,
        })
    }

    // -- terms ----------------------------------------------------------------

    fn parse_term(&mut self) -> Result<Term, ParseError> {
        let mut t = self.parse_par()?;
        while self.eat(Tok::Semi) {
            let rhs = self.parse_par()?;
            t = Term::app(Term::app(Term::cst(ConstId::Seq), t), rhs);
        }
        Ok(t)
    }

    fn parse_par(&mut self) -> Result<Term, ParseError> {
        let mut t = self.parse_stmt()?;
        while self.eat(Tok::Par) {
            let rhs = self.parse_stmt()?;
            t = Term::app(Term::app(Term::cst(ConstId::Par), t), rhs);
        }
        Ok(t)
    }

    fn parse_stmt(&mut self) -> Result<Term, ParseError> {
        if let Tok::Ident(name) = self.peek().clone() {
            if self.toks.get(self.pos + 1).map(|t| &t.0) == Some(&Tok::Assign) {
                self.bump();
                self.bump();
                // Assignment binds tighter than `;` and `||`: the written
                // value is an expression.
                let rhs = self.parse_infix()?;
                return Ok(Term::app(Term::var(&format!("{name}_w")), rhs));
            }
        }
        self.parse_infix()
    }

    fn parse_infix(&mut self) -> Result<Term, ParseError> {
        let mut t = self.parse_app()?;
        loop {
            match self.peek().clone() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.parse_app()?;
                    t = Term::app(Term::app(Term::cst(ConstId::Op), t), rhs);
                }
                Tok::OpIdent(op) => {
                    self.bump();
                    let rhs = self.parse_app()?;
                    t = Term::app(Term::app(Term::var(&op), t), rhs);
                }
                _ => return Ok(t),
            }
        }
    }

    fn parse_app(&mut self) -> Result<Term, ParseError> {
        let mut t = self.parse_atom()?;
        loop {
            match self.peek() {
                Tok::Ident(s)
                    if matches!(s.as_str(), "then" | "else") =>
                {
                    return Ok(t)
                }
                Tok::Ident(_) | Tok::Number(_) | Tok::LParen | Tok::Bang | Tok::Lambda => {
                    let arg = self.parse_atom()?;
                    t = Term::app(t, arg);
                }
                _ => return Ok(t),
            }
        }
    }

    fn parse_atom(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                let Tok::Ident(name) = self.peek().clone() else {
                    return self.err("expected a variable after `!`");
                };
                self.bump();
                Ok(Term::var(&format!("{name}_r")))
            }
            Tok::Lambda => {
                self.bump();
                let Tok::Ident(name) = self.peek().clone() else {
                    return self.err("expected a binder after `\\`");
                };
                self.bump();
                let ann = if self.eat(Tok::Colon) {
                    Some(self.parse_type()?)
                } else {
                    None
                };
                self.expect(Tok::Dot)?;
                let body = self.parse_term()?;
                Ok(Term::Lambda(name, ann, Box::new(body)))
            }
            Tok::Number(n) => {
                self.bump();
                if n == "1" {
                    Ok(Term::cst(ConstId::One))
                } else {
                    self.err(format!("`{n}` is not a term; the only literal is `1`"))
                }
            }
            Tok::LParen => {
                self.bump();
                let t = self.parse_term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(s) => match s.as_str() {
                "skip" => {
                    self.bump();
                    Ok(Term::cst(ConstId::Skip))
                }
                "comp" => {
                    self.bump();
                    Ok(Term::cst(ConstId::Comp))
                }
                "new" => {
                    self.bump();
                    if let Tok::Ident(x) = self.peek().clone() {
                        if self.toks.get(self.pos + 1).map(|t| &t.0) == Some(&Tok::Dot) {
                            self.bump();
                            self.bump();
                            let body = self.parse_term()?;
                            return Ok(desugar_new(&x, body));
                        }
                    }
                    Ok(Term::cst(ConstId::New))
                }
                "if" => {
                    self.bump();
                    let guard = self.parse_par()?;
                    match self.peek().clone() {
                        Tok::Ident(kw) if kw == "then" => {
                            self.bump();
                        }
                        _ => return self.err("expected `then`"),
                    }
                    let then_branch = self.parse_term()?;
                    match self.peek().clone() {
                        Tok::Ident(kw) if kw == "else" => {
                            self.bump();
                        }
                        _ => return self.err("expected `else`"),
                    }
                    let else_branch = self.parse_stmt()?;
                    Ok(Term::app(
                        Term::app(
                            Term::app(Term::cst(ConstId::If), guard),
                            then_branch,
                        ),
                        else_branch,
                    ))
                }
                _ => {
                    self.bump();
                    Ok(Term::var(&s))
                }
            },
            _ => self.err("expected a term"),
        }
    }
}

/// `new x. M` ↝ `new (λx_r. λx_w. M)`; `!x`/`x := E` in `M` have already been
/// parsed to `x_r` / `x_w E` references.
fn desugar_new(x: &str, body: Term) -> Term {
    // The writer binder is annotated with the acceptor type: the sugar knows
    // which binder is the acceptor, and downstream accounting keys on it.
    let writer = Term::Lambda(
        format!("{x}_w"),
        Some(ResourceType::acc()),
        Box::new(body),
    );
    Term::app(
        Term::cst(ConstId::New),
        Term::lam(&format!("{x}_r"), writer),
    )
}

/// Invert `desugar_new` on its image; used to check the sugar round-trip.
pub fn resugar_new(t: &Term) -> Option<(String, &Term)> {
    if let Term::App(f, arg) = t {
        if matches!(**f, Term::Const(ConstId::New, _)) {
            if let Term::Lambda(xr, _, inner) = &**arg {
                if let Term::Lambda(xw, _, body) = &**inner {
                    let x = xr.strip_suffix("_r")?;
                    if xw == &format!("{x}_w") {
                        return Some((x.to_string(), body));
                    }
                }
            }
        }
    }
    None
}

pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let file = parse_file(src)?;
    Ok(file.term)
}

pub fn parse_file(src: &str) -> Result<SourceFile, ParseError> {
    let toks = Lexer::new(src).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        size_pins: Vec::new(),
    };
    let mut decls = Vec::new();
    loop {
        match p.peek().clone() {
            Tok::Ident(s) if s == "free" => {
                p.bump();
                decls.push(p.parse_decl()?);
            }
            Tok::HeaderSep => {
                p.bump();
            }
            _ => break,
        }
    }
    let term = p.parse_term()?;
    if *p.peek() != Tok::Eof {
        return p.err("trailing input after term");
    }
    Ok(SourceFile {
        decls,
        size_pins: p.size_pins,
        term,
    })
}

pub fn parse_type(src: &str) -> Result<ResourceType, ParseError> {
    let toks = Lexer::new(src).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        size_pins: Vec::new(),
    };
    let t = p.parse_type()?;
    if *p.peek() != Tok::Eof {
        return p.err("trailing input after type");
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Pretty-printing

fn ident_is_op(s: &str) -> bool {
    s.starts_with(|c: char| is_op_char(c) || c == '+') && s.len() > 1
}

/// Precedence levels: 0 seq, 1 par, 2 infix ops, 3 application, 4 atoms.
fn pretty_prec(t: &Term, prec: u8, out: &mut String) {
    let parens = |need: bool, out: &mut String, f: &dyn Fn(&mut String)| {
        if need {
            out.push('(');
        }
        f(out);
        if need {
            out.push(')');
        }
    };
    match t {
        Term::Var(x) => out.push_str(x),
        Term::Const(c, _) => out.push_str(c.name()),
        Term::Lambda(x, ann, body) => parens(prec > 0, out, &|out| {
            out.push('\\');
            out.push_str(x);
            if let Some(ty) = ann {
                out.push_str(" : ");
                out.push_str(&pretty_type(ty));
            }
            out.push_str(". ");
            pretty_prec(body, 0, out);
        }),
        Term::App(f, a) => {
            // Re-sugar binary constants back to infix form.
            if let Term::App(inner, lhs) = &**f {
                let op: Option<(&str, u8)> = match &**inner {
                    Term::Const(ConstId::Seq, _) => Some((";", 0)),
                    Term::Const(ConstId::Par, _) => Some(("||", 1)),
                    Term::Const(ConstId::Op, _) => Some(("+", 2)),
                    Term::Var(v) if ident_is_op(v) => Some((v.as_str(), 2)),
                    _ => None,
                };
                if let Some((sym, level)) = op {
                    return parens(prec > level, out, &|out| {
                        pretty_prec(lhs, level, out);
                        out.push(' ');
                        out.push_str(sym);
                        out.push(' ');
                        pretty_prec(a, level + 1, out);
                    });
                }
            }
            if let Term::App(ff, guard) = &**f {
                if let Term::App(fff, g2) = &**ff {
                    if matches!(**fff, Term::Const(ConstId::If, _)) {
                        let _ = guard;
                        return parens(prec > 0, out, &|out| {
                            out.push_str("if ");
                            pretty_prec(g2, 1, out);
                            out.push_str(" then ");
                            pretty_prec(guard, 0, out);
                            out.push_str(" else ");
                            pretty_prec(a, 1, out);
                        });
                    }
                }
            }
            parens(prec > 3, out, &|out| {
                pretty_prec(f, 3, out);
                out.push(' ');
                pretty_prec(a, 4, out);
            });
        }
    }
}

pub fn pretty_term(t: &Term) -> String {
    let mut s = String::new();
    pretty_prec(t, 0, &mut s);
    s
}

pub fn pretty_annotation(e: &SemiringExpr) -> String {
    match e {
        SemiringExpr::Var(v) => format!("[?{v}]"),
        SemiringExpr::Const(s) => pretty_schedule(s),
        SemiringExpr::Singleton(StageExpr::Var(v)) if v == "w" => "[w]".into(),
        SemiringExpr::Singleton(StageExpr::Var(v)) => format!("[@{v}]"),
        SemiringExpr::Singleton(StageExpr::Const(s)) => format!("[{}]", pretty_stage(s)),
        other => format!("{other}"),
    }
}

pub fn pretty_stage(s: &Stage) -> String {
    format!(
        "({}, {})",
        crate::rational::format_rational(s.scale()),
        crate::rational::format_rational(s.phase())
    )
}

pub fn pretty_schedule(s: &Schedule) -> String {
    let mut out = String::from("[");
    for (i, st) in s.stages().iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        out.push_str(&pretty_stage(st));
    }
    out.push(']');
    out
}

pub fn pretty_type(t: &ResourceType) -> String {
    match t {
        ResourceType::Base(BaseType::Com) => "com".into(),
        ResourceType::Base(BaseType::Exp) => "exp".into(),
        ResourceType::Arrow(ann, dom, cod) => {
            let dom_str = match **dom {
                ResourceType::Base(_) => pretty_type(dom),
                ResourceType::Arrow(..) => format!("({})", pretty_type(dom)),
            };
            format!("{}·{} -> {}", pretty_annotation(ann), dom_str, pretty_type(cod))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn parses_incx_to_the_separated_form() {
        let t = parse_term("new x. x := !x + 1").unwrap();
        let expected = Term::app(
            Term::cst(ConstId::New),
            Term::lam(
                "x_r",
                Term::Lambda(
                    "x_w".into(),
                    Some(ResourceType::acc()),
                    Box::new(Term::app(
                        Term::var("x_w"),
                        Term::app(
                            Term::app(Term::cst(ConstId::Op), Term::var("x_r")),
                            Term::cst(ConstId::One),
                        ),
                    )),
                ),
            ),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn parses_skip() {
        assert_eq!(parse_term("skip").unwrap(), Term::cst(ConstId::Skip));
    }

    #[test]
    fn parses_infix_op_idents_left_associated() {
        let t = parse_term("(f *1 f) *2 (f *1 f)").unwrap();
        let inner = Term::app(Term::app(Term::var("*1"), Term::var("f")), Term::var("f"));
        let expected = Term::app(Term::app(Term::var("*2"), inner.clone()), inner);
        assert_eq!(t, expected);

        let chain = parse_term("a *1 b *2 c").unwrap();
        let left = Term::app(Term::app(Term::var("*1"), Term::var("a")), Term::var("b"));
        assert_eq!(
            chain,
            Term::app(Term::app(Term::var("*2"), left), Term::var("c"))
        );
    }

    #[test]
    fn new_sugar_resugars() {
        let t = parse_term("new x. x := !x + 1").unwrap();
        let (x, _body) = resugar_new(&t).expect("resugar");
        assert_eq!(x, "x");
    }

    #[test]
    fn pretty_types_match_surface() {
        let f = ResourceType::arrow(
            SemiringExpr::Const(Schedule::from_stages([
                Stage::new(q(1, 2), q(1, 10)).unwrap(),
                Stage::new(q(1, 2), q(1, 5)).unwrap(),
            ])),
            ResourceType::exp(),
            ResourceType::exp(),
        );
        assert_eq!(pretty_type(&f), "[(0.5, 0.1);(0.5, 0.2)]·exp -> exp");
        assert_eq!(pretty_type(&ResourceType::com()), "com");
        assert_eq!(pretty_type(&ResourceType::acc()), "[w]·exp -> com");
    }

    #[test]
    fn type_syntax_round_trips() {
        let t = parse_type("[(0.5, 0.1);(0.5, 0.2)]·exp -> exp").unwrap();
        assert_eq!(parse_type(&pretty_type(&t)).unwrap(), t);
        let acc = parse_type("acc").unwrap();
        assert!(acc.is_acc());
    }

    #[test]
    fn header_declarations() {
        let src = "\
free f : [?J3]·([(0.5,0.1);(0.5,0.2)]·exp -> exp)
free x : [?Jx]·exp
free +1 : [@x1]·exp -> [@y1]·exp -> exp
---
(f x +1 f x)
";
        let file = parse_file(src).unwrap();
        assert_eq!(file.decls.len(), 3);
        assert_eq!(file.decls[0].name, "f");
        assert_eq!(file.decls[0].outer, Some(SemiringExpr::Var("J3".into())));
        assert_eq!(file.decls[1].outer, Some(SemiringExpr::Var("Jx".into())));
        assert_eq!(file.decls[2].name, "+1");
        assert!(file.decls[2].outer.is_none());
    }

    #[test]
    fn size_pins_are_collected() {
        let src = "free s1 : [?J1vi/4]·([?J1i/1]·([?J1ii]·exp -> exp) -> [?J1v]·exp -> exp)\ns1";
        let file = parse_file(src).unwrap();
        assert_eq!(
            file.size_pins,
            vec![("J1vi".to_string(), 4), ("J1i".to_string(), 1)]
        );
    }

    #[test]
    fn rejects_unknown_literals() {
        assert!(parse_term("2").is_err());
        assert!(parse_term("x :=").is_err());
    }

    #[test]
    fn seq_if_par_structure() {
        let t = parse_term("skip ; skip || skip").unwrap();
        let par = Term::app(
            Term::app(Term::cst(ConstId::Par), Term::cst(ConstId::Skip)),
            Term::cst(ConstId::Skip),
        );
        assert_eq!(
            t,
            Term::app(
                Term::app(Term::cst(ConstId::Seq), Term::cst(ConstId::Skip)),
                par
            )
        );
        let c = parse_term("if !x then skip else skip").unwrap();
        assert!(matches!(c, Term::App(..)));
    }
}
