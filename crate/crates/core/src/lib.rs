//! Schedule-typed inference for PIA (a pipelined, recursion-free Idealized
//! Algol) and the timed-game semantics used as its semantic oracle.
//!
//! The pipeline is: parse → simple types → constraint generation → two-phase
//! SMT solving (multiset sizes over ℕ, then stages over ℝ) → substitution →
//! derivation checking. The `games` module interprets concrete judgments as
//! strategies over timed arenas.

pub mod check;
pub mod constraint;
pub mod expr;
pub mod games;
pub mod infer;
pub mod pipeline;
pub mod rational;
pub mod smt;
pub mod semiring;
pub mod simple;
pub mod syntax;

pub use rational::Q;
pub use semiring::{Schedule, SemiringElement, Stage, StageOrders, Zoi};
