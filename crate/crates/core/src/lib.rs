//! Truncated explicit formulas for partial sums of Möbius functions.
//!
//! The crate evaluates the zero sums, residue corrections and finite Euler
//! product terms that express
//!
//! * `M*(x, chi)`, the twisted summatory Möbius function of a Dirichlet character,
//! * `M*(x; q, a)`, its restriction to an arithmetic progression, and
//! * `M_K*(x)`, the summatory function of the Möbius function of an Abelian field,
//!
//! and compares every assembled formula with a direct sieve.
//!
//! Modules, bottom up: [`characters`], [`sieve`], [`lfunc`], [`zeros`],
//! [`finite_euler`], [`field`], [`explicit`].

pub mod arith;
pub mod characters;
pub mod error;
pub mod explicit;
pub mod field;
pub mod finite_euler;
pub mod lfunc;
pub mod numeric;
pub mod sieve;
pub mod zeros;

pub use characters::{build_group, Angle, CharacterGroup, DirichletCharacter};
pub use error::{Error, Result};
pub use field::AbelianField;
pub use finite_euler::{build_product, FiniteEulerProduct};
pub use lfunc::{EvalResult, PrecisionPolicy};
pub use explicit::{DerivativeSumReport, ExplicitFormulaReport, FormulaSettings};
pub use zeros::{GoodOrdinate, MemoryZeroStore, ZeroCache, ZeroRecord, ZeroSource};
pub use num_complex::Complex64;
