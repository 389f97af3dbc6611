//! Computing with orbit-finite nominal sets and automata over infinite
//! alphabets.
//!
//! The library works relative to a *data symmetry*: a countable structure of
//! atomic data values together with its automorphism group.  Three symmetries
//! are supported (see [`symmetry::Backend`]): plain equality on naturals,
//! the dense total order on rationals, and the random graph on naturals with
//! a fixed bit-encoded edge relation.  In each of them, sets that are
//! infinite but consist of finitely many orbits under the group action admit
//! finite representations:
//!
//! * an orbit is described by a finite *shape* structure plus a *local
//!   symmetry* group of that shape ([`nomset::OrbitRepr`]),
//! * equivariant functions, subsets, products and quotients of such sets are
//!   all computed on those finite descriptions ([`nomset`]),
//! * deterministic register automata over the infinite alphabet of data
//!   values are given by finitely many control states with orbit shapes and
//!   a complete symbolic transition table ([`automata::FraisseDfa`]),
//! * nondeterministic automata, register machines with equality constraints
//!   ([`fma`]) and translations between the models are provided, and
//! * everything can be cross-checked against a brute-force interpretation
//!   over a small finite domain of data values ([`oracle`]).
//!
//! All public values are immutable; every operation is a pure function of
//! its inputs and produces deterministic, canonical output.

pub mod automata;
pub mod fma;
pub mod nomset;
pub mod oracle;
pub mod perm;
pub mod symmetry;

mod error;

pub use error::{Error, Result};
