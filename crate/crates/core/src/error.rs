//! Shared error type for the whole library.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by construction, validation and parsing.
///
/// Operations distinguish *semantic* negatives (an automaton rejects a word,
/// two automata differ) from errors: the former are ordinary return values,
/// the latter mean the input violated a documented precondition or did not
/// parse.
#[derive(Debug, Error)]
pub enum Error {
    /// Two objects that must live on the same carrier size do not.
    #[error("carrier size mismatch: {0}")]
    SizeMismatch(String),

    /// Two objects that must live in the same data symmetry do not.
    #[error("symmetry mismatch: {0}")]
    BackendMismatch(String),

    /// A structure is not a member of its symmetry's age (class of finite
    /// structures), e.g. a cyclic "order" or a reflexive graph edge.
    #[error("not a valid structure for this symmetry: {0}")]
    NotAMember(String),

    /// A claimed permutation is not a bijection of the carrier.
    #[error("not a permutation: {0}")]
    NotAPermutation(String),

    /// A claimed local symmetry contains a non-automorphism.
    #[error("{0} is not an automorphism of the shape")]
    NotAnAutomorphism(String),

    /// A map that must be an embedding (injective, relation preserving and
    /// reflecting) is not.
    #[error("not an embedding: {0}")]
    NotAnEmbedding(String),

    /// A witness embedding fails the commuting condition against the local
    /// symmetries of its source and target.
    #[error("witness fails the commuting condition: {0}")]
    CommutingCondition(String),

    /// A valuation contains duplicate data values.
    #[error("duplicate data values in valuation")]
    DuplicateValues,

    /// A valuation does not induce the shape of the orbit it claims.
    #[error("valuation does not match orbit shape: {0}")]
    ShapeMismatch(String),

    /// An equivariant map has no entry for a source orbit.
    #[error("map has no entry for source orbit {0}")]
    PartialMap(usize),

    /// A relation fails reflexivity, symmetry or transitivity.
    #[error("relation is not an equivalence: {0}")]
    NotAnEquivalence(String),

    /// An automaton's transition table misses an annotation.
    #[error("state {state}: missing transition for annotation `{annotation}`")]
    MissingAnnotation { state: String, annotation: String },

    /// An automaton's transition table lists the same annotation twice.
    #[error("state {state}: duplicate transition for annotation `{annotation}`")]
    DuplicateAnnotation { state: String, annotation: String },

    /// Generic validation failure with a description of the violated
    /// invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Text input did not parse.  Positions are 1-based.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// The requested brute-force domain is too small to be meaningful.
    #[error("finite domain too small: {0}")]
    DomainTooSmall(String),

    /// An I/O failure while reading or writing automaton files.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Helper for parse errors.
    pub fn parse(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, col, msg: msg.into() }
    }
}
