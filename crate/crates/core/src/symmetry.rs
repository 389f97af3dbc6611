//! Data symmetries: atomic data values, finite structures over them, and the
//! structure-level primitives everything else is built from.
//!
//! A *backend* fixes the universe of data values and its relational
//! vocabulary:
//!
//! * [`Backend::Equality`] — natural numbers with equality only,
//! * [`Backend::Order`] — rational numbers with the dense total order `<`,
//! * [`Backend::Graph`] — natural numbers as vertices of the universal
//!   random graph, with the fixed edge rule: for `x < y`, the edge `{x, y}`
//!   is present exactly when bit `x` of `y` is set.
//!
//! In all three cases the universe is homogeneous (every isomorphism of
//! finite induced substructures extends to an automorphism) and has the
//! extension property (every one-point extension of a finite substructure is
//! realized by some value).  Those two facts are what the witness and
//! canonicalization routines below exploit; they are also why orbits of
//! tuples are exactly the classes of tuples with positionally isomorphic
//! induced structures.
//!
//! Finite structures ([`FinStruct`]) are carriers `{0, …, n-1}` with a set of
//! relational facts; [`Embedding`]s preserve and reflect all relations.
//! Carriers stay small (sums of a few register sets), so automorphism groups
//! and canonical forms are found by direct enumeration.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};

use crate::perm::{Perm, PermGroup};
use crate::{Error, Result};

/// The three supported data symmetries.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Backend {
    /// Natural numbers with equality only.
    Equality,
    /// Rational numbers with the dense total order.
    Order,
    /// The universal (random) graph on naturals with the bit edge rule.
    Graph,
}

impl Backend {
    /// The relational vocabulary of this backend.
    pub fn signature(self) -> Signature {
        match self {
            Backend::Equality => Signature { relations: vec![] },
            Backend::Order => Signature { relations: vec![("<", 2)] },
            Backend::Graph => Signature { relations: vec![("E", 2)] },
        }
    }

    /// Stable lowercase name used in file headers and CLI flags.
    pub fn name(self) -> &'static str {
        match self {
            Backend::Equality => "equality",
            Backend::Order => "order",
            Backend::Graph => "graph",
        }
    }

    /// Parses a backend name as it appears in file headers.
    pub fn parse(text: &str) -> Result<Backend> {
        match text {
            "equality" => Ok(Backend::Equality),
            "order" => Ok(Backend::Order),
            "graph" => Ok(Backend::Graph),
            other => Err(Error::Validation(format!(
                "unknown symmetry `{other}` (expected equality, order or graph)"
            ))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Relation names with arities; empty for equality, one binary relation
/// otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub relations: Vec<(&'static str, usize)>,
}

/// An atomic data value of one of the three backends.
///
/// Graph vertices are arbitrary-precision naturals because realizing dense
/// adjacency patterns forces values with large bit positions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum DataValue {
    /// Equality backend: a natural number such as `7`.
    Nat(u64),
    /// Order backend: an exact rational in lowest terms such as `3/2`.
    Rat(Rational64),
    /// Graph backend: a vertex of the random graph, written `g7`.
    Vertex(BigUint),
}

impl DataValue {
    /// The backend a value belongs to.
    pub fn backend(&self) -> Backend {
        match self {
            DataValue::Nat(_) => Backend::Equality,
            DataValue::Rat(_) => Backend::Order,
            DataValue::Vertex(_) => Backend::Graph,
        }
    }

    /// Parses a value literal in the given backend's syntax: naturals `7`,
    /// rationals `3/2` or `-1`, graph vertices `g7`.
    pub fn parse(backend: Backend, text: &str) -> Result<DataValue> {
        let bad = |msg: String| Error::Validation(msg);
        match backend {
            Backend::Equality => text
                .parse::<u64>()
                .map(DataValue::Nat)
                .map_err(|_| bad(format!("bad natural `{text}`"))),
            Backend::Order => {
                let (num, den) = match text.split_once('/') {
                    Some((n, d)) => (n, d),
                    None => (text, "1"),
                };
                let n: i64 =
                    num.trim().parse().map_err(|_| bad(format!("bad rational `{text}`")))?;
                let d: i64 =
                    den.trim().parse().map_err(|_| bad(format!("bad rational `{text}`")))?;
                if d == 0 {
                    return Err(bad(format!("zero denominator in `{text}`")));
                }
                Ok(DataValue::Rat(Rational64::new(n, d)))
            }
            Backend::Graph => {
                let digits = text
                    .strip_prefix('g')
                    .ok_or_else(|| bad(format!("bad vertex `{text}` (expected g<number>)")))?;
                digits
                    .parse::<BigUint>()
                    .map(DataValue::Vertex)
                    .map_err(|_| bad(format!("bad vertex `{text}`")))
            }
        }
    }
}

impl Ord for DataValue {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use DataValue::*;
        match (self, other) {
            (Nat(a), Nat(b)) => a.cmp(b),
            (Rat(a), Rat(b)) => a.cmp(b),
            (Vertex(a), Vertex(b)) => a.cmp(b),
            // Mixed variants never occur in validated data; order by kind so
            // that derived containers still behave.
            (a, b) => kind_rank(a).cmp(&kind_rank(b)),
        }
    }
}

impl PartialOrd for DataValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn kind_rank(v: &DataValue) -> u8 {
    match v {
        DataValue::Nat(_) => 0,
        DataValue::Rat(_) => 1,
        DataValue::Vertex(_) => 2,
    }
}

impl fmt::Display for DataValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataValue::Nat(n) => write!(f, "{n}"),
            DataValue::Rat(r) => {
                if r.denom().is_one() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            DataValue::Vertex(v) => write!(f, "g{v}"),
        }
    }
}

impl fmt::Debug for DataValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Adjacency in the random graph: for `x < y` the edge is present exactly
/// when bit `x` of `y` is set; a vertex is never adjacent to itself.
pub fn rado_adjacent(a: &BigUint, b: &BigUint) -> bool {
    if a == b {
        return false;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    match lo.to_u64() {
        Some(bit) => hi.bit(bit),
        // A bit index beyond u64 range exceeds the width of any value we can
        // hold, so the bit is zero.
        None => false,
    }
}

/// A single relational fact over carrier indices.
///
/// `Edge` facts are kept normalized with the smaller index first; the edge
/// relation itself is symmetric and irreflexive.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Fact {
    /// `Lt(i, j)` — index `i` is below index `j` in the total order.
    Lt(usize, usize),
    /// `Edge(i, j)` with `i < j` — an undirected edge between the indices.
    Edge(usize, usize),
}

impl Fact {
    /// An undirected edge, normalizing the index order.
    pub fn edge(a: usize, b: usize) -> Fact {
        Fact::Edge(a.min(b), a.max(b))
    }

    fn relabel(self, p: &Perm) -> Fact {
        match self {
            Fact::Lt(a, b) => Fact::Lt(p.apply(a), p.apply(b)),
            Fact::Edge(a, b) => Fact::edge(p.apply(a), p.apply(b)),
        }
    }
}

/// A finite structure over `{0, …, n-1}` in one backend's vocabulary.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct FinStruct {
    backend: Backend,
    size: usize,
    facts: BTreeSet<Fact>,
}

impl FinStruct {
    /// Builds and validates a structure.
    pub fn new(backend: Backend, size: usize, facts: BTreeSet<Fact>) -> Result<FinStruct> {
        let s = FinStruct { backend, size, facts };
        s.validate()?;
        Ok(s)
    }

    /// The empty structure on an empty carrier.
    pub fn empty(backend: Backend) -> FinStruct {
        FinStruct { backend, size: 0, facts: BTreeSet::new() }
    }

    /// A structure with `size` points and no facts (valid in the equality
    /// and graph backends, and for `size <= 1` in the order backend).
    pub fn discrete(backend: Backend, size: usize) -> Result<FinStruct> {
        FinStruct::new(backend, size, BTreeSet::new())
    }

    /// The backend this structure lives in.
    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Carrier size.
    pub fn size(&self) -> usize {
        self.size
    }

    /// The fact set.
    pub fn facts(&self) -> &BTreeSet<Fact> {
        &self.facts
    }

    /// True when the fact holds (edges may be queried in either direction).
    pub fn holds(&self, fact: Fact) -> bool {
        match fact {
            Fact::Lt(..) => self.facts.contains(&fact),
            Fact::Edge(a, b) => self.facts.contains(&Fact::edge(a, b)),
        }
    }

    /// Checks membership in the backend's class of finite structures.
    pub fn validate(&self) -> Result<()> {
        let n = self.size;
        for fact in &self.facts {
            let (a, b, kind) = match *fact {
                Fact::Lt(a, b) => (a, b, Backend::Order),
                Fact::Edge(a, b) => (a, b, Backend::Graph),
            };
            if kind != self.backend {
                return Err(Error::NotAMember(format!(
                    "fact {fact:?} does not belong to the {} vocabulary",
                    self.backend
                )));
            }
            if a >= n || b >= n {
                return Err(Error::NotAMember(format!(
                    "fact {fact:?} mentions an index outside the carrier 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::NotAMember(format!("fact {fact:?} is reflexive")));
            }
            if let Fact::Edge(a, b) = *fact {
                if a > b {
                    return Err(Error::NotAMember(format!(
                        "edge {fact:?} is not normalized (smaller index first)"
                    )));
                }
            }
        }
        if self.backend == Backend::Order {
            // Exactly one of i<j, j<i for every pair, and transitivity.
            for i in 0..n {
                for j in (i + 1)..n {
                    let ij = self.facts.contains(&Fact::Lt(i, j));
                    let ji = self.facts.contains(&Fact::Lt(j, i));
                    if ij == ji {
                        return Err(Error::NotAMember(format!(
                            "order structure must relate {i} and {j} exactly one way"
                        )));
                    }
                }
            }
            for &f in &self.facts {
                if let Fact::Lt(a, b) = f {
                    for c in 0..n {
                        if self.facts.contains(&Fact::Lt(b, c))
                            && !self.facts.contains(&Fact::Lt(a, c))
                        {
                            return Err(Error::NotAMember(format!(
                                "order structure is not transitive at {a}<{b}<{c}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// True when this is a member of its backend's class.
    pub fn member(&self) -> bool {
        self.validate().is_ok()
    }

    /// Relabels the structure: index `i` of the input becomes index
    /// `p.apply(i)` of the output.
    pub fn relabel(&self, p: &Perm) -> FinStruct {
        debug_assert_eq!(p.carrier_size(), self.size);
        FinStruct {
            backend: self.backend,
            size: self.size,
            facts: self.facts.iter().map(|f| f.relabel(p)).collect(),
        }
    }

    /// The induced substructure on the listed indices; index `k` of the
    /// result corresponds to `indices[k]` of the input.
    pub fn substruct(&self, indices: &[usize]) -> FinStruct {
        let pos = |i: usize| indices.iter().position(|&x| x == i);
        let mut facts = BTreeSet::new();
        for fact in &self.facts {
            match *fact {
                Fact::Lt(a, b) => {
                    if let (Some(x), Some(y)) = (pos(a), pos(b)) {
                        facts.insert(Fact::Lt(x, y));
                    }
                }
                Fact::Edge(a, b) => {
                    if let (Some(x), Some(y)) = (pos(a), pos(b)) {
                        facts.insert(Fact::edge(x, y));
                    }
                }
            }
        }
        FinStruct { backend: self.backend, size: indices.len(), facts }
    }

    /// For an order structure, the carrier indices listed from least to
    /// greatest.
    pub fn chain(&self) -> Vec<usize> {
        debug_assert_eq!(self.backend, Backend::Order);
        // The rank of an index is the number of indices below it.
        let mut rank: Vec<(usize, usize)> = (0..self.size)
            .map(|i| {
                let below = (0..self.size).filter(|&j| self.holds(Fact::Lt(j, i))).count();
                (below, i)
            })
            .collect();
        rank.sort_unstable();
        rank.into_iter().map(|(_, i)| i).collect()
    }

    /// Neighbours of `i` in a graph structure.
    pub fn neighbours(&self, i: usize) -> BTreeSet<usize> {
        (0..self.size).filter(|&j| j != i && self.holds(Fact::edge(i, j))).collect()
    }
}

/// An injective, relation-preserving and -reflecting map between structures.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct Embedding {
    map: Vec<usize>,
}

impl Embedding {
    /// Builds an embedding of `source` into `target`, validating that the
    /// map is injective and both preserves and reflects every relation.
    pub fn new(map: Vec<usize>, source: &FinStruct, target: &FinStruct) -> Result<Embedding> {
        if map.len() != source.size() {
            return Err(Error::NotAnEmbedding(format!(
                "map length {} does not match source size {}",
                map.len(),
                source.size()
            )));
        }
        let mut seen = BTreeSet::new();
        for &i in &map {
            if i >= target.size() {
                return Err(Error::NotAnEmbedding(format!(
                    "image {i} outside target carrier 0..{}",
                    target.size()
                )));
            }
            if !seen.insert(i) {
                return Err(Error::NotAnEmbedding("map is not injective".into()));
            }
        }
        let e = Embedding { map };
        if !e.is_embedding(source, target) {
            return Err(Error::NotAnEmbedding(
                "map does not preserve and reflect the relations".into(),
            ));
        }
        Ok(e)
    }

    /// Builds without validation; used internally where validity is
    /// established by construction and re-checked in debug builds.
    pub(crate) fn new_unchecked(map: Vec<usize>) -> Embedding {
        Embedding { map }
    }

    fn is_embedding(&self, source: &FinStruct, target: &FinStruct) -> bool {
        for x in 0..source.size() {
            for y in 0..source.size() {
                if x == y {
                    continue;
                }
                match source.backend() {
                    Backend::Equality => {}
                    Backend::Order => {
                        if source.holds(Fact::Lt(x, y))
                            != target.holds(Fact::Lt(self.map[x], self.map[y]))
                        {
                            return false;
                        }
                    }
                    Backend::Graph => {
                        if source.holds(Fact::edge(x, y))
                            != target.holds(Fact::edge(self.map[x], self.map[y]))
                        {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Image of a source index.
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    /// Source carrier size.
    pub fn source_size(&self) -> usize {
        self.map.len()
    }

    /// The image table.
    pub fn map(&self) -> &[usize] {
        &self.map
    }

    /// Composition, applying `self` first and then `other`.
    pub fn compose(&self, other: &Embedding) -> Embedding {
        Embedding { map: self.map.iter().map(|&i| other.map[i]).collect() }
    }

    /// Composition with a permutation of the target carrier (applied after).
    pub fn then_perm(&self, p: &Perm) -> Embedding {
        Embedding { map: self.map.iter().map(|&i| p.apply(i)).collect() }
    }

    /// Composition with a permutation of the source carrier (applied first):
    /// the result maps `i` to `self(p(i))`.
    pub fn pre_perm(&self, p: &Perm) -> Embedding {
        Embedding { map: (0..self.map.len()).map(|i| self.map[p.apply(i)]).collect() }
    }
}

impl Backend {
    /// The automorphism group of a structure, by direct enumeration.
    pub fn automorphisms(self, s: &FinStruct) -> PermGroup {
        use itertools::Itertools;
        debug_assert_eq!(self, s.backend());
        let n = s.size();
        let elements: BTreeSet<Perm> = (0..n)
            .permutations(n)
            .filter_map(|images| {
                let p = Perm::from_images(images).ok()?;
                (s.relabel(&p) == *s).then_some(p)
            })
            .collect();
        PermGroup::from_elements(elements, n).expect("automorphisms form a group")
    }

    /// All embeddings of `source` into `target`, in lexicographic order of
    /// their image tables.
    pub fn embeddings(self, source: &FinStruct, target: &FinStruct) -> Vec<Embedding> {
        use itertools::Itertools;
        let mut out = Vec::new();
        for map in (0..target.size()).permutations(source.size()) {
            let e = Embedding { map };
            if e.is_embedding(source, target) {
                out.push(e);
            }
        }
        out.sort();
        out
    }

    /// All one-point extensions of a structure.  The new point is always the
    /// highest index `n`; the original facts are kept verbatim.
    ///
    /// Counts: equality `1`; order `n+1` (one per gap, ends included);
    /// graph `2^n` (one per adjacency subset).
    pub fn one_point_extensions(self, s: &FinStruct) -> Vec<FinStruct> {
        debug_assert_eq!(self, s.backend());
        let n = s.size();
        match self {
            Backend::Equality => {
                vec![FinStruct { backend: self, size: n + 1, facts: s.facts().clone() }]
            }
            Backend::Order => {
                let chain = s.chain();
                (0..=n)
                    .map(|gap| {
                        let mut facts = s.facts().clone();
                        for (rank, &i) in chain.iter().enumerate() {
                            if rank < gap {
                                facts.insert(Fact::Lt(i, n));
                            } else {
                                facts.insert(Fact::Lt(n, i));
                            }
                        }
                        FinStruct { backend: self, size: n + 1, facts }
                    })
                    .collect()
            }
            Backend::Graph => (0u64..(1 << n))
                .map(|mask| {
                    let mut facts = s.facts().clone();
                    for i in 0..n {
                        if mask & (1 << i) != 0 {
                            facts.insert(Fact::edge(i, n));
                        }
                    }
                    FinStruct { backend: self, size: n + 1, facts }
                })
                .collect(),
        }
    }

    /// The structure induced by a tuple of data values: index order is tuple
    /// order, and facts are read off the values.
    pub fn induced_struct(self, values: &[DataValue]) -> Result<FinStruct> {
        for v in values {
            if v.backend() != self {
                return Err(Error::BackendMismatch(format!(
                    "value {v} does not belong to the {self} backend"
                )));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if values[..i].contains(v) {
                return Err(Error::DuplicateValues);
            }
        }
        let mut facts = BTreeSet::new();
        for i in 0..values.len() {
            for j in 0..values.len() {
                if i == j {
                    continue;
                }
                match (&values[i], &values[j]) {
                    (DataValue::Nat(_), DataValue::Nat(_)) => {}
                    (DataValue::Rat(a), DataValue::Rat(b)) => {
                        if a < b {
                            facts.insert(Fact::Lt(i, j));
                        }
                    }
                    (DataValue::Vertex(a), DataValue::Vertex(b)) => {
                        if i < j && rado_adjacent(a, b) {
                            facts.insert(Fact::edge(i, j));
                        }
                    }
                    _ => unreachable!("values checked to share the backend"),
                }
            }
        }
        Ok(FinStruct { backend: self, size: values.len(), facts })
    }

    /// Produces a fresh data value realizing a one-point extension over an
    /// existing valuation, avoiding the forbidden values.
    ///
    /// `a_star` must be a one-point extension (new point at index `n`) of
    /// `induced_struct(valuation)`.  The choice is deterministic:
    ///
    /// * equality — the smallest natural not present and not forbidden;
    /// * order — the midpoint of the required gap (bisected toward the top
    ///   while forbidden), or one below the minimum / one above the maximum
    ///   at the ends;
    /// * graph — the smallest admissible natural; if none is small, the
    ///   vertex with exactly the required adjacency bits (plus one extra
    ///   fresh bit if that exact vertex is taken or picks up an unwanted
    ///   neighbor).
    pub fn witness(
        self,
        a_star: &FinStruct,
        valuation: &[DataValue],
        forbidden: &BTreeSet<DataValue>,
    ) -> Result<DataValue> {
        let n = valuation.len();
        if a_star.size() != n + 1 {
            return Err(Error::SizeMismatch(format!(
                "extension has {} points, expected {}",
                a_star.size(),
                n + 1
            )));
        }
        let base: Vec<usize> = (0..n).collect();
        if a_star.substruct(&base) != self.induced_struct(valuation)? {
            return Err(Error::Validation(
                "extension does not restrict to the structure induced by the valuation".into(),
            ));
        }
        match self {
            Backend::Equality => {
                let mut candidate = 0u64;
                loop {
                    let v = DataValue::Nat(candidate);
                    if !valuation.contains(&v) && !forbidden.contains(&v) {
                        return Ok(v);
                    }
                    candidate += 1;
                }
            }
            Backend::Order => {
                let vals: Vec<Rational64> = valuation
                    .iter()
                    .map(|v| match v {
                        DataValue::Rat(r) => *r,
                        _ => unreachable!("valuation checked to be rationals"),
                    })
                    .collect();
                let below: Vec<Rational64> = (0..n)
                    .filter(|&i| a_star.holds(Fact::Lt(i, n)))
                    .map(|i| vals[i])
                    .collect();
                let above: Vec<Rational64> = (0..n)
                    .filter(|&i| a_star.holds(Fact::Lt(n, i)))
                    .map(|i| vals[i])
                    .collect();
                let lo = below.iter().max().copied();
                let hi = above.iter().min().copied();
                let banned = |r: &Rational64| forbidden.contains(&DataValue::Rat(*r));
                let value = match (lo, hi) {
                    (Some(lo), Some(hi)) => {
                        let mut mid = (lo + hi) / 2;
                        while banned(&mid) {
                            mid = (mid + hi) / 2;
                        }
                        mid
                    }
                    (Some(lo), None) => {
                        let mut v = lo + 1;
                        while banned(&v) {
                            v += 1;
                        }
                        v
                    }
                    (None, Some(hi)) => {
                        let mut v = hi - 1;
                        while banned(&v) {
                            v -= 1;
                        }
                        v
                    }
                    (None, None) => {
                        let mut v = Rational64::zero();
                        while banned(&v) {
                            v += 1;
                        }
                        v
                    }
                };
                Ok(DataValue::Rat(value))
            }
            Backend::Graph => {
                let vals: Vec<&BigUint> = valuation
                    .iter()
                    .map(|v| match v {
                        DataValue::Vertex(g) => g,
                        _ => unreachable!("valuation checked to be vertices"),
                    })
                    .collect();
                let required: Vec<bool> =
                    (0..n).map(|i| a_star.holds(Fact::edge(i, n))).collect();
                let admissible = |d: &BigUint| {
                    let v = DataValue::Vertex(d.clone());
                    !valuation.contains(&v)
                        && !forbidden.contains(&v)
                        && (0..n).all(|i| rado_adjacent(d, vals[i]) == required[i])
                };
                // Small admissible vertices almost always exist; search them
                // first so realized values stay readable.
                for small in 0u64..=4096 {
                    let d = BigUint::from(small);
                    if admissible(&d) {
                        return Ok(DataValue::Vertex(d));
                    }
                }
                // Constructive fallback: the vertex with exactly the
                // required adjacency bits.  Each required neighbor value
                // doubles as a bit index, so the construction needs those
                // values to be moderate even when the new vertex itself
                // grows huge; larger neighbors indicate a run of cascaded
                // fallbacks this encoding cannot express.
                let mut bits: Vec<u64> = Vec::new();
                for (i, v) in vals.iter().enumerate() {
                    if required[i] {
                        let bit = v.to_u64().filter(|&b| b <= 1 << 20).ok_or_else(|| {
                            Error::Validation(
                                "graph witness construction out of range".into(),
                            )
                        })?;
                        bits.push(bit);
                    }
                }
                let mut base = BigUint::zero();
                for &b in &bits {
                    base.set_bit(b, true);
                }
                if admissible(&base) {
                    return Ok(DataValue::Vertex(base));
                }
                // The exact vertex is taken or collides with a forbidden or
                // unwanted-neighbor value; add one fresh bit above every
                // required bit, which cannot disturb the required
                // adjacencies.
                let start = bits.iter().copied().max().unwrap_or(12) + 1;
                for extra in start..start + 4096 {
                    let d = base.clone() | (BigUint::one() << extra);
                    if admissible(&d) {
                        return Ok(DataValue::Vertex(d));
                    }
                }
                Err(Error::Validation(
                    "graph witness construction out of range".into(),
                ))
            }
        }
    }

    /// The canonical form of a structure: the relabeling with the
    /// lexicographically least fact set, together with the least witnessing
    /// permutation (`relabel(s, perm) == canonical`).
    ///
    /// Canonical forms are the identity criterion for orbit shapes; the
    /// function is idempotent.
    pub fn canonical_form(self, s: &FinStruct) -> (FinStruct, Perm) {
        use itertools::Itertools;
        let n = s.size();
        match self {
            // No facts: every structure is already canonical.
            Backend::Equality => (s.clone(), Perm::identity(n)),
            // The canonical total order is 0 < 1 < … < n-1; the witness maps
            // each index to its rank.
            Backend::Order => {
                let chain = s.chain();
                let mut images = vec![0; n];
                for (rank, &i) in chain.iter().enumerate() {
                    images[i] = rank;
                }
                let p = Perm::from_images(images).expect("rank map is a bijection");
                (s.relabel(&p), p)
            }
            Backend::Graph => {
                let mut best: Option<(FinStruct, Perm)> = None;
                for images in (0..n).permutations(n) {
                    let p = Perm::from_images(images).expect("permutation of carrier");
                    let candidate = s.relabel(&p);
                    match &best {
                        Some((b, _)) if b.facts() <= candidate.facts() => {}
                        _ => best = Some((candidate, p)),
                    }
                }
                best.expect("at least the identity relabeling exists")
            }
        }
    }
}

/// Parses a structure literal: `struct{n=3; 0<1; 1<2}`, `struct{n=2; E(0,1)}`
/// or `struct{n=2}`.  Order fact lists may give any set of pairs whose
/// transitive closure is a strict total order.
pub fn parse_struct(backend: Backend, text: &str) -> Result<FinStruct> {
    let s = text.trim();
    let inner = s
        .strip_prefix("struct{")
        .and_then(|rest| rest.strip_suffix('}'))
        .ok_or_else(|| Error::Validation(format!("bad structure literal `{text}`")))?;
    let mut parts = inner.split(';').map(str::trim);
    let head = parts
        .next()
        .ok_or_else(|| Error::Validation(format!("empty structure literal `{text}`")))?;
    let size: usize = head
        .strip_prefix("n=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| Error::Validation(format!("expected n=<size> first in `{text}`")))?;
    let fact_text: Vec<&str> = parts.filter(|p| !p.is_empty()).collect();
    struct_from_fact_list(backend, size, &fact_text.join(";"))
}

/// Builds a structure from a `;`- or `,`-separated fact list such as
/// `0<1; 1<2` or `E(0,1)`; order lists are completed transitively.
pub fn struct_from_fact_list(backend: Backend, size: usize, text: &str) -> Result<FinStruct> {
    let mut facts = BTreeSet::new();
    for tok in split_facts(text) {
        facts.insert(parse_fact(&tok, size, None)?);
    }
    if backend == Backend::Order {
        facts = complete_order(size, facts)?;
    }
    FinStruct::new(backend, size, facts)
}

/// Splits a fact list on `;` or `,`, treating commas inside parentheses
/// (edge facts) as part of the token.
pub(crate) fn split_facts(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for c in text.chars() {
        match c {
            '(' => {
                depth += 1;
                current.push(c);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                current.push(c);
            }
            ';' | ',' if depth == 0 => {
                out.push(std::mem::take(&mut current));
            }
            _ => current.push(c),
        }
    }
    out.push(current);
    out.into_iter().map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
}

/// Parses one fact token: `0<1`, `E(0,1)`; `*` stands for `star` when given.
pub(crate) fn parse_fact(tok: &str, size: usize, star: Option<usize>) -> Result<Fact> {
    let index = |t: &str| -> Result<usize> {
        let t = t.trim();
        if t == "*" {
            return star.ok_or_else(|| Error::Validation("`*` not allowed here".into()));
        }
        let i: usize =
            t.parse().map_err(|_| Error::Validation(format!("bad index `{t}` in fact")))?;
        if i >= size {
            return Err(Error::Validation(format!("index {i} outside carrier 0..{size}")));
        }
        Ok(i)
    };
    if let Some((a, b)) = tok.split_once('<') {
        return Ok(Fact::Lt(index(a)?, index(b)?));
    }
    if let Some(body) = tok.strip_prefix("E(").and_then(|r| r.strip_suffix(')')) {
        let (a, b) = body
            .split_once(',')
            .ok_or_else(|| Error::Validation(format!("bad edge fact `{tok}`")))?;
        let (a, b) = (index(a)?, index(b)?);
        if a == b {
            return Err(Error::Validation(format!("reflexive edge fact `{tok}`")));
        }
        return Ok(Fact::edge(a, b));
    }
    Err(Error::Validation(format!("unrecognized fact `{tok}`")))
}

/// Completes a set of `<` facts to a strict total order by transitive
/// closure, rejecting cycles and incomparable pairs.
pub(crate) fn complete_order(size: usize, facts: BTreeSet<Fact>) -> Result<BTreeSet<Fact>> {
    let mut lt = vec![vec![false; size]; size];
    for f in &facts {
        if let Fact::Lt(a, b) = *f {
            lt[a][b] = true;
        }
    }
    // Floyd–Warshall style closure.
    for k in 0..size {
        for i in 0..size {
            if lt[i][k] {
                for j in 0..size {
                    if lt[k][j] {
                        lt[i][j] = true;
                    }
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for i in 0..size {
        if lt[i][i] {
            return Err(Error::NotAMember(format!("order facts contain a cycle through {i}")));
        }
        for j in 0..size {
            if i == j {
                continue;
            }
            if lt[i][j] && lt[j][i] {
                return Err(Error::NotAMember(format!("order facts contain a cycle {i},{j}")));
            }
            if lt[i][j] {
                out.insert(Fact::Lt(i, j));
            }
        }
    }
    for i in 0..size {
        for j in (i + 1)..size {
            if !lt[i][j] && !lt[j][i] {
                return Err(Error::NotAMember(format!(
                    "order facts leave {i} and {j} incomparable"
                )));
            }
        }
    }
    Ok(out)
}

/// Completes a partial valuation to a full one realizing `shape`.
///
/// `order` lists the carrier indices in realization order; the first
/// `given.len()` of them already carry the listed values, the remaining ones
/// are witnessed one at a time (each step realizes the substructure induced
/// on the prefix).  The result is indexed by carrier position, not by
/// `order`.  Deterministic; inconsistent given values are rejected by the
/// witness validation.
pub fn complete_struct(
    shape: &FinStruct,
    order: &[usize],
    given: &[DataValue],
    forbidden: &BTreeSet<DataValue>,
) -> Result<Vec<DataValue>> {
    let n = shape.size();
    {
        let mut sorted: Vec<usize> = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..n).collect::<Vec<_>>() {
            return Err(Error::Validation(
                "realization order must list every carrier index exactly once".into(),
            ));
        }
    }
    if given.len() > n {
        return Err(Error::SizeMismatch(format!(
            "{} given values for a carrier of {n}",
            given.len()
        )));
    }
    let backend = shape.backend();
    let mut vals: Vec<DataValue> = given.to_vec();
    for t in given.len()..n {
        let ext = shape.substruct(&order[..=t]);
        let d = backend.witness(&ext, &vals, forbidden)?;
        vals.push(d);
    }
    // Validate the given prefix as well (witness only checked extensions).
    if backend.induced_struct(&vals)? != shape.substruct(order) {
        return Err(Error::Validation(
            "given values do not realize the required substructure".into(),
        ));
    }
    let mut out = vec![None; n];
    for (t, &idx) in order.iter().enumerate() {
        out[idx] = Some(vals[t].clone());
    }
    Ok(out.into_iter().map(|v| v.expect("order covers the carrier")).collect())
}

/// Realizes a structure by a concrete valuation, witnessing one point at a
/// time.  Carrier order is tried first; if the greedy witness gets stuck
/// (possible over the graph backend, where earlier placements can force a
/// later one out of the encodable range), other placement orders are tried
/// in lexicographic succession.  Deterministic.
pub fn realize_struct(
    shape: &FinStruct,
    forbidden: &BTreeSet<DataValue>,
) -> Result<Vec<DataValue>> {
    use itertools::Itertools;
    let n = shape.size();
    let identity: Vec<usize> = (0..n).collect();
    let first = complete_struct(shape, &identity, &[], forbidden);
    if first.is_ok() || n > 8 {
        return first;
    }
    for order in identity.iter().copied().permutations(n) {
        if order == identity {
            continue;
        }
        if let Ok(vals) = complete_struct(shape, &order, &[], forbidden) {
            return Ok(vals);
        }
    }
    first
}

impl fmt::Display for FinStruct {
    /// The literal syntax accepted by [`parse_struct`]; order structures
    /// print covering pairs only.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "struct{{n={}", self.size)?;
        for fact in self.display_facts() {
            write!(f, "; {fact}")?;
        }
        write!(f, "}}")
    }
}

impl FinStruct {
    /// Facts rendered in the text syntax; order structures are reduced to
    /// their covering pairs.
    pub fn display_facts(&self) -> Vec<String> {
        match self.backend {
            Backend::Equality => vec![],
            Backend::Order => {
                let chain = self.chain();
                chain.windows(2).map(|w| format!("{}<{}", w[0], w[1])).collect()
            }
            Backend::Graph => self
                .facts
                .iter()
                .map(|f| match f {
                    Fact::Edge(a, b) => format!("E({a},{b})"),
                    Fact::Lt(..) => unreachable!("graph structures hold only edges"),
                })
                .collect(),
        }
    }
}
