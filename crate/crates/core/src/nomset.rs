//! Orbit-finite nominal sets represented as finite lists of orbits.
//!
//! An orbit is a pair ⟦shape, sym⟧ of a canonical finite structure and a
//! group of its automorphisms (the *local symmetry*).  Its elements are the
//! injective valuations of the shape's carrier that induce exactly the
//! shape's relations, taken up to precomposition with the local symmetry;
//! every element is stored as the lexicographically least valuation of its
//! class.  A nominal set is an ordered list of such orbits, and orbit
//! identity within a set is positional.
//!
//! The module provides the constructions that make this representation a
//! workable computational universe: equivariant maps with their embedding
//! witnesses ([`EqMap`]), binary products by amalgamation over partial
//! matchings ([`product`]), equivariant equivalence relations as unions of
//! product orbits ([`EqRelation`]) with a decision procedure
//! ([`check_equivalence`]), and quotients that discover register drops and
//! local-symmetry enlargement ([`quotient`]).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;

use crate::perm::{Perm, PermGroup};
use crate::symmetry::{
    complete_struct, parse_struct, realize_struct, Backend, DataValue, Embedding, FinStruct,
};
use crate::{Error, Result};

/// One orbit: a canonical shape together with a local symmetry.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct OrbitRepr {
    shape: FinStruct,
    sym: PermGroup,
}

impl OrbitRepr {
    /// Builds an orbit, canonicalizing the shape and transporting the local
    /// symmetry along the relabeling.  Returns the orbit together with the
    /// transport permutation (`shape.relabel(transport)` is the stored
    /// shape).
    ///
    /// Fails when `sym` is not a subgroup of the shape's automorphisms.
    pub fn new(shape: FinStruct, sym: PermGroup) -> Result<(OrbitRepr, Perm)> {
        shape.validate()?;
        if sym.carrier_size() != shape.size() {
            return Err(Error::SizeMismatch(format!(
                "local symmetry on {} points for a shape of size {}",
                sym.carrier_size(),
                shape.size()
            )));
        }
        let aut = shape.backend().automorphisms(&shape);
        if !sym.is_subgroup_of(&aut) {
            return Err(Error::Validation(
                "local symmetry is not a subgroup of the shape's automorphism group".into(),
            ));
        }
        let (canon, transport) = shape.backend().canonical_form(&shape);
        let sym = sym.conjugate(&transport)?;
        Ok((OrbitRepr { shape: canon, sym }, transport))
    }

    /// The canonical shape.
    pub fn shape(&self) -> &FinStruct {
        &self.shape
    }

    /// The local symmetry.
    pub fn sym(&self) -> &PermGroup {
        &self.sym
    }

    /// Number of registers (carrier size of the shape).
    pub fn dimension(&self) -> usize {
        self.shape.size()
    }
}

/// An orbit-finite nominal set: an ordered list of orbits over one backend.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NomSet {
    backend: Backend,
    orbits: Vec<OrbitRepr>,
}

impl NomSet {
    /// Builds a set from orbits (all must live in `backend`).
    pub fn new(backend: Backend, orbits: Vec<OrbitRepr>) -> Result<NomSet> {
        for o in &orbits {
            if o.shape.backend() != backend {
                return Err(Error::BackendMismatch(format!(
                    "orbit shape lives in {}, set in {backend}",
                    o.shape.backend()
                )));
            }
        }
        Ok(NomSet { backend, orbits })
    }

    /// The set of data values themselves: one orbit with a one-point shape.
    pub fn atom(backend: Backend) -> NomSet {
        let shape = FinStruct::discrete(backend, 1).expect("one point is always a member");
        let (orbit, _) = OrbitRepr::new(shape, PermGroup::trivial(1)).expect("trivial symmetry");
        NomSet { backend, orbits: vec![orbit] }
    }

    /// Tuples of `k` pairwise distinct values (equality backend).
    pub fn dtuple(k: usize) -> NomSet {
        let shape = FinStruct::discrete(Backend::Equality, k).expect("discrete member");
        let (orbit, _) = OrbitRepr::new(shape, PermGroup::trivial(k)).expect("trivial symmetry");
        NomSet { backend: Backend::Equality, orbits: vec![orbit] }
    }

    /// Unordered pairs of distinct values (equality backend).
    pub fn set2() -> NomSet {
        let shape = FinStruct::discrete(Backend::Equality, 2).expect("discrete member");
        let (orbit, _) = OrbitRepr::new(shape, PermGroup::symmetric(2)).expect("full symmetry");
        NomSet { backend: Backend::Equality, orbits: vec![orbit] }
    }

    /// Strictly increasing `k`-tuples of rationals (order backend).
    pub fn otuple(k: usize) -> NomSet {
        let facts = (0..k)
            .flat_map(|i| ((i + 1)..k).map(move |j| crate::symmetry::Fact::Lt(i, j)))
            .collect();
        let shape = FinStruct::new(Backend::Order, k, facts).expect("chain is a member");
        let (orbit, _) = OrbitRepr::new(shape, PermGroup::trivial(k)).expect("trivial symmetry");
        NomSet { backend: Backend::Order, orbits: vec![orbit] }
    }

    /// All `k`-tuples of values (equality backend), as one orbit per
    /// equality pattern: a pattern is a partition of the positions, and its
    /// orbit is the tuples of distinct values indexed by the blocks.
    pub fn tuple(k: usize) -> NomSet {
        let orbits = partition_patterns(k)
            .into_iter()
            .map(|blocks| {
                let shape =
                    FinStruct::discrete(Backend::Equality, blocks).expect("discrete member");
                OrbitRepr::new(shape, PermGroup::trivial(blocks)).expect("trivial symmetry").0
            })
            .collect();
        NomSet { backend: Backend::Equality, orbits }
    }

    /// Disjoint union: orbit lists concatenated, left first.
    pub fn sum(&self, other: &NomSet) -> Result<NomSet> {
        if self.backend != other.backend {
            return Err(Error::BackendMismatch(format!(
                "sum of sets over {} and {}",
                self.backend, other.backend
            )));
        }
        let mut orbits = self.orbits.clone();
        orbits.extend(other.orbits.iter().cloned());
        Ok(NomSet { backend: self.backend, orbits })
    }

    /// The backend all orbits live in.
    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// The orbit list.
    pub fn orbits(&self) -> &[OrbitRepr] {
        &self.orbits
    }

    /// Number of orbits.
    pub fn orbit_count(&self) -> usize {
        self.orbits.len()
    }

    /// Resolves a sequence of distinct values to an element: the first orbit
    /// whose shape equals the structure induced by the values, with the
    /// valuation canonicalized under that orbit's local symmetry.  `None`
    /// when no orbit matches.
    pub fn element_of(&self, values: &[DataValue]) -> Result<Option<Element>> {
        let induced = self.backend.induced_struct(values)?;
        for (i, o) in self.orbits.iter().enumerate() {
            if o.shape == induced {
                let (valuation, _) = o.sym.canonical_under(values);
                return Ok(Some(Element { orbit: i, valuation }));
            }
        }
        Ok(None)
    }

    /// Like [`element_of`](Self::element_of) but against one designated
    /// orbit, failing when the values do not realize its shape.
    pub fn element_in_orbit(&self, orbit: usize, values: &[DataValue]) -> Result<Element> {
        let o = self.orbit(orbit)?;
        let induced = self.backend.induced_struct(values)?;
        if o.shape != induced {
            return Err(Error::ShapeMismatch(format!(
                "values induce {induced} but orbit {orbit} has shape {}",
                o.shape
            )));
        }
        let (valuation, _) = o.sym.canonical_under(values);
        Ok(Element { orbit, valuation })
    }

    /// A deterministic concrete representative of an orbit.
    pub fn realize(&self, orbit: usize) -> Result<Element> {
        let o = self.orbit(orbit)?;
        let values = realize_struct(&o.shape, &BTreeSet::new())?;
        self.element_in_orbit(orbit, &values)
    }

    fn orbit(&self, i: usize) -> Result<&OrbitRepr> {
        self.orbits.get(i).ok_or_else(|| {
            Error::Validation(format!("orbit index {i} out of range 0..{}", self.orbits.len()))
        })
    }
}

/// Partitions of `{0, …, k-1}` as block counts, enumerated by restricted
/// growth strings in lexicographic order (so the all-equal pattern comes
/// first and the all-distinct pattern last).
fn partition_patterns(k: usize) -> Vec<usize> {
    fn rec(k: usize, prefix: &mut Vec<usize>, out: &mut Vec<usize>) {
        if prefix.len() == k {
            out.push(prefix.iter().copied().max().map_or(0, |m| m + 1));
            return;
        }
        let next_block = prefix.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=next_block {
            prefix.push(b);
            rec(k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, &mut Vec::new(), &mut out);
    out
}

/// An element of a [`NomSet`]: an orbit index and the canonical valuation of
/// the shape's carrier.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct Element {
    orbit: usize,
    valuation: Vec<DataValue>,
}

impl Element {
    /// The orbit index within its set.
    pub fn orbit(&self) -> usize {
        self.orbit
    }

    /// The canonical valuation.
    pub fn valuation(&self) -> &[DataValue] {
        &self.valuation
    }

    /// The least support: exactly the values in the valuation.
    pub fn least_support(&self) -> BTreeSet<DataValue> {
        self.valuation.iter().cloned().collect()
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "orbit {} [", self.orbit)?;
        for (i, v) in self.valuation.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// True when for every `σ` in `src_sym` there is a `τ` in `tgt_sym` with
/// `σ(w(x)) = w(τ(x))` for all `x` — the condition making the embedding `w`
/// (target shape into source shape) the witness of a well-defined
/// equivariant map.
pub fn commutes(w: &Embedding, src_sym: &PermGroup, tgt_sym: &PermGroup) -> bool {
    src_sym.iter().all(|sigma| {
        let lhs = w.then_perm(sigma);
        tgt_sym.iter().any(|tau| lhs == w.pre_perm(tau))
    })
}

/// The canonical representative of `w` under precomposition with the target
/// symmetry (lexicographically least image table).
pub(crate) fn canonical_witness(w: &Embedding, tgt_sym: &PermGroup) -> Embedding {
    tgt_sym.iter().map(|tau| w.pre_perm(tau)).min().expect("group is never empty")
}

/// All equivariant maps from one orbit to another, each given by its
/// canonical witness: an embedding of the target shape into the source shape
/// satisfying the commuting condition, up to the target symmetry.
pub fn hom_enumerate(src: &OrbitRepr, tgt: &OrbitRepr) -> Vec<Embedding> {
    let backend = src.shape.backend();
    let mut out: BTreeSet<Embedding> = BTreeSet::new();
    for w in backend.embeddings(&tgt.shape, &src.shape) {
        if commutes(&w, &src.sym, &tgt.sym) {
            out.insert(canonical_witness(&w, &tgt.sym));
        }
    }
    out.into_iter().collect()
}

/// An equivariant map between nominal sets: per source orbit, a target orbit
/// and a witness embedding of the target shape into the source shape.
/// Element images are computed by reading the source valuation through the
/// witness.  Maps may be partial on orbits; applying to an uncovered orbit
/// is an error.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EqMap {
    entries: BTreeMap<usize, (usize, Embedding)>,
}

impl EqMap {
    /// Builds a map, validating each entry: the witness must embed the
    /// target shape into the source shape and satisfy the commuting
    /// condition; witnesses are stored canonically under the target
    /// symmetry.
    pub fn new(
        entries: BTreeMap<usize, (usize, Embedding)>,
        src: &NomSet,
        tgt: &NomSet,
    ) -> Result<EqMap> {
        let mut canonical = BTreeMap::new();
        for (&src_orbit, (tgt_orbit, witness)) in &entries {
            let so = src.orbit(src_orbit)?;
            let to = tgt.orbit(*tgt_orbit)?;
            let witness = Embedding::new(witness.map().to_vec(), &to.shape, &so.shape)?;
            if !commutes(&witness, &so.sym, &to.sym) {
                return Err(Error::CommutingCondition(format!(
                    "witness for source orbit {src_orbit} does not commute with the local \
                     symmetries"
                )));
            }
            canonical.insert(src_orbit, (*tgt_orbit, canonical_witness(&witness, &to.sym)));
        }
        Ok(EqMap { entries: canonical })
    }

    /// The entry table (source orbit → target orbit and witness).
    pub fn entries(&self) -> &BTreeMap<usize, (usize, Embedding)> {
        &self.entries
    }

    /// Applies the map to an element of the source set.
    pub fn apply(&self, src: &NomSet, tgt: &NomSet, x: &Element) -> Result<Element> {
        let _ = src.orbit(x.orbit)?;
        let (tgt_orbit, witness) = self
            .entries
            .get(&x.orbit)
            .ok_or(Error::PartialMap(x.orbit))?;
        let values: Vec<DataValue> =
            witness.map().iter().map(|&i| x.valuation[i].clone()).collect();
        tgt.element_in_orbit(*tgt_orbit, &values)
    }
}

/// A union of orbits of some set, e.g. an accepting set or a relation.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct EqSubset {
    member_orbits: BTreeSet<usize>,
}

impl EqSubset {
    /// Builds a subset, validating orbit indices against the carrier set.
    pub fn new(member_orbits: BTreeSet<usize>, of: &NomSet) -> Result<EqSubset> {
        for &i in &member_orbits {
            of.orbit(i)?;
        }
        Ok(EqSubset { member_orbits })
    }

    pub fn member_orbits(&self) -> &BTreeSet<usize> {
        &self.member_orbits
    }

    pub fn contains(&self, x: &Element) -> bool {
        self.member_orbits.contains(&x.orbit)
    }
}

/// A partial matching between two carriers, as sorted `(left, right)` pairs.
pub type Matching = Vec<(usize, usize)>;

/// One orbit of a product, with the data needed to pair and unpair without
/// re-searching.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProductTag {
    /// Orbit index in the left factor.
    pub left_orbit: usize,
    /// Orbit index in the right factor.
    pub right_orbit: usize,
    /// The canonical partial matching identifying left and right carrier
    /// points mapped to equal values.
    pub rho: Matching,
    /// The amalgamated structure before canonical relabeling.
    pub raw_shape: FinStruct,
    /// Relabeling from the raw amalgam to the stored canonical shape.
    pub canon: Perm,
    /// Embedding of the left shape into the canonical product shape.
    pub left_inj: Embedding,
    /// Embedding of the right shape into the canonical product shape.
    pub right_inj: Embedding,
}

/// The product of two nominal sets: the product set plus per-orbit tags and
/// the factor sets (kept for pairing and unpairing).
#[derive(Clone, Debug)]
pub struct ProductResult {
    left: NomSet,
    right: NomSet,
    set: NomSet,
    tags: Vec<ProductTag>,
    index: BTreeMap<(usize, usize, Matching, FinStruct), usize>,
}

/// Amalgam layout: the left carrier keeps its indices; a right index mapped
/// by the matching shares its partner's index, the rest follow after the
/// left carrier in increasing order.
fn amalgam_right_map(left_size: usize, right_size: usize, rho: &Matching) -> Vec<usize> {
    let mut map = vec![usize::MAX; right_size];
    for &(a, b) in rho {
        map[b] = a;
    }
    let mut next = left_size;
    for slot in map.iter_mut() {
        if *slot == usize::MAX {
            *slot = next;
            next += 1;
        }
    }
    map
}

/// All partial matchings between the carriers of `a` and `b` that are
/// partial isomorphisms, sorted.
fn enumerate_matchings(a: &FinStruct, b: &FinStruct) -> Vec<Matching> {
    use crate::symmetry::Fact;
    let compatible = |rho: &Matching| {
        rho.iter().tuple_combinations().all(|(&(a1, b1), &(a2, b2))| match a.backend() {
            Backend::Equality => true,
            Backend::Order => a.holds(Fact::Lt(a1, a2)) == b.holds(Fact::Lt(b1, b2)),
            Backend::Graph => a.holds(Fact::Edge(a1.min(a2), a1.max(a2)))
                == b.holds(Fact::Edge(b1.min(b2), b1.max(b2))),
        })
    };
    let mut out = Vec::new();
    for k in 0..=a.size().min(b.size()) {
        for dom in (0..a.size()).combinations(k) {
            for img in (0..b.size()).permutations(k) {
                let rho: Matching = dom.iter().copied().zip(img).collect();
                if compatible(&rho) {
                    out.push(rho);
                }
            }
        }
    }
    out.sort();
    out
}

/// All linear orders on `0..m` extending the given `<` constraints, each as
/// the sequence of vertices from least to greatest.
fn linear_extensions(m: usize, below: &[(usize, usize)]) -> Vec<Vec<usize>> {
    fn rec(
        m: usize,
        below: &[(usize, usize)],
        used: &mut Vec<bool>,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for v in 0..m {
            if used[v] {
                continue;
            }
            if below.iter().any(|&(u, w)| w == v && !used[u]) {
                continue;
            }
            used[v] = true;
            cur.push(v);
            rec(m, below, used, cur, out);
            cur.pop();
            used[v] = false;
        }
    }
    let mut out = Vec::new();
    rec(m, below, &mut vec![false; m], &mut Vec::new(), &mut out);
    out
}

/// All structures on the amalgam of `a` and `b` over `rho` restricting to
/// `a` and `b` under the two injections.
fn amalgam_structs(a: &FinStruct, b: &FinStruct, rho: &Matching) -> Vec<FinStruct> {
    use crate::symmetry::Fact;
    let backend = a.backend();
    let m = a.size() + b.size() - rho.len();
    let jmap = amalgam_right_map(a.size(), b.size(), rho);
    let mut base: BTreeSet<Fact> = a.facts().clone();
    for f in b.facts() {
        base.insert(match *f {
            Fact::Lt(x, y) => Fact::Lt(jmap[x], jmap[y]),
            Fact::Edge(x, y) => Fact::Edge(jmap[x].min(jmap[y]), jmap[x].max(jmap[y])),
        });
    }
    match backend {
        Backend::Equality => {
            vec![FinStruct::new(backend, m, base).expect("no facts to violate")]
        }
        Backend::Graph => {
            let dom: BTreeSet<usize> = rho.iter().map(|&(x, _)| x).collect();
            let img: BTreeSet<usize> = rho.iter().map(|&(_, y)| y).collect();
            let mut cross: Vec<(usize, usize)> = Vec::new();
            for x in (0..a.size()).filter(|x| !dom.contains(x)) {
                for y in (0..b.size()).filter(|y| !img.contains(y)) {
                    cross.push((x, jmap[y]));
                }
            }
            (0u64..(1 << cross.len()))
                .map(|mask| {
                    let mut facts = base.clone();
                    for (bit, &(x, y)) in cross.iter().enumerate() {
                        if mask & (1 << bit) != 0 {
                            facts.insert(Fact::Edge(x.min(y), x.max(y)));
                        }
                    }
                    FinStruct::new(backend, m, facts).expect("cross edges keep membership")
                })
                .collect()
        }
        Backend::Order => {
            let below: Vec<(usize, usize)> = base
                .iter()
                .map(|f| match *f {
                    Fact::Lt(x, y) => (x, y),
                    Fact::Edge(..) => unreachable!("order structures hold only order facts"),
                })
                .collect();
            linear_extensions(m, &below)
                .into_iter()
                .map(|seq| {
                    let mut facts = BTreeSet::new();
                    for p in 0..m {
                        for q in (p + 1)..m {
                            facts.insert(Fact::Lt(seq[p], seq[q]));
                        }
                    }
                    FinStruct::new(backend, m, facts).expect("linear order is a member")
                })
                .collect()
        }
    }
}

/// Acts on an amalgam pair with `(σ, τ)` from the factor symmetries: the
/// matching becomes `{(σ⁻¹(a), τ(b))}` and the structure is carried along
/// the induced relabeling, which is returned as the third component.
fn translate_pair(
    left_size: usize,
    right_size: usize,
    rho: &Matching,
    c: &FinStruct,
    sigma: &Perm,
    tau: &Perm,
) -> (Matching, FinStruct, Perm) {
    let sigma_inv = sigma.inverse();
    let mut rho2: Matching =
        rho.iter().map(|&(a, b)| (sigma_inv.apply(a), tau.apply(b))).collect();
    rho2.sort_unstable();
    let j1 = amalgam_right_map(left_size, right_size, rho);
    let j2 = amalgam_right_map(left_size, right_size, &rho2);
    let m = c.size();
    let mut images = vec![usize::MAX; m];
    for a in 0..left_size {
        images[a] = sigma_inv.apply(a);
    }
    for b in 0..right_size {
        let from = j1[b];
        let to = j2[tau.apply(b)];
        debug_assert!(images[from] == usize::MAX || images[from] == to);
        images[from] = to;
    }
    let t = Perm::from_images(images).expect("amalgam translation is a bijection");
    (rho2, c.relabel(&t), t)
}

/// Canonical representatives of the `(σ, τ)`-action on all amalgam pairs of
/// one orbit pair, each with the stabilizer of the representative.
fn orbit_pair_reps(
    left: &OrbitRepr,
    right: &OrbitRepr,
) -> Vec<(Matching, FinStruct, PermGroup)> {
    let mut all: BTreeSet<(Matching, FinStruct)> = BTreeSet::new();
    for rho in enumerate_matchings(&left.shape, &right.shape) {
        for c in amalgam_structs(&left.shape, &right.shape, &rho) {
            all.insert((rho.clone(), c));
        }
    }
    let mut seen: BTreeSet<(Matching, FinStruct)> = BTreeSet::new();
    let mut reps = Vec::new();
    for pair in &all {
        if seen.contains(pair) {
            continue;
        }
        let mut stabilizer: BTreeSet<Perm> = BTreeSet::new();
        for sigma in left.sym.iter() {
            for tau in right.sym.iter() {
                let (rho2, c2, t) = translate_pair(
                    left.shape.size(),
                    right.shape.size(),
                    &pair.0,
                    &pair.1,
                    sigma,
                    tau,
                );
                let moved = (rho2, c2);
                if moved == *pair {
                    stabilizer.insert(t);
                }
                seen.insert(moved);
            }
        }
        let stab = PermGroup::from_elements(stabilizer, pair.1.size())
            .expect("stabilizer of an action is a group");
        reps.push((pair.0.clone(), pair.1.clone(), stab));
    }
    reps
}

/// The product of two nominal sets over the same backend.
///
/// For each pair of orbits, enumerates partial matchings of the carriers
/// that are partial isomorphisms and, for each, the structures on the
/// amalgamated carrier restricting to both shapes; groups these under the
/// factor symmetries acting from both sides; keeps the least representative
/// per action orbit with its stabilizer as the product orbit's local
/// symmetry.  Orbit order is deterministic: left orbit, then right orbit,
/// then the representative key.
pub fn product(x: &NomSet, y: &NomSet) -> Result<ProductResult> {
    if x.backend != y.backend {
        return Err(Error::BackendMismatch(format!(
            "product of sets over {} and {}",
            x.backend, y.backend
        )));
    }
    let backend = x.backend;
    let mut orbits = Vec::new();
    let mut tags = Vec::new();
    let mut index = BTreeMap::new();
    for (li, lo) in x.orbits.iter().enumerate() {
        for (ri, ro) in y.orbits.iter().enumerate() {
            for (rho, raw, stab) in orbit_pair_reps(lo, ro) {
                let (shape, canon) = backend.canonical_form(&raw);
                let sym = stab.conjugate(&canon)?;
                let jmap = amalgam_right_map(lo.shape.size(), ro.shape.size(), &rho);
                let left_inj =
                    Embedding::new_unchecked((0..lo.shape.size()).collect()).then_perm(&canon);
                let right_inj = Embedding::new_unchecked(jmap).then_perm(&canon);
                index.insert((li, ri, rho.clone(), raw.clone()), orbits.len());
                orbits.push(OrbitRepr { shape, sym });
                tags.push(ProductTag {
                    left_orbit: li,
                    right_orbit: ri,
                    rho,
                    raw_shape: raw,
                    canon,
                    left_inj,
                    right_inj,
                });
            }
        }
    }
    Ok(ProductResult {
        left: x.clone(),
        right: y.clone(),
        set: NomSet { backend, orbits },
        tags,
        index,
    })
}

impl ProductResult {
    /// The product set.
    pub fn set(&self) -> &NomSet {
        &self.set
    }

    /// The left factor.
    pub fn left(&self) -> &NomSet {
        &self.left
    }

    /// The right factor.
    pub fn right(&self) -> &NomSet {
        &self.right
    }

    /// The tag of a product orbit.
    pub fn tag(&self, orbit: usize) -> &ProductTag {
        &self.tags[orbit]
    }

    /// Pairs two elements of the factors into the product element.
    ///
    /// The concrete overlap of the two valuations determines a matching and
    /// an amalgam structure; minimizing over the factor symmetries locates
    /// the unique product orbit, and the amalgam valuation is carried along
    /// and canonicalized.  The result does not depend on the representative
    /// valuations.
    pub fn pair(&self, x: &Element, y: &Element) -> Result<Element> {
        let lo = self.left.orbit(x.orbit)?;
        let ro = self.right.orbit(y.orbit)?;
        let (la, ra) = (lo.shape.size(), ro.shape.size());
        let mut rho: Matching = Vec::new();
        for a in 0..la {
            for b in 0..ra {
                if x.valuation[a] == y.valuation[b] {
                    rho.push((a, b));
                }
            }
        }
        rho.sort_unstable();
        let jmap = amalgam_right_map(la, ra, &rho);
        let m = la + ra - rho.len();
        let mut h: Vec<Option<DataValue>> = vec![None; m];
        for a in 0..la {
            h[a] = Some(x.valuation[a].clone());
        }
        for b in 0..ra {
            let slot = jmap[b];
            debug_assert!(h[slot].is_none() || h[slot].as_ref() == Some(&y.valuation[b]));
            h[slot] = Some(y.valuation[b].clone());
        }
        let h: Vec<DataValue> = h.into_iter().map(|v| v.expect("amalgam covered")).collect();
        let c = self.set.backend.induced_struct(&h)?;

        let mut best: Option<((Matching, FinStruct), Perm)> = None;
        for sigma in lo.sym.iter() {
            for tau in ro.sym.iter() {
                let (rho2, c2, t) = translate_pair(la, ra, &rho, &c, sigma, tau);
                let key = (rho2, c2);
                match &best {
                    Some((b, _)) if *b <= key => {}
                    _ => best = Some((key, t)),
                }
            }
        }
        let ((rho_min, c_min), t) = best.expect("symmetries are never empty");
        let orbit = *self
            .index
            .get(&(x.orbit, y.orbit, rho_min, c_min))
            .ok_or_else(|| Error::Validation("pair does not match any product orbit".into()))?;
        let tag = &self.tags[orbit];
        // Carry the valuation along the translation and the canonical
        // relabeling, then canonicalize under the orbit symmetry.
        let relabel = t.compose(&tag.canon);
        let v0 = relabel.inverse().permute(&h);
        self.set.element_in_orbit(orbit, &v0)
    }

    /// Splits a product element into its two component elements.
    pub fn unpair(&self, z: &Element) -> Result<(Element, Element)> {
        let _ = self.set.orbit(z.orbit)?;
        let tag = &self.tags[z.orbit];
        let lv: Vec<DataValue> =
            tag.left_inj.map().iter().map(|&i| z.valuation[i].clone()).collect();
        let rv: Vec<DataValue> =
            tag.right_inj.map().iter().map(|&i| z.valuation[i].clone()).collect();
        let x = self.left.element_in_orbit(tag.left_orbit, &lv)?;
        let y = self.right.element_in_orbit(tag.right_orbit, &rv)?;
        Ok((x, y))
    }
}

/// An equivariant relation on a set `X`, stored as a union of orbits of
/// `X × X`.
#[derive(Clone, Debug)]
pub struct EqRelation {
    base: ProductResult,
    member_orbits: BTreeSet<usize>,
}

impl EqRelation {
    /// Builds a relation over a product whose factors coincide.
    pub fn new(base: ProductResult, member_orbits: BTreeSet<usize>) -> Result<EqRelation> {
        if base.left != base.right {
            return Err(Error::Validation(
                "relation base must be a product of a set with itself".into(),
            ));
        }
        for &i in &member_orbits {
            base.set.orbit(i)?;
        }
        Ok(EqRelation { base, member_orbits })
    }

    pub fn base(&self) -> &ProductResult {
        &self.base
    }

    pub fn member_orbits(&self) -> &BTreeSet<usize> {
        &self.member_orbits
    }

    /// True when the concrete pair is related.
    pub fn relates(&self, x: &Element, y: &Element) -> Result<bool> {
        Ok(self.member_orbits.contains(&self.base.pair(x, y)?.orbit))
    }
}

/// Builds the relation holding exactly on the product orbits whose
/// representative pair satisfies the predicate.  Correct only for
/// equivariant predicates (those invariant under the data symmetry), which
/// is the caller's responsibility.
pub fn relation_from_predicate(
    base: ProductResult,
    mut pred: impl FnMut(&Element, &Element) -> bool,
) -> Result<EqRelation> {
    let mut member_orbits = BTreeSet::new();
    for i in 0..base.set.orbit_count() {
        let z = base.set.realize(i)?;
        let (x, y) = base.unpair(&z)?;
        if pred(&x, &y) {
            member_orbits.insert(i);
        }
    }
    EqRelation::new(base, member_orbits)
}

/// Outcome of [`check_equivalence`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EquivalenceVerdict {
    /// The relation is an equivariant equivalence.
    Equivalence,
    /// Some element of this orbit is not related to itself.
    NotReflexive { orbit: usize },
    /// The swap of this member orbit is not a member.
    NotSymmetric { member: usize },
    /// A concrete counterexample to transitivity.
    NotTransitive { x: Element, y: Element, z: Element },
}

impl EquivalenceVerdict {
    pub fn is_equivalence(&self) -> bool {
        matches!(self, EquivalenceVerdict::Equivalence)
    }
}

impl fmt::Display for EquivalenceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquivalenceVerdict::Equivalence => write!(f, "equivalence"),
            EquivalenceVerdict::NotReflexive { orbit } => {
                write!(f, "not reflexive on orbit {orbit}")
            }
            EquivalenceVerdict::NotSymmetric { member } => {
                write!(f, "not symmetric at member orbit {member}")
            }
            EquivalenceVerdict::NotTransitive { x, y, z } => {
                write!(f, "not transitive at ({x}, {y}, {z})")
            }
        }
    }
}

/// Decides whether a relation is an equivariant equivalence.
///
/// Reflexivity and symmetry are checked orbit-wise on representatives;
/// transitivity by building the triple product `(X×X)×X` and checking every
/// triple orbit whose first two and last two components are related.  All
/// three conditions are unions of orbits, so one representative per orbit
/// decides each.
pub fn check_equivalence(r: &EqRelation) -> Result<EquivalenceVerdict> {
    let p = &r.base;
    let x_set = &p.left;
    for oi in 0..x_set.orbit_count() {
        let e = x_set.realize(oi)?;
        if !r.relates(&e, &e)? {
            return Ok(EquivalenceVerdict::NotReflexive { orbit: oi });
        }
    }
    for &m in &r.member_orbits {
        let z = p.set.realize(m)?;
        let (a, b) = p.unpair(&z)?;
        if !r.relates(&b, &a)? {
            return Ok(EquivalenceVerdict::NotSymmetric { member: m });
        }
    }
    let triples = product(&p.set, x_set)?;
    for ti in 0..triples.set.orbit_count() {
        let w = triples.set.realize(ti)?;
        let (xy, z) = triples.unpair(&w)?;
        if !r.member_orbits.contains(&xy.orbit) {
            continue;
        }
        let (x, y) = p.unpair(&xy)?;
        if r.relates(&y, &z)? && !r.relates(&x, &z)? {
            return Ok(EquivalenceVerdict::NotTransitive { x, y, z });
        }
    }
    Ok(EquivalenceVerdict::Equivalence)
}

/// The quotient of a set by an equivariant equivalence relation: the set of
/// classes and the abstraction map.
///
/// Per connected component of related orbits the algorithm: (1) picks the
/// least orbit and a concrete representative; (2) drops every register whose
/// fresh revaluation (same extension type, new value) stays related — the
/// kept registers carry the least support of the class; (3) enlarges the
/// local symmetry by every automorphism of the reduced shape whose permuted
/// valuation, completed back to a full one, stays related; (4) equips every
/// source orbit with an abstraction witness read off a concrete related pair
/// into the representative orbit.
pub fn quotient(x: &NomSet, r: &EqRelation) -> Result<(NomSet, EqMap)> {
    let verdict = check_equivalence(r)?;
    if !verdict.is_equivalence() {
        return Err(Error::NotAnEquivalence(verdict.to_string()));
    }
    let p = &r.base;
    if p.left != *x {
        return Err(Error::Validation("relation base is not a product of the given set".into()));
    }
    let backend = x.backend;
    let n = x.orbit_count();

    // Connected components of orbits under the relation.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for &m in &r.member_orbits {
        let tag = p.tag(m);
        let (a, b) = (find(&mut parent, tag.left_orbit), find(&mut parent, tag.right_orbit));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        components.entry(root).or_default().push(i);
    }

    let mut q_orbits: Vec<OrbitRepr> = Vec::new();
    let mut entries: BTreeMap<usize, (usize, Embedding)> = BTreeMap::new();

    for (&rep, members) in &components {
        let rep_orbit = x.orbit(rep)?;
        let shape = rep_orbit.shape.clone();
        let size = shape.size();
        let x0 = x.realize(rep)?;
        let val = x0.valuation().to_vec();

        // Register-drop loop: kept tracks the support-carrying positions.
        let mut kept: Vec<usize> = (0..size).collect();
        'drop: loop {
            for (slot, &pos) in kept.iter().enumerate() {
                let mut order: Vec<usize> = (0..size).filter(|&i| i != pos).collect();
                let given: Vec<DataValue> = order.iter().map(|&i| val[i].clone()).collect();
                order.push(pos);
                let forbidden: BTreeSet<DataValue> = [val[pos].clone()].into_iter().collect();
                let refreshed = complete_struct(&shape, &order, &given, &forbidden)?;
                let x1 = x.element_in_orbit(rep, &refreshed)?;
                if r.relates(&x0, &x1)? {
                    kept.remove(slot);
                    continue 'drop;
                }
            }
            break;
        }
        let dropped: Vec<usize> = (0..size).filter(|i| !kept.contains(i)).collect();
        let reduced = shape.substruct(&kept);
        let reduced_vals: Vec<DataValue> = kept.iter().map(|&i| val[i].clone()).collect();

        // Local-symmetry enlargement over the reduced shape.
        let mut passing: BTreeSet<Perm> = BTreeSet::new();
        for tau in backend.automorphisms(&reduced).iter() {
            let permuted = tau.permute(&reduced_vals);
            let mut order = kept.clone();
            order.extend(dropped.iter().copied());
            let lifted = complete_struct(&shape, &order, &permuted, &BTreeSet::new())?;
            let x2 = x.element_in_orbit(rep, &lifted)?;
            if r.relates(&x0, &x2)? {
                passing.insert(tau.clone());
            }
        }
        let quotient_sym = PermGroup::from_elements(passing, kept.len()).map_err(|e| {
            Error::Validation(format!(
                "relation induced a non-group symmetry on the quotient: {e}"
            ))
        })?;
        let (q_orbit, transport) = OrbitRepr::new(reduced, quotient_sym)?;
        let qi = q_orbits.len();

        // Witness for the representative orbit: canonical index c of the
        // quotient shape corresponds to kept position kept[transport⁻¹(c)].
        let transport_inv = transport.inverse();
        let rep_witness: Vec<usize> =
            (0..kept.len()).map(|c| kept[transport_inv.apply(c)]).collect();

        for &src in members {
            let witness_map: Vec<usize> = if src == rep {
                rep_witness.clone()
            } else {
                // A direct related pair (y, xr) with y in src and xr in rep
                // exists because the relation is a transitive union of
                // orbits over a connected component.
                let m = r
                    .member_orbits
                    .iter()
                    .find(|&&m| {
                        let t = p.tag(m);
                        (t.left_orbit == src && t.right_orbit == rep)
                            || (t.left_orbit == rep && t.right_orbit == src)
                    })
                    .copied()
                    .ok_or_else(|| {
                        Error::Validation(format!(
                            "no direct relation between orbits {src} and {rep}"
                        ))
                    })?;
                let z = p.set.realize(m)?;
                let (e1, e2) = p.unpair(&z)?;
                let (y, xr) =
                    if p.tag(m).left_orbit == src { (e1, e2) } else { (e2, e1) };
                // The class valuation read off the representative-side
                // element must reappear in y's valuation (it is the least
                // support of the shared class).
                rep_witness
                    .iter()
                    .map(|&k| {
                        let value = &xr.valuation()[k];
                        y.valuation().iter().position(|v| v == value).ok_or_else(|| {
                            Error::Validation(
                                "class support missing from a related element".into(),
                            )
                        })
                    })
                    .collect::<Result<Vec<usize>>>()?
            };
            let witness =
                Embedding::new(witness_map, &q_orbit.shape, &x.orbit(src)?.shape)?;
            if !commutes(&witness, &x.orbit(src)?.sym, &q_orbit.sym) {
                return Err(Error::CommutingCondition(format!(
                    "abstraction witness for orbit {src} does not commute"
                )));
            }
            entries.insert(src, (qi, canonical_witness(&witness, &q_orbit.sym)));
        }
        q_orbits.push(q_orbit);
    }

    let q_set = NomSet { backend, orbits: q_orbits };
    let map = EqMap::new(entries, x, &q_set)?;
    Ok((q_set, map))
}

/// Parses the set expression language: `atom`, `tuple(k)`, `dtuple(k)`,
/// `set2`, `otuple(k)`, `prod(e1,e2)`, `sum(e1,e2)` and orbit literals
/// `orbit(struct{…})` or `orbit(struct{…}; (0 1) …)` with generator cycles
/// for the local symmetry.
pub fn parse_expr(backend: Backend, text: &str) -> Result<NomSet> {
    let s = text.trim();
    let arity_arg = |name: &str| -> Result<usize> {
        let inner = s
            .strip_prefix(name)
            .and_then(|r| r.trim().strip_prefix('('))
            .and_then(|r| r.trim_end().strip_suffix(')'))
            .ok_or_else(|| Error::Validation(format!("expected {name}(k) in `{s}`")))?;
        inner
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("bad arity `{inner}` in `{s}`")))
    };
    let require = |b: Backend| -> Result<()> {
        if backend != b {
            return Err(Error::BackendMismatch(format!(
                "`{s}` needs the {b} symmetry, current symmetry is {backend}"
            )));
        }
        Ok(())
    };
    if s == "atom" {
        return Ok(NomSet::atom(backend));
    }
    if s == "set2" {
        require(Backend::Equality)?;
        return Ok(NomSet::set2());
    }
    if s.starts_with("tuple") {
        require(Backend::Equality)?;
        return Ok(NomSet::tuple(arity_arg("tuple")?));
    }
    if s.starts_with("dtuple") {
        require(Backend::Equality)?;
        return Ok(NomSet::dtuple(arity_arg("dtuple")?));
    }
    if s.starts_with("otuple") {
        require(Backend::Order)?;
        return Ok(NomSet::otuple(arity_arg("otuple")?));
    }
    for (name, combine) in [
        ("prod", true),
        ("sum", false),
    ] {
        if let Some(rest) = s.strip_prefix(name) {
            let inner = rest
                .trim()
                .strip_prefix('(')
                .and_then(|r| r.trim_end().strip_suffix(')'))
                .ok_or_else(|| Error::Validation(format!("expected {name}(e1, e2) in `{s}`")))?;
            let args = split_top(inner, ',');
            if args.len() != 2 {
                return Err(Error::Validation(format!(
                    "{name} takes two arguments, got {} in `{s}`",
                    args.len()
                )));
            }
            let a = parse_expr(backend, &args[0])?;
            let b = parse_expr(backend, &args[1])?;
            return if combine { Ok(product(&a, &b)?.set.clone()) } else { a.sum(&b) };
        }
    }
    if let Some(rest) = s.strip_prefix("orbit") {
        let inner = rest
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.trim_end().strip_suffix(')'))
            .ok_or_else(|| Error::Validation(format!("expected orbit(struct{{…}}) in `{s}`")))?;
        let parts = split_top(inner, ';');
        let (struct_text, sym_parts) = parts
            .split_first()
            .ok_or_else(|| Error::Validation(format!("empty orbit literal `{s}`")))?;
        let shape = parse_struct(backend, struct_text)?;
        let sym = if sym_parts.is_empty() {
            PermGroup::trivial(shape.size())
        } else {
            let gens: Vec<Perm> = sym_parts
                .iter()
                .map(|c| Perm::from_cycles(c.trim(), shape.size()))
                .collect::<Result<_>>()?;
            PermGroup::closure(&gens, shape.size())?
        };
        let (orbit, _) = OrbitRepr::new(shape, sym)?;
        return NomSet::new(backend, vec![orbit]);
    }
    Err(Error::Validation(format!("unrecognized set expression `{s}`")))
}

/// Splits on a separator at brace/paren depth zero.
fn split_top(text: &str, sep: char) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for c in text.chars() {
        match c {
            '(' | '{' => {
                depth += 1;
                cur.push(c);
            }
            ')' | '}' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            c if c == sep && depth == 0 => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out.into_iter().map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::struct_from_fact_list;
    use num_bigint::BigUint;
    use num_rational::Rational64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nat(n: u64) -> DataValue {
        DataValue::Nat(n)
    }
    fn rat(n: i64) -> DataValue {
        DataValue::Rat(Rational64::from_integer(n))
    }
    fn vx(n: u64) -> DataValue {
        DataValue::Vertex(BigUint::from(n))
    }

    #[test]
    fn make_orbit_canonicalizes_shape_and_transports_symmetry() {
        let descending = struct_from_fact_list(Backend::Order, 2, "1<0").unwrap();
        let (orbit, transport) = OrbitRepr::new(descending.clone(), PermGroup::trivial(2)).unwrap();
        assert_eq!(orbit.shape(), &struct_from_fact_list(Backend::Order, 2, "0<1").unwrap());
        assert_eq!(descending.relabel(&transport), *orbit.shape());

        let bad_sym = PermGroup::symmetric(2);
        assert!(OrbitRepr::new(descending, bad_sym).is_err(), "swap is not an order automorphism");
    }

    #[test]
    fn element_of_matches_orbits_positionally() {
        // All pairs = diagonal orbit (one register) + distinct-pair orbit.
        let pairs = NomSet::tuple(2);
        assert_eq!(pairs.orbit_count(), 2);
        let e = pairs.element_of(&[nat(3), nat(5)]).unwrap().unwrap();
        assert_eq!(e.orbit(), 1);
        assert_eq!(e.valuation(), &[nat(3), nat(5)]);
        let d = pairs.element_of(&[nat(3)]).unwrap().unwrap();
        assert_eq!(d.orbit(), 0);

        let sets = NomSet::set2();
        let e = sets.element_of(&[nat(7), nat(3)]).unwrap().unwrap();
        assert_eq!(e.valuation(), &[nat(3), nat(7)], "canonical under the swap");

        let inc = NomSet::otuple(2);
        assert!(inc.element_of(&[rat(5), rat(2)]).unwrap().is_none());
        assert!(inc.element_of(&[rat(2), rat(5)]).unwrap().is_some());

        assert!(matches!(
            NomSet::dtuple(2).element_of(&[nat(3), nat(3)]),
            Err(Error::DuplicateValues)
        ));
    }

    #[test]
    fn tuple_orbit_counts_are_bell_numbers() {
        assert_eq!(NomSet::tuple(1).orbit_count(), 1);
        assert_eq!(NomSet::tuple(2).orbit_count(), 2);
        assert_eq!(NomSet::tuple(3).orbit_count(), 5);
        assert_eq!(NomSet::tuple(4).orbit_count(), 15);
    }

    #[test]
    fn hom_counts_between_small_orbits() {
        let atom = NomSet::atom(Backend::Equality);
        let dpairs = NomSet::dtuple(2);
        let sets = NomSet::set2();
        let homs = |a: &NomSet, b: &NomSet| hom_enumerate(&a.orbits[0], &b.orbits[0]).len();
        assert_eq!(homs(&atom, &atom), 1, "only the identity");
        assert_eq!(homs(&sets, &dpairs), 0, "unordered pairs cannot be ordered");
        assert_eq!(homs(&dpairs, &sets), 1, "forget the order");
        assert_eq!(homs(&dpairs, &dpairs), 2, "identity and swap");
        assert_eq!(homs(&dpairs, &atom), 2, "two projections");
    }

    #[test]
    fn apply_reads_valuation_through_witness() {
        let atom = NomSet::atom(Backend::Equality);
        let dpairs = NomSet::dtuple(2);
        let sets = NomSet::set2();

        let id = hom_enumerate(&atom.orbits[0], &atom.orbits[0]).remove(0);
        let map = EqMap::new([(0, (0, id))].into(), &atom, &atom).unwrap();
        let seven = atom.element_of(&[nat(7)]).unwrap().unwrap();
        assert_eq!(map.apply(&atom, &atom, &seven).unwrap(), seven);

        let forget = hom_enumerate(&dpairs.orbits[0], &sets.orbits[0]).remove(0);
        let map = EqMap::new([(0, (0, forget))].into(), &dpairs, &sets).unwrap();
        let e = dpairs.element_of(&[nat(3), nat(7)]).unwrap().unwrap();
        let img = map.apply(&dpairs, &sets, &e).unwrap();
        assert_eq!(img.valuation(), &[nat(3), nat(7)]);

        let first = hom_enumerate(&dpairs.orbits[0], &atom.orbits[0]).remove(0);
        let map = EqMap::new([(0, (0, first))].into(), &dpairs, &atom).unwrap();
        let img = map.apply(&dpairs, &atom, &e).unwrap();
        assert_eq!(img.valuation(), &[nat(3)]);

        // Partial maps reject uncovered orbits.
        let empty = EqMap::new(BTreeMap::new(), &dpairs, &atom).unwrap();
        assert!(matches!(empty.apply(&dpairs, &atom, &e), Err(Error::PartialMap(0))));
    }

    #[test]
    fn product_orbit_counts_equality() {
        let atom = NomSet::atom(Backend::Equality);
        for n in 1..=5 {
            let p = product(&NomSet::dtuple(n), &atom).unwrap();
            assert_eq!(p.set().orbit_count(), n + 1, "distinct {n}-tuples × atom");
        }
        let p = product(&NomSet::set2(), &atom).unwrap();
        assert_eq!(p.set().orbit_count(), 2, "unordered pairs × atom");
    }

    #[test]
    fn product_orbit_counts_order() {
        let atom = NomSet::atom(Backend::Order);
        for n in 1..=4 {
            let p = product(&NomSet::otuple(n), &atom).unwrap();
            assert_eq!(p.set().orbit_count(), 2 * n + 1, "increasing {n}-tuples × atom");
        }
    }

    #[test]
    fn product_orbit_counts_graph() {
        let atom = NomSet::atom(Backend::Graph);
        let discrete2 = FinStruct::discrete(Backend::Graph, 2).unwrap();
        let (plain, _) = OrbitRepr::new(discrete2.clone(), PermGroup::trivial(2)).unwrap();
        let plain_set = NomSet::new(Backend::Graph, vec![plain]).unwrap();
        assert_eq!(product(&plain_set, &atom).unwrap().set().orbit_count(), 6);

        let (swapped, _) = OrbitRepr::new(discrete2, PermGroup::symmetric(2)).unwrap();
        let swapped_set = NomSet::new(Backend::Graph, vec![swapped]).unwrap();
        assert_eq!(product(&swapped_set, &atom).unwrap().set().orbit_count(), 4);
    }

    #[test]
    fn pair_locates_overlap_orbits() {
        let dpairs = NomSet::dtuple(2);
        let atom = NomSet::atom(Backend::Equality);
        let p = product(&dpairs, &atom).unwrap();

        let xy = dpairs.element_of(&[nat(3), nat(7)]).unwrap().unwrap();
        let three = atom.element_of(&[nat(3)]).unwrap().unwrap();
        let nine = atom.element_of(&[nat(9)]).unwrap().unwrap();

        let z = p.pair(&xy, &three).unwrap();
        assert_eq!(p.tag(z.orbit()).rho, vec![(0, 0)], "third component equals the first");
        assert_eq!(z.valuation().len(), 2);

        let z = p.pair(&xy, &nine).unwrap();
        assert_eq!(p.tag(z.orbit()).rho, vec![], "fresh third component");
        assert_eq!(z.valuation().len(), 3);
    }

    fn random_element(rng: &mut ChaCha8Rng, set: &NomSet) -> Element {
        let orbit = rng.gen_range(0..set.orbit_count());
        let size = set.orbits()[orbit].dimension();
        loop {
            let values: Vec<DataValue> = match set.backend() {
                Backend::Equality => {
                    (0..size).map(|_| nat(rng.gen_range(0..12))).collect()
                }
                Backend::Order => (0..size)
                    .map(|_| {
                        DataValue::Rat(Rational64::new(rng.gen_range(-8..8), rng.gen_range(1..4)))
                    })
                    .collect(),
                Backend::Graph => (0..size).map(|_| vx(rng.gen_range(0..16))).collect(),
            };
            let distinct = values.iter().collect::<BTreeSet<_>>().len() == size;
            if !distinct {
                continue;
            }
            if let Ok(e) = set.element_in_orbit(orbit, &values) {
                return e;
            }
        }
    }

    #[test]
    fn pair_unpair_round_trip_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
        let cases: Vec<(NomSet, NomSet)> = vec![
            (NomSet::dtuple(2), NomSet::atom(Backend::Equality)),
            (NomSet::set2(), NomSet::dtuple(2)),
            (NomSet::tuple(2), NomSet::tuple(2)),
            (NomSet::otuple(2), NomSet::atom(Backend::Order)),
            (NomSet::otuple(2), NomSet::otuple(2)),
            (graph_pairs_set(), NomSet::atom(Backend::Graph)),
        ];
        for (xs, ys) in &cases {
            let p = product(xs, ys).unwrap();
            for _ in 0..34 {
                let x = random_element(&mut rng, xs);
                let y = random_element(&mut rng, ys);
                let z = p.pair(&x, &y).unwrap();
                let (x2, y2) = p.unpair(&z).unwrap();
                assert_eq!((x2, y2), (x.clone(), y.clone()));
            }
        }
    }

    fn graph_pairs_set() -> NomSet {
        let discrete2 = FinStruct::discrete(Backend::Graph, 2).unwrap();
        let (o, _) = OrbitRepr::new(discrete2, PermGroup::symmetric(2)).unwrap();
        NomSet::new(Backend::Graph, vec![o]).unwrap()
    }

    #[test]
    fn unpair_of_every_realized_orbit_recovers_components() {
        let xs = NomSet::otuple(2);
        let ys = NomSet::atom(Backend::Order);
        let p = product(&xs, &ys).unwrap();
        for i in 0..p.set().orbit_count() {
            let z = p.set().realize(i).unwrap();
            let (a, b) = p.unpair(&z).unwrap();
            let z2 = p.pair(&a, &b).unwrap();
            assert_eq!(z2, z, "pair is inverse to unpair on orbit {i}");
        }
    }

    fn diagonal_relation(x: &NomSet) -> EqRelation {
        let p = product(x, x).unwrap();
        relation_from_predicate(p, |a, b| a == b).unwrap()
    }

    #[test]
    fn equivalence_checks() {
        let dpairs = NomSet::dtuple(2);
        let diag = diagonal_relation(&dpairs);
        assert!(check_equivalence(&diag).unwrap().is_equivalence());

        let full =
            relation_from_predicate(product(&dpairs, &dpairs).unwrap(), |_, _| true).unwrap();
        assert!(check_equivalence(&full).unwrap().is_equivalence());

        // Swap pairs without the diagonal: not reflexive.
        let swap_only = relation_from_predicate(product(&dpairs, &dpairs).unwrap(), |a, b| {
            let rev: Vec<DataValue> = a.valuation().iter().rev().cloned().collect();
            b.valuation() == rev && a != b
        })
        .unwrap();
        let verdict = check_equivalence(&swap_only).unwrap();
        assert!(matches!(verdict, EquivalenceVerdict::NotReflexive { .. }), "got {verdict}");
    }

    #[test]
    fn quotient_by_swap_gives_unordered_pairs() {
        let dpairs = NomSet::dtuple(2);
        let swap = relation_from_predicate(product(&dpairs, &dpairs).unwrap(), |a, b| {
            let rev: Vec<DataValue> = a.valuation().iter().rev().cloned().collect();
            a == b || b.valuation() == rev
        })
        .unwrap();
        let (q, map) = quotient(&dpairs, &swap).unwrap();
        assert_eq!(q.orbit_count(), 1);
        assert_eq!(q.orbits()[0].dimension(), 2);
        assert_eq!(q.orbits()[0].sym().order(), 2, "swap became local symmetry");

        let e = dpairs.element_of(&[nat(7), nat(3)]).unwrap().unwrap();
        let f = dpairs.element_of(&[nat(3), nat(7)]).unwrap().unwrap();
        let qe = map.apply(&dpairs, &q, &e).unwrap();
        let qf = map.apply(&dpairs, &q, &f).unwrap();
        assert_eq!(qe, qf, "swapped pairs share a class");
        assert_eq!(qe.valuation(), &[nat(3), nat(7)]);
    }

    #[test]
    fn quotient_by_first_component_drops_a_register() {
        let dpairs = NomSet::dtuple(2);
        let same_first = relation_from_predicate(product(&dpairs, &dpairs).unwrap(), |a, b| {
            a.valuation()[0] == b.valuation()[0]
        })
        .unwrap();
        let (q, map) = quotient(&dpairs, &same_first).unwrap();
        assert_eq!(q.orbit_count(), 1);
        assert_eq!(q.orbits()[0].dimension(), 1, "second register dropped");

        let e = dpairs.element_of(&[nat(3), nat(7)]).unwrap().unwrap();
        let f = dpairs.element_of(&[nat(3), nat(9)]).unwrap().unwrap();
        assert_eq!(
            map.apply(&dpairs, &q, &e).unwrap(),
            map.apply(&dpairs, &q, &f).unwrap()
        );
        let g = dpairs.element_of(&[nat(4), nat(7)]).unwrap().unwrap();
        assert_ne!(map.apply(&dpairs, &q, &e).unwrap(), map.apply(&dpairs, &q, &g).unwrap());
    }

    #[test]
    fn quotient_by_diagonal_is_isomorphic_copy() {
        for set in [NomSet::tuple(2), NomSet::otuple(2)] {
            let diag = diagonal_relation(&set);
            let (q, map) = quotient(&set, &diag).unwrap();
            assert_eq!(q.orbit_count(), set.orbit_count());
            for i in 0..set.orbit_count() {
                let e = set.realize(i).unwrap();
                let img = map.apply(&set, &q, &e).unwrap();
                assert_eq!(img.valuation(), e.valuation());
            }
        }
    }

    #[test]
    fn quotient_by_full_relation_is_a_point() {
        let dpairs = NomSet::dtuple(2);
        let full =
            relation_from_predicate(product(&dpairs, &dpairs).unwrap(), |_, _| true).unwrap();
        let (q, map) = quotient(&dpairs, &full).unwrap();
        assert_eq!(q.orbit_count(), 1);
        assert_eq!(q.orbits()[0].dimension(), 0, "all registers dropped");
        let e = dpairs.element_of(&[nat(3), nat(7)]).unwrap().unwrap();
        assert_eq!(map.apply(&dpairs, &q, &e).unwrap().valuation().len(), 0);
    }

    #[test]
    fn least_support_is_the_valuation_image() {
        let e = NomSet::set2().element_of(&[nat(7), nat(3)]).unwrap().unwrap();
        assert_eq!(e.least_support(), [nat(3), nat(7)].into_iter().collect());
        let empty_shape = FinStruct::empty(Backend::Equality);
        let (o, _) = OrbitRepr::new(empty_shape, PermGroup::trivial(0)).unwrap();
        let s = NomSet::new(Backend::Equality, vec![o]).unwrap();
        let e = s.element_of(&[]).unwrap().unwrap();
        assert!(e.least_support().is_empty());
    }

    #[test]
    fn apply_preserves_support_and_representatives() {
        let dpairs = NomSet::dtuple(2);
        let sets = NomSet::set2();
        let w = hom_enumerate(&dpairs.orbits[0], &sets.orbits[0]).remove(0);
        let map = EqMap::new([(0, (0, w))].into(), &dpairs, &sets).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = random_element(&mut rng, &dpairs);
            let y = map.apply(&dpairs, &sets, &x).unwrap();
            assert!(y.least_support().is_subset(&x.least_support()));
        }
    }

    #[test]
    fn expression_language_round_trip() {
        assert_eq!(parse_expr(Backend::Equality, "atom").unwrap().orbit_count(), 1);
        assert_eq!(parse_expr(Backend::Equality, "tuple(3)").unwrap().orbit_count(), 5);
        assert_eq!(
            parse_expr(Backend::Equality, "prod(dtuple(2), atom)").unwrap().orbit_count(),
            3
        );
        assert_eq!(
            parse_expr(Backend::Equality, "sum(atom, set2)").unwrap().orbit_count(),
            2
        );
        assert_eq!(parse_expr(Backend::Order, "otuple(2)").unwrap().orbit_count(), 1);
        let lit = parse_expr(Backend::Graph, "orbit(struct{n=2; E(0,1)}; (0 1))").unwrap();
        assert_eq!(lit.orbit_count(), 1);
        assert_eq!(lit.orbits()[0].sym().order(), 2);
        assert!(parse_expr(Backend::Order, "set2").is_err(), "backend mismatch");
        assert!(parse_expr(Backend::Equality, "mystery").is_err());
    }

    #[test]
    fn product_merges_matched_pairs_under_symmetry() {
        // Unordered pairs × atom: the two "letter equals one component"
        // matchings merge into a single orbit under the swap; the empty
        // matching sorts first.
        let p = product(&NomSet::set2(), &NomSet::atom(Backend::Equality)).unwrap();
        let shapes: Vec<usize> =
            p.set().orbits().iter().map(|o| o.dimension()).collect();
        assert_eq!(shapes, vec![3, 2]);
        let syms: Vec<usize> = p.set().orbits().iter().map(|o| o.sym().order()).collect();
        assert_eq!(syms, vec![2, 1]);
    }

    #[test]
    fn order_facts_in_product_follow_gaps() {
        // Increasing pairs × atom: five orbits keyed by the letter's gap:
        // below, equal-low, between, equal-high, above.
        let p = product(&NomSet::otuple(2), &NomSet::atom(Backend::Order)).unwrap();
        let mut dims: Vec<usize> = p.set().orbits().iter().map(|o| o.dimension()).collect();
        dims.sort_unstable();
        assert_eq!(dims, vec![2, 2, 3, 3, 3]);
        // Every orbit's shape is a chain (total order), and all five differ
        // as tagged orbits.
        for o in p.set().orbits() {
            assert_eq!(o.shape().facts().len(), o.dimension() * (o.dimension() - 1) / 2);
        }
    }
}
