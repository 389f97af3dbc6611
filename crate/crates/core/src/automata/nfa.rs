//! Nondeterministic register automata: orbit-finite state and alphabet
//! sets, transition relations as unions of product orbits, closure
//! constructions, pool-based membership, and the text format.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;

use num_rational::Rational64;

use super::dfa::parse_state_line;
use super::{strip_comment, tokenize_line};
use crate::nomset::{product, Element, EqSubset, NomSet, ProductResult};
use crate::symmetry::{
    complete_order, realize_struct, Backend, DataValue, Fact, FinStruct,
};
use crate::{Error, Result};

/// Default bound on the simulation pool (overridable per call).
pub const DEFAULT_POOL_CAP: usize = 64;

/// One input letter: a finite label (index into the automaton's label list)
/// and a data value.  Plain data alphabets use the single label `.`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Letter {
    pub label: usize,
    pub value: DataValue,
}

/// Verdict of pool-based membership checking.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Membership {
    Accepted,
    Rejected,
    /// The finite simulation pool could not cover the search space; the
    /// reason says which bound was hit.
    Inconclusive(String),
}

/// A nondeterministic register automaton.  States form an orbit-finite set;
/// the transition relation is a union of orbits of
/// `(states × alphabet) × states`, and the spontaneous-move relation a union
/// of orbits of `states × states`.
#[derive(Clone, Debug)]
pub struct NominalNfa {
    backend: Backend,
    state_names: Vec<String>,
    states: NomSet,
    labels: Vec<String>,
    alphabet: NomSet,
    initial: EqSubset,
    accepting: EqSubset,
    qa: ProductResult,
    qaq: ProductResult,
    qq: ProductResult,
    trans: BTreeSet<usize>,
    eps: BTreeSet<usize>,
}

impl PartialEq for NominalNfa {
    fn eq(&self, other: &Self) -> bool {
        self.backend == other.backend
            && self.state_names == other.state_names
            && self.states == other.states
            && self.labels == other.labels
            && self.initial == other.initial
            && self.accepting == other.accepting
            && self.trans == other.trans
            && self.eps == other.eps
    }
}

impl Eq for NominalNfa {}

pub(crate) fn alphabet_of(backend: Backend, label_count: usize) -> NomSet {
    let mut set = NomSet::atom(backend);
    for _ in 1..label_count {
        set = set.sum(&NomSet::atom(backend)).expect("same backend");
    }
    set
}

impl NominalNfa {
    /// Builds and validates an automaton from orbit-level data: the orbit
    /// indices in `trans` refer to the product `(states × alphabet) × states`
    /// and those in `eps` to `states × states`, both built here.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        backend: Backend,
        state_names: Vec<String>,
        states: NomSet,
        labels: Vec<String>,
        initial: BTreeSet<usize>,
        accepting: BTreeSet<usize>,
        trans: BTreeSet<usize>,
        eps: BTreeSet<usize>,
    ) -> Result<NominalNfa> {
        if states.backend() != backend {
            return Err(Error::BackendMismatch("state set backend".into()));
        }
        if state_names.len() != states.orbit_count() {
            return Err(Error::Validation(format!(
                "{} state names for {} orbits",
                state_names.len(),
                states.orbit_count()
            )));
        }
        let mut seen = BTreeSet::new();
        for n in &state_names {
            if !seen.insert(n.clone()) {
                return Err(Error::Validation(format!("duplicate state name {n}")));
            }
        }
        if labels.is_empty() {
            return Err(Error::Validation("alphabet needs at least one label".into()));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(Error::Validation(format!("duplicate label {l}")));
            }
        }
        let alphabet = alphabet_of(backend, labels.len());
        let initial = EqSubset::new(initial, &states)?;
        let accepting = EqSubset::new(accepting, &states)?;
        let qa = product(&states, &alphabet)?;
        let qaq = product(qa.set(), &states)?;
        let qq = product(&states, &states)?;
        for &m in &trans {
            if m >= qaq.set().orbit_count() {
                return Err(Error::Validation(format!("transition orbit {m} out of range")));
            }
        }
        for &m in &eps {
            if m >= qq.set().orbit_count() {
                return Err(Error::Validation(format!("eps orbit {m} out of range")));
            }
        }
        Ok(NominalNfa {
            backend,
            state_names,
            states,
            labels,
            alphabet,
            initial,
            accepting,
            qa,
            qaq,
            qq,
            trans,
            eps,
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn states(&self) -> &NomSet {
        &self.states
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|n| n == name)
    }

    pub fn alphabet(&self) -> &NomSet {
        &self.alphabet
    }

    pub fn initial(&self) -> &EqSubset {
        &self.initial
    }

    pub fn accepting(&self) -> &EqSubset {
        &self.accepting
    }

    pub fn trans_orbits(&self) -> &BTreeSet<usize> {
        &self.trans
    }

    pub fn eps_orbits(&self) -> &BTreeSet<usize> {
        &self.eps
    }

    /// The product `states × alphabet`.
    pub fn qa(&self) -> &ProductResult {
        &self.qa
    }

    /// The product `(states × alphabet) × states` carrying the transition
    /// relation.
    pub fn qaq(&self) -> &ProductResult {
        &self.qaq
    }

    /// The product `states × states` carrying the spontaneous-move relation.
    pub fn qq(&self) -> &ProductResult {
        &self.qq
    }

    /// The orbit of a concrete transition triple.
    pub fn triple_orbit(&self, x: &Element, a: &Element, y: &Element) -> Result<usize> {
        let w = self.qa.pair(x, a)?;
        Ok(self.qaq.pair(&w, y)?.orbit())
    }

    /// The orbit of a concrete state pair.
    pub fn pair_orbit(&self, x: &Element, y: &Element) -> Result<usize> {
        Ok(self.qq.pair(x, y)?.orbit())
    }

    /// Whether the relation contains a concrete triple.
    pub fn has_transition(&self, x: &Element, a: &Element, y: &Element) -> Result<bool> {
        Ok(self.trans.contains(&self.triple_orbit(x, a, y)?))
    }

    /// Whether a spontaneous move between two configurations exists.
    pub fn has_eps(&self, x: &Element, y: &Element) -> Result<bool> {
        Ok(self.eps.contains(&self.pair_orbit(x, y)?))
    }
}

/// Re-locate another automaton's transition orbits inside `dst`, with its
/// state orbits shifted by `shift`.
fn relocate_triples(src: &NominalNfa, dst: &NominalNfa, shift: usize) -> Result<BTreeSet<usize>> {
    let mut out = BTreeSet::new();
    for &m in &src.trans {
        let z = src.qaq.set().realize(m)?;
        let (w, y) = src.qaq.unpair(&z)?;
        let (x, a) = src.qa.unpair(&w)?;
        let x2 = dst.states.element_in_orbit(x.orbit() + shift, x.valuation())?;
        let y2 = dst.states.element_in_orbit(y.orbit() + shift, y.valuation())?;
        let a2 = dst.alphabet.element_in_orbit(a.orbit(), a.valuation())?;
        out.insert(dst.triple_orbit(&x2, &a2, &y2)?);
    }
    Ok(out)
}

/// Re-locate another automaton's spontaneous-move orbits inside `dst`.
fn relocate_pairs(src: &NominalNfa, dst: &NominalNfa, shift: usize) -> Result<BTreeSet<usize>> {
    let mut out = BTreeSet::new();
    for &m in &src.eps {
        let z = src.qq.set().realize(m)?;
        let (x, y) = src.qq.unpair(&z)?;
        let x2 = dst.states.element_in_orbit(x.orbit() + shift, x.valuation())?;
        let y2 = dst.states.element_in_orbit(y.orbit() + shift, y.valuation())?;
        out.insert(dst.pair_orbit(&x2, &y2)?);
    }
    Ok(out)
}

/// Disjoint-union state names, renaming collisions from the right operand by
/// appending primes.
fn merged_names(a: &[String], b: &[String]) -> Vec<String> {
    let mut names: Vec<String> = a.to_vec();
    for n in b {
        let mut candidate = n.clone();
        while names.contains(&candidate) {
            candidate.push('\'');
        }
        names.push(candidate);
    }
    names
}

/// Language union: disjoint union of states, both initial sets kept.
pub fn nfa_union(a: &NominalNfa, b: &NominalNfa) -> Result<NominalNfa> {
    if a.backend != b.backend {
        return Err(Error::BackendMismatch("union of different backends".into()));
    }
    if a.labels != b.labels {
        return Err(Error::Validation("union needs identical label lists".into()));
    }
    let shift = a.states.orbit_count();
    let states = a.states.sum(&b.states)?;
    let initial: BTreeSet<usize> = a
        .initial
        .member_orbits()
        .iter()
        .copied()
        .chain(b.initial.member_orbits().iter().map(|&i| i + shift))
        .collect();
    let accepting: BTreeSet<usize> = a
        .accepting
        .member_orbits()
        .iter()
        .copied()
        .chain(b.accepting.member_orbits().iter().map(|&i| i + shift))
        .collect();
    let mut out = NominalNfa::new(
        a.backend,
        merged_names(&a.state_names, &b.state_names),
        states,
        a.labels.clone(),
        initial,
        accepting,
        BTreeSet::new(),
        BTreeSet::new(),
    )?;
    let mut trans = relocate_triples(a, &out, 0)?;
    trans.extend(relocate_triples(b, &out, shift)?);
    let mut eps = relocate_pairs(a, &out, 0)?;
    eps.extend(relocate_pairs(b, &out, shift)?);
    out.trans = trans;
    out.eps = eps;
    Ok(out)
}

/// Language concatenation: spontaneous moves wire every accepting
/// configuration of `a` to every initial configuration of `b`.
pub fn nfa_concat(a: &NominalNfa, b: &NominalNfa) -> Result<NominalNfa> {
    if a.backend != b.backend {
        return Err(Error::BackendMismatch("concatenation of different backends".into()));
    }
    if a.labels != b.labels {
        return Err(Error::Validation("concatenation needs identical label lists".into()));
    }
    let shift = a.states.orbit_count();
    let states = a.states.sum(&b.states)?;
    let initial: BTreeSet<usize> = a.initial.member_orbits().clone();
    let accepting: BTreeSet<usize> =
        b.accepting.member_orbits().iter().map(|&i| i + shift).collect();
    let mut out = NominalNfa::new(
        a.backend,
        merged_names(&a.state_names, &b.state_names),
        states,
        a.labels.clone(),
        initial,
        accepting,
        BTreeSet::new(),
        BTreeSet::new(),
    )?;
    let mut trans = relocate_triples(a, &out, 0)?;
    trans.extend(relocate_triples(b, &out, shift)?);
    let mut eps = relocate_pairs(a, &out, 0)?;
    eps.extend(relocate_pairs(b, &out, shift)?);
    // Bridge: all pair orbits from an accepting orbit of `a` to an initial
    // orbit of `b`.
    for (m, tag) in out.qq.set().orbits().iter().enumerate().map(|(m, _)| (m, out.qq.tag(m))) {
        if a.accepting.member_orbits().contains(&tag.left_orbit)
            && tag.right_orbit >= shift
            && b.initial.member_orbits().contains(&(tag.right_orbit - shift))
        {
            eps.insert(m);
        }
    }
    out.trans = trans;
    out.eps = eps;
    Ok(out)
}

/// Composition of two orbit-level relations on the state set, computed by
/// realizing one representative per orbit of `(states × states) × states`.
fn compose_relations(
    nfa: &NominalNfa,
    qqq: &ProductResult,
    r1: &BTreeSet<usize>,
    r2: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>> {
    let mut out = BTreeSet::new();
    for m in 0..qqq.set().orbit_count() {
        let z = qqq.set().realize(m)?;
        let (p, c) = qqq.unpair(&z)?;
        if !r1.contains(&p.orbit()) {
            continue;
        }
        let (x, y) = nfa.qq.unpair(&p)?;
        let yz = nfa.qq.pair(&y, &c)?;
        if r2.contains(&yz.orbit()) {
            out.insert(nfa.qq.pair(&x, &c)?.orbit());
        }
    }
    Ok(out)
}

/// Remove spontaneous moves: transitions become
/// `closure ; transition ; closure`, initial configurations absorb their
/// closure image, acceptance is unchanged.
pub fn eps_eliminate(nfa: &NominalNfa) -> Result<NominalNfa> {
    if nfa.eps.is_empty() {
        return Ok(nfa.clone());
    }
    // Reflexive-transitive closure of the spontaneous-move relation.
    let mut closure = nfa.eps.clone();
    for i in 0..nfa.states.orbit_count() {
        let x = nfa.states.realize(i)?;
        closure.insert(nfa.qq.pair(&x, &x)?.orbit());
    }
    let qqq = product(nfa.qq.set(), &nfa.states)?;
    loop {
        let grown = compose_relations(nfa, &qqq, &closure, &closure)?;
        let before = closure.len();
        closure.extend(grown);
        if closure.len() == before {
            break;
        }
    }

    // Left-compose the transition relation with the closure.
    let left = product(nfa.qq.set(), nfa.qaq.set())?;
    let mut step1 = BTreeSet::new();
    for m in 0..left.set().orbit_count() {
        let z = left.set().realize(m)?;
        let (p, t) = left.unpair(&z)?;
        if !closure.contains(&p.orbit()) || !nfa.trans.contains(&t.orbit()) {
            continue;
        }
        let (x, mid) = nfa.qq.unpair(&p)?;
        let (w, y) = nfa.qaq.unpair(&t)?;
        let (mid2, a) = nfa.qa.unpair(&w)?;
        if mid == mid2 {
            step1.insert(nfa.triple_orbit(&x, &a, &y)?);
        }
    }

    // Right-compose with the closure.
    let right = product(nfa.qaq.set(), nfa.qq.set())?;
    let mut step2 = BTreeSet::new();
    for m in 0..right.set().orbit_count() {
        let z = right.set().realize(m)?;
        let (t, p) = right.unpair(&z)?;
        if !step1.contains(&t.orbit()) || !closure.contains(&p.orbit()) {
            continue;
        }
        let (w, y) = nfa.qaq.unpair(&t)?;
        let (x, a) = nfa.qa.unpair(&w)?;
        let (y2, c) = nfa.qq.unpair(&p)?;
        if y == y2 {
            step2.insert(nfa.triple_orbit(&x, &a, &c)?);
        }
    }

    // Initial orbits absorb everything reachable by spontaneous moves.
    let mut initial = nfa.initial.member_orbits().clone();
    for &m in &closure {
        let tag = nfa.qq.tag(m);
        if nfa.initial.member_orbits().contains(&tag.left_orbit) {
            initial.insert(tag.right_orbit);
        }
    }

    NominalNfa::new(
        nfa.backend,
        nfa.state_names.clone(),
        nfa.states.clone(),
        nfa.labels.clone(),
        initial,
        nfa.accepting.member_orbits().clone(),
        step2,
        BTreeSet::new(),
    )
}

// ---------------------------------------------------------------------------
// Pool-based membership.
// ---------------------------------------------------------------------------

pub(crate) fn fresh_naturals(word: &BTreeSet<DataValue>, count: usize) -> Vec<DataValue> {
    let mut out = Vec::new();
    let mut n = 0u64;
    while out.len() < count {
        let v = DataValue::Nat(n);
        if !word.contains(&v) {
            out.push(v);
        }
        n += 1;
    }
    out
}

fn rational_pool(word_values: &[DataValue], per_gap: usize) -> Vec<DataValue> {
    let mut points: Vec<Rational64> = word_values
        .iter()
        .map(|v| match v {
            DataValue::Rat(r) => *r,
            _ => unreachable!("backend-checked"),
        })
        .collect();
    points.sort_unstable();
    points.dedup();
    let mut pool: Vec<Rational64> = points.clone();
    if points.is_empty() {
        for j in 0..per_gap as i64 {
            pool.push(Rational64::from_integer(j));
        }
    } else {
        let first = points[0];
        let last = points[points.len() - 1];
        for j in 1..=per_gap as i64 {
            pool.push(first - Rational64::from_integer(j));
            pool.push(last + Rational64::from_integer(j));
        }
        for pair in points.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            for j in 1..=per_gap as i64 {
                pool.push(lo + (hi - lo) * Rational64::new(j, per_gap as i64 + 1));
            }
        }
    }
    pool.sort_unstable();
    pool.dedup();
    pool.into_iter().map(DataValue::Rat).collect()
}

fn graph_pool(word_values: &[DataValue], cap: usize) -> Result<Vec<DataValue>> {
    let distinct: Vec<DataValue> = {
        let set: BTreeSet<DataValue> = word_values.iter().cloned().collect();
        set.into_iter().collect()
    };
    let m = distinct.len();
    if m < usize::BITS as usize && (1usize << m) > cap {
        return Err(Error::Validation(format!(
            "adjacency-type pool needs {} witnesses for {m} distinct letters, over the cap of \
             {cap}; raise the pool cap",
            1usize << m
        )));
    }
    let base = Backend::Graph.induced_struct(&distinct)?;
    let mut pool = distinct.clone();
    let mut forbidden: BTreeSet<DataValue> = distinct.iter().cloned().collect();
    for mask in 0..(1usize << m) {
        let mut facts = base.facts().clone();
        for (i, _) in distinct.iter().enumerate() {
            if mask & (1 << i) != 0 {
                facts.insert(Fact::edge(i, m));
            }
        }
        let ext = FinStruct::new(Backend::Graph, m + 1, facts)?;
        let w = Backend::Graph.witness(&ext, &distinct, &forbidden)?;
        forbidden.insert(w.clone());
        pool.push(w);
    }
    Ok(pool)
}

/// All elements of the state set whose valuations draw from the pool.
fn pool_universe(states: &NomSet, pool: &[DataValue]) -> Result<Vec<Element>> {
    let mut out = BTreeSet::new();
    for (i, orbit) in states.orbits().iter().enumerate() {
        let dim = orbit.dimension();
        let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
        while let Some(pick) = stack.pop() {
            if pick.len() == dim {
                let values: Vec<DataValue> =
                    pick.iter().map(|&p| pool[p].clone()).collect();
                if let Ok(induced) = states.backend().induced_struct(&values) {
                    if &induced == orbit.shape() {
                        out.insert(states.element_in_orbit(i, &values)?);
                    }
                }
                continue;
            }
            for p in 0..pool.len() {
                if !pick.contains(&p) {
                    let mut next = pick.clone();
                    next.push(p);
                    stack.push(next);
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// The finite pool of data values over which [`nfa_member`] simulates the
/// subset construction: the word's values plus fresh values the word never
/// mentions.  A single step can both carry a full register file of fresh
/// values and guess a disjoint one, so the equality backend takes twice the
/// maximum carrier many fresh naturals, the order backend takes
/// maximum-carrier-many fresh rationals per gap and per end, and the graph
/// backend one witness per adjacency type over the word's letters.  Fails
/// (with the reason) when the pool cannot be built within `pool_cap`.
pub fn membership_pool(
    nfa: &NominalNfa,
    word: &[Letter],
    pool_cap: Option<usize>,
) -> Result<Vec<DataValue>> {
    let cap = pool_cap.unwrap_or(DEFAULT_POOL_CAP);
    let word_values: Vec<DataValue> = word.iter().map(|l| l.value.clone()).collect();
    let max_dim = nfa
        .states
        .orbits()
        .iter()
        .map(|o| o.dimension())
        .max()
        .unwrap_or(0);
    let pool: Vec<DataValue> = match nfa.backend {
        Backend::Equality => {
            let mut set: BTreeSet<DataValue> = word_values.iter().cloned().collect();
            set.extend(fresh_naturals(&set.clone(), 2 * max_dim));
            set.into_iter().collect()
        }
        Backend::Order => rational_pool(&word_values, max_dim.max(1)),
        Backend::Graph => graph_pool(&word_values, cap)?,
    };
    if pool.len() > cap {
        return Err(Error::Validation(format!(
            "simulation pool of {} values exceeds the cap of {cap}; raise the pool cap",
            pool.len()
        )));
    }
    Ok(pool)
}

/// Decide membership of a word by simulating the subset construction over
/// the finite pool of [`membership_pool`].  The equality backend's pool
/// makes the simulation exact there; a pool failure (graph adjacency types
/// exhausting the cap, or an oversized pool) is reported as
/// [`Membership::Inconclusive`] rather than an error.
pub fn nfa_member(
    nfa: &NominalNfa,
    word: &[Letter],
    pool_cap: Option<usize>,
) -> Result<Membership> {
    for l in word {
        if l.label >= nfa.labels.len() {
            return Err(Error::Validation(format!("label index {} out of range", l.label)));
        }
        if l.value.backend() != nfa.backend {
            return Err(Error::BackendMismatch(format!(
                "letter {} does not belong to the {} backend",
                l.value, nfa.backend
            )));
        }
    }
    let pool = match membership_pool(nfa, word, pool_cap) {
        Ok(pool) => pool,
        Err(e) => return Ok(Membership::Inconclusive(e.to_string())),
    };

    let universe = pool_universe(&nfa.states, &pool)?;
    let close = |set: BTreeSet<Element>| -> Result<BTreeSet<Element>> {
        if nfa.eps.is_empty() {
            return Ok(set);
        }
        let mut closed = set;
        loop {
            let mut grown = Vec::new();
            for x in &closed {
                for y in &universe {
                    if !closed.contains(y) && nfa.has_eps(x, y)? {
                        grown.push(y.clone());
                    }
                }
            }
            if grown.is_empty() {
                return Ok(closed);
            }
            closed.extend(grown);
        }
    };

    let mut current: BTreeSet<Element> = universe
        .iter()
        .filter(|x| nfa.initial.contains(x))
        .cloned()
        .collect();
    current = close(current)?;
    for letter in word {
        let a = nfa.alphabet.element_in_orbit(letter.label, &[letter.value.clone()])?;
        let mut next = BTreeSet::new();
        for x in &current {
            let w = nfa.qa.pair(x, &a)?;
            for y in &universe {
                if next.contains(y) {
                    continue;
                }
                if nfa.trans.contains(&nfa.qaq.pair(&w, y)?.orbit()) {
                    next.insert(y.clone());
                }
            }
        }
        current = close(next)?;
        if current.is_empty() {
            return Ok(Membership::Rejected);
        }
    }
    if current.iter().any(|x| nfa.accepting.contains(x)) {
        Ok(Membership::Accepted)
    } else {
        Ok(Membership::Rejected)
    }
}

// ---------------------------------------------------------------------------
// Text format.
// ---------------------------------------------------------------------------

/// Slot names for overlap fact lists: source registers `s0, s1, …`, the
/// letter `*`, target registers `t0, t1, …`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Slot {
    Source(usize),
    Star,
    Target(usize),
}

fn parse_slot(tok: &str, src_dim: usize, tgt_dim: usize, with_star: bool) -> Result<Slot> {
    if tok == "*" {
        if !with_star {
            return Err(Error::Validation("`*` is not available here".into()));
        }
        return Ok(Slot::Star);
    }
    if let Some(rest) = tok.strip_prefix('s') {
        let i: usize = rest
            .parse()
            .map_err(|_| Error::Validation(format!("bad slot `{tok}`")))?;
        if i >= src_dim {
            return Err(Error::Validation(format!(
                "slot {tok} out of range: source has {src_dim} registers"
            )));
        }
        return Ok(Slot::Source(i));
    }
    if let Some(rest) = tok.strip_prefix('t') {
        let i: usize = rest
            .parse()
            .map_err(|_| Error::Validation(format!("bad slot `{tok}`")))?;
        if i >= tgt_dim {
            return Err(Error::Validation(format!(
                "slot {tok} out of range: target has {tgt_dim} registers"
            )));
        }
        return Ok(Slot::Target(i));
    }
    Err(Error::Validation(format!("bad slot `{tok}` (expected s<i>, t<j> or *)")))
}

fn slot_index(slot: Slot, src_dim: usize, with_star: bool) -> usize {
    match slot {
        Slot::Source(i) => i,
        Slot::Star => src_dim,
        Slot::Target(j) => src_dim + usize::from(with_star) + j,
    }
}

/// One parsed overlap fact.
enum OverlapFact {
    Equal(Slot, Slot),
    Less(Slot, Slot),
    Edge(Slot, Slot),
}

fn parse_overlap_fact(
    tok: &str,
    src_dim: usize,
    tgt_dim: usize,
    with_star: bool,
) -> Result<OverlapFact> {
    let tok = tok.trim();
    let slot = |t: &str| parse_slot(t.trim(), src_dim, tgt_dim, with_star);
    if let Some(inner) = tok.strip_prefix("E(").and_then(|r| r.strip_suffix(')')) {
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| Error::Validation(format!("bad edge fact `{tok}`")))?;
        return Ok(OverlapFact::Edge(slot(a)?, slot(b)?));
    }
    if let Some((a, b)) = tok.split_once('<') {
        return Ok(OverlapFact::Less(slot(a)?, slot(b)?));
    }
    if let Some((a, b)) = tok.split_once('=') {
        return Ok(OverlapFact::Equal(slot(a)?, slot(b)?));
    }
    Err(Error::Validation(format!("bad overlap fact `{tok}`")))
}

/// Resolve an overlap description into a concrete triple (or pair, when
/// `star` is false) of valuations, by realizing the combined structure the
/// facts describe.
struct OverlapSpec {
    src_values: Vec<DataValue>,
    star_value: Option<DataValue>,
    tgt_values: Vec<DataValue>,
}

fn resolve_overlap(
    backend: Backend,
    src_shape: &FinStruct,
    tgt_shape: &FinStruct,
    facts_text: &str,
    with_star: bool,
) -> Result<OverlapSpec> {
    let src_dim = src_shape.size();
    let tgt_dim = tgt_shape.size();
    let slots = src_dim + usize::from(with_star) + tgt_dim;
    let mut facts = Vec::new();
    for tok in crate::symmetry::split_facts(facts_text) {
        facts.push(parse_overlap_fact(&tok, src_dim, tgt_dim, with_star)?);
    }

    // Union-find over slots driven by the equality facts.
    let mut parent: Vec<usize> = (0..slots).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let idx = |s: Slot| slot_index(s, src_dim, with_star);
    for f in &facts {
        if let OverlapFact::Equal(a, b) = f {
            let (ra, rb) = (find(&mut parent, idx(*a)), find(&mut parent, idx(*b)));
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    for i in 0..src_dim {
        for j in (i + 1)..src_dim {
            if find(&mut parent, i) == find(&mut parent, j) {
                return Err(Error::Validation(format!(
                    "s{i} and s{j} are registers of one state and cannot be equal"
                )));
            }
        }
    }
    for i in 0..tgt_dim {
        for j in (i + 1)..tgt_dim {
            let (a, b) = (
                idx(Slot::Target(i)),
                idx(Slot::Target(j)),
            );
            if find(&mut parent, a) == find(&mut parent, b) {
                return Err(Error::Validation(format!(
                    "t{i} and t{j} are registers of one state and cannot be equal"
                )));
            }
        }
    }

    // Classes in first-seen order of their least slot.
    let mut class_of = vec![usize::MAX; slots];
    let mut class_count = 0;
    for i in 0..slots {
        let r = find(&mut parent, i);
        if class_of[r] == usize::MAX {
            class_of[r] = class_count;
            class_count += 1;
        }
        class_of[i] = class_of[r];
    }

    // Combined structure: both shapes plus the cross facts.
    let mut combined: BTreeSet<Fact> = BTreeSet::new();
    let add = |f: Fact, combined: &mut BTreeSet<Fact>| -> Result<()> {
        match f {
            Fact::Lt(i, j) if i == j => {
                Err(Error::Validation("a slot cannot be below itself".into()))
            }
            Fact::Edge(i, j) if i == j => {
                Err(Error::Validation("a slot cannot be adjacent to itself".into()))
            }
            f => {
                combined.insert(f);
                Ok(())
            }
        }
    };
    for f in src_shape.facts() {
        match *f {
            Fact::Lt(i, j) => add(Fact::Lt(class_of[i], class_of[j]), &mut combined)?,
            Fact::Edge(i, j) => {
                add(Fact::edge(class_of[i], class_of[j]), &mut combined)?
            }
        }
    }
    for f in tgt_shape.facts() {
        let t = |j: usize| class_of[idx(Slot::Target(j))];
        match *f {
            Fact::Lt(i, j) => add(Fact::Lt(t(i), t(j)), &mut combined)?,
            Fact::Edge(i, j) => add(Fact::edge(t(i), t(j)), &mut combined)?,
        }
    }
    for f in &facts {
        match f {
            OverlapFact::Equal(..) => {}
            OverlapFact::Less(a, b) => {
                if backend != Backend::Order {
                    return Err(Error::Validation(
                        "order facts need the order backend".into(),
                    ));
                }
                add(Fact::Lt(class_of[idx(*a)], class_of[idx(*b)]), &mut combined)?;
            }
            OverlapFact::Edge(a, b) => {
                if backend != Backend::Graph {
                    return Err(Error::Validation(
                        "edge facts need the graph backend".into(),
                    ));
                }
                add(Fact::edge(class_of[idx(*a)], class_of[idx(*b)]), &mut combined)?;
            }
        }
    }
    let combined = if backend == Backend::Order {
        complete_order(class_count, combined)?
    } else {
        combined
    };
    let combined = FinStruct::new(backend, class_count, combined)?;
    let values = realize_struct(&combined, &BTreeSet::new())?;

    let value_of = |s: Slot| values[class_of[idx(s)]].clone();
    Ok(OverlapSpec {
        src_values: (0..src_dim).map(|i| value_of(Slot::Source(i))).collect(),
        star_value: with_star.then(|| value_of(Slot::Star)),
        tgt_values: (0..tgt_dim).map(|j| value_of(Slot::Target(j))).collect(),
    })
}

/// Parse the nondeterministic-automaton text format:
///
/// ```text
/// symmetry equality
/// nfa
/// alphabet atom
/// state q0 registers 0
/// state q1 registers 1
/// initial q0
/// accept q1
/// trans (q0, ., q0) overlap{}
/// trans (q0, ., q1) overlap{t0=*}
/// eps (q0, q1) overlap{s0=t0}
/// ```
///
/// An overlap lists how the source registers (`s0…`), the letter (`*`) and
/// the target registers (`t0…`) relate; unmentioned pairs are unequal (and
/// non-adjacent under the graph backend), and the order backend requires
/// enough facts to settle every comparison.  Finite labels replace
/// `alphabet atom` with `labels a b …` and name the middle field of each
/// `trans` head.
pub fn parse_nfa(text: &str) -> Result<NominalNfa> {
    let mut lines: Vec<(usize, String)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l).to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::parse(0, 0, "empty input"));
    }
    let backend = {
        let (lineno, line) = lines.remove(0);
        let toks = tokenize_line(&line, lineno)?;
        if toks.len() != 2 || toks[0] != "symmetry" {
            return Err(Error::parse(lineno, 1, "expected `symmetry NAME`"));
        }
        Backend::parse(&toks[1]).map_err(|e| Error::parse(lineno, 1, format!("{e}")))?
    };
    {
        let (lineno, line) = lines.remove(0);
        if line != "nfa" {
            return Err(Error::parse(lineno, 1, format!("expected `nfa`, got `{line}`")));
        }
    }
    let labels = {
        let (lineno, line) = lines.remove(0);
        let toks = tokenize_line(&line, lineno)?;
        match toks[0].as_str() {
            "alphabet" if toks.len() == 2 && toks[1] == "atom" => vec![".".to_string()],
            "labels" if toks.len() >= 2 => toks[1..].to_vec(),
            _ => {
                return Err(Error::parse(
                    lineno,
                    1,
                    "expected `alphabet atom` or `labels NAME...`",
                ))
            }
        }
    };

    let mut states = Vec::new();
    let mut initial_names: Vec<(usize, String)> = Vec::new();
    let mut accept_names: Vec<(usize, String)> = Vec::new();
    let mut raw_rel: Vec<(usize, String, bool)> = Vec::new(); // (line, text, is_eps)
    for (lineno, line) in lines {
        let toks = tokenize_line(&line, lineno)?;
        match toks[0].as_str() {
            "state" => states.push(parse_state_line(backend, &toks, lineno)?),
            "initial" => {
                initial_names.extend(toks[1..].iter().map(|n| (lineno, n.clone())))
            }
            "accept" => {
                accept_names.extend(toks[1..].iter().map(|n| (lineno, n.clone())))
            }
            "trans" => raw_rel.push((lineno, line.clone(), false)),
            "eps" => raw_rel.push((lineno, line.clone(), true)),
            other => {
                return Err(Error::parse(lineno, 1, format!("unexpected directive `{other}`")));
            }
        }
    }

    let state_names: Vec<String> = states.iter().map(|s| s.name.clone()).collect();
    let orbits = states.iter().map(|s| s.orbit.clone()).collect();
    let state_set = NomSet::new(backend, orbits)?;
    let lookup_names = state_names.clone();
    let state_index = move |name: &str, lineno: usize| {
        lookup_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::parse(lineno, 1, format!("unknown state `{name}`")))
    };
    let mut initial = BTreeSet::new();
    for (lineno, n) in initial_names {
        initial.insert(state_index(&n, lineno)?);
    }
    let mut accepting = BTreeSet::new();
    for (lineno, n) in accept_names {
        accepting.insert(state_index(&n, lineno)?);
    }

    let mut nfa = NominalNfa::new(
        backend,
        state_names,
        state_set,
        labels,
        initial,
        accepting,
        BTreeSet::new(),
        BTreeSet::new(),
    )?;

    let mut trans = BTreeSet::new();
    let mut eps = BTreeSet::new();
    for (lineno, line, is_eps) in raw_rel {
        let keyword_len = if is_eps { "eps" } else { "trans" }.len();
        let rest = line[keyword_len..].trim();
        let close = rest
            .find(')')
            .ok_or_else(|| Error::parse(lineno, 1, "missing `)` in head"))?;
        let head = rest[..close]
            .strip_prefix('(')
            .ok_or_else(|| Error::parse(lineno, 1, "head must start with `(`"))?;
        let parts: Vec<&str> = head.split(',').map(str::trim).collect();
        let expected = if is_eps { 2 } else { 3 };
        if parts.len() != expected {
            return Err(Error::parse(
                lineno,
                1,
                format!("head needs {expected} comma-separated fields"),
            ));
        }
        let tail = rest[close + 1..].trim();
        let overlap = tail
            .strip_prefix("overlap{")
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| Error::parse(lineno, 1, "expected `overlap{...}`"))?;
        let src = state_index(parts[0], lineno)?;
        let tgt = state_index(parts[expected - 1], lineno)?;
        let src_shape = nfa.states.orbits()[src].shape().clone();
        let tgt_shape = nfa.states.orbits()[tgt].shape().clone();
        let spec =
            resolve_overlap(backend, &src_shape, &tgt_shape, overlap, !is_eps)
                .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?;
        let x = nfa
            .states
            .element_in_orbit(src, &spec.src_values)
            .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?;
        let y = nfa
            .states
            .element_in_orbit(tgt, &spec.tgt_values)
            .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?;
        if is_eps {
            let m = nfa.pair_orbit(&x, &y)?;
            if !eps.insert(m) {
                return Err(Error::parse(lineno, 1, "duplicate spontaneous-move orbit"));
            }
        } else {
            let label = nfa.label_index(parts[1]).ok_or_else(|| {
                Error::parse(lineno, 1, format!("unknown label `{}`", parts[1]))
            })?;
            let a = nfa
                .alphabet
                .element_in_orbit(label, &[spec.star_value.clone().expect("with star")])
                .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?;
            let m = nfa.triple_orbit(&x, &a, &y)?;
            if !trans.insert(m) {
                return Err(Error::parse(lineno, 1, "duplicate transition orbit"));
            }
        }
    }
    nfa.trans = trans;
    nfa.eps = eps;
    Ok(nfa)
}

/// Render the relations among concrete values as overlap facts.
fn overlap_facts(
    backend: Backend,
    src_values: &[DataValue],
    star_value: Option<&DataValue>,
    tgt_values: &[DataValue],
) -> String {
    let mut slots: Vec<(String, DataValue)> = Vec::new();
    for (i, v) in src_values.iter().enumerate() {
        slots.push((format!("s{i}"), v.clone()));
    }
    if let Some(v) = star_value {
        slots.push(("*".to_string(), v.clone()));
    }
    for (j, v) in tgt_values.iter().enumerate() {
        slots.push((format!("t{j}"), v.clone()));
    }
    let mut parts: Vec<String> = Vec::new();
    // Equalities: link each later slot to the first slot holding its value.
    for i in 0..slots.len() {
        for j in (i + 1)..slots.len() {
            if slots[i].1 == slots[j].1 {
                if !slots[..i].iter().any(|(_, v)| *v == slots[i].1) {
                    parts.push(format!("{}={}", slots[i].0, slots[j].0));
                }
            }
        }
    }
    // Cross relations between distinct values, skipping pairs inside one
    // state (their relation is fixed by the state shape).
    let is_src = |name: &str| name.starts_with('s');
    let is_tgt = |name: &str| name.starts_with('t');
    for i in 0..slots.len() {
        for j in (i + 1)..slots.len() {
            let (ni, vi) = &slots[i];
            let (nj, vj) = &slots[j];
            if vi == vj || (is_src(ni) && is_src(nj)) || (is_tgt(ni) && is_tgt(nj)) {
                continue;
            }
            match backend {
                Backend::Equality => {}
                Backend::Order => {
                    if vi < vj {
                        parts.push(format!("{ni}<{nj}"));
                    } else {
                        parts.push(format!("{nj}<{ni}"));
                    }
                }
                Backend::Graph => {
                    let adjacent = match (vi, vj) {
                        (DataValue::Vertex(a), DataValue::Vertex(b)) => {
                            crate::symmetry::rado_adjacent(a, b)
                        }
                        _ => unreachable!("backend-checked"),
                    };
                    if adjacent {
                        parts.push(format!("E({ni},{nj})"));
                    }
                }
            }
        }
    }
    parts.join("; ")
}

/// Serialize an automaton in the text format; `parse_nfa` reads it back
/// identically.
pub fn write_nfa(nfa: &NominalNfa) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "symmetry {}", nfa.backend.name());
    let _ = writeln!(out, "nfa");
    if nfa.labels == ["."] {
        let _ = writeln!(out, "alphabet atom");
    } else {
        let _ = writeln!(out, "labels {}", nfa.labels.join(" "));
    }
    for (name, orbit) in nfa.state_names.iter().zip(nfa.states.orbits()) {
        let _ = write!(out, "state {name} registers {}", orbit.dimension());
        let facts = orbit.shape().display_facts();
        if !facts.is_empty() {
            let _ = write!(out, " rel \"{}\"", facts.join("; "));
        }
        if orbit.sym().order() > 1 {
            let gens: Vec<String> = orbit
                .sym()
                .iter()
                .filter(|p| !p.is_identity())
                .map(|p| p.to_string())
                .collect();
            let _ = write!(out, " sym \"{}\"", gens.join(" "));
        }
        let _ = writeln!(out);
    }
    if !nfa.initial.member_orbits().is_empty() {
        let names: Vec<&str> = nfa
            .initial
            .member_orbits()
            .iter()
            .map(|&i| nfa.state_names[i].as_str())
            .collect();
        let _ = writeln!(out, "initial {}", names.join(" "));
    }
    if !nfa.accepting.member_orbits().is_empty() {
        let names: Vec<&str> = nfa
            .accepting
            .member_orbits()
            .iter()
            .map(|&i| nfa.state_names[i].as_str())
            .collect();
        let _ = writeln!(out, "accept {}", names.join(" "));
    }
    for &m in &nfa.trans {
        let z = nfa.qaq.set().realize(m)?;
        let (w, y) = nfa.qaq.unpair(&z)?;
        let (x, a) = nfa.qa.unpair(&w)?;
        let facts = overlap_facts(
            nfa.backend,
            x.valuation(),
            Some(&a.valuation()[0]),
            y.valuation(),
        );
        let _ = writeln!(
            out,
            "trans ({}, {}, {}) overlap{{{facts}}}",
            nfa.state_names[x.orbit()],
            nfa.labels[a.orbit()],
            nfa.state_names[y.orbit()],
        );
    }
    for &m in &nfa.eps {
        let z = nfa.qq.set().realize(m)?;
        let (x, y) = nfa.qq.unpair(&z)?;
        let facts = overlap_facts(nfa.backend, x.valuation(), None, y.valuation());
        let _ = writeln!(
            out,
            "eps ({}, {}) overlap{{{facts}}}",
            nfa.state_names[x.orbit()],
            nfa.state_names[y.orbit()],
        );
    }
    Ok(out)
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn letters(ns: &[u64]) -> Vec<Letter> {
        ns.iter().map(|&n| Letter { label: 0, value: DataValue::Nat(n) }).collect()
    }

    fn member(nfa: &NominalNfa, word: &[Letter]) -> Membership {
        nfa_member(nfa, word, None).unwrap()
    }

    /// Accepts words in which some value occurs twice.
    fn repeat_nfa() -> NominalNfa {
        parse_nfa(
            "symmetry equality\n\
             nfa\n\
             alphabet atom\n\
             state wait registers 0\n\
             state hold registers 1\n\
             state done registers 0\n\
             initial wait\n\
             accept done\n\
             trans (wait, ., wait) overlap{}\n\
             trans (wait, ., hold) overlap{t0=*}\n\
             trans (hold, ., hold) overlap{s0=t0}\n\
             trans (hold, ., done) overlap{s0=*}\n\
             trans (done, ., done) overlap{}\n",
        )
        .unwrap()
    }

    #[test]
    fn membership_simulates_guessing() {
        let nfa = repeat_nfa();
        assert_eq!(member(&nfa, &letters(&[1, 2, 1])), Membership::Accepted);
        assert_eq!(member(&nfa, &letters(&[1, 1])), Membership::Accepted);
        assert_eq!(member(&nfa, &letters(&[5, 2, 7, 2, 9])), Membership::Accepted);
        assert_eq!(member(&nfa, &letters(&[1, 2, 3])), Membership::Rejected);
        assert_eq!(member(&nfa, &letters(&[1])), Membership::Rejected);
        assert_eq!(member(&nfa, &letters(&[])), Membership::Rejected);
    }

    #[test]
    fn membership_handles_fresh_guesses() {
        // Guess a value never seen yet, accept when it shows up later: the
        // language of words with a letter different from the first.
        let nfa = parse_nfa(
            "symmetry equality\n\
             nfa\n\
             alphabet atom\n\
             state start registers 0\n\
             state guess registers 1\n\
             state done registers 0\n\
             initial start\n\
             accept done\n\
             trans (start, ., guess) overlap{}\n\
             trans (guess, ., guess) overlap{s0=t0}\n\
             trans (guess, ., done) overlap{s0=*}\n\
             trans (done, ., done) overlap{}\n",
        )
        .unwrap();
        assert_eq!(member(&nfa, &letters(&[1, 2])), Membership::Accepted);
        assert_eq!(member(&nfa, &letters(&[1, 1, 1])), Membership::Rejected);
        assert_eq!(member(&nfa, &letters(&[1, 1, 2])), Membership::Accepted);
        assert_eq!(member(&nfa, &letters(&[1])), Membership::Rejected);
    }

    #[test]
    fn order_membership_uses_gap_values() {
        // Store the first letter, accept when a later letter drops below it.
        let nfa = parse_nfa(
            "symmetry order\n\
             nfa\n\
             alphabet atom\n\
             state start registers 0\n\
             state hold registers 1\n\
             state done registers 0\n\
             initial start\n\
             accept done\n\
             trans (start, ., hold) overlap{t0=*}\n\
             trans (hold, ., hold) overlap{s0=t0; s0<*}\n\
             trans (hold, ., hold) overlap{s0=t0; *<s0}\n\
             trans (hold, ., hold) overlap{s0=t0; s0=*}\n\
             trans (hold, ., done) overlap{*<s0}\n\
             trans (done, ., done) overlap{}\n",
        )
        .unwrap();
        let rat = |t: &str| Letter {
            label: 0,
            value: DataValue::parse(Backend::Order, t).unwrap(),
        };
        assert_eq!(member(&nfa, &[rat("2"), rat("3"), rat("1")]), Membership::Accepted);
        assert_eq!(member(&nfa, &[rat("2"), rat("1")]), Membership::Accepted);
        assert_eq!(member(&nfa, &[rat("2"), rat("3"), rat("4")]), Membership::Rejected);
        assert_eq!(member(&nfa, &[rat("2")]), Membership::Rejected);
    }

    #[test]
    fn graph_membership_and_pool_cap() {
        // Accept words containing an adjacent pair (earlier letter stored).
        let nfa = parse_nfa(
            "symmetry graph\n\
             nfa\n\
             alphabet atom\n\
             state scan registers 0\n\
             state hold registers 1\n\
             state done registers 0\n\
             initial scan\n\
             accept done\n\
             trans (scan, ., scan) overlap{}\n\
             trans (scan, ., hold) overlap{t0=*}\n\
             trans (hold, ., hold) overlap{s0=t0}\n\
             trans (hold, ., hold) overlap{s0=t0; E(s0,*)}\n\
             trans (hold, ., done) overlap{E(s0,*)}\n\
             trans (done, ., done) overlap{}\n",
        )
        .unwrap();
        let g = |t: &str| Letter {
            label: 0,
            value: DataValue::parse(Backend::Graph, t).unwrap(),
        };
        assert_eq!(member(&nfa, &[g("g0"), g("g1")]), Membership::Accepted);
        assert_eq!(member(&nfa, &[g("g0"), g("g2")]), Membership::Rejected);
        assert_eq!(member(&nfa, &[g("g0"), g("g2"), g("g1")]), Membership::Accepted);
        // A tiny cap forces an inconclusive verdict.
        let word = [g("g0"), g("g2"), g("g4")];
        match nfa_member(&nfa, &word, Some(4)).unwrap() {
            Membership::Inconclusive(reason) => {
                assert!(reason.contains("cap"), "{reason}");
            }
            other => panic!("expected inconclusive, got {other:?}"),
        }
    }

    #[test]
    fn labeled_alphabets_separate_transitions() {
        // An `a`-letter must be repeated by a `b`-letter.
        let nfa = parse_nfa(
            "symmetry equality\n\
             nfa\n\
             labels a b\n\
             state start registers 0\n\
             state hold registers 1\n\
             state done registers 0\n\
             initial start\n\
             accept done\n\
             trans (start, a, hold) overlap{t0=*}\n\
             trans (hold, b, done) overlap{s0=*}\n",
        )
        .unwrap();
        let a = |n: u64| Letter { label: 0, value: DataValue::Nat(n) };
        let b = |n: u64| Letter { label: 1, value: DataValue::Nat(n) };
        assert_eq!(member(&nfa, &[a(5), b(5)]), Membership::Accepted);
        assert_eq!(member(&nfa, &[a(5), b(6)]), Membership::Rejected);
        assert_eq!(member(&nfa, &[b(5), a(5)]), Membership::Rejected);
        assert_eq!(member(&nfa, &[a(5), a(5)]), Membership::Rejected);
    }

    #[test]
    fn union_accepts_either_language() {
        let repeat = repeat_nfa();
        // Words whose first letter repeats immediately.
        let stutter = parse_nfa(
            "symmetry equality\n\
             nfa\n\
             alphabet atom\n\
             state s0 registers 0\n\
             state s1 registers 1\n\
             state ok registers 0\n\
             initial s0\n\
             accept ok\n\
             trans (s0, ., s1) overlap{t0=*}\n\
             trans (s1, ., ok) overlap{s0=*}\n",
        )
        .unwrap();
        let u = nfa_union(&repeat, &stutter).unwrap();
        assert_eq!(member(&u, &letters(&[4, 4])), Membership::Accepted);
        assert_eq!(member(&u, &letters(&[1, 2, 1])), Membership::Accepted);
        assert_eq!(member(&u, &letters(&[1, 2, 3])), Membership::Rejected);
        // Union states keep both behaviors; names stay unique.
        let mut names = u.state_names().to_vec();
        names.dedup();
        assert_eq!(names.len(), u.states().orbit_count());
    }

    #[test]
    fn concat_joins_languages_through_spontaneous_moves() {
        // {xx} concatenated with {yy}: words xxyy with x, y arbitrary.
        let stutter = parse_nfa(
            "symmetry equality\n\
             nfa\n\
             alphabet atom\n\
             state s0 registers 0\n\
             state s1 registers 1\n\
             state ok registers 0\n\
             initial s0\n\
             accept ok\n\
             trans (s0, ., s1) overlap{t0=*}\n\
             trans (s1, ., ok) overlap{s0=*}\n",
        )
        .unwrap();
        let cat = nfa_concat(&stutter, &stutter).unwrap();
        assert!(!cat.eps_orbits().is_empty());
        assert_eq!(member(&cat, &letters(&[3, 3, 8, 8])), Membership::Accepted);
        assert_eq!(member(&cat, &letters(&[3, 3, 3, 3])), Membership::Accepted);
        assert_eq!(member(&cat, &letters(&[3, 3, 8, 9])), Membership::Rejected);
        assert_eq!(member(&cat, &letters(&[3, 3])), Membership::Rejected);
        // Eliminating spontaneous moves preserves the language.
        let flat = eps_eliminate(&cat).unwrap();
        assert!(flat.eps_orbits().is_empty());
        for word in [
            letters(&[3, 3, 8, 8]),
            letters(&[3, 3, 3, 3]),
            letters(&[3, 3, 8, 9]),
            letters(&[3, 3]),
            letters(&[]),
        ] {
            assert_eq!(member(&flat, &word), member(&cat, &word));
        }
    }

    #[test]
    fn eps_elimination_handles_initial_closures() {
        // A spontaneous move from the initial state to an accepting state:
        // the empty word joins the language.
        let nfa = parse_nfa(
            "symmetry equality\n\
             nfa\n\
             alphabet atom\n\
             state s0 registers 0\n\
             state ok registers 0\n\
             initial s0\n\
             accept ok\n\
             trans (s0, ., s0) overlap{}\n\
             eps (s0, ok) overlap{}\n",
        )
        .unwrap();
        assert_eq!(member(&nfa, &letters(&[])), Membership::Accepted);
        assert_eq!(member(&nfa, &letters(&[7])), Membership::Accepted);
        let flat = eps_eliminate(&nfa).unwrap();
        assert!(flat.eps_orbits().is_empty());
        assert_eq!(member(&flat, &letters(&[])), Membership::Accepted);
        assert_eq!(member(&flat, &letters(&[7])), Membership::Accepted);
        assert!(flat.initial().member_orbits().contains(&1));
    }

    #[test]
    fn text_format_round_trips() {
        for nfa in [repeat_nfa()] {
            let text = write_nfa(&nfa).unwrap();
            let back = parse_nfa(&text).unwrap();
            assert_eq!(back, nfa, "round trip failed for:\n{text}");
        }
        // A graph automaton exercises edge facts in overlaps.
        let graph = parse_nfa(
            "symmetry graph\n\
             nfa\n\
             alphabet atom\n\
             state scan registers 0\n\
             state hold registers 1\n\
             initial scan\n\
             accept hold\n\
             trans (scan, ., hold) overlap{t0=*}\n\
             trans (hold, ., hold) overlap{s0=t0; E(s0,*)}\n",
        )
        .unwrap();
        assert_eq!(parse_nfa(&write_nfa(&graph).unwrap()).unwrap(), graph);
        // An order automaton with spontaneous moves.
        let order = parse_nfa(
            "symmetry order\n\
             nfa\n\
             alphabet atom\n\
             state lo registers 1\n\
             state hi registers 1\n\
             state s0 registers 0\n\
             initial s0\n\
             accept hi\n\
             trans (s0, ., lo) overlap{t0=*}\n\
             eps (lo, hi) overlap{s0<t0}\n",
        )
        .unwrap();
        assert_eq!(parse_nfa(&write_nfa(&order).unwrap()).unwrap(), order);
    }

    #[test]
    fn overlaps_reject_inconsistent_descriptions() {
        // Registers of one state cannot be identified.
        let err = parse_nfa(
            "symmetry equality\n\
             nfa\n\
             alphabet atom\n\
             state q registers 2\n\
             state r registers 0\n\
             initial r\n\
             trans (q, ., r) overlap{s0=s1}\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("cannot be equal"), "{err}");
        // Order overlaps must determine every comparison.
        let err = parse_nfa(
            "symmetry order\n\
             nfa\n\
             alphabet atom\n\
             state q registers 1\n\
             state r registers 1\n\
             initial q\n\
             trans (q, ., r) overlap{t0=*}\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("order"), "{err}");
    }
}
