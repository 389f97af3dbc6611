//! Brute-force semantics over explicit finite value domains — the ground
//! truth the symbolic algorithms are checked against.
//!
//! Restricting an automaton to a [`FiniteDomain`] yields an ordinary
//! [`ClassicalAutomaton`] with explicitly enumerated states, whose language
//! over words drawn from the domain can be computed by plain subset
//! simulation and exhaustive enumeration — no orbits, no canonical forms,
//! no pools.  Deterministic automata restrict faithfully at any domain
//! size: their register contents only ever hold word values.  For
//! nondeterministic automata and register machines, the restriction
//! quantifies guesses over the domain instead of the whole value universe,
//! so the restricted language can fall short of the full one when the
//! domain leaves no room for values a run must keep away from the word;
//! comparisons pick domains with enough spare room for the fixture at hand.
//!
//! [`orbit_count_bruteforce`] independently counts the orbits of a product
//! of two orbit-finite sets: it enumerates concrete element pairs over the
//! domain and groups them by their joint relation pattern (which values
//! coincide, and how they compare or connect), minimized over the local
//! symmetries.  Two pairs over a large enough domain lie in one orbit
//! exactly when their patterns match, so the count of distinct patterns is
//! the orbit count — computed without ever building the product set.

use std::collections::BTreeSet;

use itertools::Itertools;

use crate::automata::{FraisseDfa, Letter, NominalNfa};
use crate::fma::{fma_step, Fma, FmaConfig};
use crate::nomset::{Element, NomSet};
use crate::symmetry::{rado_adjacent, Backend, DataValue};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Finite domains.
// ---------------------------------------------------------------------------

/// An explicit finite list of data values of one backend, the playground
/// for brute-force checks.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FiniteDomain {
    backend: Backend,
    values: Vec<DataValue>,
}

impl FiniteDomain {
    /// Builds a domain, checking the values are distinct and belong to the
    /// backend.
    pub fn new(backend: Backend, values: Vec<DataValue>) -> Result<FiniteDomain> {
        let mut seen = BTreeSet::new();
        for v in &values {
            if v.backend() != backend {
                return Err(Error::BackendMismatch(format!(
                    "domain value {v} does not belong to the {backend} backend"
                )));
            }
            if !seen.insert(v.clone()) {
                return Err(Error::Validation(format!("duplicate domain value {v}")));
            }
        }
        Ok(FiniteDomain { backend, values })
    }

    /// The naturals `0..n` (equality backend).
    pub fn naturals(n: usize) -> FiniteDomain {
        FiniteDomain {
            backend: Backend::Equality,
            values: (0..n as u64).map(DataValue::Nat).collect(),
        }
    }

    /// The integers `0..n` as rationals (order backend).
    pub fn rationals(n: usize) -> FiniteDomain {
        FiniteDomain {
            backend: Backend::Order,
            values: (0..n as i64)
                .map(|i| DataValue::Rat(num_rational::Rational64::from_integer(i)))
                .collect(),
        }
    }

    /// The graph vertices `g0..g{n-1}` of the bit-rule encoding.  Six
    /// vertices (`g0..g5`) already exhibit equal, adjacent and non-adjacent
    /// extensions in every direction, which is why they are the default
    /// domain for graph-backend checks.
    pub fn vertices(n: usize) -> FiniteDomain {
        FiniteDomain {
            backend: Backend::Graph,
            values: (0..n as u64)
                .map(|i| DataValue::Vertex(num_bigint::BigUint::from(i)))
                .collect(),
        }
    }

    /// `n` default values of the given backend.
    pub fn of(backend: Backend, n: usize) -> FiniteDomain {
        match backend {
            Backend::Equality => FiniteDomain::naturals(n),
            Backend::Order => FiniteDomain::rationals(n),
            Backend::Graph => FiniteDomain::vertices(n),
        }
    }

    /// Parses a comma-separated list of value literals, e.g. `0,1,2` or
    /// `1/2,3,7/2` or `g0,g1,g5`.
    pub fn parse(backend: Backend, text: &str) -> Result<FiniteDomain> {
        let values = text
            .split(',')
            .map(|t| DataValue::parse(backend, t.trim()))
            .collect::<Result<Vec<_>>>()?;
        FiniteDomain::new(backend, values)
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn values(&self) -> &[DataValue] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Classical automata.
// ---------------------------------------------------------------------------

/// A plain finite automaton: explicitly listed states, a finite alphabet of
/// letters, a transition relation and optional spontaneous moves.  This is
/// what restriction to a finite domain produces.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ClassicalAutomaton {
    state_names: Vec<String>,
    alphabet: Vec<Letter>,
    initial: BTreeSet<usize>,
    accepting: BTreeSet<usize>,
    trans: BTreeSet<(usize, usize, usize)>,
    eps: BTreeSet<(usize, usize)>,
}

impl ClassicalAutomaton {
    /// Builds and validates an automaton; transitions are
    /// `(state, alphabet index, state)` triples.
    pub fn new(
        state_names: Vec<String>,
        alphabet: Vec<Letter>,
        initial: BTreeSet<usize>,
        accepting: BTreeSet<usize>,
        trans: BTreeSet<(usize, usize, usize)>,
        eps: BTreeSet<(usize, usize)>,
    ) -> Result<ClassicalAutomaton> {
        let n = state_names.len();
        for &s in initial.iter().chain(accepting.iter()) {
            if s >= n {
                return Err(Error::Validation(format!("state index {s} out of range 0..{n}")));
            }
        }
        for &(s, l, t) in &trans {
            if s >= n || t >= n {
                return Err(Error::Validation(format!(
                    "transition endpoint out of range 0..{n}"
                )));
            }
            if l >= alphabet.len() {
                return Err(Error::Validation(format!(
                    "letter index {l} out of range 0..{}",
                    alphabet.len()
                )));
            }
        }
        for &(s, t) in &eps {
            if s >= n || t >= n {
                return Err(Error::Validation(format!(
                    "spontaneous-move endpoint out of range 0..{n}"
                )));
            }
        }
        Ok(ClassicalAutomaton { state_names, alphabet, initial, accepting, trans, eps })
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn alphabet(&self) -> &[Letter] {
        &self.alphabet
    }

    pub fn initial(&self) -> &BTreeSet<usize> {
        &self.initial
    }

    pub fn accepting(&self) -> &BTreeSet<usize> {
        &self.accepting
    }

    pub fn transitions(&self) -> &BTreeSet<(usize, usize, usize)> {
        &self.trans
    }

    /// True when the automaton has a single initial state, no spontaneous
    /// moves, and exactly one successor per state and letter.
    pub fn is_deterministic(&self) -> bool {
        self.initial.len() == 1
            && self.eps.is_empty()
            && (0..self.state_names.len()).all(|s| {
                (0..self.alphabet.len()).all(|l| {
                    self.trans
                        .range((s, l, 0)..=(s, l, usize::MAX))
                        .count()
                        == 1
                })
            })
    }

    fn closure(&self, mut set: BTreeSet<usize>) -> BTreeSet<usize> {
        if self.eps.is_empty() {
            return set;
        }
        loop {
            let grown: Vec<usize> = self
                .eps
                .iter()
                .filter(|(s, t)| set.contains(s) && !set.contains(t))
                .map(|&(_, t)| t)
                .collect();
            if grown.is_empty() {
                return set;
            }
            set.extend(grown);
        }
    }

    fn step(&self, current: &BTreeSet<usize>, letter_idx: usize) -> BTreeSet<usize> {
        let mut next = BTreeSet::new();
        for &s in current {
            for &(_, _, t) in self.trans.range((s, letter_idx, 0)..=(s, letter_idx, usize::MAX)) {
                next.insert(t);
            }
        }
        self.closure(next)
    }

    /// Decides a word by subset simulation.  Every letter must occur in the
    /// automaton's alphabet.
    pub fn accepts(&self, word: &[Letter]) -> Result<bool> {
        let mut current = self.closure(self.initial.clone());
        for letter in word {
            let li = self.alphabet.iter().position(|l| l == letter).ok_or_else(|| {
                Error::Validation(format!(
                    "letter (label {}, value {}) is outside the restricted alphabet",
                    letter.label, letter.value
                ))
            })?;
            current = self.step(&current, li);
        }
        Ok(current.iter().any(|s| self.accepting.contains(s)))
    }

    /// All accepted words of length at most `max_len`, by exhaustive
    /// enumeration over the alphabet.  Monotone in both the length bound
    /// and the underlying domain.
    pub fn language_upto(&self, max_len: usize) -> BTreeSet<Vec<Letter>> {
        let mut out = BTreeSet::new();
        let accepts = |set: &BTreeSet<usize>| set.iter().any(|s| self.accepting.contains(s));
        let start = self.closure(self.initial.clone());
        if accepts(&start) {
            out.insert(Vec::new());
        }
        let mut frontier = vec![(Vec::new(), start)];
        for _ in 0..max_len {
            let mut next_frontier = Vec::new();
            for (word, states) in &frontier {
                for (li, letter) in self.alphabet.iter().enumerate() {
                    let stepped = self.step(states, li);
                    if stepped.is_empty() {
                        continue;
                    }
                    let mut extended = word.clone();
                    extended.push(letter.clone());
                    if accepts(&stepped) {
                        out.insert(extended.clone());
                    }
                    next_frontier.push((extended, stepped));
                }
            }
            frontier = next_frontier;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Restrictions.
// ---------------------------------------------------------------------------

fn render_values(values: &[DataValue]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Restricts a deterministic register automaton to a finite domain: one
/// classical state per configuration whose registers hold domain values,
/// stepped concretely.  Register contents always come from the word, so the
/// restricted language is exactly the automaton's language intersected with
/// words over the domain.
pub fn restrict_dfa(d: &FraisseDfa, dom: &FiniteDomain) -> Result<ClassicalAutomaton> {
    if d.backend() != dom.backend() {
        return Err(Error::BackendMismatch(format!(
            "restricting a {} automaton to a {} domain",
            d.backend(),
            dom.backend()
        )));
    }
    let mut configs = BTreeSet::new();
    for (q, state) in d.states().iter().enumerate() {
        let k = state.orbit.dimension();
        if k > dom.len() {
            continue;
        }
        if k == 0 {
            configs.insert(d.config(q, &[])?);
            continue;
        }
        for tuple in dom.values().iter().cloned().permutations(k) {
            let Ok(induced) = d.backend().induced_struct(&tuple) else { continue };
            if &induced == state.orbit.shape() {
                configs.insert(d.config(q, &tuple)?);
            }
        }
    }
    let configs: Vec<_> = configs.into_iter().collect();
    let index_of = |c: &crate::automata::Config| -> Result<usize> {
        configs
            .binary_search(c)
            .map_err(|_| Error::Validation("stepping left the restricted configuration space".into()))
    };

    let state_names = configs
        .iter()
        .map(|c| format!("{}[{}]", d.states()[c.state].name, render_values(&c.valuation)))
        .collect();
    let alphabet: Vec<Letter> =
        dom.values().iter().map(|v| Letter { label: 0, value: v.clone() }).collect();
    let initial = BTreeSet::from([index_of(&d.initial_config())?]);
    let accepting = configs
        .iter()
        .enumerate()
        .filter(|(_, c)| d.is_accepting(c.state))
        .map(|(i, _)| i)
        .collect();
    let mut trans = BTreeSet::new();
    for (ci, config) in configs.iter().enumerate() {
        for (li, letter) in dom.values().iter().enumerate() {
            let target = d.step(config, letter)?;
            trans.insert((ci, li, index_of(&target)?));
        }
    }
    ClassicalAutomaton::new(state_names, alphabet, initial, accepting, trans, BTreeSet::new())
}

/// All elements of the set whose register values come from the domain.
fn elements_over(set: &NomSet, dom: &FiniteDomain) -> Result<Vec<Element>> {
    let mut out = BTreeSet::new();
    for (i, orbit) in set.orbits().iter().enumerate() {
        let k = orbit.dimension();
        if k > dom.len() {
            continue;
        }
        if k == 0 {
            out.insert(set.element_in_orbit(i, &[])?);
            continue;
        }
        for tuple in dom.values().iter().cloned().permutations(k) {
            let Ok(induced) = set.backend().induced_struct(&tuple) else { continue };
            if &induced == orbit.shape() {
                out.insert(set.element_in_orbit(i, &tuple)?);
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// Restricts a nondeterministic orbit automaton to a finite domain: one
/// classical state per state element supported in the domain, with
/// transitions and spontaneous moves read off the orbit relations on
/// concrete triples.  Guessed values are confined to the domain, so the
/// restricted language can be strictly smaller than the full one when runs
/// need values outside every accepted word (see the module notes).
pub fn restrict_nfa(a: &NominalNfa, dom: &FiniteDomain) -> Result<ClassicalAutomaton> {
    if a.backend() != dom.backend() {
        return Err(Error::BackendMismatch(format!(
            "restricting a {} automaton to a {} domain",
            a.backend(),
            dom.backend()
        )));
    }
    let elements = elements_over(a.states(), dom)?;
    let state_names = elements
        .iter()
        .map(|e| {
            format!(
                "{}[{}]",
                a.state_names()[e.orbit()],
                render_values(e.valuation())
            )
        })
        .collect();

    let mut alphabet = Vec::new();
    let mut letter_elements = Vec::new();
    for l in 0..a.labels().len() {
        for v in dom.values() {
            alphabet.push(Letter { label: l, value: v.clone() });
            letter_elements.push(a.alphabet().element_in_orbit(l, &[v.clone()])?);
        }
    }

    let initial = elements
        .iter()
        .enumerate()
        .filter(|(_, e)| a.initial().contains(e))
        .map(|(i, _)| i)
        .collect();
    let accepting = elements
        .iter()
        .enumerate()
        .filter(|(_, e)| a.accepting().contains(e))
        .map(|(i, _)| i)
        .collect();

    let mut trans = BTreeSet::new();
    for (xi, x) in elements.iter().enumerate() {
        for (li, la) in letter_elements.iter().enumerate() {
            for (yi, y) in elements.iter().enumerate() {
                if a.trans_orbits().contains(&a.triple_orbit(x, la, y)?) {
                    trans.insert((xi, li, yi));
                }
            }
        }
    }
    let mut eps = BTreeSet::new();
    if !a.eps_orbits().is_empty() {
        for (xi, x) in elements.iter().enumerate() {
            for (yi, y) in elements.iter().enumerate() {
                if a.eps_orbits().contains(&a.qq().pair(x, y)?.orbit()) {
                    eps.insert((xi, yi));
                }
            }
        }
    }
    ClassicalAutomaton::new(state_names, alphabet, initial, accepting, trans, eps)
}

/// Restricts a register machine to a finite domain: one classical state per
/// control and register file over the domain (empty registers included),
/// with guesses drawn from the domain.  As with [`restrict_nfa`], runs that
/// need values outside the domain are lost.
pub fn restrict_fma(m: &Fma, dom: &FiniteDomain) -> Result<ClassicalAutomaton> {
    if dom.backend() != Backend::Equality {
        return Err(Error::BackendMismatch(format!(
            "register machines work over the equality symmetry, not {}",
            dom.backend()
        )));
    }
    let mut reg_files: Vec<Vec<Option<DataValue>>> = vec![Vec::new()];
    for _ in 0..m.registers() {
        let mut next = Vec::new();
        for regs in &reg_files {
            for choice in
                std::iter::once(None).chain(dom.values().iter().cloned().map(Some))
            {
                let mut extended = regs.clone();
                extended.push(choice.clone());
                next.push(extended);
            }
        }
        reg_files = next;
    }
    let mut configs = Vec::new();
    for c in 0..m.controls().len() {
        for regs in &reg_files {
            configs.push(FmaConfig { control: c, regs: regs.clone() });
        }
    }
    let index_of = |c: &FmaConfig| -> Result<usize> {
        configs
            .binary_search(c)
            .map_err(|_| Error::Validation("stepping left the restricted configuration space".into()))
    };

    let state_names = configs
        .iter()
        .map(|c| {
            let regs: Vec<String> = c
                .regs
                .iter()
                .map(|r| match r {
                    Some(v) => v.to_string(),
                    None => "-".to_string(),
                })
                .collect();
            format!("{}[{}]", m.controls()[c.control], regs.join(","))
        })
        .collect();
    let mut alphabet = Vec::new();
    for l in 0..m.labels().len() {
        for v in dom.values() {
            alphabet.push(Letter { label: l, value: v.clone() });
        }
    }

    let mut initial = BTreeSet::new();
    for c in m.initial_configs() {
        initial.insert(index_of(&c)?);
    }
    let accepting = configs
        .iter()
        .enumerate()
        .filter(|(_, c)| m.accepting().contains(&c.control))
        .map(|(i, _)| i)
        .collect();

    let mut trans = BTreeSet::new();
    for (ci, config) in configs.iter().enumerate() {
        for (li, letter) in alphabet.iter().enumerate() {
            for target in fma_step(m, config, letter, dom.values())? {
                trans.insert((ci, li, index_of(&target)?));
            }
        }
    }
    ClassicalAutomaton::new(state_names, alphabet, initial, accepting, trans, BTreeSet::new())
}

// ---------------------------------------------------------------------------
// Brute-force orbit counting.
// ---------------------------------------------------------------------------

/// The relation pattern of a value tuple: one code per position pair —
/// equal, or the backend's relation between the two values.  Over the full
/// value universe, two tuples lie in one orbit exactly when their patterns
/// coincide.
fn pattern_key(backend: Backend, values: &[DataValue]) -> Vec<u8> {
    let mut key = Vec::with_capacity(values.len() * (values.len().saturating_sub(1)) / 2);
    for j in 0..values.len() {
        for i in 0..j {
            let code = if values[i] == values[j] {
                0
            } else {
                match backend {
                    Backend::Equality => 1,
                    Backend::Order => {
                        if values[i] < values[j] {
                            1
                        } else {
                            2
                        }
                    }
                    Backend::Graph => match (&values[i], &values[j]) {
                        (DataValue::Vertex(a), DataValue::Vertex(b)) => {
                            if rado_adjacent(a, b) {
                                1
                            } else {
                                2
                            }
                        }
                        _ => unreachable!("graph domains hold vertices only"),
                    },
                }
            };
            key.push(code);
        }
    }
    key
}

/// The least joint pattern of an element pair over all local-symmetry
/// reorderings of the two valuations — a complete invariant for the orbit
/// of the pair.
fn least_joint_pattern(x_set: &NomSet, y_set: &NomSet, x: &Element, y: &Element) -> Vec<u8> {
    let backend = x_set.backend();
    let mut best: Option<Vec<u8>> = None;
    for p in x_set.orbits()[x.orbit()].sym().iter() {
        let xs = p.permute(x.valuation());
        for q in y_set.orbits()[y.orbit()].sym().iter() {
            let mut joint = xs.clone();
            joint.extend(q.permute(y.valuation()));
            let key = pattern_key(backend, &joint);
            if best.as_ref().is_none_or(|b| key < *b) {
                best = Some(key);
            }
        }
    }
    best.expect("local symmetries are never empty")
}

/// Counts the orbits of the product of two sets by enumerating concrete
/// element pairs over the domain and counting their distinct joint relation
/// patterns.  Never consults the symbolic product construction — this is
/// the independent cross-check for it.  The domain must leave two spare
/// values beyond the combined carriers, so every coincidence-and-freshness
/// pattern of a pair is realized.
pub fn orbit_count_bruteforce(x: &NomSet, y: &NomSet, dom: &FiniteDomain) -> Result<usize> {
    if x.backend() != y.backend() || x.backend() != dom.backend() {
        return Err(Error::BackendMismatch(format!(
            "counting orbits of {} and {} sets over a {} domain",
            x.backend(),
            y.backend(),
            dom.backend()
        )));
    }
    let kx = x.orbits().iter().map(|o| o.dimension()).max().unwrap_or(0);
    let ky = y.orbits().iter().map(|o| o.dimension()).max().unwrap_or(0);
    let need = kx + ky + 2;
    if dom.len() < need {
        return Err(Error::DomainTooSmall(format!(
            "{} values given, but carriers of sizes {kx} and {ky} need at least {need} \
             to realize every pattern",
            dom.len()
        )));
    }
    let ex = elements_over(x, dom)?;
    let ey = elements_over(y, dom)?;
    let mut classes = BTreeSet::new();
    for a in &ex {
        for b in &ey {
            classes.insert((a.orbit(), b.orbit(), least_joint_pattern(x, y, a, b)));
        }
    }
    Ok(classes.len())
}
