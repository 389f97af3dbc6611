//! Deterministic register automata: construction, execution, Boolean
//! combinations, emptiness, minimization, and the text format.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use super::{
    annotations, classify_letter, describe_kind, strip_comment, tokenize_line, Annotation,
    AnnotationKind,
};
use crate::nomset::{
    canonical_witness, commutes, product, quotient, EqRelation, NomSet, OrbitRepr, ProductResult,
};
use crate::perm::{Perm, PermGroup};
use crate::symmetry::{
    complete_order, complete_struct, parse_fact, realize_struct, split_facts, Backend, DataValue,
    Embedding, FinStruct,
};
use crate::{Error, Result};

/// A named control state: its register shape and local symmetry.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DfaState {
    pub name: String,
    pub orbit: OrbitRepr,
}

/// A deterministic register automaton.  Every state has one transition per
/// annotation (letter-class); each transition names a target state and a
/// witness telling which annotated-carrier point each target register reads.
#[derive(Clone, Debug)]
pub struct FraisseDfa {
    backend: Backend,
    states: Vec<DfaState>,
    initial: usize,
    accepting: BTreeSet<usize>,
    trans: BTreeMap<(usize, AnnotationKind), (usize, Embedding)>,
    anns: Vec<Vec<Annotation>>,
}

impl PartialEq for FraisseDfa {
    fn eq(&self, other: &Self) -> bool {
        self.backend == other.backend
            && self.states == other.states
            && self.initial == other.initial
            && self.accepting == other.accepting
            && self.trans == other.trans
    }
}

impl Eq for FraisseDfa {}

/// A point of the configuration space: a control state plus a canonical
/// register valuation realizing its shape.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Config {
    pub state: usize,
    pub valuation: Vec<DataValue>,
}

/// The configurations visited while consuming a word, plus the verdict.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub configs: Vec<Config>,
    pub accepted: bool,
}

/// Boolean combiner for products of acceptance conditions.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BoolOp {
    And,
    Or,
    Xor,
}

impl BoolOp {
    pub fn apply(self, a: bool, b: bool) -> bool {
        match self {
            BoolOp::And => a && b,
            BoolOp::Or => a || b,
            BoolOp::Xor => a != b,
        }
    }

    pub fn parse(text: &str) -> Result<BoolOp> {
        match text {
            "and" => Ok(BoolOp::And),
            "or" => Ok(BoolOp::Or),
            "xor" => Ok(BoolOp::Xor),
            other => Err(Error::Validation(format!(
                "unknown combiner `{other}` (expected and, or, xor)"
            ))),
        }
    }
}

impl FraisseDfa {
    /// Builds and fully validates an automaton: the initial state must have
    /// no registers, every state must have exactly one transition per
    /// annotation, and every witness must embed the target shape into the
    /// annotated carrier and commute with the local symmetries.
    pub fn new(
        backend: Backend,
        states: Vec<DfaState>,
        initial: usize,
        accepting: BTreeSet<usize>,
        trans: BTreeMap<(usize, AnnotationKind), (usize, Embedding)>,
    ) -> Result<FraisseDfa> {
        if states.is_empty() {
            return Err(Error::Validation("automaton needs at least one state".into()));
        }
        let mut names = BTreeSet::new();
        for s in &states {
            if s.orbit.shape().backend() != backend {
                return Err(Error::BackendMismatch(format!(
                    "state {} is not over the {} backend",
                    s.name, backend
                )));
            }
            if !names.insert(s.name.clone()) {
                return Err(Error::Validation(format!("duplicate state name {}", s.name)));
            }
        }
        if initial >= states.len() {
            return Err(Error::Validation("initial state out of range".into()));
        }
        if states[initial].orbit.dimension() != 0 {
            return Err(Error::Validation(format!(
                "initial state {} must have zero registers",
                states[initial].name
            )));
        }
        for &f in &accepting {
            if f >= states.len() {
                return Err(Error::Validation("accepting state out of range".into()));
            }
        }
        let anns: Vec<Vec<Annotation>> =
            states.iter().map(|s| annotations(&s.orbit)).collect();
        for (q, state) in states.iter().enumerate() {
            for ann in &anns[q] {
                if !trans.contains_key(&(q, ann.kind.clone())) {
                    return Err(Error::MissingAnnotation {
                        state: state.name.clone(),
                        annotation: ann.describe(),
                    });
                }
            }
        }
        let mut canonical_trans = BTreeMap::new();
        for ((q, kind), (tgt, witness)) in trans {
            if q >= states.len() || tgt >= states.len() {
                return Err(Error::Validation("transition state out of range".into()));
            }
            let Some(ann) = anns[q].iter().find(|a| a.kind == kind) else {
                return Err(Error::Validation(format!(
                    "state {} has no letter class {}",
                    states[q].name,
                    describe_kind(&kind)
                )));
            };
            let carrier = ann.annotated_struct(states[q].orbit.shape());
            let tgt_orbit = &states[tgt].orbit;
            let witness =
                Embedding::new(witness.map().to_vec(), tgt_orbit.shape(), &carrier)?;
            if !commutes(&witness, &ann.local_sym, tgt_orbit.sym()) {
                return Err(Error::CommutingCondition(format!(
                    "transition on {} at {} does not commute with the local symmetries",
                    states[q].name,
                    describe_kind(&kind)
                )));
            }
            canonical_trans
                .insert((q, kind), (tgt, canonical_witness(&witness, tgt_orbit.sym())));
        }
        Ok(FraisseDfa { backend, states, initial, accepting, trans: canonical_trans, anns })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn states(&self) -> &[DfaState] {
        &self.states
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn accepting(&self) -> &BTreeSet<usize> {
        &self.accepting
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting.contains(&state)
    }

    pub fn transitions(&self) -> &BTreeMap<(usize, AnnotationKind), (usize, Embedding)> {
        &self.trans
    }

    /// The letter-classes of a state, cached at construction.
    pub fn annotations_of(&self, state: usize) -> &[Annotation] {
        &self.anns[state]
    }

    /// The configuration space: one orbit per state, in state order.
    pub fn config_space(&self) -> NomSet {
        let orbits = self.states.iter().map(|s| s.orbit.clone()).collect();
        NomSet::new(self.backend, orbits).expect("states are backend-checked")
    }

    /// The single-orbit set of one state's configurations.
    pub fn state_set(&self, state: usize) -> NomSet {
        NomSet::new(self.backend, vec![self.states[state].orbit.clone()])
            .expect("state is backend-checked")
    }

    /// Builds a configuration, checking the values realize the state shape
    /// and canonicalizing them under the state symmetry.
    pub fn config(&self, state: usize, values: &[DataValue]) -> Result<Config> {
        if state >= self.states.len() {
            return Err(Error::Validation("state out of range".into()));
        }
        let orbit = &self.states[state].orbit;
        let induced = self.backend.induced_struct(values)?;
        if &induced != orbit.shape() {
            return Err(Error::ShapeMismatch(format!(
                "values induce {induced} but state {} has shape {}",
                self.states[state].name,
                orbit.shape()
            )));
        }
        let (valuation, _) = orbit.sym().canonical_under(values);
        Ok(Config { state, valuation })
    }

    /// The unique starting configuration.
    pub fn initial_config(&self) -> Config {
        Config { state: self.initial, valuation: Vec::new() }
    }

    /// Consumes one letter: classify it against the registers, follow the
    /// annotation's transition, and load the target registers through the
    /// witness.
    pub fn step(&self, config: &Config, letter: &DataValue) -> Result<Config> {
        if letter.backend() != self.backend {
            return Err(Error::BackendMismatch(format!(
                "letter {letter} does not belong to the {} backend",
                self.backend
            )));
        }
        let orbit = &self.states[config.state].orbit;
        let (kind, aligned) =
            classify_letter(orbit, &self.anns[config.state], &config.valuation, letter)?;
        let (tgt, witness) = self
            .trans
            .get(&(config.state, kind))
            .expect("transition table is total after validation");
        let values: Vec<DataValue> =
            witness.map().iter().map(|&i| aligned[i].clone()).collect();
        let (valuation, _) = self.states[*tgt].orbit.sym().canonical_under(&values);
        Ok(Config { state: *tgt, valuation })
    }

    /// Runs a word from the initial configuration.
    pub fn run(&self, word: &[DataValue]) -> Result<bool> {
        Ok(self.run_trace(word)?.accepted)
    }

    /// Runs a word, keeping every intermediate configuration.
    pub fn run_trace(&self, word: &[DataValue]) -> Result<RunTrace> {
        let mut configs = vec![self.initial_config()];
        for letter in word {
            let next = self.step(configs.last().expect("nonempty"), letter)?;
            configs.push(next);
        }
        let accepted = self.is_accepting(configs.last().expect("nonempty").state);
        Ok(RunTrace { configs, accepted })
    }

    /// Control states reachable from the initial state (letter-classes are
    /// always realizable, so control reachability is configuration
    /// reachability).
    pub fn reachable_states(&self) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([self.initial]);
        let mut queue = VecDeque::from([self.initial]);
        while let Some(q) = queue.pop_front() {
            for ann in &self.anns[q] {
                let (tgt, _) = &self.trans[&(q, ann.kind.clone())];
                if seen.insert(*tgt) {
                    queue.push_back(*tgt);
                }
            }
        }
        seen
    }

    /// The same automaton with unreachable states dropped.
    pub fn restrict_reachable(&self) -> FraisseDfa {
        let keep: Vec<usize> = self.reachable_states().into_iter().collect();
        let remap: BTreeMap<usize, usize> =
            keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let states: Vec<DfaState> = keep.iter().map(|&q| self.states[q].clone()).collect();
        let accepting = self
            .accepting
            .iter()
            .filter_map(|f| remap.get(f).copied())
            .collect();
        let trans = self
            .trans
            .iter()
            .filter_map(|((q, kind), (tgt, w))| {
                let q2 = *remap.get(q)?;
                Some(((q2, kind.clone()), (remap[tgt], w.clone())))
            })
            .collect();
        FraisseDfa::new(self.backend, states, remap[&self.initial], accepting, trans)
            .expect("restriction of a valid automaton is valid")
    }

    /// Same automaton, complemented acceptance.
    pub fn complement(&self) -> FraisseDfa {
        let accepting = (0..self.states.len())
            .filter(|q| !self.accepting.contains(q))
            .collect();
        FraisseDfa {
            backend: self.backend,
            states: self.states.clone(),
            initial: self.initial,
            accepting,
            trans: self.trans.clone(),
            anns: self.anns.clone(),
        }
    }
}

/// Realize an annotation of an orbit over a concrete valuation of the
/// orbit's shape — or over a fresh one when `base` is `None`.  Returns the
/// annotated-carrier values (registers first, letter at the star) and the
/// letter itself.
fn realize_annotation(
    orbit: &OrbitRepr,
    ann: &Annotation,
    base: Option<&[DataValue]>,
) -> Result<(Vec<DataValue>, DataValue)> {
    let backend = orbit.shape().backend();
    match &ann.kind {
        AnnotationKind::Extension(e) => match base {
            Some(vals) => {
                let letter = backend.witness(e, vals, &BTreeSet::new())?;
                let mut carrier = vals.to_vec();
                carrier.push(letter.clone());
                Ok((carrier, letter))
            }
            None => {
                let carrier = realize_struct(e, &BTreeSet::new())?;
                let letter = carrier.last().expect("extension is nonempty").clone();
                Ok((carrier, letter))
            }
        },
        AnnotationKind::Distinguished(p) => {
            let carrier = match base {
                Some(vals) => vals.to_vec(),
                None => realize_struct(orbit.shape(), &BTreeSet::new())?,
            };
            let letter = carrier[*p].clone();
            Ok((carrier, letter))
        }
    }
}

/// Shortest accepted word, or `None` when the language is empty.  Search is
/// breadth-first over control states, realizing one concrete letter per
/// annotation.
pub fn emptiness(dfa: &FraisseDfa) -> Result<Option<Vec<DataValue>>> {
    let mut seen = BTreeSet::from([dfa.initial()]);
    let mut queue = VecDeque::from([(dfa.initial_config(), Vec::<DataValue>::new())]);
    while let Some((config, word)) = queue.pop_front() {
        if dfa.is_accepting(config.state) {
            return Ok(Some(word));
        }
        let orbit = &dfa.states()[config.state].orbit;
        for ann in dfa.annotations_of(config.state) {
            let (_, letter) = realize_annotation(orbit, ann, Some(&config.valuation))?;
            let next = dfa.step(&config, &letter)?;
            if seen.insert(next.state) {
                let mut next_word = word.clone();
                next_word.push(letter);
                queue.push_back((next, next_word));
            }
        }
    }
    Ok(None)
}

/// Product automaton: control states are the orbits of pairwise products of
/// configuration spaces, acceptance is combined with `op`.
pub fn product_dfa(a: &FraisseDfa, b: &FraisseDfa, op: BoolOp) -> Result<FraisseDfa> {
    if a.backend() != b.backend() {
        return Err(Error::BackendMismatch(format!(
            "product of automata over {} and {}",
            a.backend(),
            b.backend()
        )));
    }
    let mut products: BTreeMap<(usize, usize), ProductResult> = BTreeMap::new();
    let mut base: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut states: Vec<DfaState> = Vec::new();
    let mut accepting = BTreeSet::new();
    for qa in 0..a.states().len() {
        for qb in 0..b.states().len() {
            let p = product(&a.state_set(qa), &b.state_set(qb))?;
            base.insert((qa, qb), states.len());
            let acc = op.apply(a.is_accepting(qa), b.is_accepting(qb));
            for (k, orbit) in p.set().orbits().iter().enumerate() {
                if acc {
                    accepting.insert(states.len());
                }
                states.push(DfaState {
                    name: format!("{}*{}*{k}", a.states()[qa].name, b.states()[qb].name),
                    orbit: orbit.clone(),
                });
            }
            products.insert((qa, qb), p);
        }
    }
    let initial = base[&(a.initial(), b.initial())];
    if states[initial].orbit.dimension() != 0 {
        return Err(Error::Validation(
            "product of initial states is not zero-dimensional".into(),
        ));
    }

    let mut trans = BTreeMap::new();
    for (&(qa, qb), p) in &products {
        for (k, orbit) in p.set().orbits().iter().enumerate() {
            let src = base[&(qa, qb)] + k;
            for ann in annotations(orbit) {
                let (carrier, letter) = realize_annotation(orbit, &ann, None)?;
                let pair_vals = &carrier[..orbit.dimension()];
                let z = p.set().element_in_orbit(k, pair_vals)?;
                let (xe, ye) = p.unpair(&z)?;
                let ca = Config { state: qa, valuation: xe.valuation().to_vec() };
                let cb = Config { state: qb, valuation: ye.valuation().to_vec() };
                let ca2 = a.step(&ca, &letter)?;
                let cb2 = b.step(&cb, &letter)?;
                let p2 = &products[&(ca2.state, cb2.state)];
                let xe2 = a.state_set(ca2.state).element_in_orbit(0, &ca2.valuation)?;
                let ye2 = b.state_set(cb2.state).element_in_orbit(0, &cb2.valuation)?;
                let z2 = p2.pair(&xe2, &ye2)?;
                let tgt = base[&(ca2.state, cb2.state)] + z2.orbit();
                let map = positions_in(&carrier, z2.valuation())?;
                let witness = Embedding::new(
                    map,
                    states[tgt].orbit.shape(),
                    &ann.annotated_struct(orbit.shape()),
                )?;
                trans.insert((src, ann.kind), (tgt, witness));
            }
        }
    }
    FraisseDfa::new(a.backend(), states, initial, accepting, trans)
}

/// Where each of `needles` sits inside `haystack` (values are distinct).
fn positions_in(haystack: &[DataValue], needles: &[DataValue]) -> Result<Vec<usize>> {
    needles
        .iter()
        .map(|v| {
            haystack.iter().position(|w| w == v).ok_or_else(|| {
                Error::Validation(format!("value {v} escapes the annotated carrier"))
            })
        })
        .collect()
}

/// `None` when the two automata accept the same language, otherwise a word
/// accepted by exactly one of them.
pub fn equivalence_counterexample(
    a: &FraisseDfa,
    b: &FraisseDfa,
) -> Result<Option<Vec<DataValue>>> {
    emptiness(&product_dfa(a, b, BoolOp::Xor)?)
}

/// Language-minimal form: restrict to reachable states, refine the
/// acceptance-agreement relation on pairs of configurations to the coarsest
/// transition-respecting one, quotient the configuration space by it, and
/// induce transitions on the quotient.
pub fn minimize(input: &FraisseDfa) -> Result<FraisseDfa> {
    let dfa = input.restrict_reachable();
    let space = dfa.config_space();
    let pairs = product(&space, &space)?;

    // Start from acceptance agreement.
    let mut members: BTreeSet<usize> = (0..pairs.set().orbit_count())
        .filter(|&m| {
            let tag = pairs.tag(m);
            dfa.is_accepting(tag.left_orbit) == dfa.is_accepting(tag.right_orbit)
        })
        .collect();

    // Successor pair-orbits per member orbit, computed once on concrete
    // representatives: one letter per annotation of the pair orbit.
    let mut successors: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &m in &members {
        let orbit = &pairs.set().orbits()[m];
        let z = pairs.set().realize(m)?;
        let (xe, ye) = pairs.unpair(&z)?;
        let mut succ = Vec::new();
        for ann in annotations(orbit) {
            let (_, letter) = realize_annotation(orbit, &ann, Some(z.valuation()))?;
            let cx = dfa.step(
                &Config { state: xe.orbit(), valuation: xe.valuation().to_vec() },
                &letter,
            )?;
            let cy = dfa.step(
                &Config { state: ye.orbit(), valuation: ye.valuation().to_vec() },
                &letter,
            )?;
            let xe2 = space.element_in_orbit(cx.state, &cx.valuation)?;
            let ye2 = space.element_in_orbit(cy.state, &cy.valuation)?;
            succ.push(pairs.pair(&xe2, &ye2)?.orbit());
        }
        successors.insert(m, succ);
    }

    // Refine to a fixpoint: a pair orbit survives only while all its
    // successor pair orbits survive.
    loop {
        let bad: BTreeSet<usize> = members
            .iter()
            .filter(|m| successors[m].iter().any(|s| !members.contains(s)))
            .copied()
            .collect();
        if bad.is_empty() {
            break;
        }
        for m in bad {
            members.remove(&m);
        }
    }

    let relation = EqRelation::new(pairs, members)?;
    let (classes, abstraction) = quotient(&space, &relation)?;

    // Assemble the quotient automaton.
    let states: Vec<DfaState> = classes
        .orbits()
        .iter()
        .enumerate()
        .map(|(k, orbit)| DfaState { name: format!("m{k}"), orbit: orbit.clone() })
        .collect();
    let entries = abstraction.entries();
    let initial = entries[&dfa.initial()].0;
    let accepting: BTreeSet<usize> =
        dfa.accepting().iter().map(|f| entries[f].0).collect();

    let mut trans = BTreeMap::new();
    for (k, class_orbit) in classes.orbits().iter().enumerate() {
        let (src, witness_to_src) = entries
            .iter()
            .find_map(|(&s, (c, w))| (*c == k).then_some((s, w)))
            .ok_or_else(|| Error::Validation("empty abstraction class".into()))?;
        let src_orbit = &dfa.states()[src].orbit;
        for ann in annotations(class_orbit) {
            let (carrier, letter) = realize_annotation(class_orbit, &ann, None)?;
            let class_vals = &carrier[..class_orbit.dimension()];
            // Lift the class valuation to a configuration of the source
            // state: class registers land where the abstraction witness
            // points, the rest are completed (avoiding a fresh letter so the
            // letter classification is preserved).
            let mut order: Vec<usize> = witness_to_src.map().to_vec();
            for i in 0..src_orbit.dimension() {
                if !order.contains(&i) {
                    order.push(i);
                }
            }
            let forbidden: BTreeSet<DataValue> =
                match ann.kind {
                    AnnotationKind::Extension(_) => BTreeSet::from([letter.clone()]),
                    AnnotationKind::Distinguished(_) => BTreeSet::new(),
                };
            let lifted = complete_struct(src_orbit.shape(), &order, class_vals, &forbidden)?;
            let cx = dfa.config(src, &lifted)?;
            let cx2 = dfa.step(&cx, &letter)?;
            let image = abstraction.apply(
                &space,
                &classes,
                &space.element_in_orbit(cx2.state, &cx2.valuation)?,
            )?;
            let map = positions_in(&carrier, image.valuation())?;
            let witness = Embedding::new(
                map,
                states[image.orbit()].orbit.shape(),
                &ann.annotated_struct(class_orbit.shape()),
            )?;
            trans.insert((k, ann.kind), (image.orbit(), witness));
        }
    }
    FraisseDfa::new(dfa.backend(), states, initial, accepting, trans)
}

// ---------------------------------------------------------------------------
// Text format.
// ---------------------------------------------------------------------------

/// Parse the deterministic-automaton text format:
///
/// ```text
/// symmetry order
/// dfa
/// state q0 registers 0
/// state q1 registers 2 rel "0<1" sym "(0 1)"
/// initial q0
/// accept q1
/// on q0 ext{} -> q1 [0:=*]
/// on q1 reg 0 -> q1 [0:=0, 1:=1]
/// ```
///
/// Register shapes must be written in canonical form; `#` starts a comment.
pub fn parse_dfa(text: &str) -> Result<FraisseDfa> {
    let mut lines = numbered_lines(text);
    let backend = expect_header(&mut lines, "symmetry")?;
    expect_keyword(&mut lines, "dfa")?;

    let mut states: Vec<DfaState> = Vec::new();
    let mut initial: Option<(usize, String)> = None;
    let mut accept_names: Vec<(usize, String)> = Vec::new();
    let mut raw_trans: Vec<(usize, Vec<String>)> = Vec::new();

    for (lineno, line) in lines {
        let toks = tokenize_line(&line, lineno)?;
        match toks[0].as_str() {
            "state" => states.push(parse_state_line(backend, &toks, lineno)?),
            "initial" => {
                if toks.len() != 2 {
                    return Err(Error::parse(lineno, 1, "expected `initial NAME`"));
                }
                if initial.is_some() {
                    return Err(Error::parse(lineno, 1, "duplicate initial line"));
                }
                initial = Some((lineno, toks[1].clone()));
            }
            "accept" => {
                if toks.len() < 2 {
                    return Err(Error::parse(lineno, 1, "expected `accept NAME...`"));
                }
                accept_names.extend(toks[1..].iter().map(|n| (lineno, n.clone())));
            }
            "on" => raw_trans.push((lineno, toks)),
            other => {
                return Err(Error::parse(lineno, 1, format!("unexpected directive `{other}`")));
            }
        }
    }

    let state_index = |name: &str, lineno: usize| {
        states
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::parse(lineno, 1, format!("unknown state `{name}`")))
    };
    let (init_line, init_name) =
        initial.ok_or_else(|| Error::parse(0, 0, "missing `initial` line"))?;
    let initial = state_index(&init_name, init_line)?;
    let mut accepting = BTreeSet::new();
    for (lineno, name) in accept_names {
        accepting.insert(state_index(&name, lineno)?);
    }

    let anns: Vec<Vec<Annotation>> = states.iter().map(|s| annotations(&s.orbit)).collect();
    let mut trans: BTreeMap<(usize, AnnotationKind), (usize, Embedding)> = BTreeMap::new();
    for (lineno, toks) in raw_trans {
        let arrow = toks
            .iter()
            .position(|t| t == "->")
            .ok_or_else(|| Error::parse(lineno, 1, "transition line is missing `->`"))?;
        if arrow < 3 || arrow + 1 >= toks.len() {
            return Err(Error::parse(
                lineno,
                1,
                "expected `on STATE CLASS -> STATE [ASSIGNS]`",
            ));
        }
        let src = state_index(&toks[1], lineno)?;
        let tgt = state_index(&toks[arrow + 1], lineno)?;
        let ann_text = toks[2..arrow].join(" ");
        let shape = states[src].orbit.shape();
        let sym = states[src].orbit.sym();
        let (kind, align) =
            parse_annotation_text(&ann_text, shape, sym, &anns[src], lineno)?;
        let assigns_text = toks[arrow + 2..].join(" ");
        let raw_map = parse_assigns(
            &assigns_text,
            states[tgt].orbit.dimension(),
            align.user_register,
            align.carrier_size,
            lineno,
        )?;
        // Translate user-labeled carrier indices into the canonical
        // annotation's labeling.
        let inv = align.relabel.inverse();
        let map: Vec<usize> = raw_map.iter().map(|&i| inv.apply(i)).collect();
        let witness = Embedding::new(
            map,
            states[tgt].orbit.shape(),
            &anns[src]
                .iter()
                .find(|a| a.kind == kind)
                .expect("kind resolved against this list")
                .annotated_struct(shape),
        )
        .map_err(|e| Error::parse(lineno, 1, format!("bad assignment list: {e}")))?;
        if trans.insert((src, kind.clone()), (tgt, witness)).is_some() {
            return Err(Error::parse(
                lineno,
                1,
                format!(
                    "duplicate transition for state {} class {}",
                    states[src].name,
                    describe_kind(&kind)
                ),
            ));
        }
    }

    FraisseDfa::new(backend, states, initial, accepting, trans)
}

/// How a user-written annotation aligns with its canonical representative.
struct AnnotationAlignment {
    /// Permutation of the annotated carrier with
    /// `canonical.relabel(relabel) == user`, so user indices pull back
    /// through its inverse.
    relabel: Perm,
    /// The register the user named (for `reg` lines; the star position in
    /// the user's labeling).
    user_register: usize,
    carrier_size: usize,
}

fn parse_annotation_text(
    text: &str,
    shape: &FinStruct,
    sym: &PermGroup,
    anns: &[Annotation],
    lineno: usize,
) -> Result<(AnnotationKind, AnnotationAlignment)> {
    let n = shape.size();
    if let Some(rest) = text.strip_prefix("reg ") {
        let p: usize = rest
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, 1, format!("bad register `{rest}`")))?;
        if p >= n {
            return Err(Error::parse(lineno, 1, format!("register {p} out of range 0..{n}")));
        }
        let canon = sym.iter().map(|s| s.apply(p)).min().expect("group nonempty");
        let sigma = sym
            .iter()
            .find(|s| s.apply(canon) == p)
            .expect("canonical register is in the class")
            .clone();
        return Ok((
            AnnotationKind::Distinguished(canon),
            AnnotationAlignment { relabel: sigma, user_register: p, carrier_size: n },
        ));
    }
    let inner = text
        .strip_prefix("ext{")
        .and_then(|rest| rest.strip_suffix('}'))
        .ok_or_else(|| {
            Error::parse(lineno, 1, format!("expected `reg N` or `ext{{...}}`, got `{text}`"))
        })?;
    let mut facts = shape.facts().clone();
    for tok in split_facts(inner) {
        facts.insert(
            parse_fact(&tok, n + 1, Some(n))
                .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?,
        );
    }
    if shape.backend() == Backend::Order {
        facts = complete_order(n + 1, facts)
            .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?;
    }
    let user_ext = FinStruct::new(shape.backend(), n + 1, facts)
        .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?;
    if &user_ext.substruct(&(0..n).collect::<Vec<_>>()) != shape {
        return Err(Error::parse(
            lineno,
            1,
            "extension facts do not extend the state shape",
        ));
    }
    for ann in anns {
        let AnnotationKind::Extension(rep) = &ann.kind else { continue };
        for s in sym.iter() {
            let ext = super::extend_fixing_last(s, n);
            if rep.relabel(&ext) == user_ext {
                return Ok((
                    ann.kind.clone(),
                    AnnotationAlignment {
                        relabel: ext,
                        user_register: n,
                        carrier_size: n + 1,
                    },
                ));
            }
        }
    }
    Err(Error::parse(lineno, 1, format!("`{text}` is not a letter class of the state")))
}

fn parse_assigns(
    text: &str,
    target_dim: usize,
    star: usize,
    carrier_size: usize,
    lineno: usize,
) -> Result<Vec<usize>> {
    let inner = text
        .trim()
        .strip_prefix('[')
        .and_then(|rest| rest.strip_suffix(']'))
        .ok_or_else(|| Error::parse(lineno, 1, "expected assignment list `[...]`"))?;
    let mut map = vec![usize::MAX; target_dim];
    let mut filled = vec![false; target_dim];
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (lhs, rhs) = part
            .split_once(":=")
            .ok_or_else(|| Error::parse(lineno, 1, format!("bad assignment `{part}`")))?;
        let b: usize = lhs
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, 1, format!("bad target register `{lhs}`")))?;
        if b >= target_dim {
            return Err(Error::parse(
                lineno,
                1,
                format!("target register {b} out of range 0..{target_dim}"),
            ));
        }
        if filled[b] {
            return Err(Error::parse(lineno, 1, format!("register {b} assigned twice")));
        }
        let rhs = rhs.trim();
        let i = if rhs == "*" {
            star
        } else {
            let i: usize = rhs
                .parse()
                .map_err(|_| Error::parse(lineno, 1, format!("bad source index `{rhs}`")))?;
            if i >= carrier_size {
                return Err(Error::parse(
                    lineno,
                    1,
                    format!("source index {i} out of range 0..{carrier_size}"),
                ));
            }
            i
        };
        map[b] = i;
        filled[b] = true;
    }
    if let Some(b) = filled.iter().position(|f| !f) {
        return Err(Error::parse(lineno, 1, format!("target register {b} is unassigned")));
    }
    Ok(map)
}

pub(super) fn parse_state_line(
    backend: Backend,
    toks: &[String],
    lineno: usize,
) -> Result<DfaState> {
    if toks.len() < 4 || toks[2] != "registers" {
        return Err(Error::parse(
            lineno,
            1,
            "expected `state NAME registers K [rel \"...\"] [sym \"...\"]`",
        ));
    }
    let name = toks[1].clone();
    let k: usize = toks[3]
        .parse()
        .map_err(|_| Error::parse(lineno, 1, format!("bad register count `{}`", toks[3])))?;
    let mut rel: Option<String> = None;
    let mut sym_text: Option<String> = None;
    let mut i = 4;
    while i < toks.len() {
        match toks[i].as_str() {
            "rel" if i + 1 < toks.len() && rel.is_none() => {
                rel = Some(toks[i + 1].clone());
                i += 2;
            }
            "sym" if i + 1 < toks.len() && sym_text.is_none() => {
                sym_text = Some(toks[i + 1].clone());
                i += 2;
            }
            other => {
                return Err(Error::parse(lineno, 1, format!("unexpected token `{other}`")));
            }
        }
    }
    let shape = match rel {
        Some(facts) => crate::symmetry::struct_from_fact_list(backend, k, &facts)
            .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?,
        None => FinStruct::new(backend, k, BTreeSet::new())
            .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?,
    };
    let mut generators = Vec::new();
    if let Some(text) = sym_text {
        for gen_text in split_generators(&text) {
            let p = Perm::from_cycles(&gen_text, k)
                .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?;
            if shape.relabel(&p) != shape {
                return Err(Error::parse(
                    lineno,
                    1,
                    "sym generator is not an automorphism of the state shape",
                ));
            }
            generators.push(p);
        }
    }
    let group = PermGroup::closure(&generators, k)
        .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?;
    let (orbit, transport) = OrbitRepr::new(shape.clone(), group)
        .map_err(|e| Error::parse(lineno, 1, format!("{e}")))?;
    if !transport.is_identity() {
        return Err(Error::parse(
            lineno,
            1,
            format!(
                "state shape is not canonical; write it as `{}`",
                orbit.shape().display_facts().join("; ")
            ),
        ));
    }
    Ok(DfaState { name, orbit })
}

/// Split cycle notation into whitespace-separated generators, keeping
/// multi-cycle generators like `(0 1)(2 3)` together.
fn split_generators(text: &str) -> Vec<String> {
    text.split_whitespace()
        .fold(Vec::<String>::new(), |mut acc, tok| {
            match acc.last_mut() {
                // A token that does not open a new generator continues the
                // previous one (cycle elements are space-separated).
                Some(last) if !last.ends_with(')') => {
                    last.push(' ');
                    last.push_str(tok);
                }
                _ if !tok.starts_with('(') => {
                    if let Some(last) = acc.last_mut() {
                        last.push(' ');
                        last.push_str(tok);
                    } else {
                        acc.push(tok.to_string());
                    }
                }
                _ => acc.push(tok.to_string()),
            }
            acc
        })
}

fn numbered_lines(text: &str) -> Vec<(usize, String)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l).to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect()
}

fn expect_header(lines: &mut Vec<(usize, String)>, key: &str) -> Result<Backend> {
    if lines.is_empty() {
        return Err(Error::parse(0, 0, format!("missing `{key}` header")));
    }
    let (lineno, line) = lines.remove(0);
    let toks = tokenize_line(&line, lineno)?;
    if toks.len() != 2 || toks[0] != key {
        return Err(Error::parse(lineno, 1, format!("expected `{key} NAME`")));
    }
    Backend::parse(&toks[1]).map_err(|e| Error::parse(lineno, 1, format!("{e}")))
}

fn expect_keyword(lines: &mut Vec<(usize, String)>, key: &str) -> Result<()> {
    if lines.is_empty() {
        return Err(Error::parse(0, 0, format!("missing `{key}` line")));
    }
    let (lineno, line) = lines.remove(0);
    if line != key {
        return Err(Error::parse(lineno, 1, format!("expected `{key}`, got `{line}`")));
    }
    Ok(())
}

/// Serialize an automaton in the text format; `parse_dfa` reads it back
/// identically.
pub fn write_dfa(dfa: &FraisseDfa) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "symmetry {}", dfa.backend().name());
    let _ = writeln!(out, "dfa");
    for s in dfa.states() {
        let _ = write!(out, "state {} registers {}", s.name, s.orbit.dimension());
        let facts = s.orbit.shape().display_facts();
        if !facts.is_empty() {
            let _ = write!(out, " rel \"{}\"", facts.join("; "));
        }
        if s.orbit.sym().order() > 1 {
            let gens: Vec<String> = s
                .orbit
                .sym()
                .iter()
                .filter(|p| !p.is_identity())
                .map(|p| p.to_string())
                .collect();
            let _ = write!(out, " sym \"{}\"", gens.join(" "));
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "initial {}", dfa.states()[dfa.initial()].name);
    if !dfa.accepting().is_empty() {
        let names: Vec<&str> =
            dfa.accepting().iter().map(|&f| dfa.states()[f].name.as_str()).collect();
        let _ = writeln!(out, "accept {}", names.join(" "));
    }
    for ((q, kind), (tgt, witness)) in dfa.transitions() {
        let star = match kind {
            AnnotationKind::Extension(e) => e.size() - 1,
            AnnotationKind::Distinguished(p) => *p,
        };
        let assigns: Vec<String> = witness
            .map()
            .iter()
            .enumerate()
            .map(|(b, &i)| {
                if i == star {
                    format!("{b}:=*")
                } else {
                    format!("{b}:={i}")
                }
            })
            .collect();
        let _ = writeln!(
            out,
            "on {} {} -> {} [{}]",
            dfa.states()[*q].name,
            describe_kind(kind),
            dfa.states()[*tgt].name,
            assigns.join(", ")
        );
    }
    out
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<String> = self.valuation.iter().map(|v| v.to_string()).collect();
        write!(f, "state {} [{}]", self.state, vals.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat(n: u64) -> DataValue {
        DataValue::Nat(n)
    }

    fn nats(ns: &[u64]) -> Vec<DataValue> {
        ns.iter().map(|&n| nat(n)).collect()
    }

    fn rat(text: &str) -> DataValue {
        DataValue::parse(Backend::Order, text).unwrap()
    }

    /// Accepts three-letter words whose last letter equals one of the first
    /// two.
    pub(crate) fn third_repeats_dfa() -> FraisseDfa {
        parse_dfa(
            "symmetry equality\n\
             dfa\n\
             state qe registers 0\n\
             state qd registers 1\n\
             state qdd registers 1\n\
             state qde registers 2\n\
             state top registers 0\n\
             state bot registers 0\n\
             initial qe\n\
             accept top\n\
             on qe ext{} -> qd [0:=*]\n\
             on qd reg 0 -> qdd [0:=0]\n\
             on qd ext{} -> qde [0:=0, 1:=*]\n\
             on qdd reg 0 -> top []\n\
             on qdd ext{} -> bot []\n\
             on qde reg 0 -> top []\n\
             on qde reg 1 -> top []\n\
             on qde ext{} -> bot []\n\
             on top ext{} -> bot []\n\
             on bot ext{} -> bot []\n",
        )
        .unwrap()
    }

    /// Accepts the strictly increasing words over rationals.
    fn increasing_dfa() -> FraisseDfa {
        parse_dfa(
            "symmetry order\n\
             dfa\n\
             state q0 registers 0\n\
             state q1 registers 1\n\
             state rej registers 0\n\
             initial q0\n\
             accept q0 q1\n\
             on q0 ext{} -> q1 [0:=*]\n\
             on q1 reg 0 -> rej []\n\
             on q1 ext{0<*} -> q1 [0:=*]\n\
             on q1 ext{*<0} -> rej []\n\
             on rej ext{} -> rej []\n",
        )
        .unwrap()
    }

    /// Accepts two-letter words over graph vertices whose letters are
    /// adjacent.
    fn adjacent_pair_dfa() -> FraisseDfa {
        parse_dfa(
            "symmetry graph\n\
             dfa\n\
             state q0 registers 0\n\
             state q1 registers 1\n\
             state acc registers 0\n\
             state rej registers 0\n\
             initial q0\n\
             accept acc\n\
             on q0 ext{} -> q1 [0:=*]\n\
             on q1 reg 0 -> rej []\n\
             on q1 ext{E(0,*)} -> acc []\n\
             on q1 ext{} -> rej []\n\
             on acc ext{} -> rej []\n\
             on rej ext{} -> rej []\n",
        )
        .unwrap()
    }

    #[test]
    fn runs_classify_letters_against_registers() {
        let dfa = third_repeats_dfa();
        assert!(dfa.run(&nats(&[1, 2, 1])).unwrap());
        assert!(dfa.run(&nats(&[1, 2, 2])).unwrap());
        assert!(dfa.run(&nats(&[1, 1, 1])).unwrap());
        assert!(!dfa.run(&nats(&[1, 2, 3])).unwrap());
        assert!(!dfa.run(&nats(&[1, 2])).unwrap());
        assert!(!dfa.run(&nats(&[1, 2, 1, 1])).unwrap());
        assert!(!dfa.run(&[]).unwrap());
    }

    #[test]
    fn order_runs_use_gap_classes() {
        let dfa = increasing_dfa();
        assert!(dfa.run(&[]).unwrap());
        assert!(dfa.run(&[rat("1"), rat("2"), rat("5/2")]).unwrap());
        assert!(!dfa.run(&[rat("1"), rat("1")]).unwrap());
        assert!(!dfa.run(&[rat("2"), rat("1")]).unwrap());
        assert!(!dfa.run(&[rat("1"), rat("3"), rat("2")]).unwrap());
    }

    #[test]
    fn graph_runs_use_adjacency_classes() {
        let dfa = adjacent_pair_dfa();
        let g = |n: &str| DataValue::parse(Backend::Graph, n).unwrap();
        assert!(dfa.run(&[g("g0"), g("g1")]).unwrap());
        assert!(!dfa.run(&[g("g0"), g("g2")]).unwrap());
        assert!(dfa.run(&[g("g1"), g("g3")]).unwrap());
        assert!(!dfa.run(&[g("g1"), g("g1")]).unwrap());
        assert!(!dfa.run(&[g("g0")]).unwrap());
    }

    #[test]
    fn step_is_representative_independent() {
        let dfa = third_repeats_dfa();
        let qde = dfa.state_index("qde").unwrap();
        // The same configuration presented through two valuation orders.
        let c1 = dfa.config(qde, &nats(&[3, 7])).unwrap();
        let c2 = dfa.config(qde, &nats(&[3, 7])).unwrap();
        assert_eq!(c1, c2);
        for letter in [nat(3), nat(7), nat(9)] {
            assert_eq!(dfa.step(&c1, &letter).unwrap(), dfa.step(&c2, &letter).unwrap());
        }
    }

    #[test]
    fn missing_transition_is_reported_with_class_description() {
        let text = "symmetry equality\n\
             dfa\n\
             state q0 registers 0\n\
             state q1 registers 1\n\
             initial q0\n\
             accept q1\n\
             on q0 ext{} -> q1 [0:=*]\n\
             on q1 ext{} -> q1 [0:=*]\n";
        let err = parse_dfa(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("q1"), "{msg}");
        assert!(msg.contains("reg 0"), "{msg}");
    }

    #[test]
    fn bad_symmetry_generator_is_rejected() {
        let text = "symmetry order\n\
             dfa\n\
             state q0 registers 2 rel \"0<1\" sym \"(0 1)\"\n\
             initial q0\n";
        let err = parse_dfa(text).unwrap_err();
        assert!(
            err.to_string().contains("not an automorphism"),
            "{err}"
        );
    }

    #[test]
    fn noncanonical_shape_is_rejected_with_expected_form() {
        let text = "symmetry order\n\
             dfa\n\
             state q0 registers 2 rel \"1<0\"\n\
             initial q0\n";
        let err = parse_dfa(text).unwrap_err();
        assert!(err.to_string().contains("0<1"), "{err}");
    }

    #[test]
    fn initial_state_must_be_zero_dimensional() {
        let text = "symmetry equality\n\
             dfa\n\
             state q0 registers 1\n\
             initial q0\n\
             on q0 reg 0 -> q0 [0:=0]\n\
             on q0 ext{} -> q0 [0:=*]\n";
        let err = parse_dfa(text).unwrap_err();
        assert!(err.to_string().contains("zero registers"), "{err}");
    }

    #[test]
    fn reachability_sees_all_live_states_and_drops_isolated_ones() {
        let dfa = third_repeats_dfa();
        assert_eq!(dfa.reachable_states().len(), 6);
        // Add an unreachable state.
        let mut text = write_dfa(&dfa);
        text.push_str("state orphan registers 0\non orphan ext{} -> orphan [ ]\n");
        // `state` lines may come after transitions: order is free.
        let bigger = parse_dfa(&text).unwrap();
        assert_eq!(bigger.states().len(), 7);
        assert_eq!(bigger.reachable_states().len(), 6);
        let trimmed = bigger.restrict_reachable();
        assert_eq!(trimmed.states().len(), 6);
        assert!(trimmed.state_index("orphan").is_none());
        assert!(equivalence_counterexample(&bigger, &trimmed).unwrap().is_none());
    }

    #[test]
    fn complement_flips_every_verdict() {
        let dfa = third_repeats_dfa();
        let comp = dfa.complement();
        for word in [vec![], nats(&[1, 2, 1]), nats(&[1, 2, 3]), nats(&[4, 4])] {
            assert_ne!(dfa.run(&word).unwrap(), comp.run(&word).unwrap());
        }
    }

    #[test]
    fn products_combine_acceptance() {
        let a = third_repeats_dfa();
        let not_a = a.complement();
        // a ∧ ¬a is empty; a ∨ ¬a is universal.
        let conj = product_dfa(&a, &not_a, BoolOp::And).unwrap();
        assert_eq!(emptiness(&conj).unwrap(), None);
        let disj = product_dfa(&a, &not_a, BoolOp::Or).unwrap();
        assert_eq!(emptiness(&disj).unwrap(), Some(vec![]));
        // Product runs agree with running both sides.
        let xor = product_dfa(&a, &not_a, BoolOp::Xor).unwrap();
        for word in [nats(&[1, 2, 1]), nats(&[1, 2, 3]), nats(&[5])] {
            assert!(xor.run(&word).unwrap());
        }
    }

    #[test]
    fn emptiness_finds_a_shortest_witness() {
        let dfa = third_repeats_dfa();
        let witness = emptiness(&dfa).unwrap().expect("language is nonempty");
        assert_eq!(witness.len(), 3);
        assert!(dfa.run(&witness).unwrap());
        let increasing = increasing_dfa();
        assert_eq!(emptiness(&increasing).unwrap(), Some(vec![]));
        let graph = adjacent_pair_dfa();
        let witness = emptiness(&graph).unwrap().expect("language is nonempty");
        assert_eq!(witness.len(), 2);
        assert!(graph.run(&witness).unwrap());
    }

    #[test]
    fn minimize_enlarges_the_pair_state_symmetry() {
        let dfa = third_repeats_dfa();
        let min = minimize(&dfa).unwrap();
        assert_eq!(min.states().len(), 6);
        // The two-register state now treats its registers as an unordered
        // pair.
        let pair_state = min
            .states()
            .iter()
            .find(|s| s.orbit.dimension() == 2)
            .expect("a two-register state survives");
        assert_eq!(pair_state.orbit.sym().order(), 2);
        assert!(equivalence_counterexample(&dfa, &min).unwrap().is_none());
        // Minimizing again changes nothing further.
        let again = minimize(&min).unwrap();
        assert_eq!(again.states().len(), 6);
        assert!(equivalence_counterexample(&min, &again).unwrap().is_none());
    }

    #[test]
    fn minimize_merges_bisimilar_states() {
        // Two one-register states with identical behavior: accept when a
        // letter repeats its immediate predecessor.
        let dfa = parse_dfa(
            "symmetry equality\n\
             dfa\n\
             state q0 registers 0\n\
             state a registers 1\n\
             state b registers 1\n\
             state acc registers 0\n\
             initial q0\n\
             accept acc\n\
             on q0 ext{} -> a [0:=*]\n\
             on a reg 0 -> acc []\n\
             on a ext{} -> b [0:=*]\n\
             on b reg 0 -> acc []\n\
             on b ext{} -> a [0:=*]\n\
             on acc ext{} -> acc []\n",
        )
        .unwrap();
        assert!(dfa.run(&nats(&[1, 1])).unwrap());
        assert!(dfa.run(&nats(&[1, 2, 2])).unwrap());
        assert!(!dfa.run(&nats(&[1, 2, 1])).unwrap());
        let min = minimize(&dfa).unwrap();
        assert_eq!(min.states().len(), 3);
        assert!(equivalence_counterexample(&dfa, &min).unwrap().is_none());
    }

    #[test]
    fn minimize_drops_an_unread_register() {
        // The register is stored but never consulted: every word of length
        // two is accepted.
        let dfa = parse_dfa(
            "symmetry equality\n\
             dfa\n\
             state q0 registers 0\n\
             state q1 registers 1\n\
             state acc registers 0\n\
             state rej registers 0\n\
             initial q0\n\
             accept acc\n\
             on q0 ext{} -> q1 [0:=*]\n\
             on q1 reg 0 -> acc []\n\
             on q1 ext{} -> acc []\n\
             on acc ext{} -> rej []\n\
             on rej ext{} -> rej []\n",
        )
        .unwrap();
        let min = minimize(&dfa).unwrap();
        assert_eq!(min.states().len(), 4);
        assert!(min.states().iter().all(|s| s.orbit.dimension() == 0));
        assert!(equivalence_counterexample(&dfa, &min).unwrap().is_none());
    }

    #[test]
    fn equivalence_distinguishes_different_languages() {
        let a = third_repeats_dfa();
        let b = a.complement();
        let word = equivalence_counterexample(&a, &b).unwrap().expect("languages differ");
        assert_ne!(a.run(&word).unwrap(), b.run(&word).unwrap());
        assert!(equivalence_counterexample(&a, &a).unwrap().is_none());
    }

    #[test]
    fn text_format_round_trips() {
        for dfa in [third_repeats_dfa(), increasing_dfa(), adjacent_pair_dfa()] {
            let text = write_dfa(&dfa);
            let back = parse_dfa(&text).unwrap();
            assert_eq!(back, dfa, "round trip failed for:\n{text}");
        }
        // Minimized automata exercise nontrivial symmetry serialization.
        let min = minimize(&third_repeats_dfa()).unwrap();
        assert_eq!(parse_dfa(&write_dfa(&min)).unwrap(), min);
    }

    #[test]
    fn duplicate_transition_is_rejected() {
        let text = "symmetry equality\n\
             dfa\n\
             state q0 registers 0\n\
             initial q0\n\
             on q0 ext{} -> q0 []\n\
             on q0 ext{} -> q0 []\n";
        let err = parse_dfa(text).unwrap_err();
        assert!(err.to_string().contains("duplicate transition"), "{err}");
    }

    #[test]
    fn noncanonical_register_lines_align_to_the_class_representative() {
        // A state with swap symmetry: `reg 1` and `reg 0` name the same
        // class, so writing the transition against register 1 must work and
        // coincide with the canonical form.
        let via_reg1 = parse_dfa(
            "symmetry equality\n\
             dfa\n\
             state q0 registers 0\n\
             state q1 registers 2 sym \"(0 1)\"\n\
             state acc registers 0\n\
             state rej registers 0\n\
             initial q0\n\
             accept acc\n\
             on q0 ext{} -> q0x [0:=*]\n\
             on q0x ext{} -> q1 [0:=0, 1:=*]\n\
             on q0x reg 0 -> rej []\n\
             on q1 reg 1 -> acc []\n\
             on q1 ext{} -> rej []\n\
             on acc ext{} -> rej []\n\
             on rej ext{} -> rej []\n\
             state q0x registers 1\n",
        )
        .unwrap();
        // Words of length three whose third letter equals one of the first
        // two (the pair is unordered, so `reg 1` covers both).
        assert!(via_reg1.run(&nats(&[1, 2, 1])).unwrap());
        assert!(via_reg1.run(&nats(&[1, 2, 2])).unwrap());
        assert!(!via_reg1.run(&nats(&[1, 2, 3])).unwrap());
    }
}
