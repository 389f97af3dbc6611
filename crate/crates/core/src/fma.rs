//! Register machines with equality guards, and translations between them
//! and the nominal automata of [`crate::automata`] (equality symmetry only).
//!
//! A machine here has finitely many *control states* and finitely many
//! *registers*; a register either holds a data value or is empty.  Each
//! transition carries a finite label and a boolean *guard* over three groups
//! of operands — the register contents before the step (`before.i`), the
//! letter being read (`input`), and the register contents after the step
//! (`after.j`).  A comparison only holds when both operands hold values: an
//! empty register satisfies neither `==` nor `!=`, so `before.0 ==
//! before.0` tests that register 0 is full and `!(before.0 == before.0)`
//! that it is empty.  Reading a letter, the machine may move to any
//! configuration the guard of some transition admits, which covers
//! nondeterministic guessing: a guard that pins `after.j` to nothing lets
//! register `j` pick up an arbitrary value.
//!
//! Translations:
//!
//! * [`fma_to_nfa`] encodes configurations as an orbit-finite state set with
//!   one orbit per control state and register definedness-and-equality
//!   pattern, and decides each candidate transition orbit on a concrete
//!   representative.
//! * [`nfa_to_fma`] compiles any equality-symmetry [`NominalNfa`] into
//!   register form, flattening local symmetries into ordered registers.
//! * [`dfa_to_det_fma`] turns a deterministic register automaton into a
//!   machine in which *exactly one* transition fires for every configuration
//!   and letter; configurations that do not encode a state of the source
//!   automaton fall into a rejecting sink.

use std::collections::BTreeSet;
use std::fmt;

use crate::automata::{
    alphabet_of, eps_eliminate, fresh_naturals, strip_comment, tokenize_line, Letter, NominalNfa,
};
use crate::nomset::{product, NomSet};
use crate::symmetry::{Backend, DataValue};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Guards.
// ---------------------------------------------------------------------------

/// One operand of a guard comparison: a register content before the step,
/// the letter being read, or a register content after the step.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Operand {
    /// Content of register `i` before the step (empty when the register is).
    Before(usize),
    /// The data value of the letter being read (always present).
    Input,
    /// Content of register `i` after the step.
    After(usize),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Before(i) => write!(f, "before.{i}"),
            Operand::Input => write!(f, "input"),
            Operand::After(i) => write!(f, "after.{i}"),
        }
    }
}

/// A boolean combination of equality comparisons between operands.
///
/// `Eq` holds when both operands are present and equal, `Ne` when both are
/// present and different; an empty register satisfies neither.  `!` is
/// ordinary boolean negation, so `!(x == y)` also holds when either side is
/// empty while `x != y` does not.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Constraint {
    Eq(Operand, Operand),
    Ne(Operand, Operand),
    Not(Box<Constraint>),
    And(Box<Constraint>, Box<Constraint>),
    Or(Box<Constraint>, Box<Constraint>),
}

impl Constraint {
    /// A guard that holds at every step (the input letter always carries a
    /// value, so comparing it to itself succeeds).
    pub fn always() -> Constraint {
        Constraint::Eq(Operand::Input, Operand::Input)
    }

    /// A guard that never holds.
    pub fn never() -> Constraint {
        Constraint::Ne(Operand::Input, Operand::Input)
    }

    /// Left-nested conjunction; the empty conjunction is [`always`](Self::always).
    pub fn conj(parts: Vec<Constraint>) -> Constraint {
        let mut it = parts.into_iter();
        match it.next() {
            None => Constraint::always(),
            Some(first) => it.fold(first, |l, r| Constraint::And(Box::new(l), Box::new(r))),
        }
    }

    /// Left-nested disjunction; the empty disjunction is [`never`](Self::never).
    pub fn disj(parts: Vec<Constraint>) -> Constraint {
        let mut it = parts.into_iter();
        match it.next() {
            None => Constraint::never(),
            Some(first) => it.fold(first, |l, r| Constraint::Or(Box::new(l), Box::new(r))),
        }
    }

    /// Evaluates the guard on a step: register contents before, the letter's
    /// value, and register contents after.
    pub fn eval(
        &self,
        before: &[Option<DataValue>],
        input: &DataValue,
        after: &[Option<DataValue>],
    ) -> bool {
        let look = |op: &Operand| -> Option<&DataValue> {
            match op {
                Operand::Before(i) => before.get(*i).and_then(|v| v.as_ref()),
                Operand::Input => Some(input),
                Operand::After(i) => after.get(*i).and_then(|v| v.as_ref()),
            }
        };
        match self {
            Constraint::Eq(a, b) => matches!((look(a), look(b)), (Some(x), Some(y)) if x == y),
            Constraint::Ne(a, b) => matches!((look(a), look(b)), (Some(x), Some(y)) if x != y),
            Constraint::Not(c) => !c.eval(before, input, after),
            Constraint::And(l, r) => l.eval(before, input, after) && r.eval(before, input, after),
            Constraint::Or(l, r) => l.eval(before, input, after) || r.eval(before, input, after),
        }
    }

    /// Checks that every register operand is below `registers`.
    fn check_registers(&self, registers: usize) -> Result<()> {
        let mut ops = Vec::new();
        self.operands(&mut ops);
        for op in ops {
            let idx = match op {
                Operand::Before(i) | Operand::After(i) => i,
                Operand::Input => continue,
            };
            if idx >= registers {
                return Err(Error::Validation(format!(
                    "guard operand `{op}` out of range: the machine has {registers} register(s)"
                )));
            }
        }
        Ok(())
    }

    fn operands(&self, out: &mut Vec<Operand>) {
        match self {
            Constraint::Eq(a, b) | Constraint::Ne(a, b) => {
                out.push(*a);
                out.push(*b);
            }
            Constraint::Not(c) => c.operands(out),
            Constraint::And(l, r) | Constraint::Or(l, r) => {
                l.operands(out);
                r.operands(out);
            }
        }
    }

    /// Binding strength used for printing with minimal parentheses:
    /// `||` binds loosest, then `&&`, then comparisons and `!`.
    fn prec(&self) -> u8 {
        match self {
            Constraint::Or(..) => 1,
            Constraint::And(..) => 2,
            _ => 3,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        let paren = self.prec() < ctx;
        if paren {
            write!(f, "(")?;
        }
        match self {
            Constraint::Eq(a, b) => write!(f, "{a} == {b}")?,
            Constraint::Ne(a, b) => write!(f, "{a} != {b}")?,
            Constraint::Not(c) => {
                write!(f, "!(")?;
                c.fmt_prec(f, 1)?;
                write!(f, ")")?;
            }
            Constraint::And(l, r) => {
                l.fmt_prec(f, 2)?;
                write!(f, " && ")?;
                r.fmt_prec(f, 3)?;
            }
            Constraint::Or(l, r) => {
                l.fmt_prec(f, 1)?;
                write!(f, " || ")?;
                r.fmt_prec(f, 2)?;
            }
        }
        if paren {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 1)
    }
}

// ---------------------------------------------------------------------------
// Guard text.
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq, Eq, Debug)]
enum GuardTok {
    Op(Operand),
    EqOp,
    NeOp,
    AndOp,
    OrOp,
    Bang,
    LPar,
    RPar,
    True,
    False,
}

impl fmt::Display for GuardTok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuardTok::Op(o) => write!(f, "{o}"),
            GuardTok::EqOp => write!(f, "=="),
            GuardTok::NeOp => write!(f, "!="),
            GuardTok::AndOp => write!(f, "&&"),
            GuardTok::OrOp => write!(f, "||"),
            GuardTok::Bang => write!(f, "!"),
            GuardTok::LPar => write!(f, "("),
            GuardTok::RPar => write!(f, ")"),
            GuardTok::True => write!(f, "true"),
            GuardTok::False => write!(f, "false"),
        }
    }
}

fn lex_guard(text: &str) -> std::result::Result<Vec<GuardTok>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '(' => {
                out.push(GuardTok::LPar);
                i += 1;
            }
            ')' => {
                out.push(GuardTok::RPar);
                i += 1;
            }
            '=' => {
                if chars.get(i + 1) == Some(&'=') {
                    out.push(GuardTok::EqOp);
                    i += 2;
                } else {
                    return Err("single `=`; comparisons are written `==`".into());
                }
            }
            '!' => {
                if chars.get(i + 1) == Some(&'=') {
                    out.push(GuardTok::NeOp);
                    i += 2;
                } else {
                    out.push(GuardTok::Bang);
                    i += 1;
                }
            }
            '&' => {
                if chars.get(i + 1) == Some(&'&') {
                    out.push(GuardTok::AndOp);
                    i += 2;
                } else {
                    return Err("single `&`; conjunction is written `&&`".into());
                }
            }
            '|' => {
                if chars.get(i + 1) == Some(&'|') {
                    out.push(GuardTok::OrOp);
                    i += 2;
                } else {
                    return Err("single `|`; disjunction is written `||`".into());
                }
            }
            c if c.is_alphanumeric() || c == '_' || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.')
                {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                out.push(match word.as_str() {
                    "input" => GuardTok::Op(Operand::Input),
                    "true" => GuardTok::True,
                    "false" => GuardTok::False,
                    w => {
                        let (kind, idx) = if let Some(rest) = w.strip_prefix("before.") {
                            (Operand::Before as fn(usize) -> Operand, rest)
                        } else if let Some(rest) = w.strip_prefix("after.") {
                            (Operand::After as fn(usize) -> Operand, rest)
                        } else {
                            return Err(format!(
                                "unknown operand `{w}`; operands are `before.N`, `input` and \
                                 `after.N`"
                            ));
                        };
                        let idx: usize = idx
                            .parse()
                            .map_err(|_| format!("bad register index in `{w}`"))?;
                        GuardTok::Op(kind(idx))
                    }
                });
            }
            c => return Err(format!("unexpected character `{c}`")),
        }
    }
    Ok(out)
}

struct GuardParser {
    toks: Vec<GuardTok>,
    pos: usize,
}

impl GuardParser {
    fn peek(&self) -> Option<&GuardTok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<GuardTok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn parse_or(&mut self) -> std::result::Result<Constraint, String> {
        let mut left = self.parse_and()?;
        while self.peek() == Some(&GuardTok::OrOp) {
            self.next();
            let right = self.parse_and()?;
            left = Constraint::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> std::result::Result<Constraint, String> {
        let mut left = self.parse_unary()?;
        while self.peek() == Some(&GuardTok::AndOp) {
            self.next();
            let right = self.parse_unary()?;
            left = Constraint::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> std::result::Result<Constraint, String> {
        match self.next() {
            Some(GuardTok::Bang) => match self.peek() {
                Some(GuardTok::LPar) | Some(GuardTok::Bang) | Some(GuardTok::True)
                | Some(GuardTok::False) => Ok(Constraint::Not(Box::new(self.parse_unary()?))),
                _ => Err("`!` must be followed by a parenthesized guard, `!`, `true` or \
                          `false`; write `x != y` for an inequality"
                    .into()),
            },
            Some(GuardTok::LPar) => {
                let inner = self.parse_or()?;
                match self.next() {
                    Some(GuardTok::RPar) => Ok(inner),
                    _ => Err("missing `)`".into()),
                }
            }
            Some(GuardTok::True) => Ok(Constraint::always()),
            Some(GuardTok::False) => Ok(Constraint::never()),
            Some(GuardTok::Op(a)) => {
                let equal = match self.next() {
                    Some(GuardTok::EqOp) => true,
                    Some(GuardTok::NeOp) => false,
                    other => {
                        return Err(match other {
                            Some(t) => format!("expected `==` or `!=` after `{a}`, found `{t}`"),
                            None => format!("expected `==` or `!=` after `{a}`"),
                        })
                    }
                };
                match self.next() {
                    Some(GuardTok::Op(b)) => Ok(if equal {
                        Constraint::Eq(a, b)
                    } else {
                        Constraint::Ne(a, b)
                    }),
                    other => Err(match other {
                        Some(t) => format!("expected an operand after the comparison, found `{t}`"),
                        None => "expected an operand after the comparison".into(),
                    }),
                }
            }
            other => Err(match other {
                Some(t) => format!("expected a comparison, `!`, `(`, `true` or `false`, found `{t}`"),
                None => "empty guard".into(),
            }),
        }
    }
}

fn parse_guard_text(text: &str) -> std::result::Result<Constraint, String> {
    let toks = lex_guard(text)?;
    let mut p = GuardParser { toks, pos: 0 };
    let c = p.parse_or()?;
    match p.peek() {
        None => Ok(c),
        Some(t) => Err(format!("trailing `{t}` after a complete guard")),
    }
}

/// Parses a guard from text.  Atoms compare `before.N`, `input` and
/// `after.N` with `==` or `!=`; `&&`, `||`, `!` and parentheses combine
/// them, and the literals `true` and `false` are accepted as shorthands for
/// `input == input` and `input != input`.
pub fn parse_constraint(text: &str) -> Result<Constraint> {
    parse_guard_text(text).map_err(|msg| Error::Validation(format!("bad guard `{text}`: {msg}")))
}

// ---------------------------------------------------------------------------
// The machine.
// ---------------------------------------------------------------------------

/// One guarded transition: source control, label, guard, target control.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct FmaTransition {
    pub source: usize,
    pub label: usize,
    pub guard: Constraint,
    pub target: usize,
}

/// A register machine with equality guards over the equality symmetry.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Fma {
    labels: Vec<String>,
    controls: Vec<String>,
    registers: usize,
    initial: BTreeSet<usize>,
    accepting: BTreeSet<usize>,
    trans: Vec<FmaTransition>,
}

/// A configuration: a control state plus the register contents, each either
/// a value or empty.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct FmaConfig {
    pub control: usize,
    pub regs: Vec<Option<DataValue>>,
}

impl fmt::Display for FmaConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "control {} [", self.control)?;
        for (i, r) in self.regs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match r {
                Some(v) => write!(f, "{v}")?,
                None => write!(f, "-")?,
            }
        }
        write!(f, "]")
    }
}

impl Fma {
    /// Builds and validates a machine.
    pub fn new(
        labels: Vec<String>,
        controls: Vec<String>,
        registers: usize,
        initial: BTreeSet<usize>,
        accepting: BTreeSet<usize>,
        trans: Vec<FmaTransition>,
    ) -> Result<Fma> {
        if labels.is_empty() {
            return Err(Error::Validation("the machine needs at least one label".into()));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(Error::Validation(format!("duplicate label {l}")));
            }
        }
        let mut seen = BTreeSet::new();
        for c in &controls {
            if !seen.insert(c.clone()) {
                return Err(Error::Validation(format!("duplicate control name {c}")));
            }
        }
        for &c in initial.iter().chain(accepting.iter()) {
            if c >= controls.len() {
                return Err(Error::Validation(format!(
                    "control index {c} out of range 0..{}",
                    controls.len()
                )));
            }
        }
        for t in &trans {
            if t.source >= controls.len() || t.target >= controls.len() {
                return Err(Error::Validation(format!(
                    "transition endpoint out of range 0..{}",
                    controls.len()
                )));
            }
            if t.label >= labels.len() {
                return Err(Error::Validation(format!(
                    "transition label index {} out of range 0..{}",
                    t.label,
                    labels.len()
                )));
            }
            t.guard.check_registers(registers)?;
        }
        Ok(Fma { labels, controls, registers, initial, accepting, trans })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    pub fn controls(&self) -> &[String] {
        &self.controls
    }

    pub fn control_index(&self, name: &str) -> Option<usize> {
        self.controls.iter().position(|c| c == name)
    }

    pub fn registers(&self) -> usize {
        self.registers
    }

    pub fn initial(&self) -> &BTreeSet<usize> {
        &self.initial
    }

    pub fn accepting(&self) -> &BTreeSet<usize> {
        &self.accepting
    }

    pub fn transitions(&self) -> &[FmaTransition] {
        &self.trans
    }

    /// The configurations a run starts in: every initial control with all
    /// registers empty.
    pub fn initial_configs(&self) -> BTreeSet<FmaConfig> {
        self.initial
            .iter()
            .map(|&c| FmaConfig { control: c, regs: vec![None; self.registers] })
            .collect()
    }

    fn check_letter(&self, letter: &Letter) -> Result<()> {
        if letter.label >= self.labels.len() {
            return Err(Error::Validation(format!(
                "unknown label index {} (the machine has {})",
                letter.label,
                self.labels.len()
            )));
        }
        check_value(&letter.value)
    }

    fn check_config(&self, config: &FmaConfig) -> Result<()> {
        if config.control >= self.controls.len() {
            return Err(Error::Validation(format!(
                "control index {} out of range 0..{}",
                config.control,
                self.controls.len()
            )));
        }
        if config.regs.len() != self.registers {
            return Err(Error::SizeMismatch(format!(
                "configuration has {} registers, the machine {}",
                config.regs.len(),
                self.registers
            )));
        }
        for v in config.regs.iter().flatten() {
            check_value(v)?;
        }
        Ok(())
    }
}

fn check_value(v: &DataValue) -> Result<()> {
    if v.backend() != Backend::Equality {
        return Err(Error::BackendMismatch(format!(
            "value {v} belongs to the {} symmetry; register machines work over equality",
            v.backend()
        )));
    }
    Ok(())
}

/// All `(transition index, successor)` pairs a configuration admits on a
/// letter.  Register contents after the step are drawn from the contents
/// before, the letter's value, and the supplied `guesses` pool (an empty
/// register is always an option), so the pool controls how far
/// nondeterministic guessing is explored.
pub fn fma_successors(
    m: &Fma,
    config: &FmaConfig,
    letter: &Letter,
    guesses: &[DataValue],
) -> Result<BTreeSet<(usize, FmaConfig)>> {
    m.check_config(config)?;
    m.check_letter(letter)?;
    for g in guesses {
        check_value(g)?;
    }
    let mut candidates: BTreeSet<DataValue> =
        config.regs.iter().flatten().cloned().collect();
    candidates.insert(letter.value.clone());
    candidates.extend(guesses.iter().cloned());
    let candidates: Vec<DataValue> = candidates.into_iter().collect();

    let mut out = BTreeSet::new();
    for (ti, t) in m.trans.iter().enumerate() {
        if t.source != config.control || t.label != letter.label {
            continue;
        }
        let mut stack: Vec<Vec<Option<DataValue>>> = vec![Vec::new()];
        while let Some(partial) = stack.pop() {
            if partial.len() == m.registers {
                if t.guard.eval(&config.regs, &letter.value, &partial) {
                    out.insert((ti, FmaConfig { control: t.target, regs: partial }));
                }
                continue;
            }
            let mut empty = partial.clone();
            empty.push(None);
            stack.push(empty);
            for v in &candidates {
                let mut filled = partial.clone();
                filled.push(Some(v.clone()));
                stack.push(filled);
            }
        }
    }
    Ok(out)
}

/// The set of configurations reachable from `config` in one step on
/// `letter`; see [`fma_successors`] for the role of `guesses`.
pub fn fma_step(
    m: &Fma,
    config: &FmaConfig,
    letter: &Letter,
    guesses: &[DataValue],
) -> Result<BTreeSet<FmaConfig>> {
    Ok(fma_successors(m, config, letter, guesses)?
        .into_iter()
        .map(|(_, c)| c)
        .collect())
}

/// Decides whether the machine accepts a word, by breadth-first search over
/// configurations whose register values are drawn from the word plus twice
/// the register count many fresh values.  Guards only compare for equality,
/// so values the word never mentions are interchangeable; a step can both
/// carry a full register file of fresh values and guess a disjoint one,
/// which the doubled allowance covers.  The search is therefore exact.
pub fn fma_accepts(m: &Fma, word: &[Letter]) -> Result<bool> {
    for l in word {
        m.check_letter(l)?;
    }
    let word_values: BTreeSet<DataValue> = word.iter().map(|l| l.value.clone()).collect();
    let mut pool: Vec<DataValue> = word_values.iter().cloned().collect();
    pool.extend(fresh_naturals(&word_values, 2 * m.registers));

    let mut current = m.initial_configs();
    for letter in word {
        let mut next = BTreeSet::new();
        for c in &current {
            next.extend(fma_step(m, c, letter, &pool)?);
        }
        current = next;
        if current.is_empty() {
            return Ok(false);
        }
    }
    Ok(current.iter().any(|c| m.accepting.contains(&c.control)))
}

// ---------------------------------------------------------------------------
// Register patterns.
// ---------------------------------------------------------------------------

/// A definedness-and-equality pattern of the registers: `None` marks an
/// empty register, `Some(b)` membership of value-block `b`, blocks numbered
/// by first occurrence.
type Pattern = Vec<Option<usize>>;

/// All patterns over `n` registers, the all-empty one first.
fn patterns(n: usize) -> Vec<Pattern> {
    fn rec(n: usize, prefix: &mut Pattern, out: &mut Vec<Pattern>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next_block = prefix.iter().flatten().copied().max().map_or(0, |m| m + 1);
        prefix.push(None);
        rec(n, prefix, out);
        prefix.pop();
        for b in 0..=next_block {
            prefix.push(Some(b));
            rec(n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::new(), &mut out);
    out
}

/// Number of value blocks of a pattern.
fn block_count(p: &Pattern) -> usize {
    p.iter().flatten().copied().max().map_or(0, |m| m + 1)
}

/// Compact text for a pattern: `-` per empty register, the block number per
/// full one, e.g. `0-1` or `00`.
fn pattern_string(p: &Pattern) -> String {
    p.iter()
        .map(|slot| match slot {
            None => '-',
            Some(b) => std::char::from_digit(*b as u32, 36).expect("block count fits one digit"),
        })
        .collect()
}

/// Rebuilds register contents from a pattern and per-block values.
fn regs_from_pattern(p: &Pattern, blocks: &[DataValue]) -> Vec<Option<DataValue>> {
    p.iter().map(|slot| slot.map(|b| blocks[b].clone())).collect()
}

// ---------------------------------------------------------------------------
// Machine → nondeterministic automaton.
// ---------------------------------------------------------------------------

/// Encodes the configuration space as a nominal automaton: one state orbit
/// per control state and register pattern (named `control[pattern]`), and a
/// transition orbit for every joint value-overlap class of (source
/// configuration, letter, target configuration) on which some guard holds —
/// guard satisfaction is constant on each class, so a single concrete
/// representative decides it.
pub fn fma_to_nfa(m: &Fma) -> Result<NominalNfa> {
    let pats = patterns(m.registers);
    let mut names = Vec::new();
    let mut states = NomSet::new(Backend::Equality, Vec::new())?;
    for control in &m.controls {
        for p in &pats {
            names.push(format!("{control}[{}]", pattern_string(p)));
            states = states.sum(&NomSet::dtuple(block_count(p)))?;
        }
    }
    let orbit_of = |control: usize, pat: usize| control * pats.len() + pat;

    let initial: BTreeSet<usize> = m.initial.iter().map(|&c| orbit_of(c, 0)).collect();
    let accepting: BTreeSet<usize> = m
        .accepting
        .iter()
        .flat_map(|&c| (0..pats.len()).map(move |p| orbit_of(c, p)))
        .collect();

    let alphabet = alphabet_of(Backend::Equality, m.labels.len());
    let qa = product(&states, &alphabet)?;
    let qaq = product(qa.set(), &states)?;

    let mut trans = BTreeSet::new();
    for o in 0..qaq.set().orbit_count() {
        let tag = qaq.tag(o);
        let qa_tag = qa.tag(tag.left_orbit);
        let (src_control, src_pat) =
            (qa_tag.left_orbit / pats.len(), qa_tag.left_orbit % pats.len());
        let label = qa_tag.right_orbit;
        let (tgt_control, tgt_pat) = (tag.right_orbit / pats.len(), tag.right_orbit % pats.len());
        let guards: Vec<&Constraint> = m
            .trans
            .iter()
            .filter(|t| t.source == src_control && t.label == label && t.target == tgt_control)
            .map(|t| &t.guard)
            .collect();
        if guards.is_empty() {
            continue;
        }
        let z = qaq.set().realize(o)?;
        let (xa, y) = qaq.unpair(&z)?;
        let (x, a) = qa.unpair(&xa)?;
        let before = regs_from_pattern(&pats[src_pat], x.valuation());
        let input = a.valuation()[0].clone();
        let after = regs_from_pattern(&pats[tgt_pat], y.valuation());
        if guards.iter().any(|g| g.eval(&before, &input, &after)) {
            trans.insert(o);
        }
    }

    NominalNfa::new(
        Backend::Equality,
        names,
        states,
        m.labels.clone(),
        initial,
        accepting,
        trans,
        BTreeSet::new(),
    )
}

// ---------------------------------------------------------------------------
// Nondeterministic automaton → machine.
// ---------------------------------------------------------------------------

/// Enumerates the ways of grouping `slots` items into equal-value classes
/// (as block indices in first-occurrence order) such that no two items of
/// the same `group` share a class — groups mark slots that are known to be
/// pairwise distinct.
fn cross_patterns(groups: &[usize]) -> Vec<Vec<usize>> {
    fn rec(groups: &[usize], prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let i = prefix.len();
        if i == groups.len() {
            out.push(prefix.clone());
            return;
        }
        let next_block = prefix.iter().copied().max().map_or(0, |m| m + 1);
        'blocks: for b in 0..=next_block {
            if b < next_block {
                for j in 0..i {
                    if prefix[j] == b && groups[j] == groups[i] {
                        continue 'blocks;
                    }
                }
            }
            prefix.push(b);
            rec(groups, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(groups, &mut Vec::new(), &mut out);
    out
}

/// The guard conjuncts pinning the register contents before the step to
/// exactly the pattern `p` (over `n` registers).
fn before_pin(p: &Pattern, n: usize) -> Vec<Constraint> {
    let mut parts = Vec::new();
    for i in 0..n {
        parts.push(match p[i] {
            Some(_) => Constraint::Eq(Operand::Before(i), Operand::Before(i)),
            None => Constraint::Not(Box::new(Constraint::Eq(
                Operand::Before(i),
                Operand::Before(i),
            ))),
        });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if let (Some(a), Some(b)) = (p[i], p[j]) {
                parts.push(if a == b {
                    Constraint::Eq(Operand::Before(i), Operand::Before(j))
                } else {
                    Constraint::Ne(Operand::Before(i), Operand::Before(j))
                });
            }
        }
    }
    parts
}

/// The guard conjuncts pinning the register contents after the step: empty
/// registers per `p_tgt`, equalities among full ones per `p_tgt`, and each
/// value block's relation to the input letter and to the source blocks per
/// the joint overlap `cross` (slots: source blocks, then the input, then
/// target blocks).  A source block with no register under `p_src` — the
/// all-empty pattern of a fresh initial control — contributes no conjunct:
/// its value is projected away.
fn after_pin(
    p_src: &Pattern,
    p_tgt: &Pattern,
    n: usize,
    cross: &[usize],
    k_src: usize,
) -> Vec<Constraint> {
    let mut parts = Vec::new();
    for j in 0..n {
        if p_tgt[j].is_none() {
            parts.push(Constraint::Not(Box::new(Constraint::Eq(
                Operand::After(j),
                Operand::After(j),
            ))));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if let (Some(a), Some(b)) = (p_tgt[i], p_tgt[j]) {
                parts.push(if a == b {
                    Constraint::Eq(Operand::After(i), Operand::After(j))
                } else {
                    Constraint::Ne(Operand::After(i), Operand::After(j))
                });
            }
        }
    }
    let k_tgt = block_count(p_tgt);
    for bt in 0..k_tgt {
        let j = p_tgt.iter().position(|s| *s == Some(bt)).expect("target block is inhabited");
        let tgt_slot = cross[k_src + 1 + bt];
        parts.push(if tgt_slot == cross[k_src] {
            Constraint::Eq(Operand::After(j), Operand::Input)
        } else {
            Constraint::Ne(Operand::After(j), Operand::Input)
        });
        for bs in 0..k_src {
            let Some(i) = p_src.iter().position(|s| *s == Some(bs)) else { continue };
            parts.push(if tgt_slot == cross[bs] {
                Constraint::Eq(Operand::After(j), Operand::Before(i))
            } else {
                Constraint::Ne(Operand::After(j), Operand::Before(i))
            });
        }
    }
    parts
}

/// The guard conjuncts relating the input letter to the source blocks per
/// the joint overlap.
fn input_pin(p_src: &Pattern, cross: &[usize], k_src: usize) -> Vec<Constraint> {
    let mut parts = Vec::new();
    for bs in 0..k_src {
        let i = p_src.iter().position(|s| *s == Some(bs)).expect("block is inhabited");
        parts.push(if cross[k_src] == cross[bs] {
            Constraint::Eq(Operand::Input, Operand::Before(i))
        } else {
            Constraint::Ne(Operand::Input, Operand::Before(i))
        });
    }
    parts
}

/// Compiles an equality-symmetry nondeterministic automaton into register
/// form.  Spontaneous moves are eliminated first.  With `n` the largest
/// orbit carrier, the machine has `n` registers and one control state per
/// state orbit and compatible register pattern (named `state[pattern]`);
/// local symmetries disappear, several configurations may encode one state.
/// Each transition orbit is compiled, per source and target pattern, into a
/// guard enumerating the joint value overlaps that realize the orbit —
/// checked on concrete representatives.  When some initial orbit carries
/// registers (so no all-empty configuration encodes it), a fresh initial
/// control is added whose outgoing guards existentially project those
/// states' values away.
pub fn nfa_to_fma(a: &NominalNfa) -> Result<Fma> {
    if a.backend() != Backend::Equality {
        return Err(Error::BackendMismatch(format!(
            "register machines work over the equality symmetry, not {}",
            a.backend()
        )));
    }
    let eliminated;
    let a = if a.eps_orbits().is_empty() {
        a
    } else {
        eliminated = eps_eliminate(a)?;
        &eliminated
    };

    let n = a.states().orbits().iter().map(|o| o.dimension()).max().unwrap_or(0);
    let pats = patterns(n);

    // Control states: (orbit, compatible pattern) pairs in orbit order.
    let mut controls = Vec::new();
    let mut control_of = vec![Vec::new(); a.states().orbit_count()];
    for (i, orbit) in a.states().orbits().iter().enumerate() {
        for (pi, p) in pats.iter().enumerate() {
            if block_count(p) == orbit.dimension() {
                control_of[i].push((pi, controls.len()));
                controls.push(format!("{}[{}]", a.state_names()[i], pattern_string(p)));
            }
        }
    }

    let needs_bridge = a
        .initial()
        .member_orbits()
        .iter()
        .any(|&i| a.states().orbits()[i].dimension() > 0);
    let bridge = if needs_bridge {
        let mut name = String::from("init");
        while controls.contains(&name) {
            name.push('\'');
        }
        controls.push(name);
        Some(controls.len() - 1)
    } else {
        None
    };

    let mut initial: BTreeSet<usize> = a
        .initial()
        .member_orbits()
        .iter()
        .filter(|&&i| a.states().orbits()[i].dimension() == 0)
        .map(|&i| control_of[i][0].1)
        .collect();
    initial.extend(bridge);

    let mut accepting: BTreeSet<usize> = a
        .accepting()
        .member_orbits()
        .iter()
        .flat_map(|&i| control_of[i].iter().map(|&(_, c)| c))
        .collect();
    if let Some(b) = bridge {
        if a.initial()
            .member_orbits()
            .iter()
            .any(|i| a.accepting().member_orbits().contains(i))
        {
            accepting.insert(b);
        }
    }

    let mut trans = Vec::new();
    for &t in a.trans_orbits() {
        let tag = a.qaq().tag(t);
        let qa_tag = a.qa().tag(tag.left_orbit);
        let src_orbit = qa_tag.left_orbit;
        let label = qa_tag.right_orbit;
        let tgt_orbit = tag.right_orbit;
        let k_src = a.states().orbits()[src_orbit].dimension();
        let k_tgt = a.states().orbits()[tgt_orbit].dimension();

        // Overlap slots: source blocks, the input letter, target blocks.
        // Source blocks hold pairwise distinct values, as do target blocks.
        let mut groups = vec![1usize; k_src];
        groups.push(2);
        groups.extend(vec![3usize; k_tgt]);
        let mut valid = Vec::new();
        for cross in cross_patterns(&groups) {
            let values: Vec<DataValue> =
                cross.iter().map(|&b| DataValue::Nat(b as u64)).collect();
            let x = a.states().element_in_orbit(src_orbit, &values[..k_src])?;
            let letter = a.alphabet().element_in_orbit(label, &values[k_src..=k_src])?;
            let y = a.states().element_in_orbit(tgt_orbit, &values[k_src + 1..])?;
            if a.triple_orbit(&x, &letter, &y)? == t {
                valid.push(cross);
            }
        }
        if valid.is_empty() {
            continue;
        }

        for &(src_pi, src_control) in &control_of[src_orbit] {
            for &(tgt_pi, tgt_control) in &control_of[tgt_orbit] {
                let p_src = &pats[src_pi];
                let p_tgt = &pats[tgt_pi];
                let cases: Vec<Constraint> = valid
                    .iter()
                    .map(|cross| {
                        let mut parts = before_pin(p_src, n);
                        parts.extend(input_pin(p_src, cross, k_src));
                        parts.extend(after_pin(p_src, p_tgt, n, cross, k_src));
                        Constraint::conj(parts)
                    })
                    .collect();
                trans.push(FmaTransition {
                    source: src_control,
                    label,
                    guard: Constraint::disj(cases),
                    target: tgt_control,
                });
            }
        }

        if let Some(b) = bridge {
            if a.initial().member_orbits().contains(&src_orbit) && k_src > 0 {
                for &(tgt_pi, tgt_control) in &control_of[tgt_orbit] {
                    let p_tgt = &pats[tgt_pi];
                    // Project the source state's values away: drop every
                    // conjunct that mentions a source register, keep the
                    // letter/target relations, and pin all registers empty
                    // before the step (the bridge control never fills any).
                    let empty_src: Pattern = vec![None; n];
                    let cases: BTreeSet<Constraint> = valid
                        .iter()
                        .map(|cross| {
                            let mut parts = before_pin(&empty_src, n);
                            parts.extend(after_pin(&empty_src, p_tgt, n, cross, k_src));
                            Constraint::conj(parts)
                        })
                        .collect();
                    trans.push(FmaTransition {
                        source: b,
                        label,
                        guard: Constraint::disj(cases.into_iter().collect()),
                        target: tgt_control,
                    });
                }
            }
        }
    }

    Fma::new(a.labels().to_vec(), controls, n, initial, accepting, trans)
}

// ---------------------------------------------------------------------------
// Deterministic automaton → deterministic machine.
// ---------------------------------------------------------------------------

/// Compiles a deterministic register automaton into a register machine that
/// fires exactly one transition for every configuration and letter.
///
/// With `n` the largest register count, each state becomes a control whose
/// live configurations keep the state's registers in positions `0..k`,
/// pairwise distinct, rest empty.  Per state and letter class (the letter
/// equals register `p`, or is fresh) the automaton is stepped once on a
/// concrete representative and the target valuation — whose values the
/// source registers and letter always cover — is turned into explicit
/// `after` assignments.  Configurations that fail their control's register
/// pattern fall into a rejecting `sink` control with all registers cleared,
/// keeping the transition relation a total function.
pub fn dfa_to_det_fma(d: &crate::automata::FraisseDfa) -> Result<Fma> {
    if d.backend() != Backend::Equality {
        return Err(Error::BackendMismatch(format!(
            "register machines work over the equality symmetry, not {}",
            d.backend()
        )));
    }
    let n = d.states().iter().map(|s| s.orbit.dimension()).max().unwrap_or(0);
    let mut controls: Vec<String> = d.states().iter().map(|s| s.name.clone()).collect();
    let sink = if n > 0 {
        let mut name = String::from("sink");
        while controls.contains(&name) {
            name.push('\'');
        }
        controls.push(name);
        Some(controls.len() - 1)
    } else {
        None
    };

    let mut trans = Vec::new();
    for (q, state) in d.states().iter().enumerate() {
        let k = state.orbit.dimension();
        let reg_values: Vec<DataValue> = (0..k as u64).map(DataValue::Nat).collect();
        let config = d.config(q, &reg_values)?;
        let live: Pattern = (0..n).map(|i| if i < k { Some(i) } else { None }).collect();
        let pin = before_pin(&live, n);

        for e in 0..=k {
            let letter = DataValue::Nat(e as u64);
            let target = d.step(&config, &letter)?;
            let mut parts = pin.clone();
            if e < k {
                parts.push(Constraint::Eq(Operand::Input, Operand::Before(e)));
            } else {
                for i in 0..k {
                    parts.push(Constraint::Ne(Operand::Input, Operand::Before(i)));
                }
            }
            for (j, v) in target.valuation.iter().enumerate() {
                let source = match v {
                    DataValue::Nat(v) if (*v as usize) < k => Operand::Before(*v as usize),
                    _ => Operand::Input,
                };
                parts.push(Constraint::Eq(Operand::After(j), source));
            }
            for j in target.valuation.len()..n {
                parts.push(Constraint::Not(Box::new(Constraint::Eq(
                    Operand::After(j),
                    Operand::After(j),
                ))));
            }
            trans.push(FmaTransition {
                source: q,
                label: 0,
                guard: Constraint::conj(parts),
                target: target.state,
            });
        }

        if let Some(s) = sink {
            let mut parts = vec![Constraint::Not(Box::new(Constraint::conj(pin)))];
            parts.extend(clear_all(n));
            trans.push(FmaTransition {
                source: q,
                label: 0,
                guard: Constraint::conj(parts),
                target: s,
            });
        }
    }
    if let Some(s) = sink {
        trans.push(FmaTransition {
            source: s,
            label: 0,
            guard: Constraint::conj(clear_all(n)),
            target: s,
        });
    }

    Fma::new(
        vec![".".into()],
        controls,
        n,
        BTreeSet::from([d.initial()]),
        d.accepting().clone(),
        trans,
    )
}

/// Conjuncts pinning every register empty after the step.
fn clear_all(n: usize) -> Vec<Constraint> {
    (0..n)
        .map(|j| Constraint::Not(Box::new(Constraint::Eq(Operand::After(j), Operand::After(j)))))
        .collect()
}

// ---------------------------------------------------------------------------
// Text format.
// ---------------------------------------------------------------------------

/// Parses a machine from text.  The format: an `fma` header; an optional
/// `labels a b …` line (default `.`); a `registers N` line; `control`,
/// `initial` and `accept` lines naming controls (repeatable, appending);
/// and one `trans SOURCE LABEL "GUARD" TARGET` line per transition.  Lines
/// after the header come in any order and `#` starts a comment.
pub fn parse_fma(text: &str) -> Result<Fma> {
    let mut lines: Vec<(usize, String)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l).to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::parse(1, 1, "empty input; expected an `fma` header"));
    }
    let (headline, header) = lines.remove(0);
    if tokenize_line(&header, headline)? != ["fma"] {
        return Err(Error::parse(headline, 1, "expected the `fma` header first"));
    }

    let mut labels: Option<Vec<String>> = None;
    let mut registers: Option<usize> = None;
    let mut controls: Vec<String> = Vec::new();
    let mut initial_names: Vec<(usize, String)> = Vec::new();
    let mut accept_names: Vec<(usize, String)> = Vec::new();
    let mut trans_lines: Vec<(usize, Vec<String>)> = Vec::new();

    for (lineno, line) in lines {
        let toks = tokenize_line(&line, lineno)?;
        match toks[0].as_str() {
            "labels" => {
                if labels.is_some() {
                    return Err(Error::parse(lineno, 1, "duplicate `labels` line"));
                }
                if toks.len() < 2 {
                    return Err(Error::parse(lineno, 1, "`labels` needs at least one label"));
                }
                labels = Some(toks[1..].to_vec());
            }
            "registers" => {
                if registers.is_some() {
                    return Err(Error::parse(lineno, 1, "duplicate `registers` line"));
                }
                if toks.len() != 2 {
                    return Err(Error::parse(lineno, 1, "expected `registers N`"));
                }
                registers = Some(toks[1].parse().map_err(|_| {
                    Error::parse(lineno, 1, format!("bad register count `{}`", toks[1]))
                })?);
            }
            "control" => controls.extend(toks[1..].iter().cloned()),
            "initial" => initial_names.extend(toks[1..].iter().map(|t| (lineno, t.clone()))),
            "accept" => accept_names.extend(toks[1..].iter().map(|t| (lineno, t.clone()))),
            "trans" => {
                if toks.len() != 5 {
                    return Err(Error::parse(
                        lineno,
                        1,
                        "expected `trans SOURCE LABEL \"GUARD\" TARGET`",
                    ));
                }
                trans_lines.push((lineno, toks));
            }
            other => {
                return Err(Error::parse(
                    lineno,
                    1,
                    format!(
                        "unknown keyword `{other}`; expected `labels`, `registers`, `control`, \
                         `initial`, `accept` or `trans`"
                    ),
                ))
            }
        }
    }

    let labels = labels.unwrap_or_else(|| vec![".".to_string()]);
    let registers =
        registers.ok_or_else(|| Error::parse(headline, 1, "missing `registers N` line"))?;

    let control_index = |lineno: usize, name: &str| -> Result<usize> {
        controls
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::parse(lineno, 1, format!("unknown control `{name}`")))
    };
    let mut initial = BTreeSet::new();
    for (lineno, name) in &initial_names {
        initial.insert(control_index(*lineno, name)?);
    }
    let mut accepting = BTreeSet::new();
    for (lineno, name) in &accept_names {
        accepting.insert(control_index(*lineno, name)?);
    }
    let mut trans = Vec::new();
    for (lineno, toks) in &trans_lines {
        let source = control_index(*lineno, &toks[1])?;
        let label = labels
            .iter()
            .position(|l| l == &toks[2])
            .ok_or_else(|| Error::parse(*lineno, 1, format!("unknown label `{}`", toks[2])))?;
        let guard = parse_guard_text(&toks[3])
            .map_err(|msg| Error::parse(*lineno, 1, format!("bad guard: {msg}")))?;
        let target = control_index(*lineno, &toks[4])?;
        trans.push(FmaTransition { source, label, guard, target });
    }

    Fma::new(labels, controls, registers, initial, accepting, trans)
}

/// Renders a machine in the format [`parse_fma`] reads.
pub fn write_fma(m: &Fma) -> String {
    let mut out = String::from("fma\n");
    out.push_str(&format!("labels {}\n", m.labels.join(" ")));
    out.push_str(&format!("registers {}\n", m.registers));
    if !m.controls.is_empty() {
        out.push_str(&format!("control {}\n", m.controls.join(" ")));
    }
    if !m.initial.is_empty() {
        let names: Vec<&str> = m.initial.iter().map(|&c| m.controls[c].as_str()).collect();
        out.push_str(&format!("initial {}\n", names.join(" ")));
    }
    if !m.accepting.is_empty() {
        let names: Vec<&str> = m.accepting.iter().map(|&c| m.controls[c].as_str()).collect();
        out.push_str(&format!("accept {}\n", names.join(" ")));
    }
    for t in &m.trans {
        out.push_str(&format!(
            "trans {} {} \"{}\" {}\n",
            m.controls[t.source], m.labels[t.label], t.guard, m.controls[t.target]
        ));
    }
    out
}
