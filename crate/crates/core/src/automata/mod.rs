//! Register automata over infinite data alphabets.
//!
//! Deterministic machines ([`FraisseDfa`]) keep, in every control state, a
//! tuple of registers whose mutual relations are pinned by a canonical shape
//! and whose interchangeability is pinned by a local symmetry group.  Input
//! letters are classified relative to the current registers into finitely
//! many *annotations*; each annotation has exactly one transition.
//! Nondeterministic machines ([`NominalNfa`]) describe states, letters and
//! transitions as orbit-finite sets and subsets of their products.

mod dfa;
mod nfa;

pub use dfa::{
    emptiness, equivalence_counterexample, minimize, parse_dfa, product_dfa, write_dfa, BoolOp,
    Config, DfaState, FraisseDfa, RunTrace,
};
pub use nfa::{
    eps_eliminate, membership_pool, nfa_concat, nfa_member, nfa_union, parse_nfa, write_nfa,
    Letter, Membership, NominalNfa, DEFAULT_POOL_CAP,
};
pub(crate) use nfa::{alphabet_of, fresh_naturals};

use std::collections::BTreeSet;
use std::fmt;

use crate::nomset::OrbitRepr;
use crate::perm::{Perm, PermGroup};
use crate::symmetry::{DataValue, FinStruct};
use crate::{Error, Result};

/// How an input letter sits relative to the registers of a control state.
///
/// `Extension(e)` covers letters fresh with respect to all registers; `e` is
/// a structure on `dim + 1` points whose last point is the letter and whose
/// first `dim` points carry the state shape.  `Distinguished(p)` covers
/// letters equal to register `p`; the index is the least register in its
/// symmetry class.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum AnnotationKind {
    Extension(FinStruct),
    Distinguished(usize),
}

/// One letter-class of a control state together with the symmetries that
/// preserve it.
///
/// `local_sym` acts on the *annotated carrier*: the state registers plus the
/// letter point for `Extension`, the state registers alone for
/// `Distinguished`.  It consists of the state symmetries that fix the
/// letter's position (extended to the new point for `Extension`).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub local_sym: PermGroup,
}

impl Annotation {
    /// Number of points the annotated structure has.
    pub fn carrier_size(&self) -> usize {
        self.local_sym.carrier_size()
    }

    /// Index of the letter inside the annotated carrier.
    pub fn star(&self) -> usize {
        match &self.kind {
            AnnotationKind::Extension(e) => e.size() - 1,
            AnnotationKind::Distinguished(p) => *p,
        }
    }

    /// The structure the annotated carrier induces: the extension itself, or
    /// the state shape when the letter coincides with a register.
    pub fn annotated_struct(&self, shape: &FinStruct) -> FinStruct {
        match &self.kind {
            AnnotationKind::Extension(e) => e.clone(),
            AnnotationKind::Distinguished(_) => shape.clone(),
        }
    }

    /// Render the annotation the way transition lines spell it: `reg 1` or
    /// `ext{0<*; *<1}` (listing the facts that involve the new point).
    pub fn describe(&self) -> String {
        describe_kind(&self.kind)
    }
}

/// Render an annotation kind as transition-line syntax.
pub fn describe_kind(kind: &AnnotationKind) -> String {
    match kind {
        AnnotationKind::Distinguished(p) => format!("reg {p}"),
        AnnotationKind::Extension(e) => {
            let star = e.size() - 1;
            let name = |i: usize| {
                if i == star {
                    "*".to_string()
                } else {
                    i.to_string()
                }
            };
            let mut parts = Vec::new();
            for f in e.facts() {
                match f {
                    crate::symmetry::Fact::Lt(i, j) if *i == star || *j == star => {
                        parts.push(format!("{}<{}", name(*i), name(*j)));
                    }
                    crate::symmetry::Fact::Edge(i, j) if *i == star || *j == star => {
                        parts.push(format!("E({},{})", name(*i), name(*j)));
                    }
                    _ => {}
                }
            }
            format!("ext{{{}}}", parts.join("; "))
        }
    }
}

/// Enumerate the letter-classes of a control state: one `Distinguished`
/// annotation per symmetry class of registers, one `Extension` annotation
/// per symmetry class of one-point extensions of the shape.
pub fn annotations(orbit: &OrbitRepr) -> Vec<Annotation> {
    let shape = orbit.shape();
    let sym = orbit.sym();
    let n = shape.size();
    let backend = shape.backend();
    let mut out = Vec::new();

    let mut seen_reg: BTreeSet<usize> = BTreeSet::new();
    for p in 0..n {
        if seen_reg.contains(&p) {
            continue;
        }
        let class: BTreeSet<usize> = sym.iter().map(|s| s.apply(p)).collect();
        seen_reg.extend(class.iter().copied());
        let stab: BTreeSet<Perm> =
            sym.iter().filter(|s| s.apply(p) == p).cloned().collect();
        let local_sym =
            PermGroup::from_elements(stab, n).expect("point stabilizer is a group");
        out.push(Annotation {
            kind: AnnotationKind::Distinguished(p),
            local_sym,
        });
    }

    let extended: Vec<Perm> = sym.iter().map(|s| extend_fixing_last(s, n)).collect();
    let mut seen_ext: BTreeSet<FinStruct> = BTreeSet::new();
    for e in backend.one_point_extensions(shape) {
        let class: BTreeSet<FinStruct> =
            extended.iter().map(|s| e.relabel(s)).collect();
        let rep = class.iter().next().expect("class nonempty").clone();
        if !seen_ext.insert(rep.clone()) {
            continue;
        }
        let stab: BTreeSet<Perm> = extended
            .iter()
            .filter(|s| rep.relabel(s) == rep)
            .cloned()
            .collect();
        let local_sym =
            PermGroup::from_elements(stab, n + 1).expect("extension stabilizer is a group");
        out.push(Annotation {
            kind: AnnotationKind::Extension(rep),
            local_sym,
        });
    }
    out
}

/// Extend a permutation of `0..n` to `0..=n` by fixing the new point.
pub(crate) fn extend_fixing_last(p: &Perm, n: usize) -> Perm {
    let mut images: Vec<usize> = (0..n).map(|i| p.apply(i)).collect();
    images.push(n);
    Perm::from_images(images).expect("extension of a permutation")
}

/// Classify a concrete letter against a canonical register valuation:
/// return the annotation key plus the valuation of the annotated carrier
/// (state registers re-aligned so the letter sits at the annotation's star).
pub(crate) fn classify_letter(
    orbit: &OrbitRepr,
    anns: &[Annotation],
    valuation: &[DataValue],
    letter: &DataValue,
) -> Result<(AnnotationKind, Vec<DataValue>)> {
    let sym = orbit.sym();
    if let Some(p) = valuation.iter().position(|v| v == letter) {
        let canon = sym
            .iter()
            .map(|s| s.apply(p))
            .min()
            .expect("symmetry group nonempty");
        let sigma = sym
            .iter()
            .find(|s| s.apply(canon) == p)
            .expect("canonical register is in the same class");
        let aligned = sigma.permute(valuation);
        return Ok((AnnotationKind::Distinguished(canon), aligned));
    }
    let mut ext_val: Vec<DataValue> = valuation.to_vec();
    ext_val.push(letter.clone());
    let actual = orbit.shape().backend().induced_struct(&ext_val)?;
    let n = valuation.len();
    for ann in anns {
        let AnnotationKind::Extension(rep) = &ann.kind else {
            continue;
        };
        for s in sym.iter() {
            let ext = extend_fixing_last(s, n);
            if rep.relabel(&ext) == actual {
                let aligned = ext.permute(&ext_val);
                return Ok((ann.kind.clone(), aligned));
            }
        }
    }
    Err(Error::Validation(format!(
        "letter {letter} does not match any annotation of the state"
    )))
}

/// Split a line into tokens, keeping double-quoted stretches together
/// (quotes stripped) and treating `->` as its own token.
pub(crate) fn tokenize_line(line: &str, lineno: usize) -> Result<Vec<String>> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                let mut s = String::new();
                let mut closed = false;
                for d in chars.by_ref() {
                    if d == '"' {
                        closed = true;
                        break;
                    }
                    s.push(d);
                }
                if !closed {
                    return Err(Error::parse(lineno, 1, "unterminated quote"));
                }
                toks.push(s);
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
            }
            _ => cur.push(c),
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    Ok(toks)
}

/// Strip a trailing `# comment` (outside quotes) and surrounding whitespace.
pub(crate) fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return line[..i].trim(),
            _ => {}
        }
    }
    line.trim()
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nomset::NomSet;
    use crate::symmetry::Backend;

    fn single_orbit(set: &NomSet) -> &OrbitRepr {
        assert_eq!(set.orbit_count(), 1);
        &set.orbits()[0]
    }

    fn discrete(backend: Backend, k: usize) -> NomSet {
        let shape = FinStruct::discrete(backend, k).unwrap();
        let (orbit, _) = OrbitRepr::new(shape, PermGroup::trivial(k)).unwrap();
        NomSet::new(backend, vec![orbit]).unwrap()
    }

    #[test]
    fn annotation_counts_match_backend_geometry() {
        // k registers under equality with trivial symmetry: k + 1 classes.
        for k in 0..4usize {
            let set = NomSet::dtuple(k);
            assert_eq!(annotations(single_orbit(&set)).len(), k + 1, "equality k={k}");
        }
        // k ordered registers: k distinguished + (k + 1) gaps.
        for k in 0..4usize {
            let set = NomSet::otuple(k);
            assert_eq!(annotations(single_orbit(&set)).len(), 2 * k + 1, "order k={k}");
        }
        // k graph registers, trivial symmetry: k distinguished + 2^k masks.
        for k in 0..4usize {
            let set = discrete(Backend::Graph, k);
            assert_eq!(
                annotations(single_orbit(&set)).len(),
                k + (1 << k),
                "graph k={k}"
            );
        }
    }

    #[test]
    fn annotation_counts_shrink_under_symmetry() {
        // Unordered pair under equality: the two registers fuse into one
        // distinguished class, and there is a single fresh class.
        let set = NomSet::set2();
        let anns = annotations(single_orbit(&set));
        assert_eq!(anns.len(), 2);
        let regs: Vec<_> = anns
            .iter()
            .filter(|a| matches!(a.kind, AnnotationKind::Distinguished(_)))
            .collect();
        assert_eq!(regs.len(), 1);
        assert_eq!(regs[0].kind, AnnotationKind::Distinguished(0));
        // Fixing one of the two interchangeable registers kills the swap.
        assert_eq!(regs[0].local_sym.order(), 1);
        let exts: Vec<_> = anns
            .iter()
            .filter(|a| matches!(a.kind, AnnotationKind::Extension(_)))
            .collect();
        assert_eq!(exts.len(), 1);
        // The swap extends to the fresh point.
        assert_eq!(exts[0].local_sym.order(), 2);
    }

    #[test]
    fn zero_register_state_has_one_annotation() {
        for backend in [Backend::Equality, Backend::Order, Backend::Graph] {
            let set = discrete(backend, 0);
            let anns = annotations(single_orbit(&set));
            assert_eq!(anns.len(), 1);
            assert!(matches!(anns[0].kind, AnnotationKind::Extension(_)));
        }
    }

    #[test]
    fn classify_letter_aligns_to_canonical_annotation() {
        use crate::symmetry::DataValue as V;
        let set = NomSet::set2();
        let orbit = single_orbit(&set);
        let anns = annotations(orbit);
        let val = vec![V::Nat(3), V::Nat(7)];
        // Letter equal to the *second* register classifies to the canonical
        // first register, with the valuation re-aligned to put it there.
        let (kind, aligned) = classify_letter(orbit, &anns, &val, &V::Nat(7)).unwrap();
        assert_eq!(kind, AnnotationKind::Distinguished(0));
        assert_eq!(aligned, vec![V::Nat(7), V::Nat(3)]);
        // Fresh letter extends the carrier with the letter at the end.
        let (kind, aligned) = classify_letter(orbit, &anns, &val, &V::Nat(9)).unwrap();
        assert!(matches!(kind, AnnotationKind::Extension(_)));
        assert_eq!(aligned, vec![V::Nat(3), V::Nat(7), V::Nat(9)]);
    }

    #[test]
    fn describe_spells_star_facts() {
        let set = NomSet::otuple(2);
        let anns = annotations(single_orbit(&set));
        let descriptions: Vec<String> = anns.iter().map(|a| a.describe()).collect();
        assert!(descriptions.contains(&"reg 0".to_string()));
        assert!(descriptions.contains(&"reg 1".to_string()));
        assert!(descriptions.contains(&"ext{*<0; *<1}".to_string()));
        assert!(descriptions.contains(&"ext{0<*; *<1}".to_string()));
        assert!(descriptions.contains(&"ext{0<*; 1<*}".to_string()));
    }
}
