//! Finite permutations and explicitly enumerated permutation groups.
//!
//! Carriers are index sets `{0, …, n-1}` for small `n`; groups are stored as
//! their full, closed element sets.  This is deliberate: the local symmetry
//! groups attached to orbit shapes act on at most a handful of registers, and
//! explicit sets keep every downstream operation (conjugation, intersection,
//! canonicalization) a straight scan with a single, predictable order.
//!
//! # Composition order
//!
//! **`p.compose(&q)` applies `p` first, then `q`**: the result maps `i` to
//! `q.apply(p.apply(i))`.  All juxtapositions in this crate are read left to
//! right this way, matching the right group actions that the rest of the
//! library is built on.  Getting this wrong silently flips conjugations and
//! witness transports, so every composition goes through this one method.

use std::collections::BTreeSet;
use std::fmt;

use crate::{Error, Result};

/// A permutation of `{0, …, n-1}`, stored as its image table.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm {
    images: Vec<usize>,
}

impl Perm {
    /// The identity permutation on a carrier of the given size.
    pub fn identity(carrier_size: usize) -> Perm {
        Perm { images: (0..carrier_size).collect() }
    }

    /// Builds a permutation from an image table, checking bijectivity.
    pub fn from_images(images: Vec<usize>) -> Result<Perm> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(Error::NotAPermutation(format!(
                    "image table {images:?} is not a bijection of 0..{n}"
                )));
            }
            seen[i] = true;
        }
        Ok(Perm { images })
    }

    /// Parses cycle notation such as `(0 1)(2 3)`; `()` is the identity.
    ///
    /// Indices outside the cycles are fixed.  The carrier size must be given
    /// because cycle notation does not mention fixed points.
    pub fn from_cycles(text: &str, carrier_size: usize) -> Result<Perm> {
        let mut images: Vec<usize> = (0..carrier_size).collect();
        let s = text.trim();
        if s.is_empty() {
            return Err(Error::NotAPermutation("empty permutation text".into()));
        }
        let mut rest = s;
        while !rest.is_empty() {
            let Some(stripped) = rest.strip_prefix('(') else {
                return Err(Error::NotAPermutation(format!("expected `(` in `{text}`")));
            };
            let Some(close) = stripped.find(')') else {
                return Err(Error::NotAPermutation(format!("unbalanced `(` in `{text}`")));
            };
            let body = &stripped[..close];
            rest = stripped[close + 1..].trim_start();
            let entries: Vec<usize> = body
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|_| {
                        Error::NotAPermutation(format!("bad index `{tok}` in `{text}`"))
                    })
                })
                .collect::<Result<_>>()?;
            if entries.is_empty() {
                continue; // `()` — identity cycle
            }
            for &i in &entries {
                if i >= carrier_size {
                    return Err(Error::NotAPermutation(format!(
                        "index {i} out of carrier 0..{carrier_size} in `{text}`"
                    )));
                }
            }
            let mut distinct = entries.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() != entries.len() {
                return Err(Error::NotAPermutation(format!("repeated index in `{text}`")));
            }
            for w in 0..entries.len() {
                let from = entries[w];
                let to = entries[(w + 1) % entries.len()];
                if images[from] != from {
                    return Err(Error::NotAPermutation(format!(
                        "index {from} moved twice in `{text}`"
                    )));
                }
                images[from] = to;
            }
        }
        Perm::from_images(images)
    }

    /// Image of a single index.
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    /// Carrier size.
    pub fn carrier_size(&self) -> usize {
        self.images.len()
    }

    /// The underlying image table.
    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// Composition, **applying `self` first and then `other`**: the result
    /// maps `i` to `other.apply(self.apply(i))`.
    pub fn compose(&self, other: &Perm) -> Perm {
        debug_assert_eq!(self.carrier_size(), other.carrier_size());
        Perm { images: self.images.iter().map(|&i| other.images[i]).collect() }
    }

    /// The inverse permutation.
    pub fn inverse(&self) -> Perm {
        let mut images = vec![0; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            images[j] = i;
        }
        Perm { images }
    }

    /// True when this is the identity.
    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Permutes a sequence: entry `i` of the result is `word[self(i)]`.
    ///
    /// This is precomposition of the sequence (seen as a function from
    /// positions) with the permutation, the convention used when local
    /// symmetries act on valuations.
    pub fn permute<T: Clone>(&self, word: &[T]) -> Vec<T> {
        debug_assert_eq!(self.carrier_size(), word.len());
        self.images.iter().map(|&i| word[i].clone()).collect()
    }

    /// Cycle decomposition, smallest moved index first within and across
    /// cycles; fixed points omitted.
    fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.images.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] || self.images[start] == start {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut cur = self.images[start];
            while cur != start {
                seen[cur] = true;
                cycle.push(cur);
                cur = self.images[cur];
            }
            out.push(cycle);
        }
        out
    }
}

impl fmt::Display for Perm {
    /// Cycle notation: `(0 1)(2 3)`; the identity prints as `()`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        for cycle in cycles {
            write!(f, "(")?;
            for (k, i) in cycle.iter().enumerate() {
                if k > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{i}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A permutation group on `{0, …, n-1}`, stored as its full element set.
///
/// The element set always contains the identity and is closed under
/// composition and inverse; constructors enforce this.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PermGroup {
    carrier_size: usize,
    elements: BTreeSet<Perm>,
}

impl PermGroup {
    /// The trivial group on the given carrier.
    pub fn trivial(carrier_size: usize) -> PermGroup {
        let mut elements = BTreeSet::new();
        elements.insert(Perm::identity(carrier_size));
        PermGroup { carrier_size, elements }
    }

    /// The full symmetric group on the given carrier.
    pub fn symmetric(carrier_size: usize) -> PermGroup {
        use itertools::Itertools;
        let elements = (0..carrier_size)
            .permutations(carrier_size)
            .map(|images| Perm { images })
            .collect();
        PermGroup { carrier_size, elements }
    }

    /// Generates the closure of a set of permutations by breadth-first
    /// multiplication.  The result contains the identity even when no
    /// generators are given.
    pub fn closure(generators: &[Perm], carrier_size: usize) -> Result<PermGroup> {
        for g in generators {
            if g.carrier_size() != carrier_size {
                return Err(Error::SizeMismatch(format!(
                    "generator {g} acts on {} points, expected {carrier_size}",
                    g.carrier_size()
                )));
            }
        }
        let mut elements = BTreeSet::new();
        let mut frontier = vec![Perm::identity(carrier_size)];
        elements.insert(Perm::identity(carrier_size));
        while let Some(p) = frontier.pop() {
            for g in generators {
                let q = p.compose(g);
                if elements.insert(q.clone()) {
                    frontier.push(q);
                }
            }
        }
        Ok(PermGroup { carrier_size, elements })
    }

    /// Builds a group from an explicit element set, checking closure.
    pub fn from_elements(elements: BTreeSet<Perm>, carrier_size: usize) -> Result<PermGroup> {
        let group = PermGroup { carrier_size, elements };
        if !group.elements.contains(&Perm::identity(carrier_size)) {
            return Err(Error::Validation("group element set lacks the identity".into()));
        }
        for p in &group.elements {
            if p.carrier_size() != carrier_size {
                return Err(Error::SizeMismatch(format!(
                    "element {p} acts on {} points, expected {carrier_size}",
                    p.carrier_size()
                )));
            }
            if !group.elements.contains(&p.inverse()) {
                return Err(Error::Validation(format!("element set not closed: {p} lacks inverse")));
            }
            for q in &group.elements {
                if !group.elements.contains(&p.compose(q)) {
                    return Err(Error::Validation(format!(
                        "element set not closed under composition: {p} * {q}"
                    )));
                }
            }
        }
        Ok(group)
    }

    /// Carrier size.
    pub fn carrier_size(&self) -> usize {
        self.carrier_size
    }

    /// Number of elements.
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Membership test.
    pub fn contains(&self, p: &Perm) -> bool {
        self.elements.contains(p)
    }

    /// Iterates over elements in their canonical (lexicographic) order.
    pub fn iter(&self) -> impl Iterator<Item = &Perm> {
        self.elements.iter()
    }

    /// True when every element of `self` lies in `other`.
    pub fn is_subgroup_of(&self, other: &PermGroup) -> bool {
        self.carrier_size == other.carrier_size
            && self.elements.iter().all(|p| other.elements.contains(p))
    }

    /// The conjugate group `{p⁻¹ σ p : σ ∈ self}` (read left to right):
    /// the same group transported along the relabeling `p`.
    pub fn conjugate(&self, p: &Perm) -> Result<PermGroup> {
        if p.carrier_size() != self.carrier_size {
            return Err(Error::SizeMismatch(format!(
                "conjugating a group on {} points by {p} on {} points",
                self.carrier_size,
                p.carrier_size()
            )));
        }
        let inv = p.inverse();
        let elements = self.elements.iter().map(|s| inv.compose(s).compose(p)).collect();
        Ok(PermGroup { carrier_size: self.carrier_size, elements })
    }

    /// Intersection of two groups on the same carrier.
    pub fn intersect(&self, other: &PermGroup) -> Result<PermGroup> {
        if self.carrier_size != other.carrier_size {
            return Err(Error::SizeMismatch(format!(
                "intersecting groups on {} and {} points",
                self.carrier_size, other.carrier_size
            )));
        }
        let elements: BTreeSet<Perm> =
            self.elements.intersection(&other.elements).cloned().collect();
        Ok(PermGroup { carrier_size: self.carrier_size, elements })
    }

    /// The lexicographically least sequence among `{word ∘ σ : σ ∈ self}`,
    /// where `(word ∘ σ)[i] = word[σ(i)]`, together with the least witnessing
    /// permutation.
    ///
    /// This single tie-breaker is the source of every canonical valuation in
    /// the library.
    pub fn canonical_under<T: Ord + Clone>(&self, word: &[T]) -> (Vec<T>, Perm) {
        debug_assert_eq!(word.len(), self.carrier_size);
        let mut best: Option<(Vec<T>, Perm)> = None;
        for p in &self.elements {
            let candidate = p.permute(word);
            match &best {
                Some((b, _)) if *b <= candidate => {}
                _ => best = Some((candidate, p.clone())),
            }
        }
        best.expect("group is never empty")
    }
}

impl fmt::Debug for PermGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PermGroup[n={}; ", self.carrier_size)?;
        for (k, p) in self.elements.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str, n: usize) -> Perm {
        Perm::from_cycles(text, n).unwrap()
    }

    #[test]
    fn compose_applies_left_argument_first() {
        // (0 1) then (1 2): 0 -> 1 -> 2, 1 -> 0 -> 0, 2 -> 2 -> 1.
        let a = p("(0 1)", 3);
        let b = p("(1 2)", 3);
        let ab = a.compose(&b);
        assert_eq!(ab.images(), &[2, 0, 1]);
        assert_eq!(ab.to_string(), "(0 2 1)");
        // Squaring a 3-cycle gives its inverse.
        let c = p("(0 1 2)", 3);
        assert_eq!(c.compose(&c), c.inverse());
        assert_eq!(c.compose(&c).to_string(), "(0 2 1)");
    }

    #[test]
    fn cycle_notation_round_trips() {
        for text in ["()", "(0 1)", "(0 1 2)", "(0 1)(2 3)", "(0 3 1)(2 4)"] {
            let q = p(text, 5);
            assert_eq!(Perm::from_cycles(&q.to_string(), 5).unwrap(), q);
        }
        assert_eq!(p("()", 4), Perm::identity(4));
    }

    #[test]
    fn malformed_cycles_are_rejected() {
        assert!(Perm::from_cycles("(0 1", 3).is_err());
        assert!(Perm::from_cycles("(0 0)", 3).is_err());
        assert!(Perm::from_cycles("(0 5)", 3).is_err());
        assert!(Perm::from_cycles("(0 1)(1 2)", 3).is_err());
        assert!(Perm::from_cycles("", 3).is_err());
    }

    #[test]
    fn closure_of_two_transpositions_is_sym3() {
        let g = PermGroup::closure(&[p("(0 1)", 3), p("(1 2)", 3)], 3).unwrap();
        assert_eq!(g.order(), 6);
        assert_eq!(g, PermGroup::symmetric(3));
    }

    #[test]
    fn closure_without_generators_is_trivial() {
        let g = PermGroup::closure(&[], 4).unwrap();
        assert_eq!(g.order(), 1);
        assert!(g.contains(&Perm::identity(4)));
    }

    #[test]
    fn conjugate_relabels_the_group() {
        let g = PermGroup::closure(&[p("(0 1)", 3)], 3).unwrap();
        let c = g.conjugate(&p("(1 2)", 3)).unwrap();
        let expected = PermGroup::closure(&[p("(0 2)", 3)], 3).unwrap();
        assert_eq!(c, expected);
    }

    #[test]
    fn intersect_keeps_common_elements() {
        let g = PermGroup::closure(&[p("(0 1)", 3)], 3).unwrap();
        let h = PermGroup::closure(&[p("(0 1 2)", 3)], 3).unwrap();
        let i = g.intersect(&h).unwrap();
        assert_eq!(i.order(), 1);
        let j = g.intersect(&PermGroup::symmetric(3)).unwrap();
        assert_eq!(j, g);
    }

    #[test]
    fn canonical_under_picks_least_permuted_word() {
        let g = PermGroup::closure(&[p("(0 1)", 2)], 2).unwrap();
        let (word, witness) = g.canonical_under(&[7, 3]);
        assert_eq!(word, vec![3, 7]);
        assert_eq!(witness, p("(0 1)", 2));

        let (sorted, _) = PermGroup::symmetric(3).canonical_under(&[2, 0, 1]);
        assert_eq!(sorted, vec![0, 1, 2]);

        // Already minimal: the identity must witness it.
        let (same, id) = g.canonical_under(&[3, 7]);
        assert_eq!(same, vec![3, 7]);
        assert!(id.is_identity());
    }

    #[test]
    fn from_elements_rejects_unclosed_sets() {
        let mut set = BTreeSet::new();
        set.insert(Perm::identity(3));
        set.insert(p("(0 1 2)", 3));
        assert!(PermGroup::from_elements(set, 3).is_err());
    }

    #[test]
    fn group_elements_iterate_deterministically() {
        let g = PermGroup::symmetric(3);
        let listed: Vec<String> = g.iter().map(|p| p.to_string()).collect();
        let again: Vec<String> = g.iter().map(|p| p.to_string()).collect();
        assert_eq!(listed, again);
        assert_eq!(listed.len(), 6);
        assert_eq!(listed[0], "()");
    }
}
