//! Backtracking homomorphism search.
//!
//! Variables and labeled nulls are mappable; constants and pair elements map
//! to themselves unless the caller pins them otherwise.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{canon_const, Atom, ConjunctiveQuery, Instance, Term};

/// Partial mapping from source terms to target elements.
pub type Assignment = BTreeMap<Term, Term>;

fn flexible(t: &Term) -> bool {
    matches!(t, Term::Var(_) | Term::Null(_))
}

struct Search<'a> {
    atoms: &'a [Atom],
    dst: &'a Instance,
    injective: bool,
}

impl Search<'_> {
    fn image(&self, h: &Assignment, t: &Term) -> Option<Term> {
        match h.get(t) {
            Some(v) => Some(v.clone()),
            None if flexible(t) => None,
            None => Some(t.clone()),
        }
    }

    /// Number of positions of `atom` already determined by `h`.
    fn bound_count(&self, h: &Assignment, atom: &Atom) -> usize {
        atom.args
            .iter()
            .filter(|t| !flexible(t) || h.contains_key(*t))
            .count()
    }

    fn unify(&self, h: &mut Assignment, atom: &Atom, fact: &Atom, used: &mut BTreeSet<Term>) -> bool {
        for (t, e) in atom.args.iter().zip(&fact.args) {
            match self.image(h, t) {
                Some(img) => {
                    if &img != e {
                        return false;
                    }
                }
                None => {
                    if self.injective && used.contains(e) {
                        return false;
                    }
                    h.insert(t.clone(), e.clone());
                    if self.injective {
                        used.insert(e.clone());
                    }
                }
            }
        }
        true
    }

    fn run(
        &self,
        h: &mut Assignment,
        done: &mut Vec<bool>,
        used: &mut BTreeSet<Term>,
        visit: &mut dyn FnMut(&Assignment) -> bool,
    ) -> bool {
        // Pick the pending atom with the most determined positions.
        let mut best: Option<(usize, usize)> = None;
        for (i, a) in self.atoms.iter().enumerate() {
            if done[i] {
                continue;
            }
            let b = self.bound_count(h, a);
            if best.is_none_or(|(_, bb)| b > bb) {
                best = Some((i, b));
            }
        }
        let Some((i, _)) = best else {
            return visit(h);
        };
        let atom = &self.atoms[i];
        done[i] = true;
        let prefix: Vec<Term> = atom.args.iter().map_while(|t| self.image(h, t)).collect();
        let candidates: Vec<&Atom> = if prefix.len() == atom.args.len() {
            let fact = Atom {
                rel: atom.rel.clone(),
                args: prefix,
            };
            self.dst.get(&fact).into_iter().collect()
        } else {
            self.dst.facts_with_prefix(&atom.rel, &prefix).collect()
        };
        for fact in candidates {
            if fact.args.len() != atom.args.len() {
                continue;
            }
            let mut h2 = h.clone();
            let mut used2 = used.clone();
            if !self.unify(&mut h2, atom, fact, &mut used2) {
                continue;
            }
            if !self.run(&mut h2, done, &mut used2, visit) {
                done[i] = false;
                return false;
            }
        }
        done[i] = false;
        true
    }
}

fn search(
    src: &[Atom],
    dst: &Instance,
    pinned: &Assignment,
    injective: bool,
    visit: &mut dyn FnMut(&Assignment) -> bool,
) {
    let s = Search {
        atoms: src,
        dst,
        injective,
    };
    let mut h = pinned.clone();
    let mut used: BTreeSet<Term> = if injective {
        pinned.values().cloned().collect()
    } else {
        BTreeSet::new()
    };
    if injective {
        // Rigid source terms occupy their own image.
        for a in src {
            for t in &a.args {
                if !flexible(t) && !pinned.contains_key(t) {
                    used.insert(t.clone());
                }
            }
        }
    }
    let mut done = vec![false; src.len()];
    s.run(&mut h, &mut done, &mut used, visit);
}

/// Find a homomorphism from `src` into `dst` extending `pinned`.
///
/// The result maps every flexible term of `src` (plus the pinned entries).
pub fn find_homomorphism(src: &[Atom], dst: &Instance, pinned: &Assignment) -> Option<Assignment> {
    let mut out = None;
    search(src, dst, pinned, false, &mut |h| {
        out = Some(h.clone());
        false
    });
    out
}

/// Like [`find_homomorphism`] but flexible terms must get pairwise distinct
/// images, also distinct from every rigid term and pinned image.
pub fn find_injective_homomorphism(
    src: &[Atom],
    dst: &Instance,
    pinned: &Assignment,
) -> Option<Assignment> {
    let mut out = None;
    search(src, dst, pinned, true, &mut |h| {
        out = Some(h.clone());
        false
    });
    out
}

/// Visit every homomorphism extending `pinned`; the visitor returns `false`
/// to stop early.
pub fn for_each_homomorphism(
    src: &[Atom],
    dst: &Instance,
    pinned: &Assignment,
    mut visit: impl FnMut(&Assignment) -> bool,
) {
    search(src, dst, pinned, false, &mut visit);
}

pub fn all_homomorphisms(src: &[Atom], dst: &Instance, pinned: &Assignment) -> Vec<Assignment> {
    let mut out = Vec::new();
    for_each_homomorphism(src, dst, pinned, |h| {
        out.push(h.clone());
        true
    });
    out
}

/// Apply an assignment to an atom; unmapped terms stay as they are.
pub fn apply(h: &Assignment, atom: &Atom) -> Atom {
    atom.map_terms(|t| h.get(t).cloned().unwrap_or_else(|| t.clone()))
}

pub fn apply_all<'a>(h: &Assignment, atoms: impl IntoIterator<Item = &'a Atom>) -> Instance {
    atoms.into_iter().map(|a| apply(h, a)).collect()
}

/// Output of a CQ on an instance: the set of free-variable bindings.
pub fn enumerate_matches(q: &ConjunctiveQuery, i: &Instance) -> BTreeSet<Vec<Term>> {
    let mut out = BTreeSet::new();
    for_each_homomorphism(&q.atoms, i, &Assignment::new(), |h| {
        out.insert(q.free.iter().map(|v| h[&Term::Var(v.clone())].clone()).collect());
        true
    });
    out
}

pub fn holds(q: &ConjunctiveQuery, i: &Instance) -> bool {
    find_homomorphism(&q.atoms, i, &Assignment::new()).is_some()
}

/// Does `q` hold with its free variables bound to `tuple`?
pub fn holds_at(q: &ConjunctiveQuery, i: &Instance, tuple: &[Term]) -> bool {
    let pinned: Assignment = q
        .free
        .iter()
        .zip(tuple)
        .map(|(v, t)| (Term::Var(v.clone()), t.clone()))
        .collect();
    find_homomorphism(&q.atoms, i, &pinned).is_some()
}

/// Homomorphism from query `from` to query `to` (same arity), sending the
/// i-th free variable of `from` to the i-th free variable of `to`.
/// Computed against `build_canondb(to)`; the result maps into `c_v`
/// constants.
pub fn cq_homomorphism(from: &ConjunctiveQuery, to: &ConjunctiveQuery) -> Option<Assignment> {
    if from.free.len() != to.free.len() {
        return None;
    }
    let target = crate::model::build_canondb(to);
    let mut pinned = Assignment::new();
    for (a, b) in from.free.iter().zip(&to.free) {
        let key = Term::Var(a.clone());
        let img = canon_const(b);
        if let Some(prev) = pinned.get(&key) {
            if prev != &img {
                return None;
            }
        }
        pinned.insert(key, img);
    }
    find_homomorphism(&from.atoms, &target, &pinned)
}

/// Containment `q1 ⊆ q2` holds iff there is a homomorphism `q2 → q1`.
pub fn contained_in(q1: &ConjunctiveQuery, q2: &ConjunctiveQuery) -> bool {
    cq_homomorphism(q2, q1).is_some()
}

pub fn hom_equivalent(q1: &ConjunctiveQuery, q2: &ConjunctiveQuery) -> bool {
    contained_in(q1, q2) && contained_in(q2, q1)
}

/// Queries equal up to renaming of bound variables (free variables are
/// matched positionally).
pub fn isomorphic_queries(q1: &ConjunctiveQuery, q2: &ConjunctiveQuery) -> bool {
    if q1.atoms.len() != q2.atoms.len() || q1.free.len() != q2.free.len() {
        return false;
    }
    let a: BTreeSet<Atom> = q1.atoms.iter().cloned().collect();
    let b: BTreeSet<Atom> = q2.atoms.iter().cloned().collect();
    if a.len() != b.len() {
        return false;
    }
    let target = crate::model::build_canondb(q2);
    let mut pinned = Assignment::new();
    for (x, y) in q1.free.iter().zip(&q2.free) {
        pinned.insert(Term::Var(x.clone()), canon_const(y));
    }
    let src: Vec<Atom> = a.into_iter().collect();
    find_injective_homomorphism(&src, &target, &pinned).is_some()
}

/// Instances equal up to a bijective renaming of labeled nulls.
pub fn isomorphic_up_to_nulls(a: &Instance, b: &Instance) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let src: Vec<Atom> = a.iter().cloned().collect();
    match find_injective_homomorphism(&src, b, &Assignment::new()) {
        // Injective and size-preserving on facts, hence onto.
        Some(h) => apply_all(&h, &src) == *b,
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_canondb;

    fn inst(facts: &[Atom]) -> Instance {
        facts.iter().cloned().collect()
    }

    #[test]
    fn simple_hom() {
        let dst = inst(&[Atom::fact("R", &["a", "b"])]);
        let h = find_homomorphism(&[Atom::vars("R", &["x", "y"])], &dst, &Assignment::new()).unwrap();
        assert_eq!(h[&Term::var("x")], Term::constant("a"));
        assert_eq!(h[&Term::var("y")], Term::constant("b"));
    }

    #[test]
    fn repeated_variable_blocks() {
        let dst = inst(&[Atom::fact("R", &["a", "b"])]);
        assert!(find_homomorphism(&[Atom::vars("R", &["x", "x"])], &dst, &Assignment::new()).is_none());
    }

    fn square() -> ConjunctiveQuery {
        ConjunctiveQuery::new(
            "Q",
            &[],
            vec![
                Atom::vars("T", &["x", "y"]),
                Atom::vars("S", &["y", "z"]),
                Atom::vars("T", &["z", "w"]),
                Atom::vars("P", &["w", "x"]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn self_loop_secret_has_no_hom_into_square() {
        let dst = build_canondb(&square());
        assert!(find_homomorphism(&[Atom::vars("S", &["x", "x"])], &dst, &Assignment::new()).is_none());
    }

    #[test]
    fn matches_dedupe() {
        let q = ConjunctiveQuery::new("Q", &["x"], vec![Atom::vars("R", &["x", "y"])]).unwrap();
        let i = inst(&[Atom::fact("R", &["a", "b"]), Atom::fact("R", &["a", "c"])]);
        let m = enumerate_matches(&q, &i);
        assert_eq!(m.len(), 1);
        assert!(m.contains(&vec![Term::constant("a")]));
    }

    #[test]
    fn square_matches_itself_and_collapse() {
        let q = square();
        assert_eq!(enumerate_matches(&q, &build_canondb(&q)).len(), 1);
        let collapse = inst(&[
            Atom::fact("T", &["a", "a"]),
            Atom::fact("S", &["a", "a"]),
            Atom::fact("P", &["a", "a"]),
        ]);
        assert_eq!(enumerate_matches(&q, &collapse), BTreeSet::from([vec![]]));
    }

    #[test]
    fn pinned_entries_are_respected() {
        let dst = inst(&[Atom::fact("R", &["a", "b"]), Atom::fact("R", &["c", "d"])]);
        let pinned = Assignment::from([(Term::var("x"), Term::constant("c"))]);
        let h = find_homomorphism(&[Atom::vars("R", &["x", "y"])], &dst, &pinned).unwrap();
        assert_eq!(h[&Term::var("y")], Term::constant("d"));
    }

    #[test]
    fn injective_search() {
        let dst = inst(&[Atom::fact("R", &["a", "a"])]);
        let src = [Atom::vars("R", &["x", "y"])];
        assert!(find_homomorphism(&src, &dst, &Assignment::new()).is_some());
        assert!(find_injective_homomorphism(&src, &dst, &Assignment::new()).is_none());
    }

    #[test]
    fn isomorphism_of_queries() {
        let q1 = ConjunctiveQuery::new("A", &[], vec![Atom::vars("R", &["x", "y"])]).unwrap();
        let q2 = ConjunctiveQuery::new("B", &[], vec![Atom::vars("R", &["u", "v"])]).unwrap();
        let q3 = ConjunctiveQuery::new("C", &[], vec![Atom::vars("R", &["u", "u"])]).unwrap();
        assert!(isomorphic_queries(&q1, &q2));
        assert!(!isomorphic_queries(&q1, &q3));
        assert!(hom_equivalent(&q1, &q2));
        assert!(contained_in(&q3, &q1));
        assert!(!contained_in(&q1, &q3));
    }
}
