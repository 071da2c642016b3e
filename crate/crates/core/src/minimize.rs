//! CQ minimality and cores, with and without existential rules.

use crate::chase::{run_chase, ChaseConfig, ChaseError};
use crate::homomorphism::{cq_homomorphism, find_homomorphism, Assignment};
use crate::model::{build_canondb, canon_const, ConjunctiveQuery, ExistentialRule, Term};
use crate::Tri;

/// Outcome of a minimality test. A non-minimal query comes with a
/// homomorphism onto a strict subquery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Minimality {
    pub minimal: bool,
    pub folding: Option<(Assignment, ConjunctiveQuery)>,
}

/// `q` without its `i`-th atom.
pub fn drop_atom(q: &ConjunctiveQuery, i: usize) -> Option<ConjunctiveQuery> {
    let mut atoms = q.atoms.clone();
    atoms.remove(i);
    ConjunctiveQuery::from_parts(q.name.clone(), q.free.clone(), atoms).ok()
}

/// Homomorphism from `q` into its subquery `sub`, identity on free
/// variables.
fn fold_into(q: &ConjunctiveQuery, sub: &ConjunctiveQuery) -> Option<Assignment> {
    let target = build_canondb(sub);
    let pinned: Assignment = q
        .free
        .iter()
        .map(|v| (Term::Var(v.clone()), canon_const(v)))
        .collect();
    find_homomorphism(&q.atoms, &target, &pinned)
}

pub fn is_minimal(q: &ConjunctiveQuery) -> Minimality {
    for i in 0..q.atoms.len() {
        let Some(sub) = drop_atom(q, i) else { continue };
        if let Some(h) = fold_into(q, &sub) {
            return Minimality {
                minimal: false,
                folding: Some((h, sub)),
            };
        }
    }
    Minimality {
        minimal: true,
        folding: None,
    }
}

/// Greedy core: drop atoms in syntactic order while the query still maps
/// onto the remainder.
pub fn minimize(q: &ConjunctiveQuery) -> ConjunctiveQuery {
    let mut cur = q.clone();
    let mut i = 0;
    while i < cur.atoms.len() {
        match drop_atom(&cur, i) {
            Some(sub) if fold_into(&cur, &sub).is_some() => cur = sub,
            _ => i += 1,
        }
    }
    cur
}

/// Does `q ∧ Σ` entail `q2`? Free variables are matched positionally.
pub fn entails_under_rules(
    q: &ConjunctiveQuery,
    q2: &ConjunctiveQuery,
    rules: &[ExistentialRule],
    cfg: &ChaseConfig,
) -> Result<Tri, ChaseError> {
    if q.free.len() != q2.free.len() {
        return Ok(Tri::No);
    }
    if rules.is_empty() {
        return Ok(Tri::from(cq_homomorphism(q2, q).is_some()));
    }
    let res = run_chase(&build_canondb(q), rules, cfg)?;
    let mut pinned = Assignment::new();
    for (a, b) in q2.free.iter().zip(&q.free) {
        let key = Term::Var(a.clone());
        let img = canon_const(b);
        if pinned.get(&key).is_some_and(|p| p != &img) {
            return Ok(Tri::No);
        }
        pinned.insert(key, img);
    }
    let found = find_homomorphism(&q2.atoms, res.instance(), &pinned).is_some();
    Ok(match (found, res.completed().is_some()) {
        (true, _) => Tri::Yes,
        (false, true) => Tri::No,
        (false, false) => Tri::Unknown,
    })
}

pub fn equivalent_under_rules(
    q: &ConjunctiveQuery,
    q2: &ConjunctiveQuery,
    rules: &[ExistentialRule],
    cfg: &ChaseConfig,
) -> Result<Tri, ChaseError> {
    let a = entails_under_rules(q, q2, rules, cfg)?;
    if a == Tri::No {
        return Ok(Tri::No);
    }
    let b = entails_under_rules(q2, q, rules, cfg)?;
    Ok(a.and(b))
}

/// Greedy atom removal under rules; `None` when an equivalence test is
/// inconclusive.
pub fn minimize_under_rules(
    q: &ConjunctiveQuery,
    rules: &[ExistentialRule],
    cfg: &ChaseConfig,
) -> Result<Option<ConjunctiveQuery>, ChaseError> {
    if rules.is_empty() {
        return Ok(Some(minimize(q)));
    }
    let mut cur = q.clone();
    let mut i = 0;
    while i < cur.atoms.len() {
        let Some(sub) = drop_atom(&cur, i) else {
            i += 1;
            continue;
        };
        // The subquery is always entailed by `cur`; only the converse is open.
        match entails_under_rules(&sub, &cur, rules, cfg)? {
            Tri::Yes => cur = sub,
            Tri::No => i += 1,
            Tri::Unknown => return Ok(None),
        }
    }
    Ok(Some(cur))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homomorphism::{hom_equivalent, isomorphic_queries};
    use crate::model::Atom;

    fn cq(free: &[&str], atoms: Vec<Atom>) -> ConjunctiveQuery {
        ConjunctiveQuery::new("Q", free, atoms).unwrap()
    }

    #[test]
    fn redundant_atom_folds() {
        let q = cq(&[], vec![Atom::vars("R", &["x", "y"]), Atom::vars("R", &["x", "z"])]);
        let m = is_minimal(&q);
        assert!(!m.minimal);
        let (h, _) = m.folding.unwrap();
        assert_eq!(h[&Term::var("y")], h[&Term::var("z")]);
        let core = minimize(&q);
        assert!(isomorphic_queries(
            &core,
            &cq(&[], vec![Atom::vars("R", &["x", "y"])])
        ));
    }

    #[test]
    fn square_is_minimal_and_fixed() {
        let (_, q) = crate::fixtures::square();
        assert!(is_minimal(&q).minimal);
        assert_eq!(minimize(&q), q);
        let single = cq(&[], vec![Atom::vars("R", &["x", "y"])]);
        assert!(is_minimal(&single).minimal);
    }

    #[test]
    fn loop_absorbs_edge() {
        let q = cq(&[], vec![Atom::vars("T", &["x", "y"]), Atom::vars("T", &["x", "x"])]);
        let core = minimize(&q);
        assert!(isomorphic_queries(&core, &cq(&[], vec![Atom::vars("T", &["x", "x"])])));
        assert!(hom_equivalent(&core, &q));
    }

    #[test]
    fn free_variables_block_folding() {
        let q = cq(&["y", "z"], vec![Atom::vars("R", &["x", "y"]), Atom::vars("R", &["x", "z"])]);
        assert!(is_minimal(&q).minimal);
    }

    fn iff_rules() -> Vec<ExistentialRule> {
        vec![
            ExistentialRule::tgd("r1", vec![Atom::vars("R1", &["x", "y"])], vec![Atom::vars("S1", &["x", "y"])])
                .unwrap(),
            ExistentialRule::tgd("r2", vec![Atom::vars("S1", &["x", "y"])], vec![Atom::vars("R1", &["x", "y"])])
                .unwrap(),
        ]
    }

    #[test]
    fn equivalence_under_rules() {
        let cfg = ChaseConfig::default();
        let a = cq(&[], vec![Atom::vars("R1", &["x", "y"])]);
        let b = cq(&[], vec![Atom::vars("S1", &["x", "y"])]);
        assert_eq!(equivalent_under_rules(&a, &a, &[], &cfg).unwrap(), Tri::Yes);
        assert_eq!(equivalent_under_rules(&a, &b, &iff_rules(), &cfg).unwrap(), Tri::Yes);
        assert_eq!(equivalent_under_rules(&a, &b, &[], &cfg).unwrap(), Tri::No);
        let lp = cq(&[], vec![Atom::vars("R", &["x", "x"])]);
        let edge = cq(&[], vec![Atom::vars("R", &["x", "y"])]);
        assert_eq!(equivalent_under_rules(&lp, &edge, &[], &cfg).unwrap(), Tri::No);
    }

    #[test]
    fn minimization_under_rules() {
        let cfg = ChaseConfig::default();
        let q = cq(&[], vec![Atom::vars("R1", &["x", "y"]), Atom::vars("S1", &["x", "y"])]);
        let m = minimize_under_rules(&q, &iff_rules(), &cfg).unwrap().unwrap();
        assert_eq!(m.atoms.len(), 1);
        let plain = cq(&[], vec![Atom::vars("R", &["x", "y"]), Atom::vars("R", &["x", "z"])]);
        assert_eq!(minimize_under_rules(&plain, &[], &cfg).unwrap().unwrap(), minimize(&plain));
    }

    #[test]
    fn nonterminating_rules_give_unknown() {
        let rules = vec![ExistentialRule::tgd(
            "r",
            vec![Atom::vars("R", &["x", "y"])],
            vec![Atom::vars("R", &["y", "z"])],
        )
        .unwrap()];
        let q = cq(&[], vec![Atom::vars("R", &["x", "y"]), Atom::vars("A", &["y"])]);
        let out = minimize_under_rules(&q, &rules, &ChaseConfig::with_fuel(3)).unwrap();
        assert_eq!(out, None);
    }
}
