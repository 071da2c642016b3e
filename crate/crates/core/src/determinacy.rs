//! Chase-and-backchase determinacy check for CQ views, optionally relative
//! to existential rules.

use std::collections::BTreeSet;

use crate::chase::{run_chase, run_chase_memo, ChaseConfig, ChaseError, NullMemo};
use crate::homomorphism::{enumerate_matches, find_homomorphism, holds_at, Assignment};
use crate::model::{
    build_canondb, canon_const, name, Atom, ConjunctiveQuery, DSchema, DView, ExistentialRule, Instance,
    Name, Placement, Term, View, ViewDef,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeterminacyError {
    #[error("view `{0}` is not defined by a conjunctive query")]
    NonCqView(Name),
    #[error(transparent)]
    Chase(#[from] ChaseError),
}

/// Primed copy of a base relation name.
pub fn primed(rel: &str) -> Name {
    name(&format!("{rel}'"))
}

/// Forward and inverse view definitions over the base and primed
/// signatures. View relations are shared by both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewRuleSet {
    pub for_view: Vec<ExistentialRule>,
    pub back_view: Vec<ExistentialRule>,
    pub for_view_primed: Vec<ExistentialRule>,
    pub back_view_primed: Vec<ExistentialRule>,
    /// Base relation and its primed copy.
    pub prime_map: Vec<(Name, Name)>,
    pub view_relations: BTreeSet<Name>,
}

impl ViewRuleSet {
    pub fn len(&self) -> usize {
        self.for_view.len() + self.back_view.len() + self.for_view_primed.len() + self.back_view_primed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn prime_atoms(atoms: &[Atom]) -> Vec<Atom> {
    atoms.iter().map(|a| a.with_rel(primed(&a.rel))).collect()
}

pub fn make_view_rules(v: &DView) -> Result<ViewRuleSet, DeterminacyError> {
    let mut out = ViewRuleSet {
        for_view: Vec::new(),
        back_view: Vec::new(),
        for_view_primed: Vec::new(),
        back_view_primed: Vec::new(),
        prime_map: Vec::new(),
        view_relations: BTreeSet::new(),
    };
    let mut base = BTreeSet::new();
    for view in &v.views {
        let q = view
            .as_cq()
            .ok_or_else(|| DeterminacyError::NonCqView(view.name.clone()))?;
        let head = Atom {
            rel: view.name.clone(),
            args: q.free.iter().map(|x| Term::Var(x.clone())).collect(),
        };
        let body = q.atoms.clone();
        let pbody = prime_atoms(&body);
        let rule = |kind: &str, b: Vec<Atom>, h: Vec<Atom>| ExistentialRule {
            name: name(&format!("{kind}_{}", view.name)),
            body: b,
            head: crate::model::RuleHead::Atoms(h),
        };
        out.for_view.push(rule("fwd", body.clone(), vec![head.clone()]));
        out.back_view.push(rule("back", vec![head.clone()], body.clone()));
        out.for_view_primed.push(rule("fwd'", pbody.clone(), vec![head.clone()]));
        out.back_view_primed.push(rule("back'", vec![head], pbody));
        out.view_relations.insert(view.name.clone());
        base.extend(q.atoms.iter().map(|a| a.rel.clone()));
    }
    out.prime_map = base.into_iter().map(|r| (r.clone(), primed(&r))).collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminacyConfig {
    pub max_rounds: usize,
    pub chase: ChaseConfig,
    /// Keep every intermediate set of every round.
    pub keep_rounds: bool,
}

impl Default for DeterminacyConfig {
    fn default() -> Self {
        DeterminacyConfig {
            max_rounds: 8,
            chase: ChaseConfig::default(),
            keep_rounds: false,
        }
    }
}

/// The sets computed in one round.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoundSets {
    pub round: usize,
    pub f0: Instance,
    pub f1: Instance,
    pub f2: Instance,
    pub g2: Instance,
    pub f3: Instance,
    pub f4: Instance,
    pub g4: Instance,
    pub f5: Instance,
}

/// A pair of instances with equal view images on which the query differs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminacyWitness {
    /// Satisfies the query at `tuple`.
    pub left: Instance,
    /// Does not.
    pub right: Instance,
    pub tuple: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeterminacyVerdict {
    Determined {
        round: usize,
        assignment: Vec<(Name, Term)>,
    },
    NotDetermined {
        round: usize,
        fixpoint: Instance,
        witness: DeterminacyWitness,
    },
    Unknown {
        reason: String,
    },
}

impl DeterminacyVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            DeterminacyVerdict::Determined { .. } => "determined",
            DeterminacyVerdict::NotDetermined { .. } => "not_determined",
            DeterminacyVerdict::Unknown { .. } => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminacyRun {
    pub verdict: DeterminacyVerdict,
    pub rounds: Vec<RoundSets>,
    /// Chase of the canonical database under the rules (the first `F0`).
    pub initial: Instance,
}

fn unprime_rel(rel: &str) -> Option<&str> {
    rel.strip_suffix('\'')
}

/// Primed facts with the prime dropped.
pub fn unprime(i: &Instance) -> Instance {
    i.iter()
        .filter_map(|a| unprime_rel(&a.rel).map(|r| a.with_rel(name(r))))
        .collect()
}

fn prime_rules(rules: &[ExistentialRule]) -> Vec<ExistentialRule> {
    rules.iter().map(|r| r.map_relations(|n| primed(n))).collect()
}

/// Chase runner whose fuel is one budget for the whole procedure.
struct Stage {
    remaining: std::cell::Cell<usize>,
}

impl Stage {
    fn chase(
        &self,
        i: &Instance,
        rules: &[ExistentialRule],
        prefix: &str,
        memo: Option<&mut NullMemo>,
    ) -> Result<Option<Instance>, ChaseError> {
        if rules.is_empty() {
            return Ok(Some(i.clone()));
        }
        let left = self.remaining.get();
        if left == 0 {
            return Ok(None);
        }
        let cfg = ChaseConfig {
            max_steps: left,
            null_prefix: prefix.to_string(),
        };
        let res = run_chase_memo(i, rules, &cfg, memo)?;
        self.remaining.set(left.saturating_sub(res.trace.len()));
        Ok(res.into_completed())
    }
}

/// Run the determinacy procedure for `q` and CQ views `v` relative to
/// `rules` (possibly empty).
pub fn check_determinacy(
    q: &ConjunctiveQuery,
    v: &DView,
    rules: &[ExistentialRule],
    cfg: &DeterminacyConfig,
) -> Result<DeterminacyRun, DeterminacyError> {
    let vr = make_view_rules(v)?;
    let sigma_primed = prime_rules(rules);
    let stage = Stage {
        remaining: std::cell::Cell::new(cfg.chase.max_steps),
    };
    let unknown = |reason: &str, rounds, initial| DeterminacyRun {
        verdict: DeterminacyVerdict::Unknown {
            reason: reason.to_string(),
        },
        rounds,
        initial,
    };
    let canon = build_canondb(q);
    let Some(mut f0) = stage.chase(&canon, rules, "s0", None)? else {
        return Ok(unknown("chase fuel exhausted on the canonical database", vec![], canon));
    };
    let initial = f0.clone();
    let view_rels = vr.view_relations.clone();
    let q_primed = ConjunctiveQuery {
        name: q.name.clone(),
        free: q.free.clone(),
        atoms: prime_atoms(&q.atoms),
    };
    let pinned: Assignment = q
        .free
        .iter()
        .map(|x| (Term::Var(x.clone()), canon_const(x)))
        .collect();
    // Primed facts are recomputed each round; keyed nulls keep them stable.
    let mut memo_primed = NullMemo::default();
    let mut memo_sigma = NullMemo::default();
    let mut rounds = Vec::new();
    for round in 1..=cfg.max_rounds {
        let fuel = |what: &str| format!("chase fuel exhausted in round {round} ({what})");
        let Some(f1) = stage.chase(&f0, &vr.for_view, "v", None)? else {
            return Ok(unknown(&fuel("forward views"), rounds, initial));
        };
        let Some(f2) = stage.chase(&f1, &vr.back_view_primed, "p", Some(&mut memo_primed))? else {
            return Ok(unknown(&fuel("primed inverse views"), rounds, initial));
        };
        let Some(g2) = stage.chase(&f2, &sigma_primed, "ps", Some(&mut memo_sigma))? else {
            return Ok(unknown(&fuel("primed rules"), rounds, initial));
        };
        let mut sets = RoundSets {
            round,
            f0: f0.clone(),
            f1,
            f2,
            g2: g2.clone(),
            ..Default::default()
        };
        if let Some(h) = find_homomorphism(&q_primed.atoms, &g2, &pinned) {
            let assignment = q
                .vars()
                .into_iter()
                .map(|x| {
                    let t = h[&Term::Var(x.clone())].clone();
                    (x, t)
                })
                .collect();
            if cfg.keep_rounds {
                rounds.push(sets);
            }
            return Ok(DeterminacyRun {
                verdict: DeterminacyVerdict::Determined { round, assignment },
                rounds,
                initial,
            });
        }
        let Some(f3) = stage.chase(&g2, &vr.for_view_primed, "v", None)? else {
            return Ok(unknown(&fuel("primed forward views"), rounds, initial));
        };
        let Some(f4) = stage.chase(&f3, &vr.back_view, &format!("r{round}"), None)? else {
            return Ok(unknown(&fuel("inverse views"), rounds, initial));
        };
        let Some(g4) = stage.chase(&f4, rules, &format!("r{round}s"), None)? else {
            return Ok(unknown(&fuel("rules"), rounds, initial));
        };
        let f5: Instance = g4
            .iter()
            .filter(|a| unprime_rel(&a.rel).is_none() && !view_rels.contains(&a.rel))
            .cloned()
            .collect();
        sets.f3 = f3;
        sets.f4 = f4;
        sets.g4 = g4;
        sets.f5 = f5.clone();
        let fixpoint = f5 == f0;
        let right = unprime(&g2);
        if cfg.keep_rounds {
            rounds.push(sets);
        }
        if fixpoint {
            let tuple: Vec<Term> = q.free.iter().map(|x| canon_const(x)).collect();
            let witness = DeterminacyWitness {
                left: f0.freeze_nulls("w"),
                right: right.freeze_nulls("w"),
                tuple,
            };
            return Ok(DeterminacyRun {
                verdict: DeterminacyVerdict::NotDetermined {
                    round,
                    fixpoint: f0,
                    witness,
                },
                rounds,
                initial,
            });
        }
        f0 = f0.union(&f5);
    }
    Ok(unknown(
        &format!("no verdict within {} rounds", cfg.max_rounds),
        rounds,
        initial,
    ))
}

/// Image of every view, keyed by view name.
pub fn view_image(v: &DView, i: &Instance) -> Vec<(Name, BTreeSet<Vec<Term>>)> {
    v.views
        .iter()
        .filter_map(|view| view.as_cq().map(|q| (view.name.clone(), enumerate_matches(q, i))))
        .collect()
}

/// Independent check of a non-determinacy witness: equal view images, the
/// query holds at the tuple on the left only, and both sides satisfy the
/// rules.
pub fn validate_witness(
    q: &ConjunctiveQuery,
    v: &DView,
    rules: &[ExistentialRule],
    w: &DeterminacyWitness,
) -> Result<(), String> {
    if view_image(v, &w.left) != view_image(v, &w.right) {
        return Err("view images differ".into());
    }
    if !holds_at(q, &w.left, &w.tuple) {
        return Err("query fails on the left instance".into());
    }
    if holds_at(q, &w.right, &w.tuple) {
        return Err("query holds on the right instance".into());
    }
    for (side, inst) in [("left", &w.left), ("right", &w.right)] {
        if !crate::chase::satisfies(inst, rules) {
            return Err(format!("{side} instance violates the rules"));
        }
    }
    Ok(())
}

/// Copy of a replicated relation at one source.
pub fn local_copy(rel: &str, source: &str) -> Name {
    name(&format!("{rel}@{source}"))
}

/// A query, d-view and rule set with every replicated relation split into
/// per-source copies tied together by inclusion rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lowered {
    pub query: ConjunctiveQuery,
    pub dview: DView,
    pub rules: Vec<ExistentialRule>,
}

fn lower_atoms(atoms: &[Atom], schema: &DSchema, source: Option<&str>) -> Vec<Atom> {
    atoms
        .iter()
        .map(|a| match schema.relation(&a.rel).map(|r| &r.placement) {
            Some(Placement::Replicated(members)) => {
                let at = source
                    .filter(|s| members.iter().any(|m| &**m == *s))
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| members.iter().next().unwrap().to_string());
                a.with_rel(local_copy(&a.rel, &at))
            }
            _ => a.clone(),
        })
        .collect()
}

/// Lower replication for the determinacy procedure. Query atoms over a
/// replicated relation read the copy of its first member source; a rule
/// reads the copies of the source owning its local relations.
pub fn lower_replication(
    q: &ConjunctiveQuery,
    v: &DView,
    rules: &[ExistentialRule],
    schema: &DSchema,
) -> Lowered {
    let query = ConjunctiveQuery {
        atoms: lower_atoms(&q.atoms, schema, None),
        ..q.clone()
    };
    let views = v
        .views
        .iter()
        .map(|view| match &view.def {
            ViewDef::Cq(c) => View {
                def: ViewDef::Cq(ConjunctiveQuery {
                    atoms: lower_atoms(&c.atoms, schema, Some(&view.source)),
                    ..c.clone()
                }),
                ..view.clone()
            },
            _ => view.clone(),
        })
        .collect();
    let mut lowered_rules = Vec::new();
    for r in rules {
        let owner = r
            .relations()
            .iter()
            .find_map(|rel| match schema.relation(rel).map(|s| &s.placement) {
                Some(Placement::Local(s)) => Some(s.to_string()),
                _ => None,
            });
        let lower = |atoms: &[Atom]| lower_atoms(atoms, schema, owner.as_deref());
        lowered_rules.push(ExistentialRule {
            name: r.name.clone(),
            body: lower(&r.body),
            head: match &r.head {
                crate::model::RuleHead::Atoms(h) => crate::model::RuleHead::Atoms(lower(h)),
                eq => eq.clone(),
            },
        });
    }
    for sym in schema.relations() {
        if let Placement::Replicated(members) = &sym.placement {
            let vars: Vec<String> = (0..sym.arity).map(|k| format!("x{k}")).collect();
            let vars: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
            let members: Vec<_> = members.iter().collect();
            for (k, a) in members.iter().enumerate() {
                let b = members[(k + 1) % members.len()];
                let body = Atom::vars(&local_copy(&sym.name, a), &vars);
                let head = Atom::vars(&local_copy(&sym.name, b), &vars);
                lowered_rules.push(ExistentialRule {
                    name: name(&format!("rep_{}_{}_{}", sym.name, a, b)),
                    body: vec![body],
                    head: crate::model::RuleHead::Atoms(vec![head]),
                });
            }
        }
    }
    Lowered {
        query,
        dview: DView {
            name: v.name.clone(),
            views,
        },
        rules: lowered_rules,
    }
}

/// Determinacy over a d-schema: lowers replication when present.
pub fn check_determinacy_in(
    q: &ConjunctiveQuery,
    v: &DView,
    rules: &[ExistentialRule],
    schema: &DSchema,
    cfg: &DeterminacyConfig,
) -> Result<(DeterminacyRun, Lowered), DeterminacyError> {
    let lowered = lower_replication(q, v, rules, schema);
    let run = check_determinacy(&lowered.query, &lowered.dview, &lowered.rules, cfg)?;
    Ok((run, lowered))
}

/// Chase of a start instance under rules, treating fuel exhaustion as
/// failure to decide.
pub fn chase_or_none(i: &Instance, rules: &[ExistentialRule], cfg: &ChaseConfig) -> Result<Option<Instance>, ChaseError> {
    Ok(run_chase(i, rules, cfg)?.into_completed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::canonical_dview;
    use crate::fixtures;

    fn cq(n: &str, free: &[&str], atoms: Vec<Atom>) -> ConjunctiveQuery {
        ConjunctiveQuery::new(n, free, atoms).unwrap()
    }

    #[test]
    fn view_rules_shape() {
        let v = DView::new(
            "d",
            vec![View::cq(
                "V",
                "s",
                cq("V", &["x"], vec![Atom::vars("R", &["x", "y"]), Atom::vars("S", &["x", "z"])]),
            )],
        );
        let r = make_view_rules(&v).unwrap();
        assert_eq!(r.for_view[0].to_string(), "rule fwd_V := R(x, y), S(x, z) -> V(x)");
        assert_eq!(
            r.back_view_primed[0].to_string(),
            "rule back'_V := V(x) -> exists y, z . R'(x, y), S'(x, z)"
        );
        assert_eq!(r.len(), 4);
        let boolean = DView::new(
            "b",
            vec![
                View::cq("B", "s", cq("B", &[], vec![Atom::vars("R", &["x", "y"])])),
                View::cq("C", "s", cq("C", &["x"], vec![Atom::vars("R", &["x", "y"])])),
            ],
        );
        let r = make_view_rules(&boolean).unwrap();
        assert_eq!(r.len(), 8);
        assert_eq!(r.for_view[0].head_atoms()[0].arity(), 0);
    }

    #[test]
    fn example_one_canonical_views_determine() {
        let (schema, q) = fixtures::example_one();
        let v = canonical_dview(&q, &schema).unwrap();
        let run = check_determinacy(&q, &v, &[], &DeterminacyConfig::default()).unwrap();
        assert!(matches!(run.verdict, DeterminacyVerdict::Determined { round: 1, .. }));
    }

    #[test]
    fn dropping_pid_breaks_determinacy() {
        let (schema, q) = fixtures::example_one();
        let reg = crate::canonical::canonical_view(&q, "registry", &schema).unwrap();
        let hosp = View::cq(
            "V_h",
            "hospital",
            cq("V_h", &["pid"], vec![Atom::vars("Trtmnt", &["pid", "tinfo", "tdate"])]),
        );
        let v = DView::new("d", vec![hosp, reg]);
        let run = check_determinacy(&q, &v, &[], &DeterminacyConfig::default()).unwrap();
        match run.verdict {
            DeterminacyVerdict::NotDetermined { witness, .. } => {
                validate_witness(&q, &v, &[], &witness).unwrap();
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn square_design_with_replication_rules() {
        let (schema, q) = fixtures::square();
        let (d1, _) = fixtures::square_designs().remove(0);
        let (run, lowered) = check_determinacy_in(&q, &d1, &[], &schema, &DeterminacyConfig::default()).unwrap();
        assert_eq!(lowered.rules.len(), 2);
        assert!(matches!(run.verdict, DeterminacyVerdict::Determined { round: 1, .. }));
    }

    #[test]
    fn empty_views_do_not_determine() {
        let q = cq("Q", &[], vec![Atom::vars("R", &["x", "y"])]);
        let v = DView::new("none", vec![]);
        let run = check_determinacy(&q, &v, &[], &DeterminacyConfig::default()).unwrap();
        match run.verdict {
            DeterminacyVerdict::NotDetermined { witness, .. } => {
                validate_witness(&q, &v, &[], &witness).unwrap();
                assert!(witness.right.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
