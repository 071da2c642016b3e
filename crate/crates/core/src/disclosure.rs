//! UN (non-)disclosure of secret queries by CQ views, decided at the
//! critical instance.

use std::collections::BTreeSet;

use crate::canonical::{canonical_dview, canonical_view_query, CanonicalError};
use crate::chase::{run_chase, satisfies, ChaseConfig, ChaseError};
use crate::determinacy::make_view_rules;
use crate::homomorphism::{cq_homomorphism, enumerate_matches, find_homomorphism, for_each_homomorphism, holds_at, Assignment};
use crate::minimize::{entails_under_rules, minimize_under_rules};
use crate::model::{
    Atom, ConjunctiveQuery, DInstance, DSchema, DView, ExistentialRule, Instance, Name, SourceId, Term,
};
use crate::Tri;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DisclosureError {
    #[error("view `{0}` is not defined by a conjunctive query")]
    NonCqView(Name),
    #[error(transparent)]
    Chase(#[from] ChaseError),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

/// One all-`*` fact per relation of the schema.
pub fn critical_global(schema: &DSchema) -> Instance {
    schema
        .relations()
        .map(|r| Atom {
            rel: r.name.clone(),
            args: vec![Term::critical(); r.arity],
        })
        .collect()
}

pub fn critical_instance(schema: &DSchema) -> DInstance {
    DInstance::distribute(schema, &critical_global(schema))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DisclosureVerdict {
    /// The secret holds at the critical tuple on the chased instance, hence
    /// on every instance with the critical view image.
    Disclosing { instance: Instance, matching: Assignment },
    /// An instance with the critical view image where the secret fails.
    NonDisclosing { witness: Instance },
    Unknown { reason: String },
}

impl DisclosureVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            DisclosureVerdict::Disclosing { .. } => "disclosing",
            DisclosureVerdict::NonDisclosing { .. } => "non_disclosing",
            DisclosureVerdict::Unknown { .. } => "unknown",
        }
    }

    pub fn is_disclosing(&self) -> bool {
        matches!(self, DisclosureVerdict::Disclosing { .. })
    }

    pub fn is_non_disclosing(&self) -> bool {
        matches!(self, DisclosureVerdict::NonDisclosing { .. })
    }
}

fn view_cqs(v: &DView) -> Result<Vec<&ConjunctiveQuery>, DisclosureError> {
    v.views
        .iter()
        .map(|view| view.as_cq().ok_or_else(|| DisclosureError::NonCqView(view.name.clone())))
        .collect()
}

/// View image of every view on an instance, in view order.
pub fn cq_view_image(v: &DView, i: &Instance) -> Result<Vec<BTreeSet<Vec<Term>>>, DisclosureError> {
    Ok(view_cqs(v)?.into_iter().map(|q| enumerate_matches(q, i)).collect())
}

enum Exactness {
    Stable,
    Merged(Instance),
    Conflict(String),
}

/// One pass of the exactness phase: every view match on `w` must produce
/// the critical tuple; nulls in head positions are sent to `*`.
fn exactness_pass(views: &[&ConjunctiveQuery], images: &[BTreeSet<Vec<Term>>], w: &Instance) -> Exactness {
    let star = Term::critical();
    let mut merge: BTreeSet<Term> = BTreeSet::new();
    let mut conflict = None;
    for (q, img) in views.iter().zip(images) {
        for_each_homomorphism(&q.atoms, w, &Assignment::new(), |h| {
            let tuple: Vec<Term> = q.free.iter().map(|x| h[&Term::Var(x.clone())].clone()).collect();
            if img.contains(&tuple) {
                return true;
            }
            if !img.is_empty() && tuple.iter().all(|t| t.is_null() || *t == star) {
                merge.extend(tuple.into_iter().filter(|t| t.is_null()));
                return true;
            }
            conflict = Some(format!("view `{}` produces a tuple outside the critical image", q.name));
            false
        });
        if let Some(c) = conflict {
            return Exactness::Conflict(c);
        }
    }
    if merge.is_empty() {
        Exactness::Stable
    } else {
        Exactness::Merged(w.map_terms(|t| if merge.contains(t) { star.clone() } else { t.clone() }))
    }
}

/// Critical-instance check of `p` against CQ views, relative to `rules`
/// (possibly empty). Free variables of `p` are pinned to `*`.
pub fn check_un_disclosure_cq_rules(
    v: &DView,
    p: &ConjunctiveQuery,
    schema: &DSchema,
    rules: &[ExistentialRule],
    cfg: &ChaseConfig,
) -> Result<DisclosureVerdict, DisclosureError> {
    let views = view_cqs(v)?;
    let crit = critical_global(schema);
    let images: Vec<BTreeSet<Vec<Term>>> = views.iter().map(|q| enumerate_matches(q, &crit)).collect();
    let vr = make_view_rules(v).map_err(|_| DisclosureError::NonCqView(v.name.clone()))?;
    let mut start = Instance::new();
    for (q, img) in views.iter().zip(&images) {
        for t in img {
            start.insert(Atom::new(&q.name, t.clone()));
        }
    }
    let back = run_chase(&start, &vr.back_view, &cfg.with_prefix("k"))?;
    let Some(back) = back.into_completed() else {
        return Ok(DisclosureVerdict::Unknown {
            reason: "chase fuel exhausted on inverse views".into(),
        });
    };
    let mut w = back.restrict(|r| !vr.view_relations.contains(r));
    let mut round = 0usize;
    loop {
        match exactness_pass(&views, &images, &w) {
            Exactness::Merged(next) => {
                w = next;
                continue;
            }
            Exactness::Conflict(reason) => return Ok(DisclosureVerdict::Unknown { reason }),
            Exactness::Stable => {}
        }
        if rules.is_empty() || satisfies(&w, rules) {
            break;
        }
        round += 1;
        let res = run_chase(&w, rules, &cfg.with_prefix(&format!("k{round}")))?;
        match res.into_completed() {
            Some(next) => w = next,
            None => {
                return Ok(DisclosureVerdict::Unknown {
                    reason: "chase fuel exhausted on rules".into(),
                })
            }
        }
    }
    let pinned: Assignment = p
        .free
        .iter()
        .map(|x| (Term::Var(x.clone()), Term::critical()))
        .collect();
    if let Some(matching) = find_homomorphism(&p.atoms, &w, &pinned) {
        return Ok(DisclosureVerdict::Disclosing { instance: w, matching });
    }
    let witness = w.freeze_nulls("e");
    match validate_nondisclosure_witness(v, p, schema, rules, &witness) {
        Ok(()) => Ok(DisclosureVerdict::NonDisclosing { witness }),
        Err(reason) => Ok(DisclosureVerdict::Unknown { reason }),
    }
}

pub fn check_un_disclosure_cq(v: &DView, p: &ConjunctiveQuery, schema: &DSchema) -> Result<DisclosureVerdict, DisclosureError> {
    check_un_disclosure_cq_rules(v, p, schema, &[], &ChaseConfig::default())
}

/// Independent check of a non-disclosure witness: same view image as the
/// critical instance, the secret fails at the critical tuple, rules hold.
pub fn validate_nondisclosure_witness(
    v: &DView,
    p: &ConjunctiveQuery,
    schema: &DSchema,
    rules: &[ExistentialRule],
    witness: &Instance,
) -> Result<(), String> {
    let crit = critical_global(schema);
    let views = view_cqs(v).map_err(|e| e.to_string())?;
    for q in views {
        if enumerate_matches(q, &crit) != enumerate_matches(q, witness) {
            return Err(format!("view `{}` has a different image on the witness", q.name));
        }
    }
    let tuple = vec![Term::critical(); p.free.len()];
    if holds_at(p, witness, &tuple) {
        return Err("secret holds on the witness".into());
    }
    if !satisfies(witness, rules) {
        return Err("witness violates the rules".into());
    }
    Ok(())
}

/// Verdict of the CQ-class design question for one secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CqDesignAnswer {
    pub answer: Tri,
    pub reason: String,
    pub minimized: Option<ConjunctiveQuery>,
    /// The canonical d-view of the minimized query, when it is the design.
    pub design: Option<DView>,
    pub per_source: Vec<(SourceId, DisclosureVerdict)>,
    pub direct: Option<DisclosureVerdict>,
    /// Per-source and direct verdicts agree.
    pub consistent: bool,
}

/// Do useful, UN non-disclosing CQ views for `q` and `p` exist? Decided on
/// the canonical views of the minimized query.
pub fn exists_useful_nondisclosing_cq(
    q: &ConjunctiveQuery,
    p: &ConjunctiveQuery,
    schema: &DSchema,
    rules: &[ExistentialRule],
    cfg: &ChaseConfig,
) -> Result<CqDesignAnswer, DisclosureError> {
    let mut out = CqDesignAnswer {
        answer: Tri::Unknown,
        reason: String::new(),
        minimized: None,
        design: None,
        per_source: Vec::new(),
        direct: None,
        consistent: true,
    };
    let entailed = if rules.is_empty() {
        Tri::from(cq_homomorphism(p, q).is_some())
    } else {
        entails_under_rules(q, p, rules, cfg)?
    };
    if entailed == Tri::Yes {
        out.answer = Tri::No;
        out.reason = "the secret is entailed by the query".into();
        return Ok(out);
    }
    let Some(qm) = minimize_under_rules(q, rules, cfg)? else {
        out.reason = "minimization under rules was inconclusive".into();
        return Ok(out);
    };
    let v = canonical_dview(&qm, schema)?;
    out.minimized = Some(qm);
    let mut any_non = false;
    let mut any_unknown = false;
    for s in schema.sources() {
        let cp = match canonical_view_query(p, s, schema) {
            Ok(c) => c,
            Err(CanonicalError::EmptySourceBody(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        let verdict = check_un_disclosure_cq_rules(&v, &cp, schema, rules, cfg)?;
        any_non |= verdict.is_non_disclosing();
        any_unknown |= matches!(verdict, DisclosureVerdict::Unknown { .. });
        out.per_source.push((s.clone(), verdict));
    }
    let direct = check_un_disclosure_cq_rules(&v, p, schema, rules, cfg)?;
    out.consistent = match &direct {
        DisclosureVerdict::Disclosing { .. } => !any_non,
        DisclosureVerdict::NonDisclosing { .. } => any_non || any_unknown,
        DisclosureVerdict::Unknown { .. } => true,
    };
    if any_non || direct.is_non_disclosing() {
        out.answer = Tri::Yes;
        out.reason = "the canonical views are UN non-disclosing".into();
        out.design = Some(v);
    } else if any_unknown || matches!(direct, DisclosureVerdict::Unknown { .. }) {
        out.reason = "a disclosure check was inconclusive".into();
    } else {
        out.answer = Tri::No;
        out.reason = "the canonical views disclose the secret".into();
    }
    out.direct = Some(direct);
    Ok(out)
}
