//! Source variables, canonical views and canonical contexts.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::model::{name, Atom, ConjunctiveQuery, DSchema, DView, Name, SourceId, View};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CanonicalError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(Name),
    #[error("query has no atom on source `{0}`")]
    EmptySourceBody(SourceId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceVars {
    pub source: String,
    pub svars: Vec<String>,
    pub sjvars: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceVarReport {
    pub per_source: Vec<SourceVars>,
}

impl SourceVarReport {
    pub fn sjvars(&self, source: &str) -> Vec<Name> {
        self.per_source
            .iter()
            .find(|s| s.source == source)
            .map(|s| s.sjvars.iter().map(|v| name(v)).collect())
            .unwrap_or_default()
    }
}

fn check_relations(q: &ConjunctiveQuery, schema: &DSchema) -> Result<(), CanonicalError> {
    for a in &q.atoms {
        if schema.relation(&a.rel).is_none() {
            return Err(CanonicalError::UnknownRelation(a.rel.clone()));
        }
    }
    Ok(())
}

/// Atoms of `q` over relations visible at `source` (replicated included).
pub fn source_atoms(q: &ConjunctiveQuery, source: &str, schema: &DSchema) -> Vec<Atom> {
    q.atoms
        .iter()
        .filter(|a| schema.relation(&a.rel).is_some_and(|r| r.visible_at(source)))
        .cloned()
        .collect()
}

/// Variables occurring in atoms of at least two distinct sources.
fn join_vars(q: &ConjunctiveQuery, schema: &DSchema) -> BTreeSet<Name> {
    let mut where_: BTreeMap<Name, BTreeSet<SourceId>> = BTreeMap::new();
    for a in &q.atoms {
        let srcs = schema.sources_of(&a.rel);
        for t in &a.args {
            if let Some(v) = t.as_var() {
                where_.entry(v.clone()).or_default().extend(srcs.iter().cloned());
            }
        }
    }
    where_
        .into_iter()
        .filter(|(_, s)| s.len() >= 2)
        .map(|(v, _)| v)
        .collect()
}

pub fn source_vars(q: &ConjunctiveQuery, schema: &DSchema) -> Result<SourceVarReport, CanonicalError> {
    check_relations(q, schema)?;
    let joins = join_vars(q, schema);
    let mut per_source = Vec::new();
    for s in schema.sources() {
        let atoms = source_atoms(q, s, schema);
        let svars = crate::model::vars_in_order(&atoms);
        let sjvars: Vec<Name> = svars.iter().filter(|v| joins.contains(*v)).cloned().collect();
        per_source.push(SourceVars {
            source: s.to_string(),
            svars: svars.iter().map(|v| v.to_string()).collect(),
            sjvars: sjvars.iter().map(|v| v.to_string()).collect(),
        });
    }
    Ok(SourceVarReport { per_source })
}

/// Source-join variables of `q` at `source`, in first-occurrence order.
pub fn sjvars(q: &ConjunctiveQuery, source: &str, schema: &DSchema) -> Result<Vec<Name>, CanonicalError> {
    Ok(source_vars(q, schema)?.sjvars(source))
}

pub fn canonical_view_name(source: &str) -> String {
    format!("V_{source}")
}

/// The canonical view of `q` at `source`, as a CQ.
pub fn canonical_view_query(
    q: &ConjunctiveQuery,
    source: &str,
    schema: &DSchema,
) -> Result<ConjunctiveQuery, CanonicalError> {
    check_relations(q, schema)?;
    let body = source_atoms(q, source, schema);
    if body.is_empty() {
        return Err(CanonicalError::EmptySourceBody(name(source)));
    }
    let joins = sjvars(q, source, schema)?;
    let free: Vec<Name> = crate::model::vars_in_order(&body)
        .into_iter()
        .filter(|v| q.free.contains(v) || joins.contains(v))
        .collect();
    Ok(ConjunctiveQuery {
        name: name(&canonical_view_name(source)),
        free,
        atoms: body,
    })
}

pub fn canonical_view(q: &ConjunctiveQuery, source: &str, schema: &DSchema) -> Result<View, CanonicalError> {
    let cq = canonical_view_query(q, source, schema)?;
    Ok(View::cq(&cq.name.clone(), source, cq))
}

/// Atoms of `q` outside a source, with the source-join variables as
/// frontier. An empty atom list stands for the always-true context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalContext {
    pub source: SourceId,
    pub frontier: Vec<Name>,
    pub atoms: Vec<Atom>,
}

impl CanonicalContext {
    pub fn is_degenerate(&self) -> bool {
        self.atoms.is_empty()
    }

    /// The context as a CQ; `None` when degenerate.
    pub fn query(&self) -> Option<ConjunctiveQuery> {
        if self.atoms.is_empty() {
            return None;
        }
        let present = crate::model::vars_in_order(&self.atoms);
        Some(ConjunctiveQuery {
            name: name(&format!("CanCtxt_{}", self.source)),
            free: self.frontier.iter().filter(|v| present.contains(v)).cloned().collect(),
            atoms: self.atoms.clone(),
        })
    }
}

pub fn canonical_context(
    q: &ConjunctiveQuery,
    source: &str,
    schema: &DSchema,
) -> Result<CanonicalContext, CanonicalError> {
    check_relations(q, schema)?;
    let atoms = q
        .atoms
        .iter()
        .filter(|a| !schema.relation(&a.rel).is_some_and(|r| r.visible_at(source)))
        .cloned()
        .collect();
    Ok(CanonicalContext {
        source: name(source),
        frontier: sjvars(q, source, schema)?,
        atoms,
    })
}

/// Canonical views for every source with at least one atom of `q`.
pub fn canonical_dview(q: &ConjunctiveQuery, schema: &DSchema) -> Result<DView, CanonicalError> {
    check_relations(q, schema)?;
    let mut views = Vec::new();
    for s in schema.sources() {
        match canonical_view(q, s, schema) {
            Ok(v) => views.push(v),
            Err(CanonicalError::EmptySourceBody(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(DView::new("canonical", views))
}

/// Every source has at most one source-join variable.
pub fn is_monadic_frontier(q: &ConjunctiveQuery, schema: &DSchema) -> Result<bool, CanonicalError> {
    let rep = source_vars(q, schema)?;
    Ok(rep.per_source.iter().all(|s| s.sjvars.len() <= 1))
}
