//! Equality types, shuffles of source-join variables and the invariant
//! shuffle views of a Boolean CQ.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::canonical::{canonical_context, canonical_view_query, sjvars, CanonicalError};
use crate::chase::{run_chase, ChaseConfig, ChaseError};
use crate::homomorphism::{enumerate_matches, find_homomorphism, Assignment};
use crate::model::{
    freeze_atoms, name, Atom, ConjunctiveQuery, DSchema, DView, Dcq, ExistentialRule, GuardLit, Instance, Name,
    SourceId, Term, View, ViewDef,
};
use crate::Tri;

pub const DEFAULT_SHUFFLE_CAP: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShuffleError {
    #[error("source `{source_id}` has {count} source-join variables, above the cap of {cap}")]
    TooManyFrontierVars { source_id: SourceId, count: usize, cap: usize },
    #[error("shuffle views are defined for Boolean queries only; `{0}` has free variables")]
    NonBoolean(Name),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
    #[error(transparent)]
    Chase(#[from] ChaseError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleConfig {
    pub cap: usize,
    pub chase: ChaseConfig,
}

impl Default for ShuffleConfig {
    fn default() -> Self {
        ShuffleConfig {
            cap: DEFAULT_SHUFFLE_CAP,
            chase: ChaseConfig::default(),
        }
    }
}

/// A partition of the source-join variables. Blocks keep the variable order
/// they were built from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EqualityType {
    pub blocks: Vec<Vec<Name>>,
}

impl EqualityType {
    /// Block index of every variable.
    pub fn block_of(&self) -> BTreeMap<Name, usize> {
        let mut out = BTreeMap::new();
        for (k, b) in self.blocks.iter().enumerate() {
            for v in b {
                out.insert(v.clone(), k);
            }
        }
        out
    }

    pub fn vars(&self) -> Vec<Name> {
        self.blocks.iter().flatten().cloned().collect()
    }

    /// The equalities inside blocks and disequalities between block
    /// representatives.
    pub fn guard(&self) -> Vec<GuardLit> {
        let mut out = Vec::new();
        for b in &self.blocks {
            for v in &b[1..] {
                out.push(GuardLit::Eq(b[0].clone(), v.clone()));
            }
        }
        for (i, a) in self.blocks.iter().enumerate() {
            for b in &self.blocks[i + 1..] {
                out.push(GuardLit::Neq(a[0].clone(), b[0].clone()));
            }
        }
        out
    }

    /// Most general binding: one fresh constant per block.
    pub fn binding(&self) -> BTreeMap<Name, Term> {
        self.block_of()
            .into_iter()
            .map(|(v, k)| (v, Term::constant(&format!("blk{k}"))))
            .collect()
    }

    /// The exact type of a binding of `vars` to `values`.
    pub fn of_binding(vars: &[Name], values: &[Term]) -> EqualityType {
        let mut blocks: Vec<(Term, Vec<Name>)> = Vec::new();
        for (v, t) in vars.iter().zip(values) {
            match blocks.iter_mut().find(|(u, _)| u == t) {
                Some((_, b)) => b.push(v.clone()),
                None => blocks.push((t.clone(), vec![v.clone()])),
            }
        }
        EqualityType {
            blocks: blocks.into_iter().map(|(_, b)| b).collect(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }
}

impl fmt::Display for EqualityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            write!(f, "{{{}}}", crate::model::join_names(b))?;
        }
        Ok(())
    }
}

/// All set partitions of `vars`, in restricted-growth-string order.
pub fn set_partitions(vars: &[Name]) -> Vec<EqualityType> {
    fn go(vars: &[Name], k: usize, rgs: &mut Vec<usize>, out: &mut Vec<EqualityType>) {
        if k == vars.len() {
            let n = rgs.iter().copied().max().map_or(0, |m| m + 1);
            let mut blocks = vec![Vec::new(); n];
            for (v, &b) in vars.iter().zip(rgs.iter()) {
                blocks[b].push(v.clone());
            }
            out.push(EqualityType { blocks });
            return;
        }
        let next = rgs.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=next {
            rgs.push(b);
            go(vars, k + 1, rgs, out);
            rgs.pop();
        }
    }
    let mut out = Vec::new();
    go(vars, 0, &mut Vec::new(), &mut out);
    out
}

/// A total map from the source-join variables to themselves.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Shuffle {
    pub map: Vec<(Name, Name)>,
}

impl Shuffle {
    pub fn identity(vars: &[Name]) -> Shuffle {
        Shuffle {
            map: vars.iter().map(|v| (v.clone(), v.clone())).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().all(|(a, b)| a == b)
    }

    pub fn as_map(&self) -> BTreeMap<Name, Name> {
        self.map.iter().cloned().collect()
    }

    pub fn image(&self, v: &Name) -> Name {
        self.map
            .iter()
            .find(|(a, _)| a == v)
            .map(|(_, b)| b.clone())
            .unwrap_or_else(|| v.clone())
    }

    pub fn apply_atoms(&self, atoms: &[Atom]) -> Vec<Atom> {
        let m = self.as_map();
        atoms
            .iter()
            .map(|a| {
                a.map_terms(|t| match t {
                    Term::Var(v) => Term::Var(m.get(v).cloned().unwrap_or_else(|| v.clone())),
                    other => other.clone(),
                })
            })
            .collect()
    }
}

impl fmt::Display for Shuffle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.map.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Every map of `vars` into itself: the identity first, then the rest in
/// lexicographic order of image indices.
pub fn all_shuffles(vars: &[Name]) -> Vec<Shuffle> {
    let n = vars.len();
    let mut out = vec![Shuffle::identity(vars)];
    let total = n.checked_pow(n as u32).unwrap_or(usize::MAX);
    let mut digits = vec![0usize; n];
    for _ in 0..total {
        let s = Shuffle {
            map: vars.iter().zip(&digits).map(|(v, &d)| (v.clone(), vars[d].clone())).collect(),
        };
        if !s.is_identity() {
            out.push(s);
        }
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < n {
                break;
            }
            *d = 0;
        }
    }
    out
}

fn frontier(q: &ConjunctiveQuery, source: &str, schema: &DSchema, cfg: &ShuffleConfig) -> Result<Vec<Name>, ShuffleError> {
    if !q.is_boolean() {
        return Err(ShuffleError::NonBoolean(q.name.clone()));
    }
    let vars = sjvars(q, source, schema)?;
    if vars.len() > cfg.cap {
        return Err(ShuffleError::TooManyFrontierVars {
            source_id: name(source),
            count: vars.len(),
            cap: cfg.cap,
        });
    }
    Ok(vars)
}

pub fn enumerate_types_and_shuffles(
    q: &ConjunctiveQuery,
    source: &str,
    schema: &DSchema,
    cfg: &ShuffleConfig,
) -> Result<(Vec<EqualityType>, Vec<Shuffle>), ShuffleError> {
    let vars = frontier(q, source, schema, cfg)?;
    Ok((set_partitions(&vars), all_shuffles(&vars)))
}

/// Does the context, with frontier bound by `binding`, imply its shuffle
/// by `mu`? Bound context variables stay flexible on the left and are
/// frozen on the right.
fn invariant_at(
    mu: &Shuffle,
    binding: &BTreeMap<Name, Term>,
    ctx_atoms: &[Atom],
    rules: &[ExistentialRule],
    cfg: &ShuffleConfig,
) -> Result<Tri, ShuffleError> {
    if ctx_atoms.is_empty() {
        return Ok(Tri::Yes);
    }
    let bind = |atoms: &[Atom]| -> Vec<Atom> {
        atoms
            .iter()
            .map(|a| {
                a.map_terms(|t| match t {
                    Term::Var(v) => binding.get(v).cloned().unwrap_or_else(|| t.clone()),
                    other => other.clone(),
                })
            })
            .collect()
    };
    let left = bind(&mu.apply_atoms(ctx_atoms));
    let mut target = freeze_atoms(&bind(ctx_atoms));
    let mut complete = true;
    if !rules.is_empty() {
        let res = run_chase(&target, rules, &cfg.chase)?;
        complete = res.completed().is_some();
        target = res.instance().clone();
    }
    let found = find_homomorphism(&left, &target, &Assignment::new()).is_some();
    Ok(match (found, complete) {
        (true, _) => Tri::Yes,
        (false, true) => Tri::No,
        (false, false) => Tri::Unknown,
    })
}

/// Invariance of `mu` relative to the type `tau`, decided at the most
/// general binding of `tau`.
pub fn is_invariant_shuffle(
    mu: &Shuffle,
    tau: &EqualityType,
    q: &ConjunctiveQuery,
    source: &str,
    schema: &DSchema,
    rules: &[ExistentialRule],
    cfg: &ShuffleConfig,
) -> Result<Tri, ShuffleError> {
    frontier(q, source, schema, cfg)?;
    let ctx = canonical_context(q, source, schema)?;
    invariant_at(mu, &tau.binding(), &ctx.atoms, rules, cfg)
}

/// `tau(x) ∧ ⋁ mu(canonv(q))` for one source and type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleView {
    pub name: Name,
    pub source: SourceId,
    pub vars: Vec<Name>,
    pub tau: EqualityType,
    pub shuffles: Vec<Shuffle>,
    pub disjuncts: Vec<ConjunctiveQuery>,
    /// Some invariance test was inconclusive and its shuffle left out.
    pub unknown: bool,
}

impl ShuffleView {
    pub fn to_dcq(&self) -> Dcq {
        Dcq {
            vars: self.vars.clone(),
            disjuncts: self.disjuncts.clone(),
            guard: self.tau.guard(),
        }
    }

    pub fn to_view(&self) -> View {
        View {
            name: self.name.clone(),
            source: self.source.clone(),
            def: ViewDef::Dcq(self.to_dcq()),
        }
    }
}

impl fmt::Display for ShuffleView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.vars.is_empty() {
            write!(f, "({})", crate::model::join_names(&self.vars))?;
        }
        let bodies: Vec<String> = self
            .disjuncts
            .iter()
            .map(|d| crate::model::join_atoms(&d.atoms))
            .collect();
        write!(f, " := {}", bodies.join(" | "))?;
        let guard: Vec<String> = self.tau.guard().iter().map(|g| g.to_string()).collect();
        if !guard.is_empty() {
            write!(f, " where {}", guard.join(", "))?;
        }
        Ok(())
    }
}

pub fn shuffle_view_name(source: &str, k: usize) -> String {
    format!("SV_{source}_{k}")
}

/// The image of the canonical view under a shuffle; its free variables
/// are the view variables it still mentions.
fn shuffled_view(canonv: &ConjunctiveQuery, mu: &Shuffle, vars: &[Name], vname: &str) -> ConjunctiveQuery {
    let atoms = mu.apply_atoms(&canonv.atoms);
    let present: BTreeSet<Name> = crate::model::vars_in_order(&atoms).into_iter().collect();
    ConjunctiveQuery {
        name: name(vname),
        free: vars.iter().filter(|v| present.contains(*v)).cloned().collect(),
        atoms,
    }
}

/// Shuffle views of `q` at one source, one per equality type.
pub fn source_shuffle_views(
    q: &ConjunctiveQuery,
    source: &str,
    schema: &DSchema,
    rules: &[ExistentialRule],
    cfg: &ShuffleConfig,
) -> Result<Vec<ShuffleView>, ShuffleError> {
    let vars = frontier(q, source, schema, cfg)?;
    let canonv = canonical_view_query(q, source, schema)?;
    let ctx = canonical_context(q, source, schema)?;
    let shuffles = all_shuffles(&vars);
    let mut out = Vec::new();
    for (k, tau) in set_partitions(&vars).into_iter().enumerate() {
        let vname = shuffle_view_name(source, k);
        let binding = tau.binding();
        let blocks = tau.block_of();
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut view = ShuffleView {
            name: name(&vname),
            source: name(source),
            vars: vars.clone(),
            tau: tau.clone(),
            shuffles: Vec::new(),
            disjuncts: Vec::new(),
            unknown: false,
        };
        for mu in &shuffles {
            let key: Vec<usize> = vars.iter().map(|v| blocks[&mu.image(v)]).collect();
            if seen.contains(&key) {
                continue;
            }
            match invariant_at(mu, &binding, &ctx.atoms, rules, cfg)? {
                Tri::Yes => {
                    seen.insert(key);
                    view.disjuncts.push(shuffled_view(&canonv, mu, &vars, &vname));
                    view.shuffles.push(mu.clone());
                }
                Tri::No => {}
                Tri::Unknown => view.unknown = true,
            }
        }
        out.push(view);
    }
    Ok(out)
}

/// Shuffle views for every source holding an atom of `q`.
pub fn build_shuffle_views(
    q: &ConjunctiveQuery,
    schema: &DSchema,
    rules: &[ExistentialRule],
    cfg: &ShuffleConfig,
) -> Result<Vec<ShuffleView>, ShuffleError> {
    if !q.is_boolean() {
        return Err(ShuffleError::NonBoolean(q.name.clone()));
    }
    let mut out = Vec::new();
    for s in schema.sources() {
        if crate::canonical::source_atoms(q, s, schema).is_empty() {
            continue;
        }
        out.extend(source_shuffle_views(q, s, schema, rules, cfg)?);
    }
    Ok(out)
}

pub fn shuffle_dview(views: &[ShuffleView]) -> DView {
    DView::new("shuffle", views.iter().map(|v| v.to_view()).collect())
}

/// A match on one side with no invariant shuffle matching on the other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleWitness {
    /// The unmatched binding comes from the first instance.
    pub from_first: bool,
    pub binding: Vec<(Name, Term)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleEquivalence {
    pub verdict: Tri,
    pub witness: Option<ShuffleWitness>,
}

/// Invariant shuffle equivalence of two instances of `source`, checking
/// invariance at each match's own binding.
pub fn shuffle_equivalent(
    i1: &Instance,
    i2: &Instance,
    q: &ConjunctiveQuery,
    source: &str,
    schema: &DSchema,
    rules: &[ExistentialRule],
    cfg: &ShuffleConfig,
) -> Result<ShuffleEquivalence, ShuffleError> {
    let vars = frontier(q, source, schema, cfg)?;
    let canonv = match canonical_view_query(q, source, schema) {
        Ok(c) => c,
        // The query says nothing about this source.
        Err(CanonicalError::EmptySourceBody(_)) => {
            return Ok(ShuffleEquivalence {
                verdict: Tri::Yes,
                witness: None,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let ctx = canonical_context(q, source, schema)?;
    let shuffles = all_shuffles(&vars);
    let mut unknown = false;
    for (from_first, a, b) in [(true, i1, i2), (false, i2, i1)] {
        for tuple in enumerate_matches(&canonv, a) {
            let binding: BTreeMap<Name, Term> = vars.iter().cloned().zip(tuple.iter().cloned()).collect();
            let pinned: Assignment = binding
                .iter()
                .map(|(v, t)| (Term::Var(v.clone()), t.clone()))
                .collect();
            let mut matched = false;
            for mu in &shuffles {
                if find_homomorphism(&mu.apply_atoms(&canonv.atoms), b, &pinned).is_none() {
                    continue;
                }
                match invariant_at(mu, &binding, &ctx.atoms, rules, cfg)? {
                    Tri::Yes => {
                        matched = true;
                        break;
                    }
                    Tri::Unknown => unknown = true,
                    Tri::No => {}
                }
            }
            if !matched && !unknown {
                return Ok(ShuffleEquivalence {
                    verdict: Tri::No,
                    witness: Some(ShuffleWitness {
                        from_first,
                        binding: binding.into_iter().collect(),
                    }),
                });
            }
        }
    }
    Ok(ShuffleEquivalence {
        verdict: if unknown { Tri::Unknown } else { Tri::Yes },
        witness: None,
    })
}

/// Every shuffle view has the identity as its only disjunct.
pub fn has_only_trivial_shuffles(
    q: &ConjunctiveQuery,
    schema: &DSchema,
    rules: &[ExistentialRule],
    cfg: &ShuffleConfig,
) -> Result<Tri, ShuffleError> {
    let views = build_shuffle_views(q, schema, rules, cfg)?;
    if views.iter().any(|v| v.shuffles.len() > 1) {
        return Ok(Tri::No);
    }
    Ok(if views.iter().any(|v| v.unknown) {
        Tri::Unknown
    } else {
        Tri::Yes
    })
}
