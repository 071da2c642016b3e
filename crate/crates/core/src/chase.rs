//! Restricted chase with FIFO trigger order, equality rules and fuel.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::homomorphism::{find_homomorphism, for_each_homomorphism, Assignment};
use crate::model::{name, Atom, ExistentialRule, Instance, Name, RuleHead, Term};

pub const DEFAULT_FUEL: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChaseConfig {
    /// Maximum number of applied chase steps.
    pub max_steps: usize,
    /// Prefix of generated null labels.
    pub null_prefix: String,
}

impl Default for ChaseConfig {
    fn default() -> Self {
        ChaseConfig {
            max_steps: DEFAULT_FUEL,
            null_prefix: "n".to_string(),
        }
    }
}

impl ChaseConfig {
    pub fn with_fuel(max_steps: usize) -> Self {
        ChaseConfig {
            max_steps: max_steps.max(1),
            ..Default::default()
        }
    }

    pub fn with_prefix(&self, prefix: &str) -> Self {
        ChaseConfig {
            max_steps: self.max_steps,
            null_prefix: prefix.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepEffect {
    Emitted { facts: Vec<String> },
    Merged { from: String, into: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub rule: Name,
    pub trigger: Vec<(Name, Term)>,
    pub emitted: Vec<Atom>,
    pub merged: Option<(Term, Term)>,
}

impl TraceStep {
    pub fn effect(&self) -> StepEffect {
        match &self.merged {
            Some((a, b)) => StepEffect::Merged {
                from: a.to_string(),
                into: b.to_string(),
            },
            None => StepEffect::Emitted {
                facts: self.emitted.iter().map(|a| a.to_string()).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChaseOutcome {
    Completed(Instance),
    FuelExhausted { partial: Instance, pending: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChaseResult {
    pub outcome: ChaseOutcome,
    pub trace: Vec<TraceStep>,
}

impl ChaseResult {
    pub fn instance(&self) -> &Instance {
        match &self.outcome {
            ChaseOutcome::Completed(i) => i,
            ChaseOutcome::FuelExhausted { partial, .. } => partial,
        }
    }

    pub fn completed(&self) -> Option<&Instance> {
        match &self.outcome {
            ChaseOutcome::Completed(i) => Some(i),
            ChaseOutcome::FuelExhausted { .. } => None,
        }
    }

    pub fn into_completed(self) -> Option<Instance> {
        match self.outcome {
            ChaseOutcome::Completed(i) => Some(i),
            ChaseOutcome::FuelExhausted { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChaseError {
    #[error("equality rule `{rule}` demands {left} = {right} between distinct constants")]
    EqualityClash { rule: Name, left: Term, right: Term },
}

/// Substitute `from` by `to` inside a term (pairs included).
fn replace(t: &Term, from: &Term, to: &Term) -> Term {
    if t == from {
        return to.clone();
    }
    match t {
        Term::Pair(p) => Term::pair(replace(&p.0, from, to), replace(&p.1, from, to)),
        other => other.clone(),
    }
}

struct Engine<'a> {
    rules: &'a [ExistentialRule],
    inst: Instance,
    queue: VecDeque<(usize, Assignment)>,
    seen: HashSet<(usize, Vec<Term>)>,
    merges: BTreeMap<Term, Term>,
}

impl Engine<'_> {
    fn key(&self, r: usize, h: &Assignment) -> (usize, Vec<Term>) {
        let vals = self.rules[r]
            .body_vars()
            .into_iter()
            .map(|v| h[&Term::Var(v)].clone())
            .collect();
        (r, vals)
    }

    fn resolve(&self, t: &Term) -> Term {
        let mut cur = t.clone();
        while let Some(next) = self.merges.get(&cur) {
            cur = next.clone();
        }
        cur
    }

    /// Enqueue triggers whose body uses at least one of `new_facts`.
    fn discover(&mut self, new_facts: &[Atom]) {
        for (r, rule) in self.rules.iter().enumerate() {
            for fact in new_facts {
                for (j, atom) in rule.body.iter().enumerate() {
                    if atom.rel != fact.rel || atom.arity() != fact.arity() {
                        continue;
                    }
                    let mut pinned = Assignment::new();
                    let mut ok = true;
                    for (t, e) in atom.args.iter().zip(&fact.args) {
                        match t {
                            Term::Var(_) => match pinned.get(t) {
                                Some(prev) if prev != e => ok = false,
                                _ => {
                                    pinned.insert(t.clone(), e.clone());
                                }
                            },
                            rigid => ok &= rigid == e,
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let rest: Vec<Atom> = rule
                        .body
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != j)
                        .map(|(_, a)| a.clone())
                        .collect();
                    let mut found = Vec::new();
                    for_each_homomorphism(&rest, &self.inst, &pinned, |h| {
                        found.push(h.clone());
                        true
                    });
                    for h in found {
                        let k = self.key(r, &h);
                        if self.seen.insert(k) {
                            self.queue.push_back((r, h));
                        }
                    }
                }
            }
        }
    }

    fn still_matches(&self, rule: &ExistentialRule, h: &Assignment) -> bool {
        rule.body.iter().all(|a| {
            let img = a.map_terms(|t| h.get(t).cloned().unwrap_or_else(|| t.clone()));
            self.inst.contains(&img)
        })
    }
}

/// Remembers the nulls invented for each trigger so that re-running a chase
/// step on the same trigger reproduces the same nulls.
#[derive(Debug, Clone, Default)]
pub struct NullMemo {
    ids: std::collections::HashMap<(Name, Vec<Term>), usize>,
}

impl NullMemo {
    fn id(&mut self, rule: &Name, trigger: Vec<Term>) -> usize {
        let next = self.ids.len() + 1;
        *self.ids.entry((rule.clone(), trigger)).or_insert(next)
    }
}

/// Run the chase of `start` under `rules`.
pub fn run_chase(
    start: &Instance,
    rules: &[ExistentialRule],
    cfg: &ChaseConfig,
) -> Result<ChaseResult, ChaseError> {
    run_chase_memo(start, rules, cfg, None)
}

/// Like [`run_chase`], but null labels come from `memo` (keyed by rule and
/// trigger) instead of the step counter.
pub fn run_chase_memo(
    start: &Instance,
    rules: &[ExistentialRule],
    cfg: &ChaseConfig,
    mut memo: Option<&mut NullMemo>,
) -> Result<ChaseResult, ChaseError> {
    let mut eng = Engine {
        rules,
        inst: start.clone(),
        queue: VecDeque::new(),
        seen: HashSet::new(),
        merges: BTreeMap::new(),
    };
    let initial: Vec<Atom> = start.iter().cloned().collect();
    eng.discover(&initial);
    let mut trace = Vec::new();
    let mut steps = 0usize;
    while let Some((r, h)) = eng.queue.pop_front() {
        let rule = &rules[r];
        // Triggers queued before a merge are read through the merge map.
        let h: Assignment = h
            .into_iter()
            .map(|(k, v)| (k, eng.resolve(&v)))
            .collect();
        if !eng.still_matches(rule, &h) {
            continue;
        }
        match &rule.head {
            RuleHead::Atoms(head) => {
                let frontier: Assignment = rule
                    .frontier()
                    .into_iter()
                    .map(|v| {
                        let k = Term::Var(v);
                        let img = h[&k].clone();
                        (k, img)
                    })
                    .collect();
                if find_homomorphism(head, &eng.inst, &frontier).is_some() {
                    continue;
                }
                if steps >= cfg.max_steps {
                    let pending = eng.queue.len() + 1;
                    return Ok(ChaseResult {
                        outcome: ChaseOutcome::FuelExhausted {
                            partial: eng.inst,
                            pending,
                        },
                        trace,
                    });
                }
                steps += 1;
                let mut full = frontier;
                let stamp = match memo.as_deref_mut() {
                    Some(m) => m.id(&rule.name, trigger_of(rule, &h).into_iter().map(|(_, t)| t).collect()),
                    None => steps,
                };
                for v in rule.existential_vars() {
                    let label = format!("{}_{}_{}", cfg.null_prefix, stamp, v);
                    full.insert(Term::Var(v), Term::Null(name(&label)));
                }
                let mut emitted = Vec::new();
                for a in head {
                    let f = a.map_terms(|t| full.get(t).cloned().unwrap_or_else(|| t.clone()));
                    if eng.inst.insert(f.clone()) {
                        emitted.push(f);
                    }
                }
                trace.push(TraceStep {
                    rule: rule.name.clone(),
                    trigger: trigger_of(rule, &h),
                    emitted: emitted.clone(),
                    merged: None,
                });
                eng.discover(&emitted);
            }
            RuleHead::Equality(l, rt) => {
                let img = |t: &Term| h.get(t).cloned().unwrap_or_else(|| t.clone());
                let (a, b) = (img(l), img(rt));
                if a == b {
                    continue;
                }
                let (from, into) = match (a.is_null(), b.is_null()) {
                    (true, false) => (a, b),
                    (false, true) => (b, a),
                    (true, true) => {
                        if a < b {
                            (b, a)
                        } else {
                            (a, b)
                        }
                    }
                    (false, false) => {
                        return Err(ChaseError::EqualityClash {
                            rule: rule.name.clone(),
                            left: a,
                            right: b,
                        })
                    }
                };
                if steps >= cfg.max_steps {
                    let pending = eng.queue.len() + 1;
                    return Ok(ChaseResult {
                        outcome: ChaseOutcome::FuelExhausted {
                            partial: eng.inst,
                            pending,
                        },
                        trace,
                    });
                }
                steps += 1;
                let old = std::mem::take(&mut eng.inst);
                let mut changed = Vec::new();
                for f in old.iter() {
                    let g = f.map_terms(|t| replace(t, &from, &into));
                    if &g != f {
                        changed.push(g.clone());
                    }
                    eng.inst.insert(g);
                }
                eng.merges.insert(from.clone(), into.clone());
                trace.push(TraceStep {
                    rule: rule.name.clone(),
                    trigger: trigger_of(rule, &h),
                    emitted: Vec::new(),
                    merged: Some((from, into)),
                });
                eng.seen.clear();
                eng.discover(&changed);
            }
        }
    }
    Ok(ChaseResult {
        outcome: ChaseOutcome::Completed(eng.inst),
        trace,
    })
}

fn trigger_of(rule: &ExistentialRule, h: &Assignment) -> Vec<(Name, Term)> {
    rule.body_vars()
        .into_iter()
        .map(|v| {
            let t = h[&Term::Var(v.clone())].clone();
            (v, t)
        })
        .collect()
}

/// Re-apply a trace to its start instance.
pub fn replay(start: &Instance, trace: &[TraceStep]) -> Instance {
    let mut inst = start.clone();
    for step in trace {
        match &step.merged {
            Some((from, into)) => inst = inst.map_terms(|t| replace(t, from, into)),
            None => inst.extend(step.emitted.iter().cloned()),
        }
    }
    inst
}

/// Does the instance satisfy every rule?
pub fn satisfies(i: &Instance, rules: &[ExistentialRule]) -> bool {
    rules.iter().all(|r| {
        let mut ok = true;
        for_each_homomorphism(&r.body, i, &Assignment::new(), |h| {
            ok = match &r.head {
                RuleHead::Atoms(head) => find_homomorphism(head, i, h).is_some(),
                RuleHead::Equality(a, b) => {
                    let img = |t: &Term| h.get(t).cloned().unwrap_or_else(|| t.clone());
                    img(a) == img(b)
                }
            };
            ok
        });
        ok
    })
}

/// A position: relation name and argument index.
pub type Position = (Name, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DependencyEdge {
    pub from: (String, usize),
    pub to: (String, usize),
    pub special: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AcyclicityReport {
    pub weakly_acyclic: bool,
    pub positions: Vec<(String, usize)>,
    pub edges: Vec<DependencyEdge>,
    /// Special edges lying on a cycle.
    pub offending: Vec<DependencyEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AcyclicityError {
    #[error("weak acyclicity is defined for tuple-generating rules only; `{0}` is an equality rule")]
    EqualityRule(Name),
}

/// Weak acyclicity of the position dependency graph.
pub fn is_weakly_acyclic(rules: &[ExistentialRule]) -> Result<AcyclicityReport, AcyclicityError> {
    let mut positions: BTreeSet<Position> = BTreeSet::new();
    for r in rules {
        if !r.is_tgd() {
            return Err(AcyclicityError::EqualityRule(r.name.clone()));
        }
        for a in r.body.iter().chain(r.head_atoms()) {
            for i in 0..a.arity() {
                positions.insert((a.rel.clone(), i));
            }
        }
    }
    let mut graph: DiGraph<Position, bool> = DiGraph::new();
    let index: BTreeMap<Position, NodeIndex> = positions
        .iter()
        .map(|p| (p.clone(), graph.add_node(p.clone())))
        .collect();
    let mut edges: BTreeSet<(Position, Position, bool)> = BTreeSet::new();
    for r in rules {
        let existential: BTreeSet<Name> = r.existential_vars().into_iter().collect();
        for v in r.frontier() {
            let var = Term::Var(v.clone());
            for b in &r.body {
                for (i, t) in b.args.iter().enumerate() {
                    if t != &var {
                        continue;
                    }
                    let from = (b.rel.clone(), i);
                    for h in r.head_atoms() {
                        for (j, u) in h.args.iter().enumerate() {
                            let to = (h.rel.clone(), j);
                            if u == &var {
                                edges.insert((from.clone(), to, false));
                            } else if u.as_var().is_some_and(|w| existential.contains(w)) {
                                edges.insert((from.clone(), to, true));
                            }
                        }
                    }
                }
            }
        }
    }
    for (from, to, special) in &edges {
        graph.add_edge(index[from], index[to], *special);
    }
    let mut component = BTreeMap::new();
    for (c, scc) in tarjan_scc(&graph).into_iter().enumerate() {
        for n in scc {
            component.insert(n, c);
        }
    }
    let show = |p: &Position| (p.0.to_string(), p.1);
    let mut offending = Vec::new();
    let mut all = Vec::new();
    for (from, to, special) in &edges {
        let e = DependencyEdge {
            from: show(from),
            to: show(to),
            special: *special,
        };
        if *special && component[&index[from]] == component[&index[to]] {
            offending.push(e.clone());
        }
        all.push(e);
    }
    Ok(AcyclicityReport {
        weakly_acyclic: offending.is_empty(),
        positions: positions.iter().map(show).collect(),
        edges: all,
        offending,
    })
}
