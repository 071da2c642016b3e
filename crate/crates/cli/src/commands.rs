//! One function per subcommand. Each returns an [`Outcome`] carrying both
//! the human-readable text and the JSON result.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde_json::{json, Value};

use viewforge_core::canonical::{canonical_dview, is_monadic_frontier, source_vars};
use viewforge_core::chase::is_weakly_acyclic;
use viewforge_core::determinacy::{check_determinacy_in, DeterminacyVerdict};
use viewforge_core::disclosure::{check_un_disclosure_cq_rules, DisclosureVerdict};
use viewforge_core::homomorphism::{cq_homomorphism, holds};
use viewforge_core::minimize::{is_minimal, minimize, minimize_under_rules};
use viewforge_core::model::{
    build_canondb, join_atoms, validate_dschema, ConjunctiveQuery, DInstance, DView, Dcq, Instance, View, ViewDef,
};
use viewforge_core::oracle::{check_un_disclosure_oracle, refute_determinacy, sq_equivalence_exact, OracleDisclosure};
use viewforge_core::ra::compile_dcq_to_ra;
use viewforge_core::replication::{check_projections, min_replicated_pair_height, part_sizes, str_iterate};
use viewforge_core::shuffle::{build_shuffle_views, shuffle_equivalent, ShuffleView};

use crate::notation::{assignment_json, instance_json, pairs_json, tuple_json};
use crate::report::{
    input, pick_dview, pick_instance, pick_query, pick_secrets, tri_label, CliError, Outcome, Settings, Status,
};
use crate::workspace::{view_text, Workspace};

fn outcome(command: &str, status: Status, inputs: Value, text: String, result: Value) -> Outcome {
    Outcome {
        command: command.into(),
        status,
        inputs,
        text,
        result,
    }
}

pub fn validate(ws: &Workspace) -> Outcome {
    let schema = &ws.schema;
    let mut text = format!(
        "ok: {} sources, {} relations, {} queries, {} secrets, {} rules, {} views, {} d-views, {} instances\n",
        schema.sources().len(),
        schema.relations().count(),
        ws.queries.len(),
        ws.secrets.len(),
        ws.rules.len(),
        ws.views.len(),
        ws.dviews.len(),
        ws.instances.len()
    );
    let mut acyclic = Value::Null;
    if !ws.rules.is_empty() {
        match is_weakly_acyclic(&ws.rules) {
            Ok(rep) => {
                let _ = writeln!(
                    text,
                    "rules: {}",
                    if rep.weakly_acyclic { "weakly acyclic" } else { "not weakly acyclic, the chase may need --fuel" }
                );
                acyclic = json!(rep.weakly_acyclic);
            }
            Err(_) => {
                text += "rules: contain equality rules, weak acyclicity not checked\n";
            }
        }
    }
    let mut violations = Vec::new();
    for (n, i) in &ws.instances {
        for v in validate_dschema(schema, &DInstance::distribute(schema, i)) {
            violations.push(json!({"instance": n.to_string(), "violation": serde_json::to_value(&v).unwrap_or(Value::Null)}));
        }
    }
    let result = json!({
        "ok": violations.is_empty(),
        "sources": schema.sources().len(),
        "relations": schema.relations().count(),
        "queries": ws.queries.iter().map(|q| q.name.to_string()).collect::<Vec<_>>(),
        "secrets": ws.secrets.iter().map(|q| q.name.to_string()).collect::<Vec<_>>(),
        "rules": ws.rules.len(),
        "views": ws.views.len(),
        "dviews": ws.dviews.len(),
        "instances": ws.instances.len(),
        "weakly_acyclic": acyclic,
        "violations": violations,
    });
    outcome("validate", Status::Definitive, json!({}), text, result)
}

pub fn views_json(v: &DView) -> Value {
    json!(v
        .views
        .iter()
        .map(|w| json!({"name": w.name.to_string(), "source": w.source.to_string(), "text": view_text(w)}))
        .collect::<Vec<_>>())
}

pub fn dview_text(v: &DView) -> String {
    let mut s = String::new();
    for w in &v.views {
        let _ = writeln!(s, "{}", view_text(w));
    }
    let names: Vec<&str> = v.views.iter().map(|w| &*w.name).collect();
    let _ = writeln!(s, "dview {} {{ {} }}", v.name, names.join(", "));
    s
}

pub fn canonical(ws: &Workspace, query: Option<&str>) -> Result<Outcome, CliError> {
    let q = pick_query(ws, query)?;
    let v = canonical_dview(q, &ws.schema).map_err(|e| CliError::Input(e.to_string()))?;
    let sv = source_vars(q, &ws.schema).map_err(|e| CliError::Input(e.to_string()))?;
    let monadic = is_monadic_frontier(q, &ws.schema).map_err(|e| CliError::Input(e.to_string()))?;
    let mut text = String::new();
    for s in &sv.per_source {
        if !s.svars.is_empty() {
            let _ = writeln!(text, "# source-join variables at {}: {}", s.source, join_or_none(&s.sjvars));
        }
    }
    text += &dview_text(&v);
    if monadic {
        text += "# monadic frontier: every source has at most one source-join variable\n";
    }
    let result = json!({
        "query": q.to_string(),
        "views": views_json(&v),
        "source_vars": serde_json::to_value(&sv).unwrap_or(Value::Null),
        "monadic_frontier": monadic,
    });
    Ok(outcome("canonical", Status::Definitive, json!({"query": q.name.to_string()}), text, result))
}

fn join_or_none(v: &[String]) -> String {
    if v.is_empty() {
        "none".into()
    } else {
        v.join(", ")
    }
}

pub fn minimize_cmd(ws: &Workspace, query: Option<&str>, s: &Settings) -> Result<Outcome, CliError> {
    let q = pick_query(ws, query)?;
    let inputs = json!({"query": q.name.to_string()});
    let m = if ws.rules.is_empty() {
        minimize(q)
    } else {
        match minimize_under_rules(q, &ws.rules, &s.chase()).map_err(|e| CliError::Input(e.to_string()))? {
            Some(m) => m,
            None => {
                let text = "unknown: an equivalence test under the rules ran out of fuel (raise --fuel)\n".to_string();
                let result = json!({"input": q.to_string(), "minimized": Value::Null, "reason": "chase fuel exhausted"});
                return Ok(outcome("minimize", Status::Unknown, inputs, text, result));
            }
        }
    };
    let removed: Vec<String> = q
        .atoms
        .iter()
        .filter(|a| !m.atoms.contains(a))
        .map(|a| a.to_string())
        .collect();
    // Without rules the fold is a homomorphism of the input onto the result.
    let fold = if ws.rules.is_empty() { cq_homomorphism(q, &m) } else { None };
    let was_minimal = ws.rules.is_empty() && is_minimal(q).minimal;
    let mut text = format!("query {m}\n");
    if removed.is_empty() {
        text += "# already minimal\n";
    } else {
        let _ = writeln!(text, "# removed: {}", removed.join(", "));
    }
    let result = json!({
        "input": q.to_string(),
        "minimized": m.to_string(),
        "removed": removed,
        "input_minimal": was_minimal,
        "under_rules": !ws.rules.is_empty(),
        "fold": fold.as_ref().map(assignment_json),
    });
    Ok(outcome("minimize", Status::Definitive, inputs, text, result))
}

pub fn shuffle_view_json(v: &ShuffleView) -> Value {
    json!({
        "name": v.name.to_string(),
        "source": v.source.to_string(),
        "vars": v.vars.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        "type": v.tau.guard().iter().map(|g| g.to_string()).collect::<Vec<_>>(),
        "shuffles": v.shuffles.iter().map(shuffle_text).collect::<Vec<_>>(),
        "unknown": v.unknown,
        "text": view_text(&v.to_view()),
    })
}

fn shuffle_text(mu: &viewforge_core::shuffle::Shuffle) -> String {
    if mu.is_identity() {
        return "identity".into();
    }
    let parts: Vec<String> = mu.map.iter().map(|(a, b)| format!("{a}->{b}")).collect();
    parts.join(" ")
}

pub fn shuffles(ws: &Workspace, query: Option<&str>, source: Option<&str>, s: &Settings) -> Result<Outcome, CliError> {
    let q = pick_query(ws, query)?;
    if let Some(src) = source {
        if !ws.schema.sources().iter().any(|x| &**x == src) {
            return input(format!("unknown source `{src}`"));
        }
    }
    let views = build_shuffle_views(q, &ws.schema, &ws.rules, &s.shuffle()).map_err(|e| CliError::Input(e.to_string()))?;
    let views: Vec<ShuffleView> = views.into_iter().filter(|v| source.is_none_or(|x| &*v.source == x)).collect();
    let mut text = String::new();
    let mut status = Status::Definitive;
    for v in &views {
        let guard: Vec<String> = v.tau.guard().iter().map(|g| g.to_string()).collect();
        let shuffles: Vec<String> = v.shuffles.iter().map(shuffle_text).collect();
        let _ = writeln!(
            text,
            "# {} type [{}] invariant shuffles: {}",
            v.name,
            guard.join(", "),
            shuffles.join("; ")
        );
        if v.unknown {
            status = Status::Unknown;
            let _ = writeln!(text, "# {}: some invariance test was inconclusive (raise --fuel)", v.name);
        }
        let _ = writeln!(text, "{}", view_text(&v.to_view()));
    }
    let inputs = json!({"query": q.name.to_string(), "source": source});
    let result = json!({"views": views.iter().map(shuffle_view_json).collect::<Vec<_>>()});
    Ok(outcome("shuffles", status, inputs, text, result))
}

fn as_dcq(v: &View) -> Dcq {
    match &v.def {
        ViewDef::Cq(q) => Dcq {
            vars: q.free.clone(),
            disjuncts: vec![q.clone()],
            guard: vec![],
        },
        ViewDef::Dcq(d) => d.clone(),
        ViewDef::Ra(_) => unreachable!("workspace views are CQs or DCQs"),
    }
}

pub fn compile_json(compiled: &[View]) -> Value {
    json!(compiled
        .iter()
        .map(|c| match &c.def {
            ViewDef::Ra(e) => json!({
                "name": c.name.to_string(),
                "attrs": e.attrs().iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                "expr": e.to_string(),
            }),
            _ => Value::Null,
        })
        .collect::<Vec<_>>())
}

pub fn ra_lines(compiled: &[View]) -> String {
    let mut s = String::new();
    for c in compiled {
        if let ViewDef::Ra(e) = &c.def {
            let _ = writeln!(s, "{} := {e}", c.name);
        }
    }
    s
}

pub fn to_ra(
    ws: &Workspace,
    view_names: &[String],
    from_shuffles: bool,
    query: Option<&str>,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let views: Vec<View> = if from_shuffles {
        let q = pick_query(ws, query)?;
        build_shuffle_views(q, &ws.schema, &ws.rules, &s.shuffle())
            .map_err(|e| CliError::Input(e.to_string()))?
            .iter()
            .map(|v| v.to_view())
            .collect()
    } else if view_names.is_empty() {
        if ws.views.is_empty() {
            return input("the workspace defines no view");
        }
        ws.views.clone()
    } else {
        view_names
            .iter()
            .map(|n| ws.view(n).cloned().ok_or_else(|| CliError::Input(format!("unknown view `{n}`"))))
            .collect::<Result<_, _>>()?
    };
    let mut text = String::new();
    let mut out = Vec::new();
    for v in &views {
        let compiled = compile_dcq_to_ra(&v.name, &v.source, &as_dcq(v));
        let _ = writeln!(text, "# {}", view_text(v));
        text += &ra_lines(&compiled);
        out.push(json!({"view": v.name.to_string(), "source": v.source.to_string(), "compiled": compile_json(&compiled)}));
    }
    let inputs = json!({
        "views": views.iter().map(|v| v.name.to_string()).collect::<Vec<_>>(),
        "shuffles": from_shuffles,
        "query": query,
    });
    Ok(outcome("to-ra", Status::Definitive, inputs, text, json!({"views": out})))
}

pub fn determinacy_json(v: &DeterminacyVerdict) -> Value {
    match v {
        DeterminacyVerdict::Determined { round, assignment } => json!({
            "verdict": v.label(),
            "round": round,
            "assignment": pairs_json(assignment),
        }),
        DeterminacyVerdict::NotDetermined { round, fixpoint, witness } => json!({
            "verdict": v.label(),
            "round": round,
            "fixpoint": instance_json(fixpoint),
            "witness": {
                "left": instance_json(&witness.left),
                "right": instance_json(&witness.right),
                "tuple": tuple_json(&witness.tuple),
            },
        }),
        DeterminacyVerdict::Unknown { reason } => json!({"verdict": v.label(), "reason": reason}),
    }
}

fn determinacy_text(v: &DeterminacyVerdict) -> String {
    match v {
        DeterminacyVerdict::Determined { round, assignment } => {
            let pairs: Vec<String> = assignment.iter().map(|(x, t)| format!("{x}->{t}")).collect();
            format!("determined (round {round})\n  homomorphism: {}\n", pairs.join(", "))
        }
        DeterminacyVerdict::NotDetermined { round, witness, .. } => format!(
            "not determined (fixpoint at round {round})\n  left:  {}\n  right: {}\n  tuple: ({})\n",
            witness.left,
            witness.right,
            witness.tuple.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
        ),
        DeterminacyVerdict::Unknown { reason } => format!("unknown: {reason}\n"),
    }
}

pub fn require_cq_views(v: &DView, command: &str) -> Result<(), CliError> {
    if let Some(w) = v.views.iter().find(|w| w.as_cq().is_none()) {
        return input(format!(
            "view `{}` is a disjunctive view; `{command}` works on CQ views (try `oracle {command}`)",
            w.name
        ));
    }
    Ok(())
}

pub fn determinacy(ws: &Workspace, query: Option<&str>, dview: &str, s: &Settings) -> Result<Outcome, CliError> {
    let q = pick_query(ws, query)?;
    let v = pick_dview(ws, dview)?;
    require_cq_views(&v, "determinacy")?;
    let inputs = json!({"query": q.name.to_string(), "dview": dview});
    let (run, lowered) = match check_determinacy_in(q, &v, &ws.rules, &ws.schema, &s.determinacy()) {
        Ok(x) => x,
        Err(e) => {
            let text = format!("unknown: {e}\n");
            let result = json!({"verdict": "unknown", "reason": e.to_string()});
            return Ok(outcome("determinacy", Status::Unknown, inputs, text, result));
        }
    };
    let mut text = determinacy_text(&run.verdict);
    if lowered.rules.len() > ws.rules.len() {
        let _ = writeln!(text, "# replication lowered to {} copy rules", lowered.rules.len() - ws.rules.len());
    }
    let mut result = determinacy_json(&run.verdict);
    result["lowered_rules"] = json!(lowered.rules.iter().map(|r| r.to_string()).collect::<Vec<_>>());
    if s.trace {
        let mut rounds = Vec::new();
        for r in &run.rounds {
            let _ = writeln!(
                text,
                "# round {}: |F0|={} |F1|={} |F2|={} |G2|={} |F3|={} |F4|={} |G4|={} |F5|={}",
                r.round,
                r.f0.len(),
                r.f1.len(),
                r.f2.len(),
                r.g2.len(),
                r.f3.len(),
                r.f4.len(),
                r.g4.len(),
                r.f5.len()
            );
            rounds.push(json!({
                "round": r.round,
                "f0": instance_json(&r.f0),
                "f2": instance_json(&r.f2),
                "f5": instance_json(&r.f5),
            }));
        }
        result["rounds"] = json!(rounds);
    }
    let status = match run.verdict {
        DeterminacyVerdict::Unknown { .. } => Status::Unknown,
        _ => Status::Definitive,
    };
    Ok(outcome("determinacy", status, inputs, text, result))
}

pub fn disclosure_json(v: &DisclosureVerdict) -> Value {
    match v {
        DisclosureVerdict::Disclosing { instance, matching } => json!({
            "verdict": v.label(),
            "instance": instance_json(instance),
            "matching": assignment_json(matching),
        }),
        DisclosureVerdict::NonDisclosing { witness } => json!({"verdict": v.label(), "witness": instance_json(witness)}),
        DisclosureVerdict::Unknown { reason } => json!({"verdict": v.label(), "reason": reason}),
    }
}

pub fn disclosure_text(v: &DisclosureVerdict) -> String {
    match v {
        DisclosureVerdict::Disclosing { instance, .. } => format!("disclosing\n  forced facts: {instance}\n"),
        DisclosureVerdict::NonDisclosing { witness } => format!("non-disclosing\n  witness: {witness}\n"),
        DisclosureVerdict::Unknown { reason } => format!("unknown: {reason}\n"),
    }
}

pub fn disclosure(ws: &Workspace, dview: &str, secrets: &[String], s: &Settings) -> Result<Outcome, CliError> {
    let v = pick_dview(ws, dview)?;
    require_cq_views(&v, "disclosure")?;
    let ps = pick_secrets(ws, secrets)?;
    let mut text = String::new();
    let mut per = Vec::new();
    let mut status = Status::Definitive;
    for p in &ps {
        let verdict = check_un_disclosure_cq_rules(&v, p, &ws.schema, &ws.rules, &s.chase())
            .unwrap_or_else(|e| DisclosureVerdict::Unknown { reason: e.to_string() });
        if matches!(verdict, DisclosureVerdict::Unknown { .. }) {
            status = Status::Unknown;
        }
        let _ = write!(text, "{}: {}", p.name, disclosure_text(&verdict));
        let mut j = disclosure_json(&verdict);
        j["secret"] = json!(p.name.to_string());
        per.push(j);
    }
    let inputs = json!({
        "dview": dview,
        "secrets": ps.iter().map(|p| p.name.to_string()).collect::<Vec<_>>(),
    });
    Ok(outcome("disclosure", status, inputs, text, json!({"secrets": per})))
}

pub fn dinstance_json(d: &DInstance) -> Value {
    let m: serde_json::Map<String, Value> = d.parts.iter().map(|(s, i)| (s.to_string(), instance_json(i))).collect();
    Value::Object(m)
}

pub fn replication(
    ws: &Workspace,
    query: Option<&str>,
    secrets: &[String],
    instance: Option<&str>,
    steps: usize,
) -> Result<Outcome, CliError> {
    let q = pick_query(ws, query)?;
    if !q.is_boolean() {
        return input(format!("`replication` needs a Boolean query; `{}` has free variables", q.name));
    }
    let ps = if secrets.is_empty() && ws.secrets.is_empty() { vec![] } else { pick_secrets(ws, secrets)? };
    let (label, start) = match instance {
        Some(n) => (n.to_string(), DInstance::distribute(&ws.schema, pick_instance(ws, n)?)),
        None => ("critical".to_string(), viewforge_core::disclosure::critical_instance(&ws.schema)),
    };
    let canon = build_canondb(q);
    let mut text = format!("# Str iterates of {label} with canondb({})\n", q.name);
    let mut iterates = Vec::new();
    let mut prev: Option<DInstance> = None;
    for n in 0..=steps {
        let d = str_iterate(&start, q, n);
        let g = d.global();
        let valid = validate_dschema(&ws.schema, &d).is_empty();
        let proj = prev
            .as_ref()
            .map(|p| p.parts.iter().all(|(s, i)| check_projections(i, &canon, &d.part(s))));
        let height = min_replicated_pair_height(&d, &ws.schema);
        let secret_holds: Vec<Value> = ps.iter().map(|p| json!({"secret": p.name.to_string(), "holds": holds(p, &g)})).collect();
        let sizes: Vec<String> = part_sizes(&d).iter().map(|(s, k)| format!("{s}:{k}")).collect();
        let _ = writeln!(
            text,
            "step {n}: facts [{}] valid={valid} query={} pair_height={} projections={}{}",
            sizes.join(" "),
            holds(q, &g),
            height.map_or("-".to_string(), |h| h.to_string()),
            proj.map_or("-".to_string(), |b| b.to_string()),
            ps.iter()
                .map(|p| format!(" {}={}", p.name, holds(p, &g)))
                .collect::<String>()
        );
        iterates.push(json!({
            "step": n,
            "instance": dinstance_json(&d),
            "valid": valid,
            "query_holds": holds(q, &g),
            "pair_height": height,
            "projections": proj,
            "secrets": secret_holds,
        }));
        prev = Some(d);
    }
    let inputs = json!({
        "query": q.name.to_string(),
        "secrets": ps.iter().map(|p| p.name.to_string()).collect::<Vec<_>>(),
        "instance": instance,
        "steps": steps,
    });
    Ok(outcome("replication", Status::Definitive, inputs, text, json!({"iterates": iterates})))
}

fn restrict_to(ws: &Workspace, i: &Instance, source: &str) -> Instance {
    i.restrict(|r| ws.schema.relation(r).is_some_and(|x| x.visible_at(source)))
}

pub fn oracle_equiv(
    ws: &Workspace,
    query: Option<&str>,
    source: &str,
    left: &str,
    right: &str,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let q = pick_query(ws, query)?;
    if !ws.schema.sources().iter().any(|x| &**x == source) {
        return input(format!("unknown source `{source}`"));
    }
    let i1 = restrict_to(ws, pick_instance(ws, left)?, source);
    let i2 = restrict_to(ws, pick_instance(ws, right)?, source);
    let exact = sq_equivalence_exact(&i1, &i2, q, source, &ws.schema).map_err(|e| CliError::Input(e.to_string()))?;
    let mut text = String::new();
    let mut result = json!({"left": instance_json(&i1), "right": instance_json(&i2)});
    match &exact {
        None => text += "equivalent: every canonical context completes on both sides\n",
        Some(w) => {
            let _ = writeln!(
                text,
                "separated: the context {} built from the {} instance completes only there",
                w.context,
                if w.from_first { "left" } else { "right" }
            );
            result["context"] = json!({
                "from_first": w.from_first,
                "binding": pairs_json(&w.binding),
                "atoms": instance_json(&w.context),
            });
        }
    }
    result["exact"] = json!(exact.is_none());
    let mut status = Status::Definitive;
    if q.is_boolean() {
        let se = shuffle_equivalent(&i1, &i2, q, source, &ws.schema, &ws.rules, &s.shuffle())
            .map_err(|e| CliError::Input(e.to_string()))?;
        let _ = writeln!(text, "shuffle equivalent: {}", tri_label(se.verdict));
        status = Status::of(se.verdict);
        result["shuffle_equivalent"] = json!(tri_label(se.verdict));
        if let Some(w) = &se.witness {
            result["shuffle_witness"] = json!({"from_first": w.from_first, "binding": pairs_json(&w.binding)});
        }
    }
    let inputs = json!({"query": q.name.to_string(), "source": source, "left": left, "right": right});
    Ok(outcome("oracle equiv", status, inputs, text, result))
}

pub fn oracle_determinacy(ws: &Workspace, query: Option<&str>, dview: &str, s: &Settings) -> Result<Outcome, CliError> {
    let q = pick_query(ws, query)?;
    let v = pick_dview(ws, dview)?;
    let b = s.refute_bounds();
    let cx = refute_determinacy(q, &v, &ws.schema, b, &ws.rules);
    let inputs = json!({"query": q.name.to_string(), "dview": dview});
    let bounds = json!({"domain_size": b.domain_size, "max_facts": b.max_facts});
    let (text, result) = match cx {
        Some(c) => (
            format!("refuted: equal view images, different answers\n  first:  {}\n  second: {}\n", c.first, c.second),
            json!({"refuted": true, "bounds": bounds, "first": instance_json(&c.first), "second": instance_json(&c.second)}),
        ),
        None => (
            format!(
                "no counterexample with domain <= {} and <= {} facts per relation\n",
                b.domain_size, b.max_facts
            ),
            json!({"refuted": false, "bounds": bounds}),
        ),
    };
    Ok(outcome("oracle determinacy", Status::Definitive, inputs, text, result))
}

pub fn oracle_disclosure_json(o: &OracleDisclosure) -> Value {
    match o {
        OracleDisclosure::Disclosing { witness, tuple } => {
            json!({"verdict": "disclosing", "witness": instance_json(witness), "tuple": tuple_json(tuple)})
        }
        OracleDisclosure::NoWitnessUpToBound { candidates } => {
            json!({"verdict": "no_witness_up_to_bound", "candidates": candidates})
        }
    }
}

pub fn oracle_disclosure(ws: &Workspace, dview: &str, secrets: &[String], s: &Settings) -> Result<Outcome, CliError> {
    let v = pick_dview(ws, dview)?;
    let ps = pick_secrets(ws, secrets)?;
    let b = s.disclosure_bounds();
    let mut text = String::new();
    let mut per = Vec::new();
    for p in &ps {
        let o = check_un_disclosure_oracle(&v, p, &ws.schema, &ws.rules, b);
        match &o {
            OracleDisclosure::Disclosing { witness, .. } => {
                let _ = writeln!(text, "{}: disclosing on {witness}, no alternative with domain <= {}", p.name, b.alt_domain);
            }
            OracleDisclosure::NoWitnessUpToBound { candidates } => {
                let _ = writeln!(text, "{}: no disclosure witness among {candidates} candidates", p.name);
            }
        }
        let mut j = oracle_disclosure_json(&o);
        j["secret"] = json!(p.name.to_string());
        per.push(j);
    }
    let inputs = json!({"dview": dview, "secrets": ps.iter().map(|p| p.name.to_string()).collect::<Vec<_>>()});
    let result = json!({
        "bounds": {"alt_domain": b.alt_domain, "max_facts": b.max_facts, "witness_domain": b.witness_domain},
        "secrets": per,
    });
    Ok(outcome("oracle disclosure", Status::Definitive, inputs, text, result))
}

/// Relations of `q` that are replicated.
pub fn replicated_in(q: &ConjunctiveQuery, ws: &Workspace) -> BTreeSet<String> {
    q.relations()
        .iter()
        .filter(|r| ws.schema.relation(r).is_some_and(|x| x.is_replicated()))
        .map(|r| r.to_string())
        .collect()
}

pub fn atoms_text(q: &ConjunctiveQuery) -> String {
    join_atoms(&q.atoms)
}
