//! The `verify` command: re-check the witnesses embedded in a JSON report.
//!
//! Checks use homomorphism search, query evaluation and rule satisfaction
//! directly. Verdicts that carry no finite witness (determinacy, oracle
//! bounds) are checked against the brute-force oracle instead.

use std::fmt::Write as _;

use serde_json::{json, Value};

use viewforge_core::canonical::canonical_dview;
use viewforge_core::chase::satisfies;
use viewforge_core::determinacy::lower_replication;
use viewforge_core::disclosure::critical_global;
use viewforge_core::homomorphism::{apply_all, enumerate_matches, find_homomorphism, holds, holds_at, Assignment};
use viewforge_core::model::{build_canondb, canon_const, ConjunctiveQuery, DSchema, DView, ExistentialRule, Instance, Term};
use viewforge_core::oracle::{refute_determinacy, views_agree, Bounds};
use viewforge_core::replication::check_projections;

use crate::notation::{assignment_from, instance_from, tuple_from};
use crate::report::{input, CliError, Outcome, Status, REPORT_VERSION};
use crate::workspace::{parse_workspace, Workspace};

#[derive(Debug, Clone)]
struct Check {
    what: String,
    outcome: Result<(), String>,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, what: impl Into<String>, outcome: Result<(), String>) {
        self.0.push(Check {
            what: what.into(),
            outcome,
        });
    }

    fn ensure(&mut self, what: impl Into<String>, ok: bool, why: &str) {
        self.push(what, if ok { Ok(()) } else { Err(why.to_string()) });
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, String> {
    v.get(key).ok_or_else(|| format!("missing `{key}`"))
}

fn str_field<'a>(v: &'a Value, key: &str) -> Result<&'a str, String> {
    field(v, key)?.as_str().ok_or_else(|| format!("`{key}` is not a string"))
}

fn names(v: &Value, key: &str) -> Vec<String> {
    v.get(key)
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|x| x.as_str().map(str::to_string)).collect())
        .unwrap_or_default()
}

struct Ctx<'a> {
    ws: &'a Workspace,
    inputs: &'a Value,
}

impl Ctx<'_> {
    fn query(&self) -> Result<&ConjunctiveQuery, String> {
        let n = str_field(self.inputs, "query")?;
        self.ws.query(n).ok_or_else(|| format!("query `{n}` is not in the embedded workspace"))
    }

    fn secret(&self, n: &str) -> Result<&ConjunctiveQuery, String> {
        self.ws.secret(n).ok_or_else(|| format!("secret `{n}` is not in the embedded workspace"))
    }

    fn dview(&self) -> Result<DView, String> {
        let n = str_field(self.inputs, "dview")?;
        self.ws.dview(n).ok_or_else(|| format!("d-view `{n}` is not in the embedded workspace"))
    }
}

/// `h` maps every atom of `atoms` into `target`.
fn maps_into(h: &Assignment, atoms: &[viewforge_core::model::Atom], target: &Instance) -> Result<(), String> {
    match apply_all(h, atoms).iter().find(|a| !target.contains(a)) {
        None => Ok(()),
        Some(a) => Err(format!("image atom {a} is missing")),
    }
}

fn identity_on(vars: &[viewforge_core::model::Name]) -> Assignment {
    vars.iter().map(|v| (Term::Var(v.clone()), Term::Var(v.clone()))).collect()
}

fn image(v: &DView, i: &Instance) -> Result<Vec<std::collections::BTreeSet<Vec<Term>>>, String> {
    v.views
        .iter()
        .map(|w| {
            w.as_cq()
                .map(|q| enumerate_matches(q, i))
                .ok_or_else(|| format!("view `{}` is not a CQ", w.name))
        })
        .collect()
}

fn check_nondisclosure(v: &DView, p: &ConjunctiveQuery, schema: &DSchema, rules: &[ExistentialRule], w: &Instance) -> Result<(), String> {
    let crit = critical_global(schema);
    if image(v, &crit)? != image(v, w)? {
        return Err("the witness has a different view image than the critical instance".into());
    }
    if holds_at(p, w, &vec![Term::critical(); p.free.len()]) {
        return Err("the secret holds on the witness".into());
    }
    if !satisfies(w, rules) {
        return Err("the witness violates the rules".into());
    }
    Ok(())
}

fn check_disclosing(p: &ConjunctiveQuery, rules: &[ExistentialRule], j: &Value) -> Result<(), String> {
    let inst = instance_from(field(j, "instance")?)?;
    let h = assignment_from(field(j, "matching")?)?;
    maps_into(&h, &p.atoms, &inst)?;
    for x in &p.free {
        if h.get(&Term::Var(x.clone())) != Some(&Term::critical()) {
            return Err(format!("free variable {x} is not matched to the critical constant"));
        }
    }
    if !satisfies(&inst, rules) {
        return Err("the forced instance violates the rules".into());
    }
    Ok(())
}

fn check_disclosure_verdict(
    checks: &mut Checks,
    label: &str,
    v: &DView,
    p: &ConjunctiveQuery,
    ws: &Workspace,
    j: &Value,
) {
    match j.get("verdict").and_then(Value::as_str) {
        Some("non_disclosing") => {
            let r = field(j, "witness")
                .and_then(instance_from)
                .and_then(|w| check_nondisclosure(v, p, &ws.schema, &ws.rules, &w));
            checks.push(format!("{label}: non-disclosure witness"), r);
        }
        Some("disclosing") => {
            checks.push(format!("{label}: secret matching"), check_disclosing(p, &ws.rules, j));
        }
        _ => {}
    }
}

fn check_determinacy_verdict(checks: &mut Checks, label: &str, q: &ConjunctiveQuery, v: &DView, ws: &Workspace, j: &Value) {
    match j.get("verdict").and_then(Value::as_str) {
        Some("not_determined") => {
            let r = (|| {
                let low = lower_replication(q, v, &ws.rules, &ws.schema);
                let w = field(j, "witness")?;
                let left = instance_from(field(w, "left")?)?;
                let right = instance_from(field(w, "right")?)?;
                let tuple = tuple_from(field(w, "tuple")?)?;
                if image(&low.dview, &left)? != image(&low.dview, &right)? {
                    return Err("view images differ".to_string());
                }
                if !holds_at(&low.query, &left, &tuple) {
                    return Err("the query fails on the left instance".into());
                }
                if holds_at(&low.query, &right, &tuple) {
                    return Err("the query holds on the right instance".into());
                }
                if !satisfies(&left, &low.rules) || !satisfies(&right, &low.rules) {
                    return Err("a witness instance violates the rules".into());
                }
                Ok(())
            })();
            checks.push(format!("{label}: non-determinacy witness"), r);
        }
        Some("determined") => {
            let b = Bounds {
                domain_size: 2,
                max_facts: 2,
            };
            let cx = refute_determinacy(q, v, &ws.schema, b, &ws.rules);
            checks.ensure(
                format!("{label}: no oracle counterexample (domain 2, 2 facts)"),
                cx.is_none(),
                "the oracle found two instances the views cannot tell apart",
            );
        }
        _ => {}
    }
}

fn per_secret(result: &Value) -> Vec<&Value> {
    result.get("secrets").and_then(Value::as_array).map(|a| a.iter().collect()).unwrap_or_default()
}

fn verify_canonical(c: &Ctx, result: &Value, checks: &mut Checks) -> Result<(), String> {
    let q = c.query()?;
    let canon = build_canondb(q);
    let views = field(result, "views")?.as_array().ok_or("`views` is not an array")?;
    let mut text = String::new();
    for v in views {
        let _ = writeln!(text, "{}", str_field(v, "text")?);
    }
    // Reparse the printed views against the workspace schema alone.
    let mut ws_text = crate::workspace::print_workspace(&Workspace {
        schema: c.ws.schema.clone(),
        ..Workspace::default()
    });
    ws_text += &text;
    let ws = parse_workspace(&ws_text).map_err(|d| format!("printed views do not parse: {}", d[0]))?;
    for v in &ws.views {
        let Some(cq) = v.as_cq() else {
            checks.push(format!("view {}", v.name), Err("not a CQ".into()));
            continue;
        };
        let pin: Assignment = cq.free.iter().map(|x| (Term::Var(x.clone()), canon_const(x))).collect();
        let into = find_homomorphism(&cq.atoms, &canon, &pin).is_some();
        let local: Vec<_> = q
            .atoms
            .iter()
            .filter(|a| c.ws.schema.relation(&a.rel).is_some_and(|r| r.visible_at(&v.source)))
            .cloned()
            .collect();
        let covers = local.iter().all(|a| cq.atoms.contains(a));
        checks.ensure(
            format!("view {}: body is the query's atoms at {}", v.name, v.source),
            into && covers,
            "the view body does not match the query",
        );
    }
    Ok(())
}

fn verify_minimize(c: &Ctx, result: &Value, checks: &mut Checks) -> Result<(), String> {
    let q = c.query()?;
    let Some(m_text) = result.get("minimized").and_then(Value::as_str) else {
        return Ok(());
    };
    let ws = parse_workspace(&format!("{}query {m_text}\n", crate::workspace::print_workspace(&without_query(c.ws, &q.name))))
        .map_err(|d| format!("the minimized query does not parse: {}", d[0]))?;
    let m = ws.query(&q.name).ok_or("minimized query lost")?;
    let qi: Instance = q.atoms.iter().cloned().collect();
    checks.ensure(
        "minimized atoms are a subset of the input",
        m.atoms.iter().all(|a| qi.contains(a)) && m.free == q.free,
        "the minimized query is not a subquery",
    );
    if !c.ws.rules.is_empty() {
        return Ok(());
    }
    let fold = result.get("fold").filter(|f| !f.is_null()).ok_or("missing fold")?;
    let h = assignment_from(fold)?;
    let mut r = maps_into(&h, &q.atoms, &build_canondb(m));
    if r.is_ok() && q.free.iter().any(|x| h.get(&Term::Var(x.clone())) != Some(&canon_const(x))) {
        r = Err("the fold moves a free variable".into());
    }
    checks.push("fold maps the input onto the minimized query", r);
    let pin = identity_on(&m.free);
    let core = m.atoms.iter().enumerate().all(|(k, _)| {
        let rest: Instance = m.atoms.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, a)| a.clone()).collect();
        find_homomorphism(&m.atoms, &rest, &pin).is_none()
    });
    checks.ensure("no atom of the minimized query is redundant", core, "an atom folds away");
    Ok(())
}

fn without_query(ws: &Workspace, name: &str) -> Workspace {
    let mut w = ws.clone();
    w.queries.retain(|q| &*q.name != name);
    w
}

fn verify_determinacy(c: &Ctx, result: &Value, checks: &mut Checks) -> Result<(), String> {
    let q = c.query()?;
    let v = c.dview()?;
    check_determinacy_verdict(checks, "determinacy", q, &v, c.ws, result);
    Ok(())
}

fn verify_disclosure(c: &Ctx, result: &Value, checks: &mut Checks) -> Result<(), String> {
    let v = c.dview()?;
    for j in per_secret(result) {
        let n = str_field(j, "secret")?;
        let p = c.secret(n)?;
        check_disclosure_verdict(checks, n, &v, p, c.ws, j);
    }
    Ok(())
}

fn verify_design(c: &Ctx, result: &Value, checks: &mut Checks) -> Result<(), String> {
    let q = c.query()?;
    if let Some(cands) = result.get("candidates").and_then(Value::as_array) {
        for cand in cands {
            let name = str_field(cand, "dview")?;
            let v = c.ws.dview(name).ok_or_else(|| format!("d-view `{name}` is not in the embedded workspace"))?;
            check_determinacy_verdict(checks, name, q, &v, c.ws, field(cand, "determinacy")?);
            for j in per_secret(cand) {
                let n = str_field(j, "secret")?;
                check_disclosure_verdict(checks, &format!("{name}/{n}"), &v, c.secret(n)?, c.ws, j);
            }
        }
    }
    if let Some(per) = result.get("canonical").and_then(Value::as_array) {
        for j in per {
            let n = str_field(j, "secret")?;
            let (Some(direct), Some(m)) = (j.get("direct").filter(|d| !d.is_null()), j.get("minimized").and_then(Value::as_str)) else {
                continue;
            };
            let ws = parse_workspace(&format!("{}query {m}\n", crate::workspace::print_workspace(&without_query(c.ws, &q.name))))
                .map_err(|d| format!("the minimized query does not parse: {}", d[0]))?;
            let mq = ws.query(&q.name).ok_or("minimized query lost")?;
            let v = canonical_dview(mq, &c.ws.schema).map_err(|e| e.to_string())?;
            check_disclosure_verdict(checks, &format!("canonical/{n}"), &v, c.secret(n)?, c.ws, direct);
        }
    }
    if result.get("class").and_then(Value::as_str) == Some("replication") {
        for j in per_secret(result) {
            let n = str_field(j, "secret")?;
            let p = c.secret(n)?;
            if let Some(h) = j.get("homomorphism").filter(|h| !h.is_null()) {
                let h = assignment_from(h)?;
                checks.push(format!("{n}: homomorphism into the query"), maps_into(&h, &p.atoms, &build_canondb(q)));
            }
            if let Some(demo) = j.get("demo") {
                let its = field(demo, "iterates")?.as_array().ok_or("`iterates` is not an array")?;
                check_iterates(checks, n, q, std::slice::from_ref(p), its.iter().collect())?;
            }
        }
    }
    Ok(())
}

fn dinstance_from(v: &Value) -> Result<Vec<(String, Instance)>, String> {
    let m = v.as_object().ok_or("expected an object of source instances")?;
    m.iter().map(|(s, i)| Ok((s.clone(), instance_from(i)?))).collect()
}

fn check_iterates(
    checks: &mut Checks,
    label: &str,
    q: &ConjunctiveQuery,
    secrets: &[ConjunctiveQuery],
    its: Vec<&Value>,
) -> Result<(), String> {
    let canon = build_canondb(q);
    let mut prev: Option<Vec<(String, Instance)>> = None;
    for (k, it) in its.iter().enumerate() {
        let d = dinstance_from(it.get("instance").unwrap_or(it))?;
        let g: Instance = d.iter().fold(Instance::default(), |acc, (_, i)| acc.union(i));
        if let Some(p) = &prev {
            let ok = d.iter().all(|(s, i)| {
                p.iter().find(|(t, _)| t == s).is_some_and(|(_, pi)| check_projections(pi, &canon, i))
            });
            checks.ensure(format!("{label} step {k}: projections"), ok, "a projection is not a homomorphism");
        }
        checks.ensure(format!("{label} step {k}: query holds"), holds(q, &g), "the query fails");
        if k > 0 {
            for p in secrets {
                if let Some(claimed) = it
                    .get("secrets")
                    .and_then(Value::as_array)
                    .and_then(|a| a.iter().find(|x| x.get("secret").and_then(Value::as_str) == Some(&*p.name)))
                    .and_then(|x| x.get("holds"))
                    .and_then(Value::as_bool)
                {
                    checks.ensure(
                        format!("{label} step {k}: secret {}", p.name),
                        holds(p, &g) == claimed,
                        "the recorded secret answer is wrong",
                    );
                }
            }
        }
        prev = Some(d);
    }
    Ok(())
}

fn verify_replication(c: &Ctx, result: &Value, checks: &mut Checks) -> Result<(), String> {
    let q = c.query()?;
    let secrets: Vec<ConjunctiveQuery> = names(c.inputs, "secrets")
        .iter()
        .map(|n| c.secret(n).cloned())
        .collect::<Result<_, _>>()?;
    let its = field(result, "iterates")?.as_array().ok_or("`iterates` is not an array")?;
    check_iterates(checks, "replication", q, &secrets, its.iter().collect())
}

fn verify_oracle_equiv(c: &Ctx, result: &Value, checks: &mut Checks) -> Result<(), String> {
    let q = c.query()?;
    let Some(ctx) = result.get("context") else {
        return Ok(());
    };
    let left = instance_from(field(result, "left")?)?;
    let right = instance_from(field(result, "right")?)?;
    let context = instance_from(field(ctx, "atoms")?)?;
    let first = field(ctx, "from_first")?.as_bool().ok_or("`from_first` is not a boolean")?;
    let (a, b) = if first { (&left, &right) } else { (&right, &left) };
    let qb = q.boolean_closure();
    checks.ensure("context completes on its own side", holds(&qb, &a.union(&context)), "the context does not complete");
    checks.ensure("context fails on the other side", !holds(&qb, &b.union(&context)), "the context completes on both sides");
    Ok(())
}

fn verify_oracle_determinacy(c: &Ctx, result: &Value, checks: &mut Checks) -> Result<(), String> {
    let q = c.query()?;
    let v = c.dview()?;
    if result.get("refuted").and_then(Value::as_bool) != Some(true) {
        return Ok(());
    }
    let first = instance_from(field(result, "first")?)?;
    let second = instance_from(field(result, "second")?)?;
    checks.ensure("counterexample: view images agree", views_agree(&v, &first, &second), "the views tell the instances apart");
    checks.ensure(
        "counterexample: answers differ",
        enumerate_matches(q, &first) != enumerate_matches(q, &second),
        "the query answers agree",
    );
    checks.ensure(
        "counterexample: rules hold",
        satisfies(&first, &c.ws.rules) && satisfies(&second, &c.ws.rules),
        "an instance violates the rules",
    );
    Ok(())
}

fn verify_oracle_disclosure(c: &Ctx, result: &Value, checks: &mut Checks) -> Result<(), String> {
    for j in per_secret(result) {
        if j.get("verdict").and_then(Value::as_str) != Some("disclosing") {
            continue;
        }
        let n = str_field(j, "secret")?;
        let p = c.secret(n)?;
        let w = instance_from(field(j, "witness")?)?;
        let t = tuple_from(field(j, "tuple")?)?;
        checks.ensure(
            format!("{n}: secret holds on the witness"),
            holds_at(p, &w, &t) && satisfies(&w, &c.ws.rules),
            "the secret fails on the witness",
        );
    }
    Ok(())
}

pub fn verify(report: &str) -> Result<Outcome, CliError> {
    let r: Value = serde_json::from_str(report).map_err(|e| CliError::Input(format!("the report is not JSON: {e}")))?;
    match r.get("viewforge_report").and_then(Value::as_u64) {
        Some(REPORT_VERSION) => {}
        Some(v) => return input(format!("report version {v} is not supported (expected {REPORT_VERSION})")),
        None => return input("not a viewforge report: missing `viewforge_report`"),
    }
    let command = r.get("command").and_then(Value::as_str).unwrap_or_default().to_string();
    let ws_text = r.get("workspace").and_then(Value::as_str).ok_or_else(|| CliError::Input("the report embeds no workspace".into()))?;
    let ws = parse_workspace(ws_text).map_err(CliError::Workspace)?;
    let inputs = r.get("inputs").cloned().unwrap_or(json!({}));
    let result = r.get("result").cloned().unwrap_or(Value::Null);
    let c = Ctx { ws: &ws, inputs: &inputs };
    let mut checks = Checks::default();
    let done = match command.as_str() {
        "canonical" => verify_canonical(&c, &result, &mut checks),
        "minimize" => verify_minimize(&c, &result, &mut checks),
        "determinacy" => verify_determinacy(&c, &result, &mut checks),
        "disclosure" => verify_disclosure(&c, &result, &mut checks),
        "design" => verify_design(&c, &result, &mut checks),
        "replication" => verify_replication(&c, &result, &mut checks),
        "oracle equiv" => verify_oracle_equiv(&c, &result, &mut checks),
        "oracle determinacy" => verify_oracle_determinacy(&c, &result, &mut checks),
        "oracle disclosure" => verify_oracle_disclosure(&c, &result, &mut checks),
        "validate" | "shuffles" | "to-ra" => Ok(()),
        other => return input(format!("unknown report command `{other}`")),
    };
    if let Err(e) = done {
        checks.push("report structure", Err(e));
    }
    let mut text = String::new();
    for ch in &checks.0 {
        match &ch.outcome {
            Ok(()) => {
                let _ = writeln!(text, "ok      {}", ch.what);
            }
            Err(e) => {
                let _ = writeln!(text, "FAILED  {}: {e}", ch.what);
            }
        }
    }
    let failed = checks.0.iter().filter(|c| c.outcome.is_err()).count();
    let _ = writeln!(text, "{} checks, {} failed", checks.0.len(), failed);
    let status = if failed > 0 { Status::Rejected } else { Status::Definitive };
    let result = json!({
        "report_command": command,
        "checks": checks.0.iter().map(|c| json!({"check": c.what, "ok": c.outcome.is_ok(), "error": c.outcome.as_ref().err()})).collect::<Vec<_>>(),
        "failed": failed,
    });
    Ok(Outcome {
        command: "verify".into(),
        status,
        inputs: json!({"command": r.get("command")}),
        text,
        result,
    })
}
