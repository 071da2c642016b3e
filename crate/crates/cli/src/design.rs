//! The `design` command: do useful, UN non-disclosing d-views exist for a
//! query and a set of secrets, and which ones?

use std::fmt::Write as _;

use serde_json::{json, Value};

use viewforge_core::canonical::is_monadic_frontier;
use viewforge_core::determinacy::{check_determinacy_in, DeterminacyVerdict};
use viewforge_core::disclosure::{check_un_disclosure_cq_rules, exists_useful_nondisclosing_cq, CqDesignAnswer, DisclosureVerdict};
use viewforge_core::minimize::minimize_under_rules;
use viewforge_core::model::{ConjunctiveQuery, DView};
use viewforge_core::oracle::{check_un_disclosure_oracle, OracleDisclosure};
use viewforge_core::ra::compile_dcq_to_ra;
use viewforge_core::replication::{fullrep_design, FullRepVerdict};
use viewforge_core::shuffle::{build_shuffle_views, shuffle_dview};
use viewforge_core::Tri;

use crate::commands::{
    compile_json, determinacy_json, dinstance_json, disclosure_json, dview_text, oracle_disclosure_json,
    replicated_in, shuffle_view_json, views_json,
};
use crate::notation::assignment_json;
use crate::report::{input, pick_query, pick_secrets, tri_label, CliError, Outcome, Settings, Status};
use crate::workspace::Workspace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DesignClass {
    Cq,
    All,
    Replication,
}

impl DesignClass {
    pub fn label(self) -> &'static str {
        match self {
            DesignClass::Cq => "cq",
            DesignClass::All => "all",
            DesignClass::Replication => "replication",
        }
    }
}

pub const NO_DESIGN: &str = "No useful and non-disclosing d-view exists";

/// A workspace d-view evaluated as a design: useful, and its verdict for
/// each secret.
struct Candidate {
    dview: DView,
    determined: DeterminacyVerdict,
    verdicts: Vec<DisclosureVerdict>,
}

impl Candidate {
    fn useful(&self) -> bool {
        matches!(self.determined, DeterminacyVerdict::Determined { .. })
    }

    fn protects(&self, k: usize) -> bool {
        self.useful() && self.verdicts[k].is_non_disclosing()
    }

    fn protects_all(&self) -> bool {
        (0..self.verdicts.len()).all(|k| self.protects(k))
    }

    fn json(&self, secrets: &[ConjunctiveQuery]) -> Value {
        json!({
            "dview": self.dview.name.to_string(),
            "determinacy": determinacy_json(&self.determined),
            "secrets": secrets.iter().zip(&self.verdicts).map(|(p, v)| {
                let mut j = disclosure_json(v);
                j["secret"] = json!(p.name.to_string());
                j
            }).collect::<Vec<_>>(),
        })
    }
}

fn candidates(ws: &Workspace, q: &ConjunctiveQuery, secrets: &[ConjunctiveQuery], s: &Settings) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (d, _) in &ws.dviews {
        let Some(v) = ws.dview(d) else { continue };
        if v.views.is_empty() || !v.all_cq() {
            continue;
        }
        let determined = match check_determinacy_in(q, &v, &ws.rules, &ws.schema, &s.determinacy()) {
            Ok((run, _)) => run.verdict,
            Err(e) => DeterminacyVerdict::Unknown { reason: e.to_string() },
        };
        let verdicts = secrets
            .iter()
            .map(|p| {
                check_un_disclosure_cq_rules(&v, p, &ws.schema, &ws.rules, &s.chase())
                    .unwrap_or_else(|e| DisclosureVerdict::Unknown { reason: e.to_string() })
            })
            .collect();
        out.push(Candidate {
            dview: v,
            determined,
            verdicts,
        });
    }
    out
}

struct Report {
    answer: Tri,
    summary: String,
    text: String,
    notes: Vec<String>,
    result: Value,
}

fn cq_answer_json(p: &ConjunctiveQuery, a: &CqDesignAnswer) -> Value {
    json!({
        "secret": p.name.to_string(),
        "answer": tri_label(a.answer),
        "reason": a.reason,
        "minimized": a.minimized.as_ref().map(|m| m.to_string()),
        "design": a.design.as_ref().map(views_json),
        "per_source": a.per_source.iter().map(|(s, v)| {
            let mut j = disclosure_json(v);
            j["source"] = json!(s.to_string());
            j
        }).collect::<Vec<_>>(),
        "direct": a.direct.as_ref().map(disclosure_json),
        "consistent": a.consistent,
    })
}

/// The CQ class: canonical views of the minimized query, then workspace
/// d-views as candidates.
fn cq_stage(ws: &Workspace, q: &ConjunctiveQuery, secrets: &[ConjunctiveQuery], s: &Settings) -> Result<Report, CliError> {
    let replicated = replicated_in(q, ws);
    let mut text = String::new();
    let mut notes = Vec::new();
    let mut per = Vec::new();
    let mut answers = Vec::new();
    for p in secrets {
        let a = exists_useful_nondisclosing_cq(q, p, &ws.schema, &ws.rules, &s.chase())
            .map_err(|e| CliError::Input(e.to_string()))?;
        let _ = writeln!(text, "{}: canonical views {} ({})", p.name, tri_label(a.answer), a.reason);
        per.push(cq_answer_json(p, &a));
        answers.push(a);
    }
    let cands = candidates(ws, q, secrets, s);
    for c in &cands {
        let verdicts: Vec<String> = secrets
            .iter()
            .zip(&c.verdicts)
            .map(|(p, v)| format!("{}={}", p.name, v.label()))
            .collect();
        let _ = writeln!(
            text,
            "candidate {}: {} {}",
            c.dview.name,
            c.determined.label(),
            verdicts.join(" ")
        );
    }
    let canonical_all = answers.iter().all(|a| a.answer == Tri::Yes);
    let canonical_any_no = answers.iter().any(|a| a.answer == Tri::No);
    let joint = cands.iter().find(|c| c.protects_all());
    let (answer, summary) = if canonical_all {
        let d = answers.iter().find_map(|a| a.design.clone());
        if let Some(d) = &d {
            text += &dview_text(d);
        }
        (Tri::Yes, "the canonical views of the minimized query are useful and non-disclosing".to_string())
    } else if let Some(c) = joint {
        (Tri::Yes, format!("d-view `{}` is useful and non-disclosing for every secret", c.dview.name))
    } else if replicated.is_empty() && canonical_any_no {
        (Tri::No, format!("{NO_DESIGN} in the CQ class: the canonical views are minimally informative and disclose"))
    } else if !replicated.is_empty() && canonical_any_no {
        let rels: Vec<String> = replicated.iter().cloned().collect();
        notes.push(format!(
            "relations {} are replicated: canonical views need not be minimally informative, and in general no CQ d-view is minimal for UN non-disclosure, so a disclosing canonical d-view does not rule out a design",
            rels.join(", ")
        ));
        if !cands.is_empty() {
            for (k, p) in secrets.iter().enumerate() {
                if let Some(c) = cands.iter().find(|c| c.protects(k)) {
                    notes.push(format!("secret {} alone is protected by the useful d-view `{}`", p.name, c.dview.name));
                }
            }
            if secrets.len() > 1 && cands.iter().all(|c| (0..secrets.len()).any(|k| c.verdicts[k].is_disclosing())) {
                notes.push("every candidate d-view discloses at least one of the secrets".into());
            }
        }
        (Tri::Unknown, "undecided: the canonical views disclose and no candidate protects every secret".to_string())
    } else {
        (Tri::Unknown, "undecided: a disclosure check was inconclusive".to_string())
    };
    if replicated.is_empty() {
        for c in &cands {
            if c.protects_all() && !canonical_all {
                notes.push(format!(
                    "candidate `{}` protects every secret although the canonical views do not; check the rules",
                    c.dview.name
                ));
            }
        }
    }
    let result = json!({
        "class": "cq",
        "canonical": per,
        "candidates": cands.iter().map(|c| c.json(secrets)).collect::<Vec<_>>(),
        "design": if canonical_all { answers.iter().find_map(|a| a.design.as_ref().map(views_json)) } else { joint.map(|c| views_json(&c.dview)) },
    });
    Ok(Report {
        answer,
        summary,
        text,
        notes,
        result,
    })
}

fn all_stage(ws: &Workspace, q: &ConjunctiveQuery, secrets: &[ConjunctiveQuery], s: &Settings) -> Result<Report, CliError> {
    let mut r = cq_stage(ws, q, secrets, s)?;
    r.result["class"] = json!("all");
    if r.answer == Tri::Yes {
        r.summary += "; CQ views are in every class";
        return Ok(r);
    }
    if !replicated_in(q, ws).is_empty() {
        r.notes.push("shuffle views are minimally informative only without replication; no further stage applies".into());
        return Ok(r);
    }
    let qm = match minimize_under_rules(q, &ws.rules, &s.chase()).map_err(|e| CliError::Input(e.to_string()))? {
        Some(m) => m,
        None => {
            r.answer = Tri::Unknown;
            r.summary = "undecided: minimization under the rules ran out of fuel".into();
            return Ok(r);
        }
    };
    let monadic = is_monadic_frontier(&qm, &ws.schema).map_err(|e| CliError::Input(e.to_string()))?;
    r.result["monadic_frontier"] = json!(monadic);
    if monadic && ws.rules.is_empty() {
        // Each canonical view is determined by every useful d-view.
        let _ = writeln!(r.text, "monadic frontier: the canonical views are minimally informative among all views");
        if r.answer == Tri::No {
            r.summary = NO_DESIGN.to_string();
        }
        return Ok(r);
    }
    if !q.is_boolean() {
        return input(format!(
            "`design --class all` needs a Boolean query beyond the monadic-frontier case; `{}` has free variables",
            q.name
        ));
    }
    let svs = build_shuffle_views(&qm, &ws.schema, &ws.rules, &s.shuffle()).map_err(|e| CliError::Input(e.to_string()))?;
    let trivial = svs.iter().all(|v| v.shuffles.len() <= 1);
    let unknown = svs.iter().any(|v| v.unknown);
    r.result["shuffle_views"] = json!(svs.iter().map(shuffle_view_json).collect::<Vec<_>>());
    let compiled: Vec<Value> = svs
        .iter()
        .map(|v| json!({"view": v.name.to_string(), "compiled": compile_json(&compile_dcq_to_ra(&v.name, &v.source, &v.to_dcq()))}))
        .collect();
    r.result["ra"] = json!(compiled);
    if trivial && !unknown {
        let _ = writeln!(r.text, "only the identity shuffle is invariant: the canonical views are minimally informative");
        if r.answer == Tri::No {
            r.summary = NO_DESIGN.to_string();
        }
        return Ok(r);
    }
    let sd = shuffle_dview(&svs);
    let b = s.disclosure_bounds();
    let mut evidence = Vec::new();
    let mut all_clear = true;
    for p in secrets {
        let o = check_un_disclosure_oracle(&sd, p, &ws.schema, &ws.rules, b);
        all_clear &= !o.is_disclosing();
        let _ = writeln!(
            r.text,
            "{}: shuffle views {}",
            p.name,
            match &o {
                OracleDisclosure::Disclosing { .. } => format!("disclose on every instance with domain <= {}", b.alt_domain),
                OracleDisclosure::NoWitnessUpToBound { .. } => "show no disclosure within the bound".into(),
            }
        );
        let mut j = oracle_disclosure_json(&o);
        j["secret"] = json!(p.name.to_string());
        evidence.push(j);
    }
    r.result["oracle"] = json!({"alt_domain": b.alt_domain, "max_facts": b.max_facts, "secrets": evidence});
    let _ = write!(r.text, "{}", dview_text(&sd));
    r.notes.push(if all_clear {
        "bounded evidence suggests the shuffle views are non-disclosing; the bound is not a proof".into()
    } else {
        "bounded evidence suggests the shuffle views disclose; the bound is not a proof".into()
    });
    r.answer = Tri::Unknown;
    r.summary = "undecided: disclosure of the shuffle views is only checked up to a bound".into();
    Ok(r)
}

fn replication_stage(ws: &Workspace, q: &ConjunctiveQuery, secrets: &[ConjunctiveQuery]) -> Result<Report, CliError> {
    if !q.is_boolean() {
        return input(format!("`design --class replication` needs a Boolean query; `{}` has free variables", q.name));
    }
    let mut text = String::new();
    let mut per = Vec::new();
    let mut answer = Tri::Yes;
    for p in secrets {
        let (t, j) = match fullrep_design(q, p, &ws.schema) {
            FullRepVerdict::Applicable { relation, description, demo } => {
                let _ = writeln!(text, "{}: applicable via {relation}: {description}", p.name);
                let _ = writeln!(
                    text,
                    "  demo: projections={} secret_killed={} query_preserved={}",
                    demo.projections_ok, demo.secret_killed, demo.query_preserved
                );
                (
                    Tri::Yes,
                    json!({
                        "secret": p.name.to_string(),
                        "verdict": "applicable",
                        "relation": relation.to_string(),
                        "description": description,
                        "demo": {
                            "projections_ok": demo.projections_ok,
                            "secret_killed": demo.secret_killed,
                            "query_preserved": demo.query_preserved,
                            "iterates": demo.iterates.iter().map(dinstance_json).collect::<Vec<_>>(),
                        },
                    }),
                )
            }
            FullRepVerdict::NotApplicable { reason, homomorphism } => {
                let _ = writeln!(text, "{}: not applicable: {reason}", p.name);
                let t = if homomorphism.is_some() { Tri::No } else { Tri::Unknown };
                (
                    t,
                    json!({
                        "secret": p.name.to_string(),
                        "verdict": "not_applicable",
                        "reason": reason,
                        "homomorphism": homomorphism.as_ref().map(assignment_json),
                    }),
                )
            }
        };
        answer = answer.and(t);
        per.push(j);
    }
    let summary = match answer {
        Tri::Yes => "useful views that identify Str-equivalent instances are non-disclosing for every secret".to_string(),
        Tri::No => format!("{NO_DESIGN}: a secret maps homomorphically into the query"),
        Tri::Unknown => "the replication construction does not apply".to_string(),
    };
    Ok(Report {
        answer,
        summary,
        text,
        notes: vec![],
        result: json!({"class": "replication", "secrets": per}),
    })
}

pub fn design(
    ws: &Workspace,
    query: Option<&str>,
    secrets: &[String],
    class: DesignClass,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let q = pick_query(ws, query)?;
    let ps = pick_secrets(ws, secrets)?;
    let r = match class {
        DesignClass::Cq => cq_stage(ws, q, &ps, s)?,
        DesignClass::All => all_stage(ws, q, &ps, s)?,
        DesignClass::Replication => replication_stage(ws, q, &ps)?,
    };
    let mut text = r.text;
    for n in &r.notes {
        let _ = writeln!(text, "note: {n}");
    }
    let _ = writeln!(text, "answer: {} ({})", tri_label(r.answer), r.summary);
    let mut result = r.result;
    result["answer"] = json!(tri_label(r.answer));
    result["summary"] = json!(r.summary);
    result["notes"] = json!(r.notes);
    let inputs = json!({
        "query": q.name.to_string(),
        "secrets": ps.iter().map(|p| p.name.to_string()).collect::<Vec<_>>(),
        "class": class.label(),
    });
    Ok(Outcome {
        command: "design".into(),
        status: Status::of(r.answer),
        inputs,
        text,
        result,
    })
}
