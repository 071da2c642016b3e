//! Acceptance suite: one PASS/FAIL line per criterion, each with a pinned
//! time limit. Run with `--nocapture` to see the lines.

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use viewforge_cli::workspace::{parse_workspace, Workspace};
use viewforge_cli::{run, RunOutput};
use viewforge_core::canonical::{canonical_dview, canonical_view_query};
use viewforge_core::chase::ChaseConfig;
use viewforge_core::determinacy::{
    check_determinacy, check_determinacy_in, unprime, validate_witness, DeterminacyConfig, DeterminacyRun,
    DeterminacyVerdict,
};
use viewforge_core::disclosure::{check_un_disclosure_cq_rules, validate_nondisclosure_witness, DisclosureVerdict};
use viewforge_core::fixtures;
use viewforge_core::homomorphism::{find_homomorphism, hom_equivalent, holds, isomorphic_up_to_nulls, Assignment};
use viewforge_core::minimize::{is_minimal, minimize};
use viewforge_core::model::{
    active_domain, build_canondb, Atom, ConjunctiveQuery, DInstance, DSchema, Instance, Term, View,
};
use viewforge_core::oracle::{
    check_un_disclosure_oracle, domain_elems, enumerate_instances, fresh_elems, refute_determinacy,
    sq_equivalence_exact, view_output, views_agree, Bounds, DisclosureBounds,
};
use viewforge_core::ra::{compile_dcq_to_ra, eval_dcq};
use viewforge_core::random::{self, SchemaShape};
use viewforge_core::replication::{
    check_projections, fullrep_design, fully_replicated_in, min_replicated_pair_height, str_transform, FullRepVerdict,
};
use viewforge_core::shuffle::{build_shuffle_views, shuffle_dview, shuffle_equivalent, ShuffleConfig};
use viewforge_core::Tri;

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, Duration, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture_path(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn workspace(name: &str) -> Workspace {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    parse_workspace(&text).unwrap_or_else(|e| panic!("{name}: {e:?}"))
}

fn vf(args: &[&str]) -> RunOutput {
    run(std::iter::once("viewforge").chain(args.iter().copied()))
}

fn keep() -> DeterminacyConfig {
    DeterminacyConfig {
        keep_rounds: true,
        ..Default::default()
    }
}

fn criterion_1() -> Outcome {
    let ex = fixture_path("example_one.vf");
    let out = vf(&["canonical", &ex]);
    ensure(out.code == 0, || out.stderr.clone())?;
    for line in [
        "view V_hospital(pid, tinfo) @ hospital := Trtmnt(pid, tinfo, tdate)",
        "view V_registry(pid, age) @ registry := Patient(pid, age, address)",
    ] {
        ensure(out.stdout.lines().any(|l| l == line), || format!("missing `{line}` in\n{}", out.stdout))?;
    }
    let out = vf(&["design", &ex, "--class", "all", "--secret", "p"]);
    ensure(out.code == 0, || format!("exit {}: {}", out.code, out.stdout))?;
    ensure(out.stdout.contains("answer: no (No useful and non-disclosing d-view exists)"), || out.stdout.clone())?;
    ensure(out.stdout.contains("monadic frontier"), || "the monadic-frontier shortcut was not taken".into())?;
    Ok("both canonical views verbatim; design --class all: No via the monadic frontier".into())
}

fn determined_round(run: &DeterminacyRun) -> Option<usize> {
    match run.verdict {
        DeterminacyVerdict::Determined { round, .. } => Some(round),
        _ => None,
    }
}

fn criterion_2() -> Outcome {
    let ex = workspace("example_one.vf");
    let q = ex.query("Q").unwrap();
    let (run, _) = check_determinacy_in(q, &ex.dview("canonical").unwrap(), &[], &ex.schema, &keep()).unwrap();
    ensure(determined_round(&run) == Some(1), || format!("Example 1: {:?}", run.verdict))?;

    let sq = workspace("square.vf");
    let sq_q = sq.query("Q").unwrap();
    let canon = canonical_dview(sq_q, &sq.schema).unwrap();
    let (run, lowered) = check_determinacy_in(sq_q, &canon, &[], &sq.schema, &keep()).unwrap();
    ensure(determined_round(&run) == Some(1), || format!("square: {:?}", run.verdict))?;
    ensure(!lowered.rules.is_empty(), || "square: no replication rules".into())?;

    let dropped = ex.dview("dropped").unwrap();
    let (run, low) = check_determinacy_in(q, &dropped, &[], &ex.schema, &keep()).unwrap();
    let how = match &run.verdict {
        DeterminacyVerdict::NotDetermined { witness, .. } => {
            validate_witness(&low.query, &low.dview, &low.rules, witness)?;
            "NotDetermined (witness validated)"
        }
        _ => {
            let b = Bounds {
                domain_size: 3,
                max_facts: 2,
            };
            ensure(refute_determinacy(q, &dropped, &ex.schema, b, &[]).is_some(), || {
                format!("pid-dropped: {:?} and no oracle counterexample", run.verdict)
            })?;
            "oracle counterexample at domain 3"
        }
    };
    Ok(format!("Example 1 and square canonical: Determined round 1; pid dropped: {how}"))
}

fn criterion_3() -> Outcome {
    let sq = workspace("square.vf");
    let q = sq.query("Q").unwrap();
    let cfg = ChaseConfig::default();
    let secrets = ["p1", "p2", "p3"];
    let designs = [("design_p1", "p1"), ("design_p2a", "p2"), ("design_p2b", "p2"), ("design_p3", "p3")];
    let mut own = Vec::new();
    for (d, mine) in designs {
        let v = sq.dview(d).unwrap();
        let (run, _) = check_determinacy_in(q, &v, &[], &sq.schema, &DeterminacyConfig::default()).unwrap();
        ensure(determined_round(&run).is_some(), || format!("{d}: {:?}", run.verdict))?;
        let mut disclosed = 0;
        for s in secrets {
            let p = sq.secret(s).unwrap();
            let verdict = check_un_disclosure_cq_rules(&v, p, &sq.schema, &[], &cfg).map_err(|e| e.to_string())?;
            match &verdict {
                DisclosureVerdict::NonDisclosing { witness } => {
                    validate_nondisclosure_witness(&v, p, &sq.schema, &[], witness)?;
                }
                DisclosureVerdict::Disclosing { .. } => {
                    disclosed += 1;
                    let o = check_un_disclosure_oracle(&v, p, &sq.schema, &[], DisclosureBounds::default());
                    ensure(o.is_disclosing(), || format!("{d}/{s}: the oracle finds no disclosure"))?;
                }
                DisclosureVerdict::Unknown { reason } => return Err(format!("{d}/{s}: {reason}")),
            }
            if s == mine {
                own.push((d, verdict.is_non_disclosing()));
            }
        }
        ensure(disclosed >= 1, || format!("{d} discloses no secret"))?;
    }
    for (d, ok) in &own {
        if d.ends_with("p1") || d.ends_with("p3") {
            ensure(*ok, || format!("{d} discloses its own secret"))?;
        }
    }
    // The listed p2 designs disclose p2; the p1 and p3 designs protect it.
    for d in ["design_p1", "design_p3"] {
        let v = sq.dview(d).unwrap();
        let verdict = check_un_disclosure_cq_rules(&v, sq.secret("p2").unwrap(), &sq.schema, &[], &cfg).unwrap();
        ensure(verdict.is_non_disclosing(), || format!("{d} does not protect p2"))?;
    }
    let p2 = own.iter().filter(|(d, _)| d.contains("p2")).map(|(d, ok)| format!("{d}:{}", if *ok { "non-disclosing" } else { "disclosing" }));
    Ok(format!(
        "4 designs Determined; p1,p3 designs protect their secret; every design discloses >= 1 secret; {}",
        p2.collect::<Vec<_>>().join(" ")
    ))
}

fn criterion_4() -> Outcome {
    let (schema, q) = fixtures::es_symmetric();
    let sc = ShuffleConfig::default();
    let svs = build_shuffle_views(&q, &schema, &[], &sc).map_err(|e| e.to_string())?;
    let swap = svs.iter().any(|v| {
        &*v.source == "s1"
            && v.shuffles.iter().any(|mu| {
                mu.map.len() == 2 && mu.map.iter().all(|(a, b)| a != b) && {
                    let img: BTreeSet<_> = mu.map.iter().map(|(_, b)| b.clone()).collect();
                    img.len() == 2
                }
            })
    });
    ensure(swap, || "the swap shuffle is not invariant".into())?;
    let e = |x: &str, y: &str| -> Instance { [Atom::fact("E", &[x, y])].into_iter().collect() };
    let v = shuffle_equivalent(&e("a", "b"), &e("b", "a"), &q, "s1", &schema, &[], &sc).map_err(|e| e.to_string())?;
    ensure(v.verdict == Tri::Yes, || format!("E(a,b) vs E(b,a): {:?}", v.verdict))?;
    let mut pairs = 0usize;
    for s in ["s1", "s2"] {
        let mine: Vec<_> = svs.iter().filter(|v| &*v.source == s).cloned().collect();
        let views = shuffle_dview(&mine);
        let insts: Vec<Instance> = enumerate_instances(&schema, Some(s), 3, 3, &[]).collect();
        for (a, i1) in insts.iter().enumerate() {
            for i2 in &insts[a..] {
                let se = shuffle_equivalent(i1, i2, &q, s, &schema, &[], &sc).map_err(|e| e.to_string())?.verdict;
                let exact = sq_equivalence_exact(i1, i2, &q, s, &schema).map_err(|e| e.to_string())?.is_none();
                let agree = views_agree(&views, i1, i2);
                ensure(se == Tri::from(exact) && agree == exact, || {
                    format!("{s}: {i1} vs {i2}: shuffle {se:?}, exact {exact}, views {agree}")
                })?;
                pairs += 1;
            }
        }
    }
    Ok(format!("swap invariant; E(a,b) ~ E(b,a); {pairs} pairs agree three ways"))
}

fn subsets(items: &[Atom], max: usize) -> Vec<Vec<Atom>> {
    let mut out = vec![vec![]];
    for a in items {
        let more: Vec<Vec<Atom>> = out
            .iter()
            .filter(|s| s.len() < max)
            .map(|s| {
                let mut t = s.clone();
                t.push(a.clone());
                t
            })
            .collect();
        out.extend(more);
    }
    out
}

fn tuples(rel: &str, arity: usize, dom: &[&str]) -> Vec<Atom> {
    let mut out: Vec<Vec<&str>> = vec![vec![]];
    for _ in 0..arity {
        out = out.iter().flat_map(|t| dom.iter().map(move |d| [t.clone(), vec![*d]].concat())).collect();
    }
    out.iter().map(|t| Atom::fact(rel, t)).collect()
}

fn criterion_5() -> Outcome {
    let out = vf(&["to-ra", &fixture_path("makesafe.vf")]);
    ensure(out.code == 0, || out.stderr.clone())?;
    let golden = std::fs::read_to_string(format!("{}/tests/golden/to_ra_makesafe.txt", env!("CARGO_MANIFEST_DIR"))).unwrap();
    ensure(out.stdout == golden, || format!("to-ra output differs from the golden file:\n{}", out.stdout))?;
    let ra_lines = out.stdout.lines().filter(|l| !l.starts_with('#')).count();
    ensure(ra_lines == 3, || format!("{ra_lines} RA views"))?;

    let (_, dcq) = fixtures::makesafe_example();
    let views = compile_dcq_to_ra("V", "src", &dcq);
    let d = domain_elems(2);
    let names: Vec<String> = d.iter().map(|t| t.to_string().trim_matches('"').to_string()).collect();
    let dn: Vec<&str> = names.iter().map(String::as_str).collect();
    ensure(dn.iter().zip(&d).all(|(n, t)| Term::constant(n) == *t), || format!("domain names {dn:?}"))?;
    let mut dom: BTreeSet<Term> = d.iter().cloned().collect();
    dom.extend(fresh_elems(dcq.vars.len()));
    let domv: Vec<Term> = dom.iter().cloned().collect();
    // DCQ outputs as bitsets over the dom^4 rows.
    let width = dcq.vars.len();
    let words = domv.len().pow(width as u32).div_ceil(64);
    let bits = |rows: &BTreeSet<Vec<Term>>| -> Vec<u64> {
        let mut b = vec![0u64; words];
        for r in rows {
            let k = r.iter().fold(0, |acc, t| acc * domv.len() + domv.iter().position(|x| x == t).unwrap());
            b[k / 64] |= 1 << (k % 64);
        }
        b
    };
    let dcq_bits = |i: &Instance| bits(&eval_dcq(&dcq, i, &dom));
    let ra_rows = |i: &Instance| views.iter().map(|v| view_output(v, i, &dom)).collect::<Vec<_>>();

    let rename = |atoms: &[Atom], rel: &str| -> Vec<Atom> { atoms.iter().map(|a| Atom::new(rel, a.args.clone())).collect() };
    let w4 = subsets(&tuples("W", 3, &dn), 4);
    let t4 = subsets(&tuples("T", 2, &dn), 4);
    let r4 = subsets(&tuples("R", 3, &dn), 4);
    let unions = subsets(&tuples("R", 3, &dn), 8);
    ensure(unions.len() == 256, || format!("{} unions", unions.len()))?;

    // Both sides read R and P only through R u P.
    type Outputs = (Vec<u64>, Vec<BTreeSet<Vec<Term>>>);
    let mut by_union: HashMap<BTreeSet<Atom>, Outputs> = HashMap::new();
    for r in &r4 {
        for p in &r4 {
            let i: Instance = r.iter().cloned().chain(rename(p, "P")).collect();
            let u: BTreeSet<Atom> = r.iter().chain(p.iter()).cloned().collect();
            let out = (dcq_bits(&i), ra_rows(&i));
            if let Some(prev) = by_union.insert(u, out.clone()) {
                ensure(prev == out, || format!("output depends on more than R u P at {i}"))?;
            }
        }
    }
    ensure(by_union.len() == 256, || format!("{} unions reached", by_union.len()))?;

    // Each DCQ disjunct reads one relation and each RA view reads the
    // relations of its expression, so outputs are memoized per part.
    let inst = |parts: &[&[Atom]]| -> Instance { parts.iter().flat_map(|p| p.iter().cloned()).collect() };
    let du: Vec<Vec<u64>> = unions.iter().map(|u| dcq_bits(&inst(&[u]))).collect();
    let dw: Vec<Vec<u64>> = w4.iter().map(|w| dcq_bits(&inst(&[w]))).collect();
    let dt: Vec<Vec<u64>> = t4.iter().map(|t| dcq_bits(&inst(&[t]))).collect();
    let reads: Vec<BTreeSet<_>> = views.iter().map(|v| v.relations()).collect();
    let mut ids: Vec<HashMap<BTreeSet<Vec<Term>>, u32>> = vec![HashMap::new(); views.len()];
    let mut memo: HashMap<(usize, usize, usize, usize), u32> = HashMap::new();
    type Ids = Vec<HashMap<BTreeSet<Vec<Term>>, u32>>;
    let ra_id = |ids: &mut Ids, memo: &mut HashMap<(usize, usize, usize, usize), u32>, k: usize, ui: usize, wi: usize, ti: usize| -> u32 {
        let key = (
            k,
            if reads[k].contains("R") || reads[k].contains("P") { ui } else { usize::MAX },
            if reads[k].contains("W") { wi } else { usize::MAX },
            if reads[k].contains("T") { ti } else { usize::MAX },
        );
        if let Some(&id) = memo.get(&key) {
            return id;
        }
        let empty: Vec<Atom> = vec![];
        let pick = |x: usize, v: &[Vec<Atom>]| if x == usize::MAX { empty.clone() } else { v[x].clone() };
        let i = inst(&[&pick(key.1, &unions), &pick(key.2, &w4), &pick(key.3, &t4)]);
        let rows = view_output(&views[k], &i, &dom);
        let next = ids[k].len() as u32;
        let id = *ids[k].entry(rows).or_insert(next);
        memo.insert(key, id);
        id
    };

    let or = |a: &[u64], b: &[u64], c: &[u64]| -> Vec<u64> { (0..words).map(|k| a[k] | b[k] | c[k]).collect() };
    let mut dcq_to_ra: HashMap<Vec<u64>, Vec<u32>> = HashMap::new();
    let mut ra_to_dcq: HashMap<Vec<u32>, Vec<u64>> = HashMap::new();
    let mut n = 0usize;
    let mut sampled = 0usize;
    for (ti, t) in t4.iter().enumerate() {
        for (wi, w) in w4.iter().enumerate() {
            for (ui, u) in unions.iter().enumerate() {
                let a = or(&du[ui], &dw[wi], &dt[ti]);
                let b: Vec<u32> = (0..views.len()).map(|k| ra_id(&mut ids, &mut memo, k, ui, wi, ti)).collect();
                if n.is_multiple_of(223) {
                    // Full evaluation agrees with the memoized parts.
                    let i = inst(&[u, w, t]);
                    ensure(dcq_bits(&i) == a, || format!("DCQ output is not the union of its parts at {i}"))?;
                    let full = ra_rows(&i);
                    let parts: Vec<u32> = full.iter().enumerate().map(|(k, r)| ids[k].get(r).copied().unwrap_or(u32::MAX)).collect();
                    ensure(parts == b, || format!("RA output is not determined by the relations read at {i}"))?;
                    sampled += 1;
                }
                if *dcq_to_ra.entry(a.clone()).or_insert_with(|| b.clone()) != b || *ra_to_dcq.entry(b.clone()).or_insert_with(|| a.clone()) != a {
                    return Err(format!("equivalence classes split at {}", inst(&[u, w, t])));
                }
                n += 1;
            }
        }
    }
    let total = (r4.len() as u128).pow(2) * w4.len() as u128 * t4.len() as u128;
    Ok(format!(
        "3 RA views match the golden file; same ECR on all {total} instances ({n} distinct R u P, W, T; {} classes; {sampled} full evaluations)",
        dcq_to_ra.len()
    ))
}

fn backward_ok(run: &DeterminacyRun) -> Result<usize, String> {
    for r in &run.rounds {
        let back: Vec<Atom> = unprime(&r.f2).iter().cloned().collect();
        ensure(find_homomorphism(&back, &run.initial, &Assignment::new()).is_some(), || {
            format!("round {}: UnPrime(F2) does not map into canondb(Q)", r.round)
        })?;
    }
    Ok(run.rounds.len())
}

fn criterion_6() -> Outcome {
    let mut runs = 0;
    let mut rounds = 0;
    for (f, q) in [("example_one.vf", "Q"), ("square.vf", "Q")] {
        let ws = workspace(f);
        let q = ws.query(q).unwrap();
        let mut dviews: Vec<_> = ws.dviews.iter().map(|(d, _)| ws.dview(d).unwrap()).collect();
        dviews.push(canonical_dview(q, &ws.schema).unwrap());
        for v in &dviews {
            let (run, _) = check_determinacy_in(q, v, &[], &ws.schema, &keep()).unwrap();
            rounds += backward_ok(&run).map_err(|e| format!("{f}/{}: {e}", v.name))?;
            runs += 1;
        }
    }
    // Same source atoms in the query run and the canonical-view run.
    let ws = workspace("example_one.vf");
    let q = ws.query("Q").unwrap();
    let mut compared = 0;
    for (d, _) in &ws.dviews {
        let v = ws.dview(d).unwrap();
        let full = check_determinacy(q, &v, &[], &keep()).unwrap();
        for s in ws.schema.sources() {
            let cq = canonical_view_query(q, s, &ws.schema).unwrap();
            let part = check_determinacy(&cq, &v, &[], &keep()).unwrap();
            let at_s = |i: &Instance| i.restrict(|r| ws.schema.relation(r).is_some_and(|x| x.visible_at(s)));
            ensure(!full.rounds.is_empty() && !part.rounds.is_empty(), || "no rounds kept".into())?;
            for (a, b) in full.rounds.iter().zip(&part.rounds) {
                ensure(isomorphic_up_to_nulls(&at_s(&a.f0), &at_s(&b.f0)), || {
                    format!("{d}, source {s}, round {}: F0 differs", a.round)
                })?;
                compared += 1;
            }
        }
    }
    Ok(format!("{runs} runs, {rounds} rounds with backward homomorphisms; {compared} F0 comparisons"))
}

/// Brute-force homomorphism search: try every map from the variables of
/// `p` to the terms of `q`.
fn brute_hom(p: &ConjunctiveQuery, q: &ConjunctiveQuery) -> bool {
    let target = build_canondb(q);
    let terms: Vec<Term> = active_domain(&target).into_iter().collect();
    let vars: Vec<_> = p.vars().into_iter().collect();
    let mut idx = vec![0usize; vars.len()];
    if terms.is_empty() {
        return p.atoms.is_empty();
    }
    loop {
        let h: HashMap<_, _> = vars.iter().cloned().zip(idx.iter().map(|&k| terms[k].clone())).collect();
        let ok = p.atoms.iter().all(|a| {
            let img = a.map_terms(|t| match t {
                Term::Var(v) => h[v].clone(),
                o => o.clone(),
            });
            target.contains(&img)
        });
        if ok {
            return true;
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return false;
            }
            idx[k] += 1;
            if idx[k] < terms.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn criterion_7() -> Outcome {
    let mut cases = 0;
    let mut applicable = 0;
    let mut fixtures_list: Vec<(DSchema, ConjunctiveQuery, ConjunctiveQuery, Instance)> = Vec::new();
    let (sq, sq_q) = fixtures::square();
    for p in fixtures::square_secrets() {
        fixtures_list.push((sq.clone(), sq_q.clone(), p, build_canondb(&sq_q)));
    }
    let mut seed = 0u64;
    while fixtures_list.len() < 20 + 3 {
        let mut rng = random::rng(7000 + seed);
        seed += 1;
        let schema = random::random_schema(&mut rng, SchemaShape::default());
        if !schema.relations().any(|r| r.is_replicated()) {
            continue;
        }
        let q = random::random_cq(&mut rng, &schema, "Q", 4, 0);
        // Str keeps only relations of the query.
        if !q.relations().iter().any(|r| schema.relation(r).is_some_and(|x| x.is_replicated())) {
            continue;
        }
        let p = random::random_cq(&mut rng, &schema, "p", 3, 0);
        let extra = random::random_instance(&mut rng, &schema, 2, 0.4);
        fixtures_list.push((schema, q.clone(), p, extra.union(&build_canondb(&q))));
    }
    for (schema, q, p, g) in &fixtures_list {
        let d = DInstance::distribute(schema, g);
        let canon = build_canondb(q);
        let next = str_transform(&d, q);
        for (s, i) in &d.parts {
            ensure(check_projections(i, &canon, &next.part(s)), || format!("{q}: projections fail at {s}"))?;
        }
        let (h0, h1) = (min_replicated_pair_height(&d, schema), min_replicated_pair_height(&next, schema));
        ensure(h1 == h0.map(|h| h + 1), || format!("{q}: pair height {h0:?} -> {h1:?}"))?;
        ensure(!holds(q, &d.global()) || holds(q, &next.global()), || format!("{q}: query lost"))?;
        let hom = brute_hom(p, q);
        if !hom {
            ensure(!holds(p, &next.global()), || format!("{q}, {p}: secret survives"))?;
        }
        let verdict = fullrep_design(q, p, schema);
        let full = !fully_replicated_in(q, schema).is_empty();
        let is_app = matches!(verdict, FullRepVerdict::Applicable { .. });
        if full {
            ensure(is_app == !hom, || format!("{q}, {p}: fullrep {is_app}, brute-force hom {hom}"))?;
        } else {
            ensure(!is_app, || format!("{q}: applicable without full replication"))?;
        }
        if let FullRepVerdict::Applicable { demo, .. } = &verdict {
            ensure(demo.projections_ok && demo.secret_killed && demo.query_preserved, || format!("{q}, {p}: demo"))?;
            applicable += 1;
        }
        cases += 1;
    }
    Ok(format!("{cases} fixtures (20 random + square); fullrep applicable on {applicable}, matching brute-force hom search"))
}

fn criterion_8() -> Outcome {
    let (mut det, mut refuted_checked, mut disc, mut nondisc, mut compared, mut unknown) = (0, 0, 0, 0, 0, 0);
    let dbounds = DisclosureBounds::default();
    let cfg = DeterminacyConfig {
        chase: ChaseConfig::with_fuel(20_000),
        ..DeterminacyConfig::default()
    };
    for seed in 0..200u64 {
        let mut rng = random::rng(90_000 + seed);
        let schema = random::random_schema(&mut rng, SchemaShape::default());
        let q = random::random_cq(&mut rng, &schema, "Q", 4, 1);
        let v = random::random_views(&mut rng, &schema, 2, 2);
        let p = random::random_cq(&mut rng, &schema, "p", 3, 0);
        match check_un_disclosure_cq_rules(&v, &p, &schema, &[], &ChaseConfig::default()) {
            Ok(DisclosureVerdict::Disclosing { .. }) => {
                disc += 1;
                let o = check_un_disclosure_oracle(&v, &p, &schema, &[], dbounds);
                ensure(o.is_disclosing(), || format!("seed {seed}: chase says disclosing, oracle disagrees"))?;
            }
            Ok(DisclosureVerdict::NonDisclosing { witness }) => {
                nondisc += 1;
                validate_nondisclosure_witness(&v, &p, &schema, &[], &witness).map_err(|e| format!("seed {seed}: {e}"))?;
                if active_domain(&witness).len() <= dbounds.alt_domain {
                    compared += 1;
                    let o = check_un_disclosure_oracle(&v, &p, &schema, &[], dbounds);
                    ensure(!o.is_disclosing(), || format!("seed {seed}: oracle claims disclosure"))?;
                }
            }
            Ok(DisclosureVerdict::Unknown { .. }) | Err(_) => unknown += 1,
        }
        let (run, low) = check_determinacy_in(&q, &v, &[], &schema, &cfg).map_err(|e| e.to_string())?;
        match &run.verdict {
            DeterminacyVerdict::Determined { .. } => {
                det += 1;
                let b = Bounds {
                    domain_size: 3,
                    max_facts: 2,
                };
                let cx = refute_determinacy(&q, &v, &schema, b, &[]);
                ensure(cx.is_none(), || format!("seed {seed}: Determined but refuted: {cx:?}"))?;
                refuted_checked += 1;
            }
            DeterminacyVerdict::NotDetermined { witness, .. } => {
                validate_witness(&low.query, &low.dview, &low.rules, witness).map_err(|e| format!("seed {seed}: {e}"))?;
            }
            DeterminacyVerdict::Unknown { .. } => unknown += 1,
        }
    }
    ensure(disc > 0 && nondisc > 0 && det > 0, || format!("degenerate sample: {disc} {nondisc} {det}"))?;
    Ok(format!(
        "200 cases: {disc} disclosing, {nondisc} non-disclosing ({compared} oracle-compared), {det} determined ({refuted_checked} oracle-checked), {unknown} unknown, 0 contradictions"
    ))
}

/// Exhaustive minimality: no proper subset of the atoms admits a
/// homomorphism from the whole query fixing the free variables.
fn exhaustive_minimal(q: &ConjunctiveQuery) -> bool {
    let pin: Assignment = q.free.iter().map(|x| (Term::Var(x.clone()), Term::Var(x.clone()))).collect();
    let n = q.atoms.len();
    (0..(1u32 << n) - 1).all(|mask| {
        let sub: Instance = q.atoms.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, a)| a.clone()).collect();
        let sub_vars: BTreeSet<Term> = active_domain(&sub);
        if q.free.iter().any(|x| !sub_vars.contains(&Term::Var(x.clone()))) {
            return true;
        }
        find_homomorphism(&q.atoms, &sub, &pin).is_none()
    })
}

fn corpus() -> Vec<ConjunctiveQuery> {
    let mut qs = Vec::new();
    for f in ["example_one.vf", "square.vf", "es_symmetric.vf", "makesafe.vf"] {
        let ws = workspace(f);
        qs.extend(ws.queries.iter().cloned());
        qs.extend(ws.secrets.iter().cloned());
        for v in &ws.views {
            if let Some(cq) = v.as_cq() {
                qs.push(cq.clone());
            } else if let viewforge_core::model::ViewDef::Dcq(d) = &v.def {
                qs.extend(d.disjuncts.iter().cloned());
            }
        }
    }
    let view_bodies = |v: &View| v.as_cq().cloned();
    for (d, _) in fixtures::square_designs() {
        qs.extend(d.views.iter().filter_map(view_bodies));
    }
    let (_, q) = fixtures::makesafe_example();
    qs.extend(q.disjuncts);
    let mut schema = DSchema::new();
    schema.add_source("s");
    schema.add_local("s", "E", 2).unwrap();
    schema.add_local("s", "A", 1).unwrap();
    for seed in 0..300u64 {
        let mut rng = random::rng(31_000 + seed);
        qs.push(random::random_cq(&mut rng, &schema, "R", 6, 2));
    }
    qs.retain(|q| q.atoms.len() <= 6);
    qs
}

fn criterion_9() -> Outcome {
    let qs = corpus();
    let (mut minimal, mut folded) = (0, 0);
    for q in &qs {
        let m = is_minimal(q).minimal;
        ensure(m == exhaustive_minimal(q), || format!("is_minimal({q}) = {m} disagrees with exhaustive search"))?;
        let mq = minimize(q);
        ensure(minimize(&mq) == mq, || format!("minimize is not idempotent on {q}"))?;
        ensure(hom_equivalent(q, &mq), || format!("minimize({q}) = {mq} is not equivalent"))?;
        ensure(exhaustive_minimal(&mq), || format!("minimize({q}) = {mq} is not minimal"))?;
        if m {
            minimal += 1;
        } else {
            folded += 1;
        }
    }
    Ok(format!("{} queries ({minimal} minimal, {folded} folded)", qs.len()))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        (1, "Example-1 pipeline", Duration::from_secs(1), criterion_1),
        (2, "Determinacy", Duration::from_secs(5), criterion_2),
        (3, "Square-query suite", Duration::from_secs(30), criterion_3),
        (4, "Shuffle correctness", Duration::from_secs(60), criterion_4),
        (5, "makesafe", Duration::from_secs(60), criterion_5),
        (6, "Chase properties", Duration::from_secs(10), criterion_6),
        (7, "Replication", Duration::from_secs(10), criterion_7),
        (8, "Cross-validation", Duration::from_secs(300), criterion_8),
        (9, "Minimization", Duration::from_secs(10), criterion_9),
    ];
    let mut failed = Vec::new();
    for (id, title, limit, f) in criteria {
        let start = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let took = start.elapsed();
        let (ok, detail) = match r {
            Ok(d) if took <= limit => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(e) => (false, e),
        };
        println!(
            "{} {id}. {title} ({:.2}s, limit {}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            limit.as_secs()
        );
        if !ok {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
