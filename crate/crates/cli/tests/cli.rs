use std::path::PathBuf;

use proptest::prelude::*;
use serde_json::Value;

use viewforge_cli::report::{EXIT_INPUT, EXIT_REJECTED, EXIT_UNKNOWN};
use viewforge_cli::workspace::{parse_workspace, print_workspace, Workspace};
use viewforge_cli::{run, RunOutput};
use viewforge_core::random::{random_cq, random_schema, random_views, rng, SchemaShape};

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn vf(args: &[&str]) -> RunOutput {
    run(std::iter::once("viewforge").chain(args.iter().copied()))
}

fn tmp(name: &str, text: &str) -> String {
    let dir = std::env::temp_dir().join(format!("viewforge-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// Compare against a golden file; `VIEWFORGE_BLESS=1` rewrites it.
fn assert_golden(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("VIEWFORGE_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}

const FIXTURES: [&str; 4] = ["example_one.vf", "square.vf", "es_symmetric.vf", "makesafe.vf"];

#[test]
fn empty_file_is_an_empty_workspace() {
    let ws = parse_workspace("").unwrap();
    assert_eq!(ws, Workspace::default());
    assert_eq!(print_workspace(&ws), "");
    let ws = parse_workspace("# only a comment\n\n").unwrap();
    assert_eq!(ws, Workspace::default());
}

#[test]
fn local_and_replicated_relation_is_a_diagnostic() {
    let text = "source a { T/2 }\nsource b { U/1 }\nreplicate T/2 across a, b\n";
    let errs = parse_workspace(text).unwrap_err();
    assert_eq!(errs.len(), 1);
    assert_eq!(errs[0].line, 3);
    assert!(errs[0].message.contains("`T`"), "{}", errs[0]);
    assert!(errs[0].hint.is_some());
}

#[test]
fn diagnostics_are_collected() {
    let text = "source a { R/2 }\nquery Q := R(x)\nsecret p := Z(x)\nview V(x) @ nowhere := R(x, y)\nquery Q : R(x, y)\n";
    let errs = parse_workspace(text).unwrap_err();
    let lines: Vec<usize> = errs.iter().map(|d| d.line).collect();
    assert!(lines.contains(&2) && lines.contains(&3) && lines.contains(&4) && lines.contains(&5), "{errs:?}");
    assert!(errs.iter().all(|d| d.col >= 1));
    let colon = errs.iter().find(|d| d.line == 5).unwrap();
    assert!(colon.hint.as_deref().unwrap_or("").contains(":="), "{colon}");
}

#[test]
fn fixtures_round_trip() {
    for f in FIXTURES {
        let text = std::fs::read_to_string(fixture(f)).unwrap();
        let ws = parse_workspace(&text).unwrap_or_else(|e| panic!("{f}: {e:?}"));
        let printed = print_workspace(&ws);
        let again = parse_workspace(&printed).unwrap_or_else(|e| panic!("{f} reprinted: {e:?}\n{printed}"));
        assert_eq!(again, ws, "{f}");
        assert_eq!(print_workspace(&again), printed, "{f}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_workspaces_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let schema = random_schema(&mut r, SchemaShape::default());
        let queries = (0..2).map(|k| random_cq(&mut r, &schema, &format!("Q{k}"), 4, 2)).collect();
        let secrets = vec![random_cq(&mut r, &schema, "p", 3, 1)];
        let dv = random_views(&mut r, &schema, 2, 2);
        let ws = Workspace {
            dviews: vec![(dv.name.clone(), dv.views.iter().map(|v| v.name.clone()).collect())],
            views: dv.views,
            queries,
            secrets,
            schema,
            ..Workspace::default()
        };
        let printed = print_workspace(&ws);
        let back = parse_workspace(&printed);
        prop_assert!(back.is_ok(), "{:?}\n{}", back.err(), printed);
        prop_assert_eq!(print_workspace(&back.unwrap()), printed);
    }
}

#[test]
fn canonical_views_of_example_one() {
    let out = vf(&["canonical", &fixture("example_one.vf")]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("view V_hospital(pid, tinfo) @ hospital := Trtmnt(pid, tinfo, tdate)"));
    assert!(out.stdout.contains("view V_registry(pid, age) @ registry := Patient(pid, age, address)"));
    assert_golden("canonical_example_one.txt", &out.stdout);
}

#[test]
fn makesafe_compiles_to_three_views() {
    let out = vf(&["to-ra", &fixture("makesafe.vf")]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_golden("to_ra_makesafe.txt", &out.stdout);
}

#[test]
fn json_report_is_pinned() {
    let out = vf(&["determinacy", &fixture("example_one.vf"), "--dview", "canonical", "--json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let r: Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(r["viewforge_report"], 1);
    assert_eq!(r["command"], "determinacy");
    assert_eq!(r["status"], "definitive");
    assert_eq!(r["result"]["verdict"], "determined");
    assert_eq!(r["result"]["round"], 1);
    assert_golden("determinacy_example_one.json", &out.stdout);
}

#[test]
fn exit_codes() {
    let sq = fixture("square.vf");
    assert_eq!(vf(&["determinacy", &sq, "--dview", "design_p1"]).code, 0);
    assert_eq!(vf(&["design", &sq, "--class", "cq"]).code, EXIT_UNKNOWN);
    assert_eq!(vf(&["determinacy", &sq, "--dview", "design_p1", "--fuel", "1"]).code, EXIT_UNKNOWN);
    assert_eq!(vf(&["determinacy", &sq, "--dview", "nope"]).code, EXIT_INPUT);
    assert_eq!(vf(&["disclosure", &sq, "--dview", "canonical", "--secret", "nope"]).code, EXIT_INPUT);
    assert_eq!(vf(&["validate", "/no/such/file.vf"]).code, EXIT_INPUT);
    assert_eq!(vf(&["frobnicate"]).code, EXIT_INPUT);
    assert_eq!(vf(&["--help"]).code, 0);
    let bad = tmp("bad.vf", "source a { R/2 }\nquery Q := R(x)\n");
    let out = vf(&["validate", &bad]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("2:12: error"), "{}", out.stderr);
    let out = vf(&["validate", &bad, "--json"]);
    assert_eq!(out.code, EXIT_INPUT);
    let r: Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(r["status"], "input_error");
    assert_eq!(r["result"]["diagnostics"][0]["line"], 2);
}

#[test]
fn design_answers() {
    let out = vf(&["design", &fixture("example_one.vf"), "--class", "all"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("No useful and non-disclosing d-view exists"), "{}", out.stdout);
    assert!(out.stdout.contains("monadic frontier"));

    let out = vf(&["design", &fixture("square.vf"), "--class", "replication", "--secret", "p1"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("applicable via T"));
    assert!(out.stdout.contains("projections=true secret_killed=true query_preserved=true"));

    let out = vf(&["design", &fixture("square.vf"), "--class", "cq"]);
    assert!(out.stdout.contains("no CQ d-view is minimal for UN non-disclosure"), "{}", out.stdout);
    assert!(out.stdout.contains("every candidate d-view discloses at least one of the secrets"));
}

fn report(args: &[&str], name: &str) -> String {
    let mut a = args.to_vec();
    a.push("--json");
    let out = vf(&a);
    assert!(out.code == 0 || out.code == EXIT_UNKNOWN, "{args:?}: {}", out.stderr);
    tmp(name, &out.stdout)
}

#[test]
fn reports_verify() {
    let ex = fixture("example_one.vf");
    let sq = fixture("square.vf");
    let es = fixture("es_symmetric.vf");
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["canonical", &ex], "r_canonical.json"),
        (vec!["minimize", &sq], "r_minimize.json"),
        (vec!["determinacy", &ex, "--dview", "dropped"], "r_det_no.json"),
        (vec!["determinacy", &sq, "--dview", "design_p3"], "r_det_yes.json"),
        (vec!["disclosure", &sq, "--dview", "design_p2a"], "r_disclosure.json"),
        (vec!["design", &sq, "--class", "cq"], "r_design.json"),
        (vec!["design", &sq, "--class", "replication"], "r_design_rep.json"),
        (vec!["replication", &sq, "--steps", "2"], "r_replication.json"),
        (vec!["oracle", "equiv", &es, "--source", "s1", "ab", "loop"], "r_equiv.json"),
        (vec!["oracle", "determinacy", &ex, "--dview", "dropped"], "r_odet.json"),
        (vec!["oracle", "disclosure", &ex, "--dview", "canonical"], "r_odis.json"),
    ];
    for (args, name) in cases {
        let path = report(&args, name);
        let out = vf(&["verify", &path]);
        assert_eq!(out.code, 0, "{args:?}\n{}", out.stdout);
        assert!(!out.stdout.starts_with("0 checks"), "{args:?} has nothing to check");
    }
}

#[test]
fn tampered_witnesses_are_rejected() {
    let path = report(&["disclosure", &fixture("square.vf"), "--dview", "design_p1", "--secret", "p1"], "t1.json");
    let mut r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    r["result"]["secrets"][0]["witness"] = serde_json::json!(["S(\"*\", \"*\")", "P(\"*\", \"*\")"]);
    let out = vf(&["verify", &tmp("t1b.json", &r.to_string())]);
    assert_eq!(out.code, EXIT_REJECTED, "{}", out.stdout);

    let path = report(&["determinacy", &fixture("example_one.vf"), "--dview", "dropped"], "t2.json");
    let mut r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    r["result"]["witness"]["right"] = r["result"]["witness"]["left"].clone();
    let out = vf(&["verify", &tmp("t2b.json", &r.to_string())]);
    assert_eq!(out.code, EXIT_REJECTED, "{}", out.stdout);

    let out = vf(&["verify", &tmp("t3.json", "{\"viewforge_report\": 7}")]);
    assert_eq!(out.code, EXIT_INPUT);
}

#[test]
fn binary_matches_library() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_viewforge"))
        .args(["canonical", &fixture("example_one.vf")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), vf(&["canonical", &fixture("example_one.vf")]).stdout);
}
