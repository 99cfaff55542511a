//! One pass/fail line per acceptance criterion. Exits non-zero when any
//! criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use oauthscan::callgraph::{
    callgraph_to_automaton, extract_subcallgraph, intersect, parse_endpoint_query, query_to_nfa,
    CallEdge, Callgraph,
};
use oauthscan::datalog::{evaluate, parse_program, EvalOptions};
use oauthscan::driver::{benchmark_modes, AnalysisMode, Analyzer};
use oauthscan::hybrid::{apply_conservative, find_conservative_predicates, refine_and_recheck};
use oauthscan::osl::Label;
use oauthscan::property::{
    bundled_properties, check_embedding_bruteforce, check_property, embeds_bruteforce, Mode,
    Outcome, TypedGraph,
};
use oauthscan::sdg::analyze_scope;

// pinned limits
const CORPUS_LIMIT: Duration = Duration::from_secs(5);
const DATALOG_INSTANCES: usize = 150;
const DATALOG_LIMIT: Duration = Duration::from_secs(10);
const EMBEDDING_GRAPHS: usize = 150;
const AUTOMATON_PAIRS: usize = 60;
const WORD_LEN: usize = 6;
const BENCH_NODE_RATIO: f64 = 0.20;
const BENCH_TIME_REDUCTION: f64 = 0.50;
const BENCH_LIMIT: Duration = Duration::from_secs(60);

type CheckResult = Result<String, String>;
type Check = (&'static str, fn() -> CheckResult);

fn analyzer(mode: AnalysisMode) -> Analyzer {
    let mut a = Analyzer::new(bundled_properties());
    a.mode = mode;
    a
}

fn outcome_of(a: &Analyzer, file: &Path, id: &str) -> oauthscan::driver::PropertyRun {
    let prog = a.load_paths(&[file]).unwrap();
    let mut one = a.clone();
    one.properties.retain(|p| p.id == id);
    one.run_all(&prog).remove(0)
}

fn corpus_exactness() -> CheckResult {
    let a = analyzer(AnalysisMode::Demand);
    let dir = common::corpus_dir();
    let t = Instant::now();
    let mut right = 0;
    let mut wrong = Vec::new();
    for k in 1..=10 {
        let id = format!("P{k}");
        for (kind, want) in [
            ("vulnerable", Outcome::Violation),
            ("fixed", Outcome::Satisfied),
        ] {
            let file = dir.join(format!("p{k}_{kind}.osl"));
            let got = outcome_of(&a, &file, &id).verdict.outcome;
            if got == want {
                right += 1;
            } else {
                wrong.push(format!("p{k}_{kind}: {got}"));
            }
        }
    }
    let elapsed = t.elapsed();
    // the bad scheme pattern is only rejected by the delta loop
    let p2 = outcome_of(&a, &dir.join("p2_vulnerable.osl"), "P2");
    let delta_confirmed = p2.verdict.outcome == Outcome::Violation
        && p2.refine.iter().any(|s| {
            s.check.as_deref() == Some("absolute-uri") && !s.flipped && !s.differing.is_empty()
        });
    let detail = format!(
        "{right}/20 verdicts in {:.2} s (limit {} s); P2 delta loop rejects bad pattern: {delta_confirmed}",
        elapsed.as_secs_f64(),
        CORPUS_LIMIT.as_secs()
    );
    if right == 20 && elapsed < CORPUS_LIMIT && delta_confirmed {
        Ok(detail)
    } else {
        Err(format!("{detail}; wrong: {wrong:?}"))
    }
}

fn datalog_oracle() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xda7a);
    let t = Instant::now();
    let mut max_facts = 0;
    let mut max_rules = 0;
    for i in 0..DATALOG_INSTANCES {
        let inst = common::random_instance(&mut rng);
        max_facts = max_facts.max(inst.facts.len());
        max_rules = max_rules.max(inst.rules.len());
        let text = inst.program_text();
        let rules = parse_program(&text).map_err(|e| e.to_string())?.rules;
        let db = evaluate(inst.fact_db(), &rules).map_err(|e| e.to_string())?;
        for (pred, expected) in inst.naive() {
            let got: BTreeSet<Vec<String>> = db.sorted_tuples(&pred).into_iter().collect();
            if got != expected {
                return Err(format!("instance {i}, relation {pred} differs\n{text}"));
            }
        }
    }
    let elapsed = t.elapsed();
    let detail = format!(
        "{DATALOG_INSTANCES} instances (<= {max_facts} facts, <= {max_rules} rules) equal naive fixpoint in {:.2} s (limit {} s)",
        elapsed.as_secs_f64(),
        DATALOG_LIMIT.as_secs()
    );
    if elapsed < DATALOG_LIMIT && max_facts <= 30 && max_rules <= 6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pairs(db: &oauthscan::datalog::FactDb, pred: &str) -> BTreeSet<(String, String)> {
    db.tuples(pred)
        .into_iter()
        .map(|t| (t[0].to_string(), t[1].to_string()))
        .collect()
}

fn closure_oracle() -> CheckResult {
    let a = analyzer(AnalysisMode::Eager);
    let files = common::corpus_files();
    let mut tuples = 0;
    for f in &files {
        let prog = a.load_paths(&[f]).unwrap();
        let scope = prog.ir.function_names();
        let facts = analyze_scope(
            &prog.ir,
            &prog.cfg,
            &prog.cg,
            &scope,
            &a.tags,
            EvalOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        let (flow, follow) = common::closure_oracle(&facts.db);
        if pairs(&facts.db, "flowTo") != flow {
            return Err(format!("flowTo differs on {}", f.display()));
        }
        if pairs(&facts.db, "followBy") != follow {
            return Err(format!("followBy differs on {}", f.display()));
        }
        tuples += flow.len() + follow.len();
    }
    Ok(format!(
        "{} programs, {tuples} flowTo/followBy tuples equal brute-force closure",
        files.len()
    ))
}

fn embedding_oracle() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe3bed);
    let mut embedding = 0;
    for i in 0..EMBEDDING_GRAPHS {
        let g = common::random_typed_graph(&mut rng);
        let sig = if i % 2 == 0 {
            common::random_signature(&mut rng)
        } else {
            common::planted_signature(&mut rng, &g)
        };
        let expected = common::embeddings_oracle(&sig, &g);
        let found: BTreeSet<_> = check_embedding_bruteforce(&sig, &g)
            .map_err(|e| e.to_string())?
            .into_iter()
            .collect();
        if found != expected || common::query_holds(&sig, &g) != !expected.is_empty() {
            return Err(format!("random case {i} disagrees: {sig:?}"));
        }
        embedding += usize::from(!expected.is_empty());
    }
    let a = analyzer(AnalysisMode::Eager);
    let mut corpus_cases = 0;
    for f in common::corpus_files() {
        let prog = a.load_paths(&[&f]).unwrap();
        let scope = prog.ir.function_names();
        let facts = analyze_scope(
            &prog.ir,
            &prog.cfg,
            &prog.cg,
            &scope,
            &a.tags,
            EvalOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        let g = TypedGraph::from_facts(&facts.db);
        for p in &a.properties {
            let v = check_property(&facts.db, p, EvalOptions::default(), false)
                .map_err(|e| e.to_string())?;
            let goal = match p.mode {
                Mode::Presence => v.outcome == Outcome::Satisfied,
                Mode::Absence => v.outcome == Outcome::Violation,
            };
            let sigs = p
                .signatures()
                .ok_or(format!("{} is not a signature", p.id))?;
            let brute = embeds_bruteforce(&sigs, &g).map_err(|e| e.to_string())?;
            let oracle = sigs
                .iter()
                .any(|s| !common::embeddings_oracle(s, &g).is_empty());
            if goal != brute || goal != oracle {
                return Err(format!(
                    "{} on {}: query {goal}, brute force {brute}, oracle {oracle}",
                    p.id,
                    f.display()
                ));
            }
            corpus_cases += 1;
        }
    }
    Ok(format!(
        "{EMBEDDING_GRAPHS} random graphs ({embedding} with embeddings) and {corpus_cases} corpus cases agree"
    ))
}

fn callgraph(edges: &[(String, String)], names: &[&str]) -> Callgraph {
    let mut g = Callgraph::default();
    for m in names {
        g.nodes.insert(m.to_string());
    }
    for (i, (a, b)) in edges.iter().enumerate() {
        g.nodes.insert(a.clone());
        g.nodes.insert(b.clone());
        g.edges.push(CallEdge {
            caller: a.clone(),
            callee: b.clone(),
            site: Label(i as u32),
        });
    }
    g.edges.sort();
    g
}

fn automata_oracle() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa07a);
    let mut words_checked = 0;
    for i in 0..AUTOMATON_PAIRS {
        let alphabet = rng.gen_range(1..=5);
        let (edges, entries) = common::random_callgraph(&mut rng, alphabet);
        let (text, pattern) = common::random_query(&mut rng, alphabet, 3);
        let re = Regex::new(&format!("^(?:{pattern})$")).unwrap();
        let q = parse_endpoint_query(&text).map_err(|e| e.to_string())?;
        let cga =
            callgraph_to_automaton(&callgraph(&edges, &common::METHODS[..alphabet]), &entries)
                .map_err(|e| e.to_string())?;
        let prod = intersect(&cga, &query_to_nfa(&q));
        for w in common::words(alphabet, WORD_LEN) {
            let chars: String = w.iter().map(|m| common::method_char(m)).collect();
            let want = re.is_match(&chars) && common::cg_accepts(&edges, &entries, &w);
            if prod.accepts(&w) != want {
                return Err(format!("pair {i}, query {text}, word {w:?}"));
            }
            words_checked += 1;
        }
    }
    let edges: Vec<(String, String)> = [
        ("main", "A:foo"),
        ("main", "D:baz"),
        ("A:foo", "B:m"),
        ("B:m", "C:bar"),
        ("D:baz", "E:qux"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    let g = callgraph(&edges, &[]);
    let prod = intersect(
        &callgraph_to_automaton(&g, &BTreeSet::from(["main".to_string()])).unwrap(),
        &query_to_nfa(&parse_endpoint_query("(.* -> A:foo -> .* -> C:bar)").unwrap()),
    );
    let slice = extract_subcallgraph(&prod, &g);
    let want: BTreeSet<String> = ["main", "A:foo", "B:m", "C:bar"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if slice != want {
        return Err(format!("example query slice {slice:?}"));
    }
    Ok(format!(
        "{AUTOMATON_PAIRS} pairs, {words_checked} words of length <= {WORD_LEN}; example query slices {{main, A:foo, B:m, C:bar}}"
    ))
}

fn demand_benefit() -> CheckResult {
    let t = Instant::now();
    let a = analyzer(AnalysisMode::Demand);
    let prog = a
        .load_paths(&[common::corpus_dir().join("bench/bench_200.osl")])
        .map_err(|e| e.to_string())?;
    let table = benchmark_modes(&a, &prog);
    let elapsed = t.elapsed();
    let ratio = table.node_ratio();
    let reduction = table.time_reduction();
    let same = table.verdicts_identical();
    let detail = format!(
        "node ratio {:.1}% (limit {:.0}%), time reduction {:.1}% (min {:.0}%), identical verdicts: {same}, {:.1} s (limit {} s)",
        ratio * 100.0,
        BENCH_NODE_RATIO * 100.0,
        reduction * 100.0,
        BENCH_TIME_REDUCTION * 100.0,
        elapsed.as_secs_f64(),
        BENCH_LIMIT.as_secs()
    );
    if ratio <= BENCH_NODE_RATIO
        && reduction >= BENCH_TIME_REDUCTION
        && same
        && elapsed < BENCH_LIMIT
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mode_equivalence() -> CheckResult {
    let demand = analyzer(AnalysisMode::Demand);
    let eager = analyzer(AnalysisMode::Eager);
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for f in common::corpus_files() {
        let prog = demand.load_paths(&[&f]).unwrap();
        let d = demand.run_all(&prog);
        let e = eager.run_all(&prog);
        for (x, y) in d.iter().zip(&e) {
            compared += 1;
            if x.verdict.outcome != y.verdict.outcome {
                mismatches.push(format!("{} {}", f.display(), x.verdict.property));
            }
        }
    }
    let detail = format!(
        "{compared} verdicts compared, {} mismatches",
        mismatches.len()
    );
    if mismatches.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {mismatches:?}"))
    }
}

fn hybrid_loop() -> CheckResult {
    let a = analyzer(AnalysisMode::Demand);
    let opts = EvalOptions::default();
    let mut programs = BTreeSet::new();
    let mut runs = 0;
    let mut upgrades = 0;
    let mut max_iter: BTreeMap<usize, usize> = BTreeMap::new();
    for f in common::corpus_files() {
        let prog = a.load_paths(&[&f]).unwrap();
        for p in &a.properties {
            let Some(scope) = a.endpoint_scope(&prog, p)? else {
                continue;
            };
            if scope.is_empty() {
                continue;
            }
            let facts = analyze_scope(&prog.ir, &prog.cfg, &prog.cg, &scope, &a.tags, opts)
                .map_err(|e| e.to_string())?;
            let mut db = facts.db.clone();
            let preds = find_conservative_predicates(&prog.ir, &db, &scope, &a.tags);
            if preds.is_empty() {
                continue;
            }
            programs.insert(f.clone());
            let removed = apply_conservative(&mut db, &preds);
            let initial = check_property(&db, p, opts, false).map_err(|e| e.to_string())?;
            let (v, log) =
                refine_and_recheck(&mut db, &preds, &removed, initial.clone(), &a.delta, |db| {
                    check_property(db, p, opts, false)
                })
                .map_err(|e| e.to_string())?;
            runs += 1;
            let e = max_iter.entry(preds.len()).or_default();
            *e = (*e).max(log.len());
            if log.len() > preds.len() {
                return Err(format!(
                    "{} on {}: {} iterations for {} predicates",
                    p.id,
                    f.display(),
                    log.len(),
                    preds.len()
                ));
            }
            if p.mode == Mode::Presence
                && initial.outcome == Outcome::Satisfied
                && v.outcome != Outcome::Satisfied
            {
                return Err(format!(
                    "{} on {}: satisfied became {}",
                    p.id,
                    f.display(),
                    v.outcome
                ));
            }
            upgrades += usize::from(initial.outcome != v.outcome);
        }
    }
    Ok(format!(
        "{} programs with regex branches, {runs} runs, {upgrades} upgraded, max iterations per predicate count {max_iter:?}",
        programs.len()
    ))
}

fn main() {
    let checks: [Check; 8] = [
        ("corpus exactness", corpus_exactness),
        ("datalog oracle", datalog_oracle),
        ("flowTo/followBy oracle", closure_oracle),
        ("embedding oracle", embedding_oracle),
        ("automata oracle", automata_oracle),
        ("demand-driven benefit", demand_benefit),
        ("mode equivalence", mode_equivalence),
        ("hybrid loop termination and monotonicity", hybrid_loop),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
