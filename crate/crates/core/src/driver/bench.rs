use std::fmt::Write;
use std::time::Instant;

use serde::Serialize;

use super::{AnalysisMode, Analyzer, Program};
use crate::property::Outcome;

/// A program with one five-function authorization endpoint chain and `n`
/// functions unrelated to it.
pub fn generate_bench_program(n: usize) -> String {
    let mut s = String::from(
        "// authorization endpoint chain
fn AuthRequest(request, response) {
    let clientId = request.client_id;
    let client = ValidateClient(clientId);
    let redirectUri = request.redirect_uri;
    let ok = CheckRedirect(redirectUri, client);
    if (ok) {
        IssueCode(request, response, redirectUri);
    } else {
        sendError(response, \"invalid_request\");
    }
}

fn ValidateClient(clientId) {
    let client = db.getClient(clientId);
    return client;
}

fn CheckRedirect(uri, client) {
    let registered = client.redirect_uri;
    let same = uri == registered;
    return same;
}

fn IssueCode(request, response, redirectUri) {
    let code = generateCode();
    let grant = new Grant();
    grant.code = code;
    grant.redirect_uri = redirectUri;
    db.store(grant);
    Respond(response, redirectUri, code);
}

fn Respond(response, redirectUri, code) {
    let target = buildUrl(redirectUri, code);
    sendRedirect(target);
}
",
    );
    for k in 0..n {
        writeln!(
            s,
            "
fn Util{k}(a, b) {{
    let sum = a + b;
    let rec = new Record{k}();
    rec.value = sum;
    rec.label = \"util{k}\";
    let v = rec.value;
    let flag = v == b;
    if (flag) {{
        log(v);
    }}"
        )
        .unwrap();
        if k % 4 != 3 && k + 1 < n {
            writeln!(s, "    let next = Util{}(v, a);\n    return next;", k + 1).unwrap();
        } else {
            writeln!(s, "    return v;").unwrap();
        }
        writeln!(s, "}}").unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRow {
    pub property: String,
    pub demand_outcome: Outcome,
    pub eager_outcome: Outcome,
    pub demand_ms: f64,
    pub eager_ms: f64,
    pub demand_nodes: usize,
    pub eager_nodes: usize,
}

impl BenchRow {
    pub fn reduction(&self) -> Option<f64> {
        (self.eager_ms > 0.0).then(|| 1.0 - self.demand_ms / self.eager_ms)
    }

    /// Rows where either mode failed are left out of comparisons.
    pub fn comparable(&self) -> bool {
        self.demand_outcome != Outcome::Error && self.eager_outcome != Outcome::Error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchTable {
    pub program: String,
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    fn applicable(&self) -> impl Iterator<Item = &BenchRow> {
        self.rows
            .iter()
            .filter(|r| r.comparable() && r.demand_outcome != Outcome::NotApplicable)
    }

    pub fn verdicts_identical(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| r.comparable())
            .all(|r| r.demand_outcome == r.eager_outcome)
    }

    pub fn total_ms(&self) -> (f64, f64) {
        self.applicable()
            .fold((0.0, 0.0), |(d, e), r| (d + r.demand_ms, e + r.eager_ms))
    }

    pub fn total_nodes(&self) -> (usize, usize) {
        self.applicable()
            .fold((0, 0), |(d, e), r| (d + r.demand_nodes, e + r.eager_nodes))
    }

    pub fn time_reduction(&self) -> f64 {
        let (d, e) = self.total_ms();
        if e > 0.0 {
            1.0 - d / e
        } else {
            0.0
        }
    }

    pub fn node_ratio(&self) -> f64 {
        let (d, e) = self.total_nodes();
        if e > 0 {
            d as f64 / e as f64
        } else {
            1.0
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<6} {:>10} {:>10} {:>8} {:>8} {:>9}  verdicts",
            "prop", "demand ms", "eager ms", "d nodes", "e nodes", "reduction"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{:<6} {:>10.1} {:>10.1} {:>8} {:>8} {:>9}  {} / {}",
                r.property,
                r.demand_ms,
                r.eager_ms,
                r.demand_nodes,
                r.eager_nodes,
                r.reduction()
                    .map_or("-".to_string(), |x| format!("{:.0}%", x * 100.0)),
                r.demand_outcome,
                r.eager_outcome
            )
            .unwrap();
        }
        let (d, e) = self.total_ms();
        let (dn, en) = self.total_nodes();
        writeln!(
            s,
            "{:<6} {:>10.1} {:>10.1} {:>8} {:>8} {:>8.0}%  {}",
            "total",
            d,
            e,
            dn,
            en,
            self.time_reduction() * 100.0,
            if self.verdicts_identical() {
                "identical"
            } else {
                "DIFFERENT"
            }
        )
        .unwrap();
        s
    }
}

/// Time every property in demand and in eager mode, each run on its own
/// (no fact sharing between properties), single-threaded.
pub fn benchmark_modes(base: &Analyzer, prog: &Program) -> BenchTable {
    let mut rows = Vec::new();
    for p in &base.properties {
        let mut one = base.clone();
        one.properties = vec![p.clone()];
        let mut run = |mode| {
            one.mode = mode;
            let t = Instant::now();
            let r = one.run_all(prog).remove(0);
            let elapsed = t.elapsed().as_secs_f64() * 1e3;
            (r.verdict.outcome, elapsed, r.stats.sdg_nodes)
        };
        let (d_out, d_ms, d_nodes) = run(AnalysisMode::Demand);
        let (e_out, e_ms, e_nodes) = run(AnalysisMode::Eager);
        rows.push(BenchRow {
            property: p.id.clone(),
            demand_outcome: d_out,
            eager_outcome: e_out,
            demand_ms: d_ms,
            eager_ms: e_ms,
            demand_nodes: d_nodes,
            eager_nodes: e_nodes,
        });
    }
    BenchTable {
        program: prog.name.clone(),
        rows,
    }
}
