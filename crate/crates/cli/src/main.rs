use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use oauthscan::driver::{
    benchmark_modes, exit_code, load_manifest, render_text, report_json, run_corpus, AnalysisMode,
    Analyzer, Manifest,
};
use oauthscan::hybrid::DeltaConfig;
use oauthscan::property::{bundled_properties, load_properties_dir, Property};
use oauthscan::sdg::TagConfig;

#[derive(Parser)]
#[command(
    name = "oauthscan",
    version,
    about = "Checks OAuth authorization-server code against security properties"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one program (all given files together).
    Analyze(AnalyzeArgs),
    /// Compare demand-driven and eager analysis.
    Bench(BenchArgs),
    /// Run a corpus against its manifest of expected verdicts.
    Corpus(CorpusArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct Common {
    /// Comma-separated property ids, or `all`.
    #[arg(long, default_value = "all")]
    properties: String,
    /// Directory of `.dl` property files replacing the bundled set.
    #[arg(long)]
    properties_dir: Option<PathBuf>,
    /// Tag configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Regex reference patterns and samples.
    #[arg(long)]
    delta_samples: Option<PathBuf>,
    /// Endpoint query overriding the per-property ones.
    #[arg(long)]
    endpoint_query: Option<String>,
    /// Per-property time limit in seconds.
    #[arg(long, default_value_t = 600, value_parser = clap::value_parser!(u64).range(1..))]
    timeout: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// `.osl` files or directories containing them.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = ["demand", "eager"], default_value = "demand")]
    mode: String,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Report every embedding, not only the least one.
    #[arg(long)]
    all_witnesses: bool,
    /// Omit timestamps and timings so reports are reproducible.
    #[arg(long)]
    no_timestamps: bool,
}

#[derive(Args)]
struct BenchArgs {
    path: PathBuf,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArgs {
    dir: PathBuf,
    /// Defaults to `manifest.toml` in the corpus directory.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = ["demand", "eager"], default_value = "demand")]
    mode: String,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn select(all: Vec<Property>, spec: &str) -> Result<Vec<Property>> {
    if spec.trim() == "all" {
        return Ok(all);
    }
    let mut out = Vec::new();
    for id in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match all.iter().find(|p| p.id.eq_ignore_ascii_case(id)) {
            Some(p) if !out.iter().any(|q: &Property| q.id == p.id) => out.push(p.clone()),
            Some(_) => {}
            None => bail!("unknown property `{id}`"),
        }
    }
    oauthscan::property::sort_by_id(&mut out);
    Ok(out)
}

fn analyzer(c: &Common, mode: &str) -> Result<Analyzer> {
    let props = match &c.properties_dir {
        Some(d) => load_properties_dir(d)?,
        None => bundled_properties(),
    };
    let mut a = Analyzer::new(select(props, &c.properties)?);
    if let Some(p) = &c.config {
        a.tags = TagConfig::parse(&read(p)?).with_context(|| p.display().to_string())?;
    }
    if let Some(p) = &c.delta_samples {
        a.delta = DeltaConfig::parse(&read(p)?).with_context(|| p.display().to_string())?;
    }
    a.endpoint_query = c.endpoint_query.clone();
    if let Some(q) = &a.endpoint_query {
        oauthscan::callgraph::parse_endpoint_query(q)?;
    }
    a.timeout = Duration::from_secs(c.timeout);
    a.mode = mode.parse::<AnalysisMode>().map_err(anyhow::Error::msg)?;
    Ok(a)
}

fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("cannot read {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "osl"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn emit(report: Option<&Path>, text: &str) -> Result<()> {
    match report {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn analyze(args: AnalyzeArgs) -> Result<u8> {
    let mut a = analyzer(&args.common, &args.mode)?;
    a.all_witnesses = args.all_witnesses;
    let prog = a.load_paths(&expand(&args.paths)?)?;
    for d in &prog.ir.diagnostics {
        eprintln!("warning: {d}");
    }
    let mut report = a.analyze(&prog);
    if !args.no_timestamps {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        report.timestamp = Some(secs.to_string());
    }
    let outcomes: Vec<_> = report.results.iter().map(|r| r.outcome.clone()).collect();
    let text = match args.format {
        Format::Json => report_json(std::slice::from_ref(&report), !args.no_timestamps),
        Format::Text => render_text(std::slice::from_ref(&report)),
    };
    emit(args.report.as_deref(), &text)?;
    if args.report.is_some() {
        eprint!("{}", render_text(std::slice::from_ref(&report)));
    }
    Ok(exit_code(&outcomes) as u8)
}

fn bench(args: BenchArgs) -> Result<u8> {
    let a = analyzer(&args.common, "demand")?;
    let prog = a.load_paths(&[&args.path])?;
    let table = benchmark_modes(&a, &prog);
    let text = match args.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&table)?;
            s.push('\n');
            s
        }
        Format::Text => table.render(),
    };
    emit(args.report.as_deref(), &text)?;
    Ok(if table.verdicts_identical() { 0 } else { 1 })
}

fn corpus(args: CorpusArgs) -> Result<u8> {
    let a = analyzer(&args.common, &args.mode)?;
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.dir.join("manifest.toml"));
    let manifest = if args.manifest.is_none() && !manifest_path.exists() {
        Manifest::default()
    } else {
        load_manifest(&manifest_path)?
    };
    let summary = run_corpus(&a, &args.dir, &manifest)?;
    print!("{}", summary.render());
    Ok(if summary.mismatches().is_empty() {
        0
    } else {
        1
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Bench(b) => bench(b),
        Command::Corpus(c) => corpus(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
