//! `eqtk`: merge OBO ontologies, list unsatisfiable classes, validate
//! entity-quality annotation TSVs, score them against a gold standard,
//! combine per-curator score files, and scaffold annotation workspaces.
//!
//! Exit codes are a stable contract: 0 success (validator: clean), 1 I/O
//! or usage error, 2 validation errors present. Data outputs are
//! byte-identical across runs on identical inputs.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use eqtk_core::annotations::{
    self, is_clean, parse_character_tsv, read_annotation_file, scaffold_workspace, sort_findings,
    AnnotationSet, Finding, Severity,
};
use eqtk_core::manchester::ClassExpression;
use eqtk_core::metrics::{self, Metric};
use eqtk_core::obo::{self, Ontology};
use eqtk_core::reasoner::{
    check_unsat, input_key, normalize, read_cache, register_expressions, resume, saturate,
    write_cache,
};
use eqtk_core::{ScoreReport, StateScore};

#[derive(Parser)]
#[command(name = "eqtk", version, about = "Entity-quality annotation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Merge OBO files into one ontology.
    Merge(MergeArgs),
    /// List unsatisfiable classes in the merged input ontologies.
    CheckUnsat(CheckUnsatArgs),
    /// Check annotation TSVs against the ontology.
    Validate(ValidateArgs),
    /// Score a test annotation set against a gold standard.
    Score(ScoreArgs),
    /// Combine per-curator score files into one table.
    Report(ReportArgs),
    /// Lay out a fresh annotation workspace.
    InitWorkspace(InitWorkspaceArgs),
}

#[derive(Args)]
struct MergeArgs {
    /// OBO files to merge.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Merged ontology output path.
    #[arg(long)]
    out: PathBuf,
    /// Merge log path (default: <out>.log.jsonl).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Drop every disjointness axiom, logging the removals.
    #[arg(long)]
    strip_disjoints: bool,
}

#[derive(Args)]
struct CheckUnsatArgs {
    /// OBO files, merged in memory before checking.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Ontology file; repeat to merge several.
    #[arg(long = "ontology", required = true)]
    ontology: Vec<PathBuf>,
    /// Directory scanned for *.tsv files, sorted by name.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Annotation files to check.
    files: Vec<PathBuf>,
    /// Write the findings JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Ontology file; repeat to merge several.
    #[arg(long = "ontology", required = true)]
    ontology: Vec<PathBuf>,
    /// Gold-standard annotation TSV; repeat to union files.
    #[arg(long = "gold", required = true)]
    gold: Vec<PathBuf>,
    /// Test annotation TSV; repeat to union files.
    #[arg(long = "test", required = true)]
    test: Vec<PathBuf>,
    /// Inclusive character-number range, e.g. 51-203.
    #[arg(long, value_parser = parse_range)]
    restrict: Option<(u32, u32)>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Curator name recorded in the output (default: first test file stem).
    #[arg(long)]
    curator: Option<String>,
    /// Saturation cache file, reused whenever the ontology is unchanged.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// json: output file (default stdout). csv: output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct ReportArgs {
    /// Score JSON files, one per curator.
    files: Vec<PathBuf>,
    /// Curator included in the band rows; repeat to name several
    /// (default: every curator).
    #[arg(long = "band")]
    band: Vec<String>,
    /// Write the combined CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InitWorkspaceArgs {
    /// Character definition TSV (character_number, character_text,
    /// state_symbol, state_text).
    #[arg(long)]
    characters: PathBuf,
    /// Ontology file copied into the workspace; repeatable.
    #[arg(long = "ontology")]
    ontology: Vec<PathBuf>,
    /// Guide document copied to the workspace root.
    #[arg(long)]
    guide: Option<PathBuf>,
    /// Workspace root; must be empty or absent.
    #[arg(long)]
    out: PathBuf,
}

fn parse_range(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| format!("{s:?} is not a range; expected A-B"))?;
    let lo: u32 = a
        .trim()
        .parse()
        .map_err(|_| format!("bad range start {a:?}"))?;
    let hi: u32 = b
        .trim()
        .parse()
        .map_err(|_| format!("bad range end {b:?}"))?;
    if lo > hi {
        return Err(format!("range {s:?} is empty"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Merge(args) => cmd_merge(args),
        Command::CheckUnsat(args) => cmd_check_unsat(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Score(args) => cmd_score(args),
        Command::Report(args) => cmd_report(args),
        Command::InitWorkspace(args) => cmd_init_workspace(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_sources(paths: &[PathBuf]) -> Result<Vec<Ontology>> {
    paths
        .iter()
        .map(|p| obo::parse_obo(p).map_err(anyhow::Error::from))
        .collect()
}

fn load_merged(paths: &[PathBuf]) -> Result<Ontology> {
    Ok(obo::merge(load_sources(paths)?, false).0)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn cmd_merge(args: MergeArgs) -> Result<u8> {
    let sources = load_sources(&args.inputs)?;
    let (merged, log) = obo::merge(sources, args.strip_disjoints);
    let text = obo::serialize(&merged)?;
    fs::write(&args.out, text).with_context(|| format!("writing {}", args.out.display()))?;
    let log_path = args.log.unwrap_or_else(|| {
        let mut name = args.out.as_os_str().to_owned();
        name.push(".log.jsonl");
        PathBuf::from(name)
    });
    fs::write(&log_path, log.to_jsonl())
        .with_context(|| format!("writing {}", log_path.display()))?;
    eprintln!(
        "merged {} classes from {} files; stripped {} disjointness axioms; log: {}",
        merged.len(),
        args.inputs.len(),
        log.count("disjoint_stripped"),
        log_path.display()
    );
    Ok(0)
}

fn cmd_check_unsat(args: CheckUnsatArgs) -> Result<u8> {
    let (merged, _) = obo::merge(load_sources(&args.inputs)?, false);
    let unsat = check_unsat(&merged)?;
    for id in &unsat {
        println!("{id}");
    }
    eprintln!("{} unsatisfiable classes", unsat.len());
    Ok(0)
}

#[derive(Serialize)]
struct ValidationDoc {
    checked_files: usize,
    rows: usize,
    errors: usize,
    warnings: usize,
    findings: Vec<Finding>,
}

fn cmd_validate(args: ValidateArgs) -> Result<u8> {
    let ont = load_merged(&args.ontology)?;
    let mut files = args.files.clone();
    if let Some(dir) = &args.input {
        let entries =
            fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))?;
        let mut found = Vec::new();
        for entry in entries {
            let path = entry
                .with_context(|| format!("reading directory {}", dir.display()))?
                .path();
            if path.extension().is_some_and(|e| e == "tsv") {
                found.push(path);
            }
        }
        found.sort();
        files.extend(found);
    }
    if files.is_empty() {
        eprintln!("warning: no files to validate");
    }
    let mut findings = Vec::new();
    let mut rows = 0;
    for path in &files {
        let (set, mut parse_findings) = read_annotation_file(path)?;
        rows += set.rows.len();
        findings.append(&mut parse_findings);
        findings.extend(annotations::validate(&set, &ont));
    }
    sort_findings(&mut findings);
    let errors = findings
        .iter()
        .filter(|f| f.severity == Severity::Error)
        .count();
    let doc = ValidationDoc {
        checked_files: files.len(),
        rows,
        errors,
        warnings: findings.len() - errors,
        findings,
    };
    write_or_print(args.out.as_deref(), &to_json(&doc)?)?;
    eprintln!(
        "checked {} files ({} rows): {} errors, {} warnings",
        doc.checked_files, doc.rows, doc.errors, doc.warnings
    );
    Ok(if doc.errors == 0 { 0 } else { 2 })
}

/// One curator's scoring run, as written by `score --format json` and read
/// back by `report`.
#[derive(Serialize, Deserialize)]
struct ScoreFile {
    curator: String,
    restriction: Option<(u32, u32)>,
    #[serde(flatten)]
    report: ScoreReport,
}

fn read_set(paths: &[PathBuf]) -> Result<(AnnotationSet, Vec<Finding>)> {
    let mut set = AnnotationSet::default();
    let mut findings = Vec::new();
    for path in paths {
        let (one, mut f) = read_annotation_file(path)?;
        findings.append(&mut f);
        set.merge(one);
    }
    Ok((set, findings))
}

/// Complex expressions from both sets, first occurrence order, deduplicated.
fn collect_expressions(gold: &AnnotationSet, test: &AnnotationSet) -> Vec<ClassExpression> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for set in [gold, test] {
        for eqs in set.states().values() {
            for eq in eqs {
                let exprs = [Some(&eq.entity), Some(&eq.quality), eq.related.as_ref()];
                for expr in exprs.into_iter().flatten() {
                    if !expr.is_named() && seen.insert(expr.clone()) {
                        out.push(expr.clone());
                    }
                }
            }
        }
    }
    out
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn write_states_csv(path: &Path, states: &[StateScore]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["character_number", "state_symbol", "simj", "nic", "pp", "pr"])?;
    for s in states {
        w.write_record([
            s.character_number.to_string(),
            s.state_symbol.clone(),
            fmt_f(s.simj),
            fmt_f(s.nic),
            s.pp.map(fmt_f).unwrap_or_default(),
            fmt_f(s.pr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_summary_csv(path: &Path, curator: &str, summary: &[eqtk_core::MetricSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["curator", "metric", "mean", "sd", "ci95_low", "ci95_high", "n"])?;
    for s in summary {
        w.write_record([
            curator.to_string(),
            s.metric.to_string(),
            fmt_f(s.mean),
            fmt_f(s.sd),
            fmt_f(s.ci95_low),
            fmt_f(s.ci95_high),
            s.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<u8> {
    let ont = load_merged(&args.ontology)?;
    let (gold, mut findings) = read_set(&args.gold)?;
    let (test, test_parse) = read_set(&args.test)?;
    findings.extend(test_parse);
    findings.extend(annotations::validate(&gold, &ont));
    findings.extend(annotations::validate(&test, &ont));
    sort_findings(&mut findings);
    if !is_clean(&findings) {
        for f in findings.iter().filter(|f| f.severity == Severity::Error) {
            eprintln!("{}:{}: {} {}", f.file, f.line, f.code, f.message);
        }
        eprintln!("validation failed; fix the errors above before scoring");
        return Ok(2);
    }

    let mut norm = normalize(&ont)?;
    let base_input = norm.input.clone();
    let base_state = match &args.cache {
        None => saturate(&base_input),
        Some(path) => {
            let key = input_key(&base_input);
            match read_cache(path, &key)? {
                Some(state) => state,
                None => {
                    let state = saturate(&base_input);
                    write_cache(path, &state, &key)?;
                    state
                }
            }
        }
    };
    let exprs = collect_expressions(&gold, &test);
    let delta = register_expressions(&ont, &mut norm, &exprs)?;
    let state = resume(&base_state, &base_input, &delta);

    let report = metrics::score::<f64>(&test, &gold, state.store(), &norm.registry, args.restrict)?;
    for (number, symbol) in &report.excluded {
        eprintln!("note: test-only state {number}/{symbol} has no gold entry; excluded");
    }
    let curator = args.curator.clone().unwrap_or_else(|| {
        args.test[0]
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "test".into())
    });
    let doc = ScoreFile {
        curator,
        restriction: args.restrict,
        report,
    };
    match args.format {
        Format::Json => write_or_print(args.out.as_deref(), &to_json(&doc)?)?,
        Format::Csv => {
            let Some(dir) = &args.out else {
                bail!("--format csv writes states.csv and summary.csv; give --out DIR");
            };
            fs::create_dir_all(dir)
                .with_context(|| format!("creating {}", dir.display()))?;
            write_states_csv(&dir.join("states.csv"), &doc.report.states)?;
            write_summary_csv(&dir.join("summary.csv"), &doc.curator, &doc.report.summary)?;
        }
    }
    Ok(0)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

fn cmd_report(args: ReportArgs) -> Result<u8> {
    if args.files.is_empty() {
        bail!("no score files given");
    }
    let mut curators: Vec<ScoreFile> = Vec::new();
    for path in &args.files {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let file: ScoreFile = serde_json::from_str(&text)
            .with_context(|| format!("parsing score file {}", path.display()))?;
        curators.push(file);
    }
    let band: Vec<&ScoreFile> = if args.band.is_empty() {
        curators.iter().collect()
    } else {
        let mut members = Vec::new();
        for name in &args.band {
            let Some(c) = curators.iter().find(|c| &c.curator == name) else {
                bail!("band curator {name:?} is not among the score files");
            };
            members.push(c);
        }
        members
    };

    let mut buf: Vec<u8> = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["curator", "metric", "mean", "sd", "ci95_low", "ci95_high", "n"])?;
        for c in &curators {
            for s in &c.report.summary {
                w.write_record([
                    c.curator.clone(),
                    s.metric.to_string(),
                    fmt_f(s.mean),
                    fmt_f(s.sd),
                    fmt_f(s.ci95_low),
                    fmt_f(s.ci95_high),
                    s.n.to_string(),
                ])?;
            }
        }
        // Band rows: cross-curator mean and 1 SD of the per-curator means.
        for metric in Metric::ALL {
            let means: Vec<f64> = band
                .iter()
                .filter_map(|c| {
                    c.report
                        .summary
                        .iter()
                        .find(|s| s.metric == metric && s.n > 0)
                        .map(|s| s.mean)
                })
                .collect();
            let (mean, sd) = mean_sd(&means);
            let filled = !means.is_empty();
            w.write_record([
                "band".to_string(),
                metric.to_string(),
                if filled { fmt_f(mean) } else { String::new() },
                if filled { fmt_f(sd) } else { String::new() },
                String::new(),
                String::new(),
                means.len().to_string(),
            ])?;
        }
        w.flush()?;
    }
    write_or_print(args.out.as_deref(), std::str::from_utf8(&buf)?)?;
    Ok(0)
}

fn cmd_init_workspace(args: InitWorkspaceArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.characters)
        .with_context(|| format!("reading {}", args.characters.display()))?;
    let states = parse_character_tsv(&args.characters.display().to_string(), &text)?;
    let entries = scaffold_workspace(&args.out, &states, &args.ontology, args.guide.as_deref())?;
    eprintln!(
        "created {} files under {}",
        entries.len() + 1, // the manifest lists everything but itself
        args.out.display()
    );
    Ok(0)
}
