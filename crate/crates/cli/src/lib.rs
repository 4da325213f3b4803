//! The `fmr` command line: parse, analyze, quantify, explain and verify.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use fmr::catalog::{parse_fmb_tables, BlockKind, Catalog};
use fmr::engine::{backward_analyze, AnalysisOptions};
use fmr::mode::FailureMode;
use fmr::oracle::{self, ConformanceReport, WitnessGrid};
use fmr::program::parse_program_with;
use fmr::quantify::{aggregate, FailureData, Method};
use fmr::report::Report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ANALYSIS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Quantify,
    Explain,
    VerifyFmb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

/// One analysis request: a program and an output literal.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub program: PathBuf,
    pub target: (String, FailureMode),
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub jobs: Vec<Job>,
    pub options: AnalysisOptions,
    pub data: Option<PathBuf>,
    pub method: Method,
    pub fmb_files: Vec<PathBuf>,
    pub format: OutputFormat,
    /// Comparator threshold used by `verify-fmb`.
    pub threshold: f64,
    /// Restricts `verify-fmb` to one kind.
    pub kind: Option<String>,
    pub grid_delta: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Analyze,
            jobs: Vec::new(),
            options: AnalysisOptions::default(),
            data: None,
            method: Method::InclusionExclusion,
            fmb_files: Vec::new(),
            format: OutputFormat::Text,
            threshold: 0.0,
            kind: None,
            grid_delta: oracle::DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn fail(code: i32, msg: impl Into<String>) -> Self {
        let mut stderr = msg.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        Outcome {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

/// Parses `VAR=MODE`.
pub fn parse_target(s: &str) -> Result<(String, FailureMode), String> {
    let (var, mode) = s
        .split_once('=')
        .ok_or_else(|| format!("target '{s}' must look like VAR=MODE"))?;
    let var = var.trim();
    if var.is_empty() {
        return Err(format!("target '{s}' has no variable"));
    }
    let mode = mode.trim().parse::<FailureMode>().map_err(|e| e.to_string())?;
    Ok((var.to_string(), mode))
}

/// Reads a manifest: one `PROGRAM VAR=MODE [LABEL]` per line, `#` comments.
/// Program paths are relative to the manifest's directory.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<Job>, String> {
    let mut jobs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(format!(
                "manifest line {}: expected PROGRAM VAR=MODE [LABEL]",
                i + 1
            ));
        }
        let target = parse_target(parts[1]).map_err(|e| format!("manifest line {}: {e}", i + 1))?;
        jobs.push(Job {
            program: base.join(parts[0]),
            target,
            label: parts.get(2).map(|s| s.to_string()),
        });
    }
    if jobs.is_empty() {
        return Err("manifest lists no analyses".to_string());
    }
    Ok(jobs)
}

fn read(path: &Path) -> Result<String, Outcome> {
    std::fs::read_to_string(path).map_err(|e| Outcome::fail(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn load_catalog(files: &[PathBuf]) -> Result<Catalog, Outcome> {
    let mut fmbs = Vec::new();
    for f in files {
        let text = read(f)?;
        let parsed = parse_fmb_tables(&text)
            .map_err(|e| Outcome::fail(EXIT_ANALYSIS, format!("{}: {e}", f.display())))?;
        fmbs.extend(parsed);
    }
    Catalog::builtin()
        .with_custom(fmbs)
        .map_err(|e| Outcome::fail(EXIT_ANALYSIS, e.to_string()))
}

fn run_job(
    job: &Job,
    cfg: &RunConfig,
    catalog: &Catalog,
    data: Option<&FailureData>,
) -> Result<Report, Outcome> {
    let text = read(&job.program)?;
    let shown = job.program.display().to_string();
    let g = parse_program_with(&text, catalog)
        .map_err(|e| Outcome::fail(EXIT_ANALYSIS, format!("{shown}:{e}")))?;
    let (var, mode) = &job.target;
    let analysis = backward_analyze(&g, var, *mode, cfg.options)
        .map_err(|e| Outcome::fail(EXIT_ANALYSIS, format!("{shown}: {e}")))?;
    let name = job
        .program
        .file_name()
        .map_or(shown.clone(), |n| n.to_string_lossy().into_owned());
    let mut report = Report::new(&analysis)
        .with_program(name)
        .with_label(job.label.clone());
    if let Some(d) = data {
        let q = aggregate(&analysis.formula, d, cfg.method)
            .map_err(|e| Outcome::fail(EXIT_ANALYSIS, format!("{shown}: {e}")))?;
        report = report.with_quantification(cfg.method, q);
    }
    Ok(report)
}

fn render_reports(reports: &[Report], cfg: &RunConfig) -> String {
    match cfg.format {
        OutputFormat::Json if reports.len() == 1 => reports[0].to_json(),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
            s.push('\n');
            s
        }
        OutputFormat::Text => {
            let one = |r: &Report| match cfg.command {
                Command::Explain => r.render_explain(),
                _ => r.render_text(),
            };
            reports.iter().map(one).collect::<Vec<_>>().join("\n")
        }
    }
}

fn verify(cfg: &RunConfig) -> Outcome {
    let kinds: Vec<BlockKind> = match &cfg.kind {
        None => oracle::catalog_kinds(cfg.threshold),
        Some(name) => {
            let threshold = name.starts_with("Gcom") || name.starts_with("Lcom");
            match BlockKind::from_name(name, threshold.then_some(cfg.threshold)) {
                Ok(k) => vec![k],
                Err(e) => return Outcome::fail(EXIT_USAGE, e.to_string()),
            }
        }
    };
    let reports: Result<Vec<ConformanceReport>, _> = kinds
        .par_iter()
        .map(|k| oracle::verify_fmb(*k, &WitnessGrid::for_kind(*k, cfg.grid_delta)))
        .collect();
    let reports = match reports {
        Ok(r) => r,
        Err(e) => return Outcome::fail(EXIT_ANALYSIS, e.to_string()),
    };
    let passed = reports.iter().filter(|r| r.ok()).count();
    let stdout = match cfg.format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&reports).expect("reports serialize");
            s.push('\n');
            s
        }
        OutputFormat::Text => {
            let mut s: String = reports.iter().map(|r| r.render_table() + "\n").collect();
            s.push_str(&format!("{passed}/{} blocks sound and complete\n", reports.len()));
            s
        }
    };
    Outcome {
        code: if passed == reports.len() {
            EXIT_OK
        } else {
            EXIT_ANALYSIS
        },
        stdout,
        stderr: String::new(),
    }
}

pub fn run(cfg: &RunConfig) -> Outcome {
    if cfg.command == Command::VerifyFmb {
        return verify(cfg);
    }
    if cfg.jobs.is_empty() {
        return Outcome::fail(EXIT_USAGE, "no program/target given");
    }
    if cfg.command == Command::Quantify && cfg.data.is_none() {
        return Outcome::fail(EXIT_USAGE, "quantify requires --data FILE");
    }
    let catalog = match load_catalog(&cfg.fmb_files) {
        Ok(c) => c,
        Err(o) => return o,
    };
    let data = match &cfg.data {
        None => None,
        Some(p) => match read(p).and_then(|t| {
            FailureData::from_json(&t)
                .map_err(|e| Outcome::fail(EXIT_ANALYSIS, format!("{}: {e}", p.display())))
        }) {
            Ok(d) => Some(d),
            Err(o) => return o,
        },
    };
    let results: Vec<Result<Report, Outcome>> = cfg
        .jobs
        .par_iter()
        .map(|job| run_job(job, cfg, &catalog, data.as_ref()))
        .collect();
    let mut reports = Vec::with_capacity(results.len());
    let mut failure: Option<Outcome> = None;
    for r in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(o) => {
                let f = failure.get_or_insert(Outcome {
                    code: o.code,
                    ..Outcome::default()
                });
                f.code = f.code.max(o.code);
                f.stderr.push_str(&o.stderr);
            }
        }
    }
    match failure {
        Some(f) => f,
        None => Outcome {
            code: EXIT_OK,
            stdout: render_reports(&reports, cfg),
            stderr: String::new(),
        },
    }
}
