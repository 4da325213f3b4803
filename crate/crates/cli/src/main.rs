use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fmr::catalog::FmbVariant;
use fmr::engine::AnalysisOptions;
use fmr::quantify::Method;
use fmr_cli::{parse_manifest, parse_target, run, Command, Job, OutputFormat, RunConfig, EXIT_USAGE};

#[derive(Parser)]
#[command(
    name = "fmr",
    version,
    about = "Failure mode reasoning for function-block programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the input failure scenarios that cause an output failure mode.
    Analyze(AnalyzeArgs),
    /// Analyze and compute the probability of the target failure.
    Quantify(AnalyzeArgs),
    /// Show how each scenario was derived, block by block.
    Explain(AnalyzeArgs),
    /// Check the built-in failure mode tables against concrete semantics.
    VerifyFmb(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Theoretical,
    Practical,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantMethod {
    InclusionExclusion,
    RareEvent,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Program file (fmrprog v1).
    #[arg(required_unless_present = "manifest")]
    program: Option<PathBuf>,
    /// Output literal to explain, e.g. `o=f`.
    #[arg(long, value_parser = parse_target, required_unless_present = "manifest")]
    target: Option<(String, fmr::mode::FailureMode)>,
    /// Batch file with one `PROGRAM VAR=MODE [LABEL]` per line.
    #[arg(long, conflicts_with_all = ["program", "target", "label"])]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "practical")]
    variant: Variant,
    /// Expand literals with mode m instead of dropping them.
    #[arg(long)]
    no_prune_match: bool,
    /// Use uncertain table rows (t_u, f_u).
    #[arg(long)]
    include_uncertain: bool,
    /// Failure probabilities, JSON `{"var": {"l": p, ...}}`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "inclusion-exclusion")]
    method: QuantMethod,
    /// Free-form label for the run, e.g. DU or ST.
    #[arg(long)]
    label: Option<String>,
    /// Extra failure mode tables for custom block kinds.
    #[arg(long = "fmb")]
    fmb: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    /// Only this kind (e.g. Avg, GcomK).
    #[arg(long)]
    kind: Option<String>,
    /// Threshold for the comparators.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

fn format_of(f: Format) -> OutputFormat {
    match f {
        Format::Text => OutputFormat::Text,
        Format::Json => OutputFormat::Json,
    }
}

fn config(cli: Cli) -> Result<RunConfig, String> {
    let grid_delta = fmr::oracle::delta_from_env().map_err(|e| e.to_string())?;
    let (command, args) = match cli.command {
        Cmd::VerifyFmb(v) => {
            if !v.threshold.is_finite() {
                return Err("threshold must be finite".into());
            }
            return Ok(RunConfig {
                command: Command::VerifyFmb,
                format: format_of(v.format),
                threshold: v.threshold,
                kind: v.kind,
                grid_delta,
                ..RunConfig::default()
            });
        }
        Cmd::Analyze(a) => (Command::Analyze, a),
        Cmd::Quantify(a) => (Command::Quantify, a),
        Cmd::Explain(a) => (Command::Explain, a),
    };
    let jobs = match (&args.manifest, args.program, args.target) {
        (Some(m), _, _) => {
            let text = std::fs::read_to_string(m).map_err(|e| format!("{}: {e}", m.display()))?;
            let base = m.parent().map(PathBuf::from).unwrap_or_default();
            parse_manifest(&text, &base)?
        }
        (None, Some(program), Some(target)) => vec![Job {
            program,
            target,
            label: args.label,
        }],
        _ => return Err("a program and --target are required".into()),
    };
    Ok(RunConfig {
        command,
        jobs,
        options: AnalysisOptions {
            fmb_variant: match args.variant {
                Variant::Theoretical => FmbVariant::Theoretical,
                Variant::Practical => FmbVariant::Practical,
            },
            prune_match: !args.no_prune_match,
            include_uncertain: args.include_uncertain,
        },
        data: args.data,
        method: match args.method {
            QuantMethod::InclusionExclusion => Method::InclusionExclusion,
            QuantMethod::RareEvent => Method::RareEvent,
        },
        fmb_files: args.fmb,
        format: format_of(args.format),
        grid_delta,
        ..RunConfig::default()
    })
}

fn main() -> ExitCode {
    let cfg = match config(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let out = run(&cfg);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    ExitCode::from(out.code as u8)
}
