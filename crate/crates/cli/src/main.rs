use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use cellsafe_core::fixtures::{generate, FixtureKind, FixtureSpec};
use cellsafe_core::report::{render_json, render_text, Report};
use cellsafe_core::rules::{diff_workbooks, run_all, RuleConfig, RuleId, Severity};
use cellsafe_core::workbook::{read_json, read_xlsx, write_json, write_xlsx, Workbook};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_CLEAN: u8 = 0;
const EXIT_FINDINGS: u8 = 1;
const EXIT_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "cellsafe", version, about = "Audit spreadsheet workbooks for calculation hazards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hazard rules over one or more workbooks (.xlsx or .json).
    Audit {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Compare two versions of a workbook.
    Diff {
        old: PathBuf,
        new: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Generate the bundled example workbooks.
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
}

#[derive(Subcommand)]
enum FixturesCommand {
    /// Write a fixture workbook to a file.
    Gen {
        /// pediatric, bayes or clean-pediatric
        kind: String,
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FileFormat::Json)]
        format: FileFormat,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Leave out the unused body-surface-area formula.
        #[arg(long)]
        no_bsa: bool,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
    /// Comma-separated rule ids to run (R7 selects R7a and R7b).
    #[arg(long, value_delimiter = ',')]
    rules: Option<Vec<String>>,
    /// Hide findings below this severity.
    #[arg(long, default_value = "info")]
    min_severity: Severity,
    /// Exit with status 1 when any finding reaches this severity.
    #[arg(long, default_value = "warn")]
    fail_on: Severity,
    /// JSON rule configuration.
    #[arg(long, env = "CELLSAFE_CONFIG")]
    config: Option<PathBuf>,
    /// Comma-separated cells (A1 or Sheet!A1) exempt from the dead-formula rule.
    #[arg(long, value_delimiter = ',')]
    suppress: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    Json,
    Xlsx,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Audit { inputs, report } => cmd_audit(&inputs, &report),
        Command::Diff { old, new, report } => cmd_diff(&old, &new, &report),
        Command::Fixtures { command: FixturesCommand::Gen { kind, out, format, seed, no_bsa } } => {
            cmd_fixtures(&kind, &out, format, seed, !no_bsa)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("cellsafe: {message}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn load_config(args: &ReportArgs) -> Result<RuleConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            RuleConfig::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RuleConfig::default(),
    };
    if let Some(selectors) = &args.rules {
        cfg.rules.clear();
        for s in selectors.iter().filter(|s| !s.trim().is_empty()) {
            cfg.rules.extend(RuleId::parse_selector(s)?);
        }
    }
    cfg.suppress.extend(args.suppress.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()));
    cfg.check()?;
    Ok(cfg)
}

fn read_workbook(path: &Path) -> Result<Workbook, String> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let result =
        if is_json { read_json(path).map_err(|e| e.to_string()) } else { read_xlsx(path).map_err(|e| e.to_string()) };
    result.map_err(|e| format!("{}: {e}", path.display()))
}

fn finish(mut report: Report, args: &ReportArgs) -> u8 {
    let failing = report.any_at_least(args.fail_on);
    report.filter_min_severity(args.min_severity);
    let text = match args.format {
        ReportFormat::Text => render_text(&report),
        ReportFormat::Json => render_json(&report),
    };
    print!("{text}");
    if failing {
        EXIT_FINDINGS
    } else {
        EXIT_CLEAN
    }
}

fn cmd_audit(inputs: &[PathBuf], args: &ReportArgs) -> Result<u8, String> {
    let cfg = load_config(args)?;
    let results: Vec<_> = thread::scope(|scope| {
        let handles: Vec<_> = inputs
            .iter()
            .map(|path| {
                let cfg = &cfg;
                scope.spawn(move || read_workbook(path).map(|wb| run_all(&wb, cfg)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("audit thread panicked")).collect()
    });
    let names: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
    let mut report = Report::new("audit", names.clone(), cfg);
    for (name, findings) in names.iter().zip(results) {
        report.extend(name, findings?);
    }
    Ok(finish(report, args))
}

fn cmd_diff(old: &Path, new: &Path, args: &ReportArgs) -> Result<u8, String> {
    let cfg = load_config(args)?;
    let (a, b) = (read_workbook(old)?, read_workbook(new)?);
    let findings: Vec<_> = diff_workbooks(&a, &b).into_iter().filter(|f| cfg.enabled(f.rule_id)).collect();
    let names = vec![old.display().to_string(), new.display().to_string()];
    let mut report = Report::new("diff", names.clone(), cfg);
    report.extend(&names[1], findings);
    Ok(finish(report, args))
}

fn cmd_fixtures(kind: &str, out: &Path, format: FileFormat, seed: u64, include_bsa: bool) -> Result<u8, String> {
    let kind: FixtureKind = kind.parse()?;
    let wb = generate(&FixtureSpec { kind, seed, include_bsa });
    match format {
        FileFormat::Json => write_json(&wb, out).map_err(|e| e.to_string())?,
        FileFormat::Xlsx => write_xlsx(&wb, out).map_err(|e| e.to_string())?,
    }
    eprintln!("wrote {kind} fixture to {}", out.display());
    Ok(EXIT_CLEAN)
}
