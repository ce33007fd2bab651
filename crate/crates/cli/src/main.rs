use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use ailca::report::{run_assess, run_compare, run_report, run_validate, Format, RunOptions, RunOutcome};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Life-cycle assessment of AI services and of AI-enhanced applications.
///
/// Exit status: 0 on success, 1 on unreadable or invalid input, 2 when a
/// well-formed scenario fails validation (structural errors, or missing
/// mandatory life-cycle rows under --strict).
#[derive(Parser)]
#[command(name = "ailca", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and report findings.
    Validate {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Assess one scenario.
    Assess {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare a reference scenario (M1) with an AI-enabled one (M2).
    Compare {
        m1: PathBuf,
        m2: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Neutral band for a category, as CATEGORY=VALUE. Repeatable; default 0.
        #[arg(long = "tolerance", value_name = "CATEGORY=VALUE", value_parser = parse_tolerance)]
        tolerances: Vec<(String, f64)>,
    },
    /// Render a report saved with --format=json in another format.
    Report {
        report: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Treat missing mandatory life-cycle rows as failures.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Characterization factor file; the bundled illustrative factors are used otherwise.
    #[arg(long, value_name = "PATH")]
    factors: Option<PathBuf>,
    /// Write the report to PATH instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Accept unknown keys in input files, with a warning for each.
    #[arg(long)]
    lenient_schema: bool,
    /// CSV only: omit zero-valued rows.
    #[arg(long)]
    nonzero_only: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
    Json,
}

fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (cat, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected CATEGORY=VALUE, got `{s}`"))?;
    let value: f64 = value.parse().map_err(|e| format!("tolerance `{value}`: {e}"))?;
    if !(value >= 0.0 && value.is_finite()) {
        return Err(format!("tolerance must be finite and >= 0, got {value}"));
    }
    Ok((cat.to_string(), value))
}

impl Common {
    fn options(self, tolerances: BTreeMap<String, f64>) -> RunOptions {
        RunOptions {
            strict: self.strict,
            lenient_schema: self.lenient_schema,
            format: match self.format {
                FormatArg::Text => Format::Text,
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            },
            factors: self.factors,
            out: self.out,
            nonzero_only: self.nonzero_only,
            tolerances,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are successful runs.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome: RunOutcome = match cli.command {
        Command::Validate { scenario, common } => run_validate(&scenario, &common.options(BTreeMap::new())),
        Command::Assess { scenario, common } => run_assess(&scenario, &common.options(BTreeMap::new())),
        Command::Compare {
            m1,
            m2,
            common,
            tolerances,
        } => run_compare(&m1, &m2, &common.options(tolerances.into_iter().collect())),
        Command::Report { report, common } => run_report(&report, &common.options(BTreeMap::new())),
    };
    let mut stderr = std::io::stderr().lock();
    for line in &outcome.stderr {
        let _ = writeln!(stderr, "{line}");
    }
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    ExitCode::from(outcome.status.code() as u8)
}
