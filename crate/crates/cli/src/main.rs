use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mixlab_cli::output::{self, Format};
use mixlab_cli::{load_plan, load_scenario_config, output_dir, run_verification, CliError, Suite, OUT_DIR_ENV};
use mixlab_core::simulate::run;

/// Verification lab and binary-mixture simulator.
#[derive(Parser)]
#[command(name = "mixlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites of a verification plan and write a report bundle.
    Verify { plan: PathBuf },
    /// Run a binary-mixture scenario and write its time series, snapshots and conservation report.
    Simulate {
        scenario: PathBuf,
        /// Output directory; defaults to $MIXLAB_OUT_DIR, then `mixlab-sim`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run only the covariance suite of a plan.
    Covariance { plan: PathBuf },
    /// Combine the suite reports of an earlier run into one file.
    Report {
        /// Directory holding the `<suite>.json` files.
        #[arg(default_value = ".")]
        results: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

fn verify(plan_path: &Path, only: Option<Suite>) -> Result<bool, CliError> {
    let started = output::unix_now();
    let mut plan = load_plan(plan_path)?;
    if let Some(s) = only {
        plan.suites = vec![s];
    }
    let v = run_verification(&plan)?;
    let dir = output_dir(&plan);
    let summary = output::write_bundle(&dir, &plan, &v, started)?;
    for s in &summary.suites {
        println!("{:<16} {}", s.suite, if s.passed { "pass" } else { "FAIL" });
        for f in &s.failures {
            println!("    failed: {f}");
        }
    }
    println!("reports written to {}", dir.display());
    Ok(summary.passed)
}

fn simulate(path: &Path, out: Option<PathBuf>) -> Result<bool, CliError> {
    let cfg = load_scenario_config(path)?;
    let tr = run(&cfg).map_err(|e| match e {
        mixlab_core::Error::CflViolation { .. } | mixlab_core::Error::InvalidConfig(_) => {
            CliError::Parse(e.to_string())
        }
        e => CliError::Core(e),
    })?;
    let dir = out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mixlab-sim"));
    std::fs::create_dir_all(&dir)?;
    tr.write_series_csv(std::fs::File::create(dir.join("series.csv"))?)?;
    tr.write_snapshots(&dir.join("snapshots"))?;
    output::write_json(&dir.join("conservation.json"), &tr.report)?;
    println!(
        "{} steps of {:e}; mixture mass drift {:e}, momentum drift {:e}",
        tr.report.steps, tr.report.dt, tr.report.mixture_mass_drift, tr.report.momentum_drift
    );
    println!("output written to {}", dir.display());
    Ok(true)
}

fn report(results: &Path, format: FormatArg, out: &Path) -> Result<bool, CliError> {
    let reports = output::read_reports(results)?;
    let format = match format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    };
    let path = output::write_combined(&reports, format, out)?;
    println!("{}", path.display());
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Verify { plan } => verify(&plan, None),
        Command::Covariance { plan } => verify(&plan, Some(Suite::Covariance)),
        Command::Simulate { scenario, out } => simulate(&scenario, out),
        Command::Report { results, format, out } => report(&results, format, &out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
