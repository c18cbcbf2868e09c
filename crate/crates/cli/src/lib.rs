//! Verification harness for `mixlab-core`: plans, suites, adjudication and report bundles.

pub mod adjudication;
pub mod output;
pub mod plan;
pub mod suites;

use std::path::PathBuf;

use mixlab_core::report::SuiteReport;

pub use adjudication::{adjudicate, Adjudication};
pub use plan::{load_plan, load_scenario_config, Suite, TheoremScenario, Tolerances, VerificationPlan};

/// Environment variable that overrides the plan's output directory.
pub const OUT_DIR_ENV: &str = "MIXLAB_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] mixlab_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl CliError {
    /// 2 for unreadable or invalid input, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            _ => 3,
        }
    }
}

/// Result of a verification run.
#[derive(Clone, Debug)]
pub struct Verification {
    pub adjudication: Option<Adjudication>,
    pub reports: Vec<SuiteReport>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn report(&self, suite: Suite) -> Option<&SuiteReport> {
        self.reports.iter().find(|r| r.suite == suite.name())
    }
}

/// Output directory of `plan`, honouring [`OUT_DIR_ENV`].
pub fn output_dir(plan: &VerificationPlan) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => plan.resolve(&plan.output_dir.to_string_lossy()),
    }
}

/// Runs the adjudication (when a theorem suite needs it) and then every suite of `plan`
/// concurrently. Reports come back in plan order.
pub fn run_verification(plan: &VerificationPlan) -> Result<Verification, CliError> {
    plan.validate()?;
    let scenario = plan.load_scenario()?;
    let simulation = if plan.suites.contains(&Suite::Simulate) { Some(plan.load_simulation()?) } else { None };
    let adjudication = if plan.suites.iter().any(|s| s.needs_adjudication()) { Some(adjudicate(plan)?) } else { None };
    let ctx = suites::Context::new(plan, scenario, adjudication.as_ref());

    let mut suites = plan.suites.clone();
    suites.dedup();
    let results: Vec<Result<SuiteReport, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = suites
            .iter()
            .map(|&s| {
                let ctx = &ctx;
                let sim = simulation.as_ref();
                scope.spawn(move || suites::run_suite(s, ctx, sim))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Internal("suite thread panicked".into()))))
            .collect()
    });
    let reports = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Verification { adjudication, reports })
}
