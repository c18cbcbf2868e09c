//! The verification suites. Each returns a finished [`SuiteReport`].

mod covariance;
mod energetics;
mod operators;
mod simulate;
mod theorem;

use mixlab_core::balances::{BinaryScenario, DiffusiveStress, SkewConvention};
use mixlab_core::report::SuiteReport;
use mixlab_core::simulate::ScenarioConfig;
use mixlab_core::{close_state_via_balances, Grid, MixtureState};

use crate::adjudication::Adjudication;
use crate::plan::{Suite, TheoremScenario, Tolerances, VerificationPlan};
use crate::CliError;

pub use covariance::covariance;
pub use energetics::energetics;
pub use operators::operators;
pub use simulate::simulate;
pub use theorem::{theorem_forward, theorem_reverse};

/// Inputs shared by every suite of one run.
#[derive(Clone, Debug)]
pub struct Context<'a> {
    pub plan: &'a VerificationPlan,
    pub scenario: TheoremScenario,
    pub convention: SkewConvention,
    pub diffusive: DiffusiveStress,
}

impl<'a> Context<'a> {
    pub fn new(plan: &'a VerificationPlan, scenario: TheoremScenario, adjudication: Option<&Adjudication>) -> Self {
        let convention = match adjudication {
            Some(a) => a.forward_convention,
            None => plan.convention.unwrap_or(SkewConvention::SkewPart),
        };
        let diffusive =
            adjudication.and_then(|a| a.diffusive_stress).unwrap_or(DiffusiveStress::DensityWeightedNegative);
        Self { plan, scenario, convention, diffusive }
    }

    pub fn tol(&self) -> &Tolerances {
        &self.plan.tolerances
    }

    pub fn seed(&self) -> u64 {
        self.plan.seed
    }

    /// Closed scenario state at `t`, with the configured growth imbalance added afterwards.
    pub fn closed_at(&self, grid: &Grid, t: f64) -> Result<MixtureState, CliError> {
        self.closed_with(&self.scenario.binary, grid, t)
    }

    /// Like [`Context::closed_at`] for another binary scenario, keeping the imbalance.
    pub fn closed_with(&self, binary: &BinaryScenario, grid: &Grid, t: f64) -> Result<MixtureState, CliError> {
        let m = close_state_via_balances(binary, grid, t, self.convention)?;
        let s = self.scenario.imbalance();
        if s == mixlab_core::Vec3::zeros() {
            return Ok(m);
        }
        Ok(m.modified(|cs| {
            let last = cs.len() - 1;
            for v in cs[last].momentum_growth.values_mut() {
                *v += s;
            }
        })?)
    }

    pub fn closed(&self, grid: &Grid) -> Result<MixtureState, CliError> {
        self.closed_at(grid, self.plan.time)
    }

    /// States at `t - dt`, `t`, `t + dt` for time-differenced rates.
    pub fn window(&self, grid: &Grid) -> Result<Vec<MixtureState>, CliError> {
        let (t, dt) = (self.plan.time, self.plan.time_step);
        [t - dt, t, t + dt].iter().map(|&s| self.closed_at(grid, s)).collect()
    }

    pub fn report(&self, suite: Suite) -> SuiteReport {
        let mut r = SuiteReport::new(suite.name(), self.seed());
        r.convention("skew", self.convention.name());
        r
    }
}

pub fn run_suite(suite: Suite, ctx: &Context, simulation: Option<&ScenarioConfig>) -> Result<SuiteReport, CliError> {
    Ok(match suite {
        Suite::Operators => operators(ctx)?,
        Suite::TheoremForward => theorem_forward(ctx)?,
        Suite::TheoremReverse => theorem_reverse(ctx)?,
        Suite::Energetics => energetics(ctx)?,
        Suite::Covariance => covariance(ctx)?,
        Suite::Simulate => {
            let cfg = simulation.ok_or_else(|| CliError::Internal("simulate suite without a configuration".into()))?;
            simulate(ctx, cfg)?
        }
    })
}
