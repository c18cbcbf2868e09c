//! Decides between competing forms of the mixture momentum balance and the
//! skew-stress factor by measuring which ones close on manufactured states.

use mixlab_core::balances::{
    diffusive_stress, moment_residual_constituent, momentum_residual_mixture, momentum_summation_oracle,
    BinaryScenario, DiffusiveStress, SkewConvention,
};
use mixlab_core::covariance::{covariance_residual, sample_generators, SpatialDeformation};
use mixlab_core::diffops;
use mixlab_core::power::{invariance_residual, sample_part_bounds, ObserverChange};
use mixlab_core::report::{Check, ResidualRow, SuiteReport};
use mixlab_core::{close_state_via_balances, MixtureState, Part, Vec3};
use serde::{Deserialize, Serialize};

use crate::plan::VerificationPlan;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: DiffusiveStress,
    /// Relative distance to the summed constituent residuals, coarse then fine.
    pub errors: [f64; 2],
    pub tolerance: f64,
    pub closes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConventionResult {
    /// Convention the manufactured state was closed under.
    pub state: SkewConvention,
    /// Moment balance with factor 1 on `T - T^T`, coarse then fine.
    pub moment_difference_form: [f64; 2],
    /// Covariance moment term with factor 1 on `skw T`, coarse then fine.
    pub covariance_moment: [f64; 2],
    /// Largest couple gap of rigid power invariance per unit part volume, coarse then fine.
    pub couple_gap: [f64; 2],
    pub moment_closes: bool,
    pub covariance_closes: bool,
    pub power_closes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adjudication {
    pub variants: Vec<VariantResult>,
    pub diffusive_stress: Option<DiffusiveStress>,
    pub conventions: Vec<ConventionResult>,
    pub moment_convention: Option<SkewConvention>,
    pub covariance_convention: Option<SkewConvention>,
    pub power_convention: Option<SkewConvention>,
    /// Convention used by the theorem suites: the plan override, else the one closing power invariance.
    pub forward_convention: SkewConvention,
    pub overridden: bool,
    pub report: SuiteReport,
}

fn unique<T: Copy>(mut it: impl Iterator<Item = T>) -> Option<T> {
    let first = it.next()?;
    if it.next().is_some() {
        None
    } else {
        Some(first)
    }
}

fn variant_error(m: &MixtureState, variant: DiffusiveStress) -> Result<f64, CliError> {
    let oracle = momentum_summation_oracle(m)?;
    let r = momentum_residual_mixture(m, variant)?;
    let scale = diffops::div(&diffusive_stress(m, DiffusiveStress::DensityWeighted)?).max_norm().max(1e-300);
    Ok((&r - &oracle).max_norm() / scale)
}

fn moment_difference_form(m: &MixtureState) -> Result<f64, CliError> {
    let rho = &m.aggregates()?.rho;
    let mut num = 0.0_f64;
    let mut scale = 0.0_f64;
    for a in 0..m.len() {
        num = num.max(moment_residual_constituent(m, a, SkewConvention::Difference)?.max_norm());
        let mu = m.constituent(a).moment_growth.values().iter().zip(rho.values()).map(|(mu, r)| mu.norm() * r);
        scale = scale.max(mu.fold(0.0, f64::max));
    }
    Ok(num / scale.max(1e-300))
}

fn covariance_moment(m: &MixtureState, scenario: &BinaryScenario, seed: u64, part: &Part) -> Result<f64, CliError> {
    let mut worst = 0.0_f64;
    for a in 0..m.len() {
        let Some(ce) = scenario.energy_model(a) else { continue };
        for w in sample_generators(m.grid(), seed, 3) {
            let d = SpatialDeformation::new(w, a)?;
            let t = covariance_residual(m, &d, ce, part, SkewConvention::SkewPart)?;
            worst = worst.max(t.moment_term.abs() / t.momentum_term.abs().max(t.moment_term.abs()).max(1e-300));
        }
    }
    Ok(worst)
}

fn couple_gap(m: &MixtureState, bounds: &[(Vec3, Vec3)]) -> Result<f64, CliError> {
    let g = m.grid();
    let mut worst = 0.0_f64;
    for (lo, hi) in bounds {
        let p = Part::from_bounds(g, *lo, *hi)?;
        let pivot = (lo + hi) * 0.5;
        let o = ObserverChange::rotational(Vec3::z(), pivot);
        for a in 0..m.len() {
            let gaps = invariance_residual(m, a, &p, &o)?;
            worst = worst.max(gaps.couple.norm() / p.volume(g));
        }
    }
    Ok(worst)
}

/// Runs the adjudication on the coarse and fine theorem grids.
///
/// The states are the `elastic` preset, which carries moment growth, nonzero
/// diffusion velocities and an energy model, so every candidate is exercised.
pub fn adjudicate(plan: &VerificationPlan) -> Result<Adjudication, CliError> {
    let scenario = BinaryScenario::elastic();
    let [nc, nf] = plan.theorem_grids();
    let grids = [plan.grid(nc), plan.grid(nf)];
    let (hc, hf) = (grids[0].spacing(), grids[1].spacing());
    let rich = plan.tolerances.richardson;
    let mut report = SuiteReport::new("adjudication", plan.seed);

    let closed = |conv: SkewConvention| -> Result<[MixtureState; 2], CliError> {
        Ok([
            close_state_via_balances(&scenario, &grids[0], plan.time, conv)?,
            close_state_via_balances(&scenario, &grids[1], plan.time, conv)?,
        ])
    };

    let reference = closed(SkewConvention::SkewPart)?;
    let mut variants = Vec::new();
    for v in DiffusiveStress::ALL {
        let e = [variant_error(&reference[0], v)?, variant_error(&reference[1], v)?];
        let check =
            rich.check(format!("diffusive stress {} matches summed balances", v.name()), e[0], e[1], hc, hf, 1.0);
        for (n, val) in [nc, nf].iter().zip(e) {
            report.row(ResidualRow::new("diffusive_stress", v.name(), *n, val));
        }
        variants.push(VariantResult { variant: v, errors: e, tolerance: check.tolerance, closes: check.passed });
    }
    let diffusive = unique(variants.iter().filter(|v| v.closes).map(|v| v.variant));
    report.push(Check::flag(
        "exactly one diffusive stress closes",
        diffusive.is_some(),
        diffusive.map_or("none or several".into(), |d| d.name().to_string()),
    ));

    let bounds = sample_part_bounds(&grids[0], plan.seed, 2)?;
    let cov_part = Part::from_bounds(&grids[0], bounds[0].0, bounds[0].1)?;
    let cov_part_fine = Part::from_bounds(&grids[1], bounds[0].0, bounds[0].1)?;
    let mut conventions = Vec::new();
    for conv in SkewConvention::ALL {
        let ms = if conv == SkewConvention::SkewPart { reference.clone() } else { closed(conv)? };
        let md = [moment_difference_form(&ms[0])?, moment_difference_form(&ms[1])?];
        let cm = [
            covariance_moment(&ms[0], &scenario, plan.seed, &cov_part)?,
            covariance_moment(&ms[1], &scenario, plan.seed, &cov_part_fine)?,
        ];
        let cg = [couple_gap(&ms[0], &bounds)?, couple_gap(&ms[1], &bounds)?];
        let tol = plan.tolerances.identity;
        let power = rich.check("couple gap", cg[0], cg[1], hc, hf, 1.0).passed;
        for (q, vals) in [("moment_difference_form", md), ("covariance_moment", cm), ("couple_gap", cg)] {
            for (n, val) in [nc, nf].iter().zip(vals) {
                report.row(ResidualRow::new(q, conv.name(), *n, val));
            }
        }
        conventions.push(ConventionResult {
            state: conv,
            moment_difference_form: md,
            covariance_moment: cm,
            couple_gap: cg,
            moment_closes: md[1] <= tol,
            covariance_closes: cm[1] <= tol,
            power_closes: power,
        });
    }
    let moment_convention = unique(conventions.iter().filter(|c| c.moment_closes).map(|c| c.state));
    let covariance_convention = unique(conventions.iter().filter(|c| c.covariance_closes).map(|c| c.state));
    let power_convention = unique(conventions.iter().filter(|c| c.power_closes).map(|c| c.state));
    report.push(Check::flag(
        "exactly one skew convention closes power invariance",
        power_convention.is_some(),
        power_convention.map_or("none or several".into(), |c| c.name().to_string()),
    ));
    let name = |c: Option<SkewConvention>| c.map_or("none or several", |c| c.name());
    report.convention("moment_balance_difference_form", name(moment_convention));
    report.convention("covariance_moment_term", name(covariance_convention));
    report.convention("power_invariance", name(power_convention));
    report.convention("diffusive_stress", diffusive.map_or("none or several", |d| d.name()));

    let (forward_convention, overridden) = match plan.convention {
        Some(c) => (c, true),
        None => (power_convention.unwrap_or(SkewConvention::SkewPart), false),
    };
    report.convention("forward", forward_convention.name());
    if overridden {
        report.convention("forward_source", "plan");
    }
    let report = report.finish();

    Ok(Adjudication {
        variants,
        diffusive_stress: diffusive,
        conventions,
        moment_convention,
        covariance_convention,
        power_convention,
        forward_convention,
        overridden,
        report,
    })
}
