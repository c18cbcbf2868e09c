use mixlab_core::balances::{BinaryScenario, StressLaw};
use mixlab_core::covariance::{
    covariance_residual, doyle_ericksen_residual, lie_metric, metric_derivative_fd, sample_generators, MetricDerivative,
};
use mixlab_core::diffops::{self, sym};
use mixlab_core::power::{invariance_residual, rigid_velocity, sample_observers, sample_part_bounds};
use mixlab_core::report::{Check, ResidualRow, SuiteReport};
use mixlab_core::{
    ConstitutiveEnergy, EnergyModel, Mat3, MixtureState, Part, SkewConvention, SpatialDeformation, TensorField, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Context;
use crate::plan::Suite;
use crate::CliError;

const GENERATORS: usize = 10;

/// The plan's scenario with an elastic stress law, so that stresses derive from energies.
pub fn elastic_variant(binary: &BinaryScenario) -> BinaryScenario {
    match binary.stress_law {
        StressLaw::Elastic { .. } => binary.clone(),
        StressLaw::Free { .. } => BinaryScenario { stress_law: BinaryScenario::elastic().stress_law, ..binary.clone() },
    }
}

fn random_metric(rng: &mut ChaCha8Rng) -> Mat3 {
    let a = Mat3::from_fn(|_, _| rng.gen_range(-0.4..0.4));
    Mat3::identity() + sym(&a) * 0.5 + a.transpose() * a * 0.1
}

/// Worst relative gap between the analytic metric derivative and central differences.
fn fd_gap(models: &[&EnergyModel], seed: u64, step: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let g = random_metric(&mut rng);
        let rho = rng.gen_range(0.5..2.0);
        for ce in models {
            let an = ce.metric_derivative(rho, &g);
            let fd = metric_derivative_fd(*ce, rho, &g, step);
            worst = worst.max((an - fd).amax() / an.amax().max(1.0));
        }
    }
    worst
}

fn term_scale(m: &MixtureState, a: usize, w: &mixlab_core::VectorField, part: &Part) -> f64 {
    let vol = part.volume(m.grid());
    let stress = m.constituent(a).stress.max_norm().max(1.0);
    vol * (w.max_norm() + diffops::grad(w).max_norm()) * stress
}

pub fn covariance(ctx: &Context) -> Result<SuiteReport, CliError> {
    let tol = ctx.tol();
    let mut r = ctx.report(Suite::Covariance);
    let binary = elastic_variant(&ctx.scenario.binary);
    let [nc, nf] = ctx.plan.theorem_grids();
    let grids = [ctx.plan.grid(nc), ctx.plan.grid(nf)];
    let (hc, hf) = (grids[0].spacing(), grids[1].spacing());
    let t = ctx.plan.time;
    let states = [ctx.closed_with(&binary, &grids[0], t)?, ctx.closed_with(&binary, &grids[1], t)?];
    let models: Vec<&EnergyModel> = (0..2).filter_map(|a| binary.energy_model(a)).collect();
    let step = SpatialDeformation::DEFAULT_STEP;

    // Analytic metric derivatives against central differences.
    let mut extra = vec![EnergyModel::Trace { k: 1.3 }];
    extra.extend(models.iter().map(|m| (*m).clone()));
    let all: Vec<&EnergyModel> = extra.iter().collect();
    let gap = fd_gap(&all, ctx.seed(), step);
    r.row(ResidualRow::new("metric_derivative_fd", "random metrics", 0, gap));
    r.push(Check::at_most("analytic metric derivative matches central differences", gap, tol.metric_fd));

    let m = &states[1];
    let mut de_fd = 0.0_f64;
    let mut de_exact = 0.0_f64;
    for a in 0..2 {
        let Some(ce) = binary.energy_model(a) else { continue };
        let an = doyle_ericksen_residual(m, a, ce, MetricDerivative::Analytic)?;
        let fd = doyle_ericksen_residual(m, a, ce, MetricDerivative::Central { step })?;
        let scale = m.constituent(a).stress.max_norm().max(1.0);
        de_exact = de_exact.max(an.max_norm() / scale);
        de_fd = de_fd.max((&an - &fd).max_norm() / scale);
    }
    r.push(Check::at_most("stress derives from the energy", de_exact, tol.identity));
    r.push(Check::at_most("stress residual with differenced metric derivative", de_fd, tol.metric_fd));

    // Covariance terms for random generators on nested parts, coarse against fine.
    let bounds = sample_part_bounds(&grids[0], ctx.seed(), 1)?;
    let parts: Vec<[Part; 2]> = bounds
        .iter()
        .map(|(lo, hi)| Ok([Part::from_bounds(&grids[0], *lo, *hi)?, Part::from_bounds(&grids[1], *lo, *hi)?]))
        .collect::<Result<_, CliError>>()?;
    let gens =
        [sample_generators(&grids[0], ctx.seed(), GENERATORS), sample_generators(&grids[1], ctx.seed(), GENERATORS)];
    let mut worst = [0.0_f64; 3];
    let mut largest = [0.0_f64; 3];
    for a in 0..2 {
        let Some(ce) = binary.energy_model(a) else { continue };
        for (j, p) in parts.iter().enumerate() {
            for i in 0..GENERATORS {
                let mut e = [[0.0; 3]; 2];
                for k in 0..2 {
                    let d = SpatialDeformation::new(gens[k][i].clone(), a)?;
                    let terms = covariance_residual(&states[k], &d, ce, &p[k], ctx.convention)?;
                    let s = term_scale(&states[k], a, &gens[k][i], &p[k]);
                    e[k] = [terms.de_term, terms.momentum_term, terms.moment_term].map(|v| v.abs() / s);
                }
                for q in 0..3 {
                    let c = tol.richardson.check("term", e[0][q], e[1][q], hc, hf, 1.0);
                    worst[q] = worst[q].max(e[1][q] / c.tolerance);
                    largest[q] = largest[q].max(e[1][q]);
                }
                r.row(ResidualRow::new(
                    "covariance_de_term",
                    format!("constituent {a} part {j} generator {i}"),
                    nf,
                    e[1][0],
                ));
            }
        }
    }
    for (q, name) in ["stress-energy term", "momentum term", "moment term"].iter().enumerate() {
        r.push(
            Check::at_most(format!("covariance {name} relative to its Richardson tolerance"), worst[q], 1.0)
                .with_note(format!("largest relative value {:e}", largest[q])),
        );
    }

    // Rigid generators: momentum and moment terms reproduce the invariance gaps.
    let g0 = &grids[0];
    let m0 = &states[0];
    let pivot = Vec3::repeat(std::f64::consts::PI);
    let mut rigid = 0.0_f64;
    for o in sample_observers(ctx.seed(), GENERATORS, pivot) {
        let w = rigid_velocity(&o, g0, t);
        for a in 0..2 {
            let Some(ce) = binary.energy_model(a) else { continue };
            let d = SpatialDeformation::new(w.clone(), a)?;
            for p in &parts {
                let terms = covariance_residual(m0, &d, ce, &p[0], SkewConvention::SkewPart)?;
                let gaps = invariance_residual(m0, a, &p[0], &o)?;
                let expected = -(o.translation_at(t).dot(&gaps.force) + o.rotation_at(t).dot(&gaps.couple));
                let sum = terms.momentum_term + terms.moment_term;
                let s = sum.abs().max(expected.abs()).max(1.0);
                rigid = rigid.max((sum - expected).abs() / s);
            }
        }
    }
    r.row(ResidualRow::new("rigid_cross_check", "largest relative defect", nc, rigid));
    r.push(Check::at_most("rigid generators reproduce the invariance gaps", rigid, tol.rigid_cross_check));

    // Lie derivative of the identity metric is twice the symmetric velocity gradient.
    let ident = TensorField::constant(*g0, Mat3::identity());
    let mut lie = 0.0_f64;
    for w in &gens[0] {
        let l = lie_metric(w, &ident)?;
        let expected = diffops::grad(w).map(|g| sym(&g) * 2.0);
        lie = lie.max((&l - &expected).max_norm() / expected.max_norm().max(1.0));
    }
    r.push(Check::at_most("Lie derivative of the identity metric", lie, tol.lie_identity));
    Ok(r.finish())
}
