use mixlab_core::balances::{
    growth_self_equilibration, mass_residual_constituent, mass_residual_mixture, moment_residual_constituent,
    moment_residual_mixture, momentum_residual_constituent, momentum_residual_mixture, Manufactured, SkewConvention,
};
use mixlab_core::covariance::sample_generators;
use mixlab_core::diffops::{self, cross_tensor};
use mixlab_core::power::{
    invariance_residual, power_constituent, sample_observers, sample_part_bounds, total_power_residual,
    transform_velocities, InvarianceGaps, ObserverChange,
};
use mixlab_core::report::{Check, ResidualRow, SuiteReport};
use mixlab_core::{Grid, MixtureState, Part, Vec3};

use super::Context;
use crate::plan::Suite;
use crate::CliError;

const PLACEMENTS: usize = 5;
const RANDOM_OBSERVERS: usize = 10;

fn centre() -> Vec3 {
    Vec3::repeat(std::f64::consts::PI)
}

/// Per-part invariance gaps of every constituent.
fn gaps(m: &MixtureState, parts: &[Part], pivot: Vec3) -> Result<Vec<Vec<InvarianceGaps>>, CliError> {
    let o = ObserverChange::rotational(Vec3::z(), pivot);
    parts.iter().map(|p| (0..m.len()).map(|a| Ok(invariance_residual(m, a, p, &o)?)).collect()).collect()
}

fn observer_gap(g: &InvarianceGaps, o: &ObserverChange, t: f64) -> f64 {
    o.translation_at(t).dot(&g.force) + o.rotation_at(t).dot(&g.couple)
}

fn growth_scale(m: &MixtureState) -> Result<f64, CliError> {
    let rho = &m.aggregates()?.rho;
    let c = m.constituent(0);
    let s = (0..m.grid().node_count())
        .map(|n| rho.get(n) * (c.momentum_growth.get(n).norm() + c.moment_growth.get(n).norm()))
        .fold(0.0, f64::max);
    Ok(s.max(1.0))
}

/// Closed state with extra body forces, stresses and growths that break every balance.
fn unbalanced(m: &MixtureState, seed: u64) -> Result<MixtureState, CliError> {
    let extra = sample_generators(m.grid(), seed ^ 0x5eed, 4);
    Ok(m.clone().modified(|cs| {
        cs[0].body_force_ni = &cs[0].body_force_ni + &extra[0];
        cs[1].body_force_ni = &cs[1].body_force_ni + &extra[1];
        cs[0].momentum_growth = &cs[0].momentum_growth + &extra[2];
        cs[1].moment_growth = &cs[1].moment_growth + &extra[3];
        cs[0].stress = &cs[0].stress + &extra[3].map(|v| cross_tensor(&v));
    })?)
}

pub fn theorem_forward(ctx: &Context) -> Result<SuiteReport, CliError> {
    let tol = ctx.tol();
    let mut r = ctx.report(Suite::TheoremForward);
    let [nc, nf] = ctx.plan.theorem_grids();
    let grids = [ctx.plan.grid(nc), ctx.plan.grid(nf)];
    let states = [ctx.closed(&grids[0])?, ctx.closed(&grids[1])?];
    let bounds = sample_part_bounds(&grids[0], ctx.seed(), PLACEMENTS)?;
    let parts: Vec<[Part; 2]> = bounds
        .iter()
        .map(|(lo, hi)| Ok([Part::from_bounds(&grids[0], *lo, *hi)?, Part::from_bounds(&grids[1], *lo, *hi)?]))
        .collect::<Result<_, CliError>>()?;
    let pivot = centre();
    let observers = sample_observers(ctx.seed(), RANDOM_OBSERVERS, pivot);
    let t = ctx.plan.time;
    let (hc, hf) = (grids[0].spacing(), grids[1].spacing());

    // Rigid power invariance on every part and observer, with the coarse grid setting the constant.
    let per_grid = [0, 1].map(|k| gaps(&states[k], &parts.iter().map(|p| p[k]).collect::<Vec<_>>(), pivot));
    let [gc, gf] = per_grid;
    let (gc, gf) = (gc?, gf?);
    let mut worst_ratio = 0.0_f64;
    let mut worst_gap = 0.0_f64;
    for (i, p) in parts.iter().enumerate() {
        let (vc, vf) = (p[0].volume(&grids[0]), p[1].volume(&grids[1]));
        for a in 0..states[1].len() {
            r.row(ResidualRow::new("force_gap", format!("part {i} constituent {a}"), nf, gf[i][a].force.norm() / vf));
            r.row(ResidualRow::new("couple_gap", format!("part {i} constituent {a}"), nf, gf[i][a].couple.norm() / vf));
            // The projected gap can cancel on the coarse grid, so its tolerance is built
            // from the force and couple gaps separately.
            let tf = tol.richardson.tolerance(gc[i][a].force.norm() / vc, hc, hf);
            let tc = tol.richardson.tolerance(gc[i][a].couple.norm() / vc, hc, hf);
            for o in &observers {
                let ef = observer_gap(&gf[i][a], o, t).abs() / vf;
                let bound = o.translation_at(t).norm() * tf + o.rotation_at(t).norm() * tc;
                worst_ratio = worst_ratio.max(ef / bound);
                worst_gap = worst_gap.max(ef);
            }
        }
    }
    r.push(
        Check::at_most("rigid power invariance gap relative to its Richardson tolerance", worst_ratio, 1.0).with_note(
            format!("{} parts x {} observers, largest gap per volume {worst_gap:e}", parts.len(), observers.len()),
        ),
    );

    // Total power and growth self-equilibration.
    let m = &states[1];
    let scale = growth_scale(m)?;
    let mut total_worst = 0.0_f64;
    for (i, p) in parts.iter().enumerate() {
        let tp = total_power_residual(m, &p[1], pivot)?;
        let v = (tp.force.norm() + tp.couple.norm()) / p[1].volume(&grids[1]);
        total_worst = total_worst.max(v);
        for (axis, f) in ["x", "y", "z"].iter().zip(tp.force.iter()) {
            r.row(ResidualRow::new(format!("total_power_force_{axis}"), format!("part {i}"), nf, *f));
        }
    }
    r.push(Check::at_most("total power force and couple per volume", total_worst, tol.identity * scale));
    let (sm, smu) = growth_self_equilibration(m);
    r.push(Check::at_most("sum of momentum growths", sm.max_norm(), tol.identity * scale));
    r.push(Check::at_most("sum of moment growths", smu.max_norm(), tol.identity * scale));

    // Decomposition of the power change into force and couple gaps, on an unbalanced state.
    let u = unbalanced(&states[0], ctx.seed())?;
    let coarse_parts: Vec<Part> = parts.iter().map(|p| p[0]).collect();
    let gu = gaps(&u, &coarse_parts, pivot)?;
    let base: Vec<Vec<f64>> = coarse_parts
        .iter()
        .map(|p| (0..u.len()).map(|a| Ok(power_constituent(&u, a, p, None)?)).collect::<Result<_, CliError>>())
        .collect::<Result<_, _>>()?;
    let mut worst_identity = 0.0_f64;
    for o in &observers {
        let moved = transform_velocities(&u, o, t)?;
        for (i, p) in coarse_parts.iter().enumerate() {
            for a in 0..u.len() {
                let after = power_constituent(&moved, a, p, None)?;
                let predicted = observer_gap(&gu[i][a], o, t);
                let e = (after - base[i][a] - predicted).abs() / after.abs().max(base[i][a].abs()).max(1.0);
                worst_identity = worst_identity.max(e);
            }
        }
    }
    r.row(ResidualRow::new("power_decomposition", "largest relative defect", nc, worst_identity));
    r.push(Check::at_most("power change equals c . force gap + qdot . couple gap", worst_identity, tol.identity));
    Ok(r.finish())
}

fn relative_max<T: mixlab_core::fields::FieldValue>(f: &mixlab_core::Field<T>, scale: f64) -> f64 {
    f.max_norm() / scale.max(1.0)
}

struct Pointwise {
    mass: [f64; 2],
    momentum: [f64; 2],
    moment: [f64; 2],
    moment_difference_form: [f64; 2],
    mixture_mass: f64,
    growth_mass_sum: f64,
    mixture_momentum: f64,
    mixture_moment: f64,
}

fn pointwise(ctx: &Context, m: &MixtureState) -> Result<Pointwise, CliError> {
    let rho = &m.aggregates()?.rho;
    let mut mass = [0.0; 2];
    let mut momentum = [0.0; 2];
    let mut moment = [0.0; 2];
    let mut difference = [0.0; 2];
    let mut stress_scale = 1.0_f64;
    for a in 0..2 {
        let c = m.constituent(a);
        let div_t = diffops::div(&c.stress).max_norm();
        stress_scale = stress_scale.max(div_t);
        let mscale = c.rho.times(&c.velocity).max_norm() + rho.max_norm() * c.mass_growth.max_norm();
        mass[a] = relative_max(&mass_residual_constituent(m, a)?, mscale);
        momentum[a] = relative_max(&momentum_residual_constituent(m, a)?, div_t);
        let sk = c.stress.max_norm();
        moment[a] = relative_max(&moment_residual_constituent(m, a, ctx.convention)?, sk);
        difference[a] = relative_max(&moment_residual_constituent(m, a, SkewConvention::Difference)?, sk);
    }
    let (cont, csum) = mass_residual_mixture(m)?;
    let total_stress = m.totals()?.stress.max_norm();
    Ok(Pointwise {
        mass,
        momentum,
        moment,
        moment_difference_form: difference,
        mixture_mass: relative_max(&cont, rho.max_norm()),
        growth_mass_sum: csum.max_norm(),
        mixture_momentum: relative_max(&momentum_residual_mixture(m, ctx.diffusive)?, stress_scale),
        mixture_moment: relative_max(&moment_residual_mixture(m), total_stress),
    })
}

/// Smooth body-force perturbation used by the localization check.
fn perturbation(x: Vec3) -> Vec3 {
    Vec3::new(0.2 + 0.3 * x[1].sin(), 0.2 * x[2].cos(), 0.1 + 0.1 * x[0].sin())
}

pub fn theorem_reverse(ctx: &Context) -> Result<SuiteReport, CliError> {
    let tol = ctx.tol();
    let mut r = ctx.report(Suite::TheoremReverse);
    r.convention("diffusive_stress", ctx.diffusive.name());
    let [nc, nf] = ctx.plan.theorem_grids();
    let grids = [ctx.plan.grid(nc), ctx.plan.grid(nf)];
    let states = [ctx.closed(&grids[0])?, ctx.closed(&grids[1])?];
    let (hc, hf) = (grids[0].spacing(), grids[1].spacing());
    let pc = pointwise(ctx, &states[0])?;
    let pf = pointwise(ctx, &states[1])?;

    let mut compare = |name: String, ec: f64, ef: f64| {
        r.row(ResidualRow::new(name.clone(), "max relative", nc, ec));
        r.row(ResidualRow::new(name.clone(), "max relative", nf, ef));
        r.push(tol.richardson.check(name, ec, ef, hc, hf, 1.0));
    };
    for a in 0..2 {
        compare(format!("constituent {a} mass balance"), pc.mass[a], pf.mass[a]);
        compare(format!("constituent {a} momentum balance"), pc.momentum[a], pf.momentum[a]);
        compare(format!("constituent {a} moment balance ({})", ctx.convention.name()), pc.moment[a], pf.moment[a]);
    }
    compare("mixture mass balance".into(), pc.mixture_mass, pf.mixture_mass);
    compare(format!("mixture momentum balance ({})", ctx.diffusive.name()), pc.mixture_momentum, pf.mixture_momentum);
    compare("mixture moment balance".into(), pc.mixture_moment, pf.mixture_moment);
    r.push(Check::at_most("sum of mass growths", pf.growth_mass_sum, tol.identity));
    for a in 0..2 {
        r.row(ResidualRow::new(
            "moment_balance_difference_form",
            format!("constituent {a}"),
            nf,
            pf.moment_difference_form[a],
        ));
    }

    let loc = localization(ctx, &grids[1])?;
    for (hw, e) in &loc {
        r.row(ResidualRow::new("localization", format!("half width {hw:.6}"), nf, *e));
    }
    let first = loc.first().map_or(f64::NAN, |l| l.1);
    let last = loc.last().map_or(f64::NAN, |l| l.1);
    r.push(Check::at_most("localized force gap per volume approaches the pointwise defect", last, tol.localization));
    r.push(Check::flag("localization error shrinks with the part", last < first, format!("{first:e} -> {last:e}")));
    Ok(r.finish())
}

/// Relative distance between `force gap / volume` on shrinking cubes and the pointwise
/// defect `rho_1 delta b` at their common centre, for a closed state with a perturbed body force.
fn localization(ctx: &Context, grid: &Grid) -> Result<Vec<(f64, f64)>, CliError> {
    let t = ctx.plan.time;
    let m = ctx.closed(grid)?.modified(|cs| {
        let extra = mixlab_core::VectorField::from_fn(*grid, perturbation);
        cs[0].body_force_ni = &cs[0].body_force_ni + &extra;
    })?;
    let x0 = centre();
    let target = perturbation(x0) * ctx.scenario.binary.density(0, x0, t).v;
    let o = ObserverChange::galilean(Vec3::x());
    let h = grid.spacing();
    let n = grid.dims()[0];
    let mut out = Vec::new();
    let mut half = n / 4;
    while half >= 1 {
        let hw = half as f64 * h;
        let p = Part::from_bounds(grid, x0 - Vec3::repeat(hw), x0 + Vec3::repeat(hw))?;
        let g = invariance_residual(&m, 0, &p, &o)?;
        out.push((hw, (g.force / p.volume(grid) - target).norm() / target.norm()));
        half /= 2;
    }
    Ok(out)
}
