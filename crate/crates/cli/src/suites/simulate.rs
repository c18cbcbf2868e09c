use mixlab_core::analytic::{AxisFactor, Term, TimeFactor};
use mixlab_core::balances::{mass_residual_constituent, momentum_residual_constituent};
use mixlab_core::energetics::energy_growth_sum;
use mixlab_core::report::{Check, ResidualRow, SuiteReport};
use mixlab_core::simulate::{drag_relaxation_exact, drag_relaxation_oracle, plan_steps, run, SimState};
use mixlab_core::{AnalyticFieldSpec, ScenarioConfig, VectorSpec};

use super::Context;
use crate::plan::Suite;
use crate::CliError;

const CONSERVATION_STEPS: usize = 1000;
const E_FOLDINGS: f64 = 5.0;

fn unforced(cfg: &ScenarioConfig) -> ScenarioConfig {
    let mut c = cfg.clone();
    for k in &mut c.constituents {
        k.body_force = VectorSpec::default();
    }
    c
}

/// `cfg` with a time-dependent force on the first constituent and a fixed step.
fn forced(cfg: &ScenarioConfig, dt: f64, duration: f64) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.constituents[0].body_force = VectorSpec::new(
        AnalyticFieldSpec::from_terms(vec![Term::new(0.5).time(TimeFactor::Cos { omega: 3.0, phase: 0.0 })]),
        AnalyticFieldSpec::from_terms(vec![Term::new(0.3).axis(0, AxisFactor::Cos { k: 1.0, phase: 0.0 })]),
        AnalyticFieldSpec::zero(),
    );
    c.dt = Some(dt);
    c.duration = duration;
    c.output_every = usize::MAX;
    c
}

/// Uniform counter-streaming constituents coupled by drag only.
fn drag_only(cfg: &ScenarioConfig, drag: f64, rho: [f64; 2], v: [f64; 2]) -> ScenarioConfig {
    let mut c = cfg.clone();
    for (a, k) in c.constituents.iter_mut().enumerate() {
        k.density = AnalyticFieldSpec::constant(rho[a]);
        k.velocity = VectorSpec::constant(mixlab_core::Vec3::new(v[a], 0.0, 0.0));
        k.body_force = VectorSpec::default();
    }
    c.drag = drag;
    c.reaction_rate = 0.0;
    c.dt = None;
    c.duration = E_FOLDINGS / drag;
    c.output_every = usize::MAX;
    c
}

pub fn simulate(ctx: &Context, cfg: &ScenarioConfig) -> Result<SuiteReport, CliError> {
    let tol = ctx.tol();
    let mut r = SuiteReport::new(Suite::Simulate.name(), ctx.seed());
    r.convention("integrator", "rk4");
    let n = cfg.grid.n;

    // Mass and momentum without external forces over a fixed number of steps.
    let mut free = unforced(cfg);
    let (dt, _) = plan_steps(&SimState::initial(&free)?, &free)?;
    free.dt = Some(dt);
    free.duration = dt * CONSERVATION_STEPS as f64;
    free.output_every = CONSERVATION_STEPS / 10;
    let tr = run(&free)?;
    let rep = &tr.report;
    r.row(ResidualRow::new("steps", "conservation run", n, rep.steps as f64));
    r.row(ResidualRow::new("constituent_mass_drift", "first", n, rep.mass_drift[0]));
    r.row(ResidualRow::new("constituent_mass_drift", "second", n, rep.mass_drift[1]));
    r.push(Check::at_most("mixture mass drift", rep.mixture_mass_drift, tol.mass_drift));
    r.push(Check::at_most("mixture momentum drift without forces", rep.momentum_drift, tol.momentum_drift));
    r.push(Check::at_most("net mass exchange", rep.exchange_imbalance, tol.identity));
    r.push(Check::at_most("sum of momentum growths", rep.momentum_growth_sum, tol.identity));
    r.push(Check::at_most("sum of mass growths", rep.mass_growth_sum, tol.identity));
    r.push(Check::at_most("sum of energy growths", rep.energy_growth_sum, tol.energy_growth_sum));
    let snap_sum = tr.snapshots.iter().map(|m| energy_growth_sum(m).max_norm()).fold(0.0, f64::max);
    r.push(Check::at_most("sum of energy growths on snapshots", snap_sum, tol.energy_growth_sum));

    let mid = tr.time_differenced(tr.snapshots.len() / 2)?;
    for a in 0..2 {
        let scale = mid.constituent(a).rho.max_norm().max(1.0);
        r.row(ResidualRow::new(
            "snapshot_mass_balance",
            format!("constituent {a}"),
            n,
            mass_residual_constituent(&mid, a)?.max_norm() / scale,
        ));
        r.row(ResidualRow::new(
            "snapshot_momentum_balance",
            format!("constituent {a}"),
            n,
            momentum_residual_constituent(&mid, a)?.max_norm() / scale,
        ));
    }

    // Drag relaxation of uniform constituents against the exact exponential and a fine ODE solve.
    let (drag, rho, v0) = (if cfg.drag > 0.0 { cfg.drag } else { 1.0 }, [1.0, 0.6], [0.4, -0.3]);
    let dr = run(&drag_only(cfg, drag, rho, v0))?;
    let t_end = dr.final_state.time;
    let u = [0, 1].map(|a| dr.final_state.velocity(a).get(0)[0]);
    let exact = drag_relaxation_exact(drag, v0[0] - v0[1], t_end);
    let oracle = drag_relaxation_oracle(drag, rho, v0, t_end, 100 * dr.report.steps);
    let rel_exact = ((u[0] - u[1]) - exact).abs() / exact.abs();
    let rel_oracle = ((u[0] - u[1]) - (oracle[0] - oracle[1])).abs() / exact.abs();
    r.row(ResidualRow::new("drag_relaxation", "exact", n, rel_exact));
    r.row(ResidualRow::new("drag_relaxation", "fine ode", n, rel_oracle));
    r.push(Check::at_most("drag relaxation against the exponential", rel_exact, tol.drag_relaxation));
    r.push(Check::at_most("drag relaxation against a fine ODE solve", rel_oracle, tol.drag_relaxation));

    // Forced momentum budget: halving the step must cut the drift by the second-order factor.
    let base = (0.5 * dt).min(0.02);
    let duration = 50.0 * base;
    let coarse = run(&forced(&free, base, duration))?.report.momentum_drift;
    let fine = run(&forced(&free, 0.5 * base, duration))?.report.momentum_drift;
    r.row(ResidualRow::new("forced_momentum_drift", format!("dt {base:e}"), n, coarse));
    r.row(ResidualRow::new("forced_momentum_drift", format!("dt {:e}", 0.5 * base), n, fine));
    r.push(Check::at_least("forced momentum drift ratio under step halving", coarse / fine, tol.halving_ratio));
    Ok(r.finish())
}
