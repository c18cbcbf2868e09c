use mixlab_core::balances::{close_state_via_balances, BinaryScenario};
use mixlab_core::diffops::{self, contract, skw};
use mixlab_core::energetics::{
    energy_growth_sum, energy_residual_constituent, entropy_margin, kinetic_energy_rearranged,
    kinetic_energy_residual_constituent, kinetic_energy_residual_mixture, transport_theorem_terms,
};
use mixlab_core::power::sample_part_bounds;
use mixlab_core::report::{Check, ResidualRow, Richardson, SuiteReport};
use mixlab_core::{FluxSign, Grid, MixtureState, Part, SupplyForm, TimeWindow};

use super::Context;
use crate::plan::Suite;
use crate::CliError;

const PLACEMENTS: usize = 5;

/// Windows at spacing `dt` on the coarse and fine grid, and at `dt / 2` on the fine grid.
struct Windows {
    coarse: Vec<MixtureState>,
    fine: Vec<MixtureState>,
    fine_half: Vec<MixtureState>,
}

impl Windows {
    fn build(
        close: impl Fn(&Grid, f64) -> Result<MixtureState, CliError>,
        grids: &[Grid; 2],
        t: f64,
        dt: f64,
    ) -> Result<Self, CliError> {
        let at =
            |g: &Grid, step: f64| [t - step, t, t + step].iter().map(|&s| close(g, s)).collect::<Result<Vec<_>, _>>();
        Ok(Self { coarse: at(&grids[0], dt)?, fine: at(&grids[1], dt)?, fine_half: at(&grids[1], 0.5 * dt)? })
    }

    fn views(&self) -> Result<[TimeWindow<'_>; 3], CliError> {
        Ok([TimeWindow::new(&self.coarse)?, TimeWindow::new(&self.fine)?, TimeWindow::new(&self.fine_half)?])
    }
}

/// Tracks the worst ratio of a fine-grid residual to its tolerance: the Richardson bound
/// in `h` plus twice the time-step error estimated from the `dt` and `dt / 2` windows.
struct Tracker<'a> {
    rich: &'a Richardson,
    hc: f64,
    hf: f64,
    ratio: f64,
    largest: f64,
}

impl<'a> Tracker<'a> {
    fn new(rich: &'a Richardson, hc: f64, hf: f64) -> Self {
        Self { rich, hc, hf, ratio: 0.0, largest: 0.0 }
    }

    /// `values` are relative residuals: coarse at `dt`, fine at `dt`, fine at `dt / 2`.
    fn add(&mut self, [ec, ef, eh]: [f64; 3]) {
        let time = (ef - eh).abs() * 4.0 / 3.0;
        let tol = self.rich.tolerance(ec.abs(), self.hc, self.hf) + 2.0 * time;
        self.ratio = self.ratio.max(ef.abs() / tol);
        self.largest = self.largest.max(ef.abs());
    }

    fn check(&self, name: &str) -> Check {
        Check::at_most(name, self.ratio, 1.0)
            .with_note(format!("ratio to tolerance; largest relative residual {:e}", self.largest))
    }
}

fn rel(v: f64, scale: f64) -> f64 {
    v / scale.max(1e-300)
}

pub fn energetics(ctx: &Context) -> Result<SuiteReport, CliError> {
    let tol = ctx.tol();
    let mut r = ctx.report(Suite::Energetics);
    let [nc, nf] = ctx.plan.theorem_grids();
    let grids = [ctx.plan.grid(nc), ctx.plan.grid(nf)];
    let (hc, hf) = (grids[0].spacing(), grids[1].spacing());
    let (t, dt) = (ctx.plan.time, ctx.plan.time_step);
    let bounds = sample_part_bounds(&grids[0], ctx.seed(), PLACEMENTS)?;
    let parts: Vec<[Part; 2]> = bounds
        .iter()
        .map(|(lo, hi)| Ok([Part::from_bounds(&grids[0], *lo, *hi)?, Part::from_bounds(&grids[1], *lo, *hi)?]))
        .collect::<Result<_, CliError>>()?;
    let pick = |p: &[Part; 2], k: usize| if k == 0 { p[0] } else { p[1] };

    let win = Windows::build(|g, s| ctx.closed_at(g, s), &grids, t, dt)?;
    let views = win.views()?;

    // Orientation of the boundary term, decided on the first part.
    let first = transport_theorem_terms(&views[1], 0, &parts[0][1])?;
    let sign = first.closing_sign();
    r.convention("flux_orientation", sign.name());
    for s in FluxSign::ALL {
        r.row(ResidualRow::new("transport_orientation", s.name(), nf, rel(first.residual(s).abs(), first.scale())));
    }

    let mut transport = Tracker::new(&tol.richardson, hc, hf);
    let mut kinetic = Tracker::new(&tol.richardson, hc, hf);
    let mut rearranged = Tracker::new(&tol.richardson, hc, hf);
    let mut entropy = Tracker::new(&tol.richardson, hc, hf);
    let mut entropy_violated = false;
    for (i, p) in parts.iter().enumerate() {
        for a in 0..2 {
            let terms = [0, 1, 2].map(|k| transport_theorem_terms(&views[k], a, &pick(p, k)));
            let [x0, x1, x2] = terms;
            let terms = [x0?, x1?, x2?];
            transport.add([0, 1, 2].map(|k| rel(terms[k].residual(sign), terms[k].scale())));
            let ke = [0, 1, 2].map(|k| kinetic_energy_residual_constituent(&views[k], a, &pick(p, k), sign));
            let [x0, x1, x2] = ke;
            let ke = [x0?, x1?, x2?];
            kinetic.add([0, 1, 2].map(|k| rel(ke[k], terms[k].scale())));
            let ra = [
                kinetic_energy_rearranged(views[0].current(), a, &p[0])?,
                kinetic_energy_rearranged(views[1].current(), a, &p[1])?,
            ];
            let ra = [rel(ra[0], terms[0].scale()), rel(ra[1], terms[1].scale())];
            rearranged.add([ra[0], ra[1], ra[1]]);
            r.row(ResidualRow::new(
                "transport_residual_reversed",
                format!("part {i} constituent {a}"),
                nf,
                rel(terms[1].residual(FluxSign::Reversed), terms[1].scale()),
            ));
            r.row(ResidualRow::new(
                "kinetic_energy_rule",
                format!("part {i} constituent {a}"),
                nf,
                rel(ke[1], terms[1].scale()),
            ));

            let em = [0, 1, 2].map(|k| entropy_margin(&views[k], a, &pick(p, k)));
            let [x0, x1, x2] = em;
            let em = [x0?, x1?, x2?];
            entropy.add([0, 1, 2].map(|k| rel(em[k].margin, em[k].scale)));
            entropy_violated |= em[1].violated(tol.entropy_margin * em[1].scale.max(1.0));
        }
    }
    r.push(transport.check("transport theorem on fixed parts"));
    r.push(kinetic.check("constituent kinetic energy rule"));
    r.push(rearranged.check("kinetic energy rule after eliminating the rate"));
    r.push(entropy.check("reversible entropy margin"));
    r.push(Check::flag("entropy inequality holds", !entropy_violated, "margin above -tolerance on every part"));

    // Mixture kinetic energy on the scenario: the density-weighted form with the
    // convective flux closes; the concentration-weighted form is reported only.
    let mut mixture = Tracker::new(&tol.richardson, hc, hf);
    for (i, p) in parts.iter().enumerate() {
        let k = [0, 1, 2].map(|k| kinetic_energy_residual_mixture(&views[k], &pick(p, k)));
        let [x0, x1, x2] = k;
        let k = [x0?, x1?, x2?];
        mixture.add([0, 1, 2].map(|j| rel(k[j].balanced_residual(), k[j].balanced_scale())));
        let label = format!("part {i}");
        r.row(ResidualRow::new(
            "mixture_kinetic_concentration_form",
            label.clone(),
            nf,
            rel(k[1].residual, k[1].scale()),
        ));
        r.row(ResidualRow::new("mixture_kinetic_flux", label.clone(), nf, k[1].flux_term));
        r.row(ResidualRow::new("mixture_kinetic_production", label.clone(), nf, k[1].production_term));
        r.row(ResidualRow::new("mixture_kinetic_convective", label, nf, k[1].convective_flux));
    }
    r.push(mixture.check("mixture kinetic energy with density-weighted diffusion terms"));

    // Co-moving constituents: the mixture statement reduces to the single-body theorem.
    let shear = BinaryScenario::co_moving_shear();
    let cwin = Windows::build(|g, s| Ok(close_state_via_balances(&shear, g, s, ctx.convention)?), &grids, t, dt)?;
    let cviews = cwin.views()?;
    let mut co_moving = Tracker::new(&tol.richardson, hc, hf);
    let mut degenerate = 0.0_f64;
    for p in &parts {
        let k = [0, 1, 2].map(|k| kinetic_energy_residual_mixture(&cviews[k], &pick(p, k)));
        let [x0, x1, x2] = k;
        let k = [x0?, x1?, x2?];
        co_moving.add([0, 1, 2].map(|j| rel(k[j].residual, k[j].scale())));
        degenerate = degenerate.max(k[1].flux_term.abs().max(k[1].production_term.abs()) / k[1].scale().max(1.0));
    }
    r.push(co_moving.check("co-moving mixture kinetic energy"));
    r.push(Check::at_most("co-moving flux and production terms vanish", degenerate, tol.identity));

    // Pointwise energy balance: closure, and the difference between the two supply forms.
    let m = views[1].current();
    let mc = views[0].current();
    let mut form_gap = 0.0_f64;
    for a in 0..2 {
        let simple = [
            energy_residual_constituent(mc, a, SupplyForm::Simple)?,
            energy_residual_constituent(m, a, SupplyForm::Simple)?,
        ];
        let ec = rel(simple[0].max_norm(), energy_scale(mc, a)?);
        let ef = rel(simple[1].max_norm(), energy_scale(m, a)?);
        r.row(ResidualRow::new("energy_balance", format!("constituent {a}"), nc, ec));
        r.row(ResidualRow::new("energy_balance", format!("constituent {a}"), nf, ef));
        r.push(tol.richardson.check(format!("constituent {a} energy balance"), ec, ef, hc, hf, 1.0));

        let truesdell = energy_residual_constituent(m, a, SupplyForm::Truesdell)?;
        let expected = supply_difference(m, a)?;
        let ex_scale = expected.max_norm().max(1.0);
        let gap = (0..m.grid().node_count())
            .map(|n| (truesdell.get(n) - simple[1].get(n) - expected.get(n)).abs())
            .fold(0.0, f64::max);
        form_gap = form_gap.max(gap / ex_scale);
    }
    r.push(Check::at_most(
        "supply forms differ by momentum power, skew stress power and kinetic growth",
        form_gap,
        tol.energy_form,
    ));
    r.push(Check::at_most("sum of energy growths", energy_growth_sum(m).max_norm(), tol.energy_growth_sum));
    Ok(r.finish())
}

fn energy_scale(m: &MixtureState, a: usize) -> Result<f64, CliError> {
    let c = m.constituent(a);
    let g = diffops::grad(&c.velocity);
    let stress_power =
        (0..m.grid().node_count()).map(|n| contract(&c.stress.get(n), &g.get(n)).abs()).fold(0.0, f64::max);
    Ok(stress_power.max(diffops::div(&c.heat_flux).max_norm()).max(1.0))
}

/// `rho m_a . x' - T_a : skw grad x' - 1/2 rho c_a |x'|^2`.
fn supply_difference(m: &MixtureState, a: usize) -> Result<mixlab_core::ScalarField, CliError> {
    let c = m.constituent(a);
    let rho = &m.aggregates()?.rho;
    let gv = diffops::grad(&c.velocity);
    Ok(mixlab_core::ScalarField::from_index_fn(*m.grid(), |n| {
        let v = c.velocity.get(n);
        rho.get(n) * c.momentum_growth.get(n).dot(&v)
            - contract(&c.stress.get(n), &skw(&gv.get(n)))
            - 0.5 * rho.get(n) * c.mass_growth.get(n) * v.norm_squared()
    }))
}
