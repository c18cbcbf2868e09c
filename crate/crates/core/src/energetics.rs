//! Kinetic energy rules, the transport theorem, and the first and second principles.
//!
//! Time derivatives of part integrals use second-order central differences
//! over a [`TimeWindow`] of equally spaced snapshots.

use serde::{Deserialize, Serialize};

use crate::balances::{close_state_via_balances, Manufactured, SkewConvention};
use crate::diffops::{self, contract, skw, sym};
use crate::error::{Error, Result};
use crate::fields::{integrate_surface_with, integrate_volume_with, Grid, Part, ScalarField};
use crate::mixture::MixtureState;

/// Odd number of equally spaced snapshots; derivatives are taken at the middle one.
#[derive(Clone, Copy, Debug)]
pub struct TimeWindow<'a> {
    states: &'a [MixtureState],
    dt: f64,
}

impl<'a> TimeWindow<'a> {
    pub fn new(states: &'a [MixtureState]) -> Result<Self> {
        if states.len() < 3 || states.len().is_multiple_of(2) {
            return Err(Error::MissingTimeData(format!(
                "need an odd number of at least 3 snapshots, got {}",
                states.len()
            )));
        }
        let dt = states[1].time() - states[0].time();
        if !(dt > 0.0) {
            return Err(Error::MissingTimeData("snapshot times must increase".into()));
        }
        for w in states.windows(2) {
            if w[0].grid() != w[1].grid() {
                return Err(Error::GridMismatch);
            }
            if ((w[1].time() - w[0].time()) - dt).abs() > 1e-9 * dt.max(w[1].time().abs()) {
                return Err(Error::MissingTimeData("snapshots must be equally spaced".into()));
            }
        }
        Ok(Self { states, dt })
    }

    pub fn current(&self) -> &'a MixtureState {
        &self.states[self.states.len() / 2]
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.current().time()
    }

    /// Central difference of `f` at the middle snapshot.
    pub fn rate(&self, f: impl Fn(&MixtureState) -> Result<f64>) -> Result<f64> {
        let c = self.states.len() / 2;
        Ok((f(&self.states[c + 1])? - f(&self.states[c - 1])?) / (2.0 * self.dt))
    }
}

/// Closes `man` at `t - dt`, `t` and `t + dt`.
pub fn manufactured_window(
    man: &dyn Manufactured,
    grid: &Grid,
    t: f64,
    dt: f64,
    conv: SkewConvention,
) -> Result<Vec<MixtureState>> {
    [t - dt, t, t + dt].iter().map(|&s| close_state_via_balances(man, grid, s, conv)).collect()
}

/// Orientation of the boundary term in the transport theorem for a fixed part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxSign {
    /// `d/dt int K = ... + int_d K (x'.n)`, with the opposite sign in the kinetic energy rule.
    Reversed,
    /// `d/dt int K = ... - int_d K (x'.n)`: outflow lowers the content of a fixed part.
    Standard,
}

impl FluxSign {
    pub const ALL: [FluxSign; 2] = [FluxSign::Reversed, FluxSign::Standard];

    fn sign(self) -> f64 {
        match self {
            FluxSign::Reversed => 1.0,
            FluxSign::Standard => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FluxSign::Reversed => "reversed",
            FluxSign::Standard => "standard",
        }
    }
}

/// Terms of the transport theorem for `int_p 1/2 rho_a |x'_a|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportTerms {
    /// `d/dt int 1/2 rho_a |x'|^2`
    pub rate: f64,
    /// `int rho_a x'' . x'`
    pub inertial: f64,
    /// `1/2 int_d rho_a |x'|^2 (x'.n)`
    pub flux: f64,
    /// `1/2 int rho c_a |x'|^2`
    pub growth: f64,
}

impl TransportTerms {
    pub fn residual(&self, sign: FluxSign) -> f64 {
        self.rate - self.inertial - sign.sign() * self.flux - self.growth
    }

    /// Largest term magnitude, for relative tolerances.
    pub fn scale(&self) -> f64 {
        self.rate.abs().max(self.inertial.abs()).max(self.flux.abs()).max(self.growth.abs())
    }

    /// The orientation with the smaller residual.
    pub fn closing_sign(&self) -> FluxSign {
        if self.residual(FluxSign::Standard).abs() <= self.residual(FluxSign::Reversed).abs() {
            FluxSign::Standard
        } else {
            FluxSign::Reversed
        }
    }
}

fn check_alpha(m: &MixtureState, alpha: usize) -> Result<()> {
    if alpha >= m.len() {
        return Err(Error::InvalidConfig(format!("constituent {alpha} out of range")));
    }
    Ok(())
}

fn check_part(m: &MixtureState, part: &Part) -> Result<()> {
    Part::new(m.grid(), part.lo(), part.hi()).map(|_| ())
}

fn kinetic_content(m: &MixtureState, alpha: usize, part: &Part) -> Result<f64> {
    let c = m.constituent(alpha);
    Ok(integrate_volume_with(m.grid(), part, |n| 0.5 * c.rho.get(n) * c.velocity.get(n).norm_squared()))
}

pub fn transport_theorem_terms(w: &TimeWindow, alpha: usize, part: &Part) -> Result<TransportTerms> {
    let m = w.current();
    check_alpha(m, alpha)?;
    check_part(m, part)?;
    let g = *m.grid();
    let c = m.constituent(alpha);
    let rho = m.aggregates()?.rho.clone();
    let acc = c.acceleration()?;
    let rate = w.rate(|s| kinetic_content(s, alpha, part))?;
    let inertial = integrate_volume_with(&g, part, |n| c.rho.get(n) * acc.get(n).dot(&c.velocity.get(n)));
    let flux = integrate_surface_with(&g, part, |n, nrm| {
        let v = c.velocity.get(n);
        0.5 * c.rho.get(n) * v.norm_squared() * v.dot(&nrm)
    });
    let growth =
        integrate_volume_with(&g, part, |n| 0.5 * rho.get(n) * c.mass_growth.get(n) * c.velocity.get(n).norm_squared());
    Ok(TransportTerms { rate, inertial, flux, growth })
}

/// `d/dt int K - int rho_a x''.x' - s 1/2 int_d rho_a |x'|^2 (x'.n) - 1/2 int rho c_a |x'|^2`.
pub fn transport_theorem_residual(w: &TimeWindow, alpha: usize, part: &Part, sign: FluxSign) -> Result<f64> {
    Ok(transport_theorem_terms(w, alpha, part)?.residual(sign))
}

/// Kinetic energy rule of one constituent with the boundary term oriented
/// opposite to the transport theorem under `sign`:
/// `d/dt int K - s 1/2 int_d rho_a |x'|^2 (x'.n) + 1/2 int rho c_a |x'|^2 + int rho_a b_in . x'`.
pub fn kinetic_energy_residual_constituent(w: &TimeWindow, alpha: usize, part: &Part, sign: FluxSign) -> Result<f64> {
    let t = transport_theorem_terms(w, alpha, part)?;
    let m = w.current();
    let c = m.constituent(alpha);
    let power_in =
        integrate_volume_with(m.grid(), part, |n| c.rho.get(n) * c.body_force_in.get(n).dot(&c.velocity.get(n)));
    Ok(t.rate - sign.sign() * t.flux + t.growth + power_in)
}

/// `int (rho_a x'' + rho c_a x' + rho_a b_in) . x'`, the rule after eliminating the rate.
pub fn kinetic_energy_rearranged(m: &MixtureState, alpha: usize, part: &Part) -> Result<f64> {
    check_alpha(m, alpha)?;
    check_part(m, part)?;
    let c = m.constituent(alpha);
    let rho = &m.aggregates()?.rho;
    let acc = c.acceleration()?;
    Ok(integrate_volume_with(m.grid(), part, |n| {
        let v = c.velocity.get(n);
        (acc.get(n) * c.rho.get(n) + v * (rho.get(n) * c.mass_growth.get(n)) + c.body_force_in.get(n) * c.rho.get(n))
            .dot(&v)
    }))
}

/// Kinetic energy balance of the whole mixture on a fixed part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureKineticEnergy {
    pub residual: f64,
    /// `int_d sum c_a (u_a . v)(u_a . n)`
    pub flux_term: f64,
    /// `int sum c_a u_a (x) u_a : grad v`
    pub production_term: f64,
    /// `d/dt int 1/2 rho |v|^2`
    pub rate: f64,
    /// `int rho b_in . v`
    pub inertial_power: f64,
    /// `int_d 1/2 rho |v|^2 (v . n)`, the convective flux of a fixed part; not part of the residual.
    pub convective_flux: f64,
    /// `int_d sum rho_a (u_a . v)(u_a . n)`
    pub density_flux: f64,
    /// `int sum rho_a u_a (x) u_a : grad v`
    pub density_production: f64,
}

impl MixtureKineticEnergy {
    pub fn scale(&self) -> f64 {
        [self.flux_term, self.production_term, self.rate, self.inertial_power, self.convective_flux]
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Fixed-part balance with density-weighted diffusive terms and the convective flux;
    /// vanishes up to discretisation error on any state satisfying the mass and momentum balances.
    pub fn balanced_residual(&self) -> f64 {
        self.rate + self.density_flux - self.density_production + self.inertial_power + self.convective_flux
    }

    pub fn balanced_scale(&self) -> f64 {
        [self.density_flux, self.density_production, self.rate, self.inertial_power, self.convective_flux]
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

fn mixture_kinetic_content(m: &MixtureState, part: &Part) -> Result<f64> {
    let a = m.aggregates()?;
    Ok(integrate_volume_with(m.grid(), part, |n| 0.5 * a.rho.get(n) * a.velocity.get(n).norm_squared()))
}

pub fn kinetic_energy_residual_mixture(w: &TimeWindow, part: &Part) -> Result<MixtureKineticEnergy> {
    let m = w.current();
    check_part(m, part)?;
    let g = *m.grid();
    let agg = m.aggregates()?;
    let totals = m.totals()?;
    let grad_v = diffops::grad(&agg.velocity);
    let rate = w.rate(|s| mixture_kinetic_content(s, part))?;
    let weight = |a: usize, n: usize, by_density: bool| {
        if by_density {
            m.constituent(a).rho.get(n)
        } else {
            agg.concentrations[a].get(n)
        }
    };
    let flux = |by_density: bool| {
        integrate_surface_with(&g, part, |n, nrm| {
            let v = agg.velocity.get(n);
            (0..m.len())
                .map(|a| {
                    let u = agg.diffusion[a].get(n);
                    weight(a, n, by_density) * u.dot(&v) * u.dot(&nrm)
                })
                .sum::<f64>()
        })
    };
    let production = |by_density: bool| {
        integrate_volume_with(&g, part, |n| {
            let gv = grad_v.get(n);
            (0..m.len())
                .map(|a| {
                    let u = agg.diffusion[a].get(n);
                    weight(a, n, by_density) * u.dot(&(gv * u))
                })
                .sum::<f64>()
        })
    };
    let flux_term = flux(false);
    let production_term = production(false);
    let inertial_power =
        integrate_volume_with(&g, part, |n| agg.rho.get(n) * totals.body_force_in.get(n).dot(&agg.velocity.get(n)));
    let convective_flux = integrate_surface_with(&g, part, |n, nrm| {
        let v = agg.velocity.get(n);
        0.5 * agg.rho.get(n) * v.norm_squared() * v.dot(&nrm)
    });
    Ok(MixtureKineticEnergy {
        residual: rate + flux_term + production_term + inertial_power,
        flux_term,
        production_term,
        rate,
        inertial_power,
        convective_flux,
        density_flux: flux(true),
        density_production: production(true),
    })
}

/// Form of the energy supply from the other constituents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupplyForm {
    /// Growth of internal energy only; stress power through `sym grad x'`.
    Simple,
    /// Adds the power of the momentum growth and the kinetic energy carried by
    /// mass growth; stress power through the full velocity gradient.
    Truesdell,
}

impl SupplyForm {
    pub fn name(self) -> &'static str {
        match self {
            SupplyForm::Simple => "simple",
            SupplyForm::Truesdell => "truesdell",
        }
    }
}

/// Pointwise energy residual.
///
/// Simple: `rho_a eps' + rho c_a eps - rho e_a - T_a : sym grad x' - div q_a - rho_a r_a`.
/// Truesdell adds `rho m_a . x' - T_a : skw grad x' - 1/2 rho c_a |x'|^2`.
pub fn energy_residual_constituent(m: &MixtureState, alpha: usize, form: SupplyForm) -> Result<ScalarField> {
    check_alpha(m, alpha)?;
    let c = m.constituent(alpha);
    let eps_rate =
        c.rates.internal_energy.as_ref().ok_or_else(|| Error::MissingTimeData("internal energy rate".into()))?;
    let rho = &m.aggregates()?.rho;
    let grad_eps = diffops::grad(&c.internal_energy);
    let grad_v = diffops::grad(&c.velocity);
    let div_q = diffops::div(&c.heat_flux);
    let out = ScalarField::from_index_fn(*m.grid(), |n| {
        let v = c.velocity.get(n);
        let r = rho.get(n);
        let gv = grad_v.get(n);
        let t = c.stress.get(n);
        let follow = eps_rate.get(n) + grad_eps.get(n).dot(&v);
        let simple = c.rho.get(n) * follow + r * c.mass_growth.get(n) * c.internal_energy.get(n)
            - r * c.energy_growth.get(n)
            - contract(&t, &sym(&gv))
            - div_q.get(n)
            - c.rho.get(n) * c.heat_source.get(n);
        match form {
            SupplyForm::Simple => simple,
            SupplyForm::Truesdell => {
                simple + r * c.momentum_growth.get(n).dot(&v)
                    - contract(&t, &skw(&gv))
                    - 0.5 * r * c.mass_growth.get(n) * v.norm_squared()
            }
        }
    });
    Ok(out.with_unit("W/m^3"))
}

/// `sum_a e_a`, zero when the energy growths are balanced.
pub fn energy_growth_sum(m: &MixtureState) -> ScalarField {
    m.constituents().iter().fold(ScalarField::zeros(*m.grid()), |acc, c| &acc + &c.energy_growth)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyMargin {
    /// `d/dt int rho_a eta_a - int rho eta_growth_a - int_d h_a . n + int rho_a s_a`
    pub margin: f64,
    pub scale: f64,
}

impl EntropyMargin {
    pub fn violated(&self, tol: f64) -> bool {
        self.margin < -tol
    }
}

fn entropy_content(m: &MixtureState, alpha: usize, part: &Part) -> Result<f64> {
    let c = m.constituent(alpha);
    Ok(integrate_volume_with(m.grid(), part, |n| c.rho.get(n) * c.entropy.get(n)))
}

pub fn entropy_margin(w: &TimeWindow, alpha: usize, part: &Part) -> Result<EntropyMargin> {
    let m = w.current();
    check_alpha(m, alpha)?;
    check_part(m, part)?;
    let g = *m.grid();
    let c = m.constituent(alpha);
    let rho = &m.aggregates()?.rho;
    let rate = w.rate(|s| entropy_content(s, alpha, part))?;
    let growth = integrate_volume_with(&g, part, |n| rho.get(n) * c.entropy_growth.get(n));
    let flux = integrate_surface_with(&g, part, |n, nrm| c.entropy_flux.get(n).dot(&nrm));
    let source = integrate_volume_with(&g, part, |n| c.rho.get(n) * c.entropy_source.get(n));
    let scale = rate.abs().max(growth.abs()).max(flux.abs()).max(source.abs());
    Ok(EntropyMargin { margin: rate - growth - flux + source, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balances::BinaryScenario;
    use crate::fields::{Mat3, TensorField, Vec3, VectorField};
    use crate::mixture::ConstituentState;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::periodic_cube(n, 2.0 * PI).unwrap()
    }

    fn repeat(m: &MixtureState, dt: f64) -> Vec<MixtureState> {
        (-1..=1).map(|k| MixtureState::new(m.constituents().to_vec(), m.time() + k as f64 * dt).unwrap()).collect()
    }

    fn static_state(g: Grid) -> MixtureState {
        let mut c = ConstituentState::at_rest(ScalarField::from_fn(g, |x| 1.0 + 0.2 * x[0].sin()));
        c.stress = TensorField::from_fn(g, |x| Mat3::identity() * x[1].cos());
        c.internal_energy = ScalarField::constant(g, 3.0);
        MixtureState::new(vec![c.clone().steady(), c.steady()], 0.0).unwrap()
    }

    #[test]
    fn window_requires_three_equal_steps() {
        let g = grid(8);
        let m = static_state(g);
        let states = repeat(&m, 0.1);
        assert!(TimeWindow::new(&states[..2]).is_err());
        assert!(TimeWindow::new(&states).is_ok());
        let mut uneven = states.clone();
        uneven[2] = MixtureState::new(m.constituents().to_vec(), 0.5).unwrap();
        assert!(matches!(TimeWindow::new(&uneven), Err(Error::MissingTimeData(_))));
    }

    #[test]
    fn static_state_is_exact() {
        let g = grid(8);
        let states = repeat(&static_state(g), 0.1);
        let w = TimeWindow::new(&states).unwrap();
        let p = Part::new(&g, [2; 3], [6; 3]).unwrap();
        for s in FluxSign::ALL {
            assert_eq!(transport_theorem_residual(&w, 0, &p, s).unwrap(), 0.0);
            assert_eq!(kinetic_energy_residual_constituent(&w, 1, &p, s).unwrap(), 0.0);
        }
        let mix = kinetic_energy_residual_mixture(&w, &p).unwrap();
        assert_eq!((mix.residual, mix.flux_term, mix.production_term), (0.0, 0.0, 0.0));
        let e = energy_residual_constituent(w.current(), 0, SupplyForm::Simple).unwrap();
        assert_eq!(e.max_norm(), 0.0);
        assert_eq!(entropy_margin(&w, 0, &p).unwrap().margin, 0.0);
    }

    #[test]
    fn uniform_translation_has_cancelling_fluxes() {
        let g = grid(8);
        let mut c = ConstituentState::at_rest(ScalarField::constant(g, 2.0)).steady();
        c.velocity = VectorField::constant(g, Vec3::new(0.3, -0.1, 0.7));
        let m = MixtureState::new(vec![c], 0.0).unwrap();
        let states = repeat(&m, 0.05);
        let w = TimeWindow::new(&states).unwrap();
        let p = Part::new(&g, [2, 3, 2], [5, 6, 6]).unwrap();
        let t = transport_theorem_terms(&w, 0, &p).unwrap();
        assert_eq!(t.rate, 0.0);
        assert!(t.flux.abs() < 1e-14);
        assert!(t.residual(FluxSign::Standard).abs() < 1e-14);
    }

    #[test]
    fn balanced_mixture_kinetic_energy_converges() {
        let man = BinaryScenario::trig();
        let errs: Vec<f64> = [16, 32]
            .iter()
            .map(|&n| {
                let g = grid(n);
                let states =
                    manufactured_window(&man, &g, 0.3, 1e-3, crate::balances::SkewConvention::SkewPart).unwrap();
                let w = TimeWindow::new(&states).unwrap();
                let p = Part::from_bounds(&g, Vec3::repeat(PI / 2.0), Vec3::repeat(3.0 * PI / 2.0)).unwrap();
                let k = kinetic_energy_residual_mixture(&w, &p).unwrap();
                k.balanced_residual().abs() / k.balanced_scale()
            })
            .collect();
        assert!(errs[1] < 0.3 * errs[0], "{errs:?}");
        assert!(errs[1] < 1e-2, "{errs:?}");
    }

    #[test]
    fn uniform_mixture_velocity_has_no_production() {
        let g = grid(8);
        let mut a = ConstituentState::at_rest(ScalarField::constant(g, 1.0)).steady();
        let mut b = a.clone();
        a.velocity = VectorField::from_fn(g, |x| Vec3::new(1.0 + x[1].sin(), 0.0, 0.0));
        b.velocity = VectorField::from_fn(g, |x| Vec3::new(1.0 - x[1].sin(), 0.0, 0.0));
        let m = MixtureState::new(vec![a, b], 0.0).unwrap();
        let states = repeat(&m, 0.05);
        let w = TimeWindow::new(&states).unwrap();
        let p = Part::new(&g, [2; 3], [6; 3]).unwrap();
        let k = kinetic_energy_residual_mixture(&w, &p).unwrap();
        assert_eq!(k.production_term, 0.0);
    }

    #[test]
    fn reversed_and_standard_orientation_on_manufactured_state() {
        let mut errs = Vec::new();
        let coarse = grid(16);
        let p0 = crate::power::sample_part_bounds(&coarse, 4, 1).unwrap()[0];
        for n in [16, 32] {
            let g = grid(n);
            let states = manufactured_window(&BinaryScenario::trig(), &g, 0.4, 1e-3, SkewConvention::SkewPart).unwrap();
            let w = TimeWindow::new(&states).unwrap();
            let p = Part::from_bounds(&g, p0.0, p0.1).unwrap();
            let t = transport_theorem_terms(&w, 0, &p).unwrap();
            assert_eq!(t.closing_sign(), FluxSign::Standard);
            assert!(t.residual(FluxSign::Reversed).abs() > 10.0 * t.residual(FluxSign::Standard).abs());
            let ke = kinetic_energy_residual_constituent(&w, 1, &p, FluxSign::Standard).unwrap();
            errs.push((t.residual(FluxSign::Standard).abs(), ke.abs()));
        }
        assert!(errs[0].0 / errs[1].0 > 3.2, "{errs:?}");
        assert!(errs[0].1 / errs[1].1 > 3.2, "{errs:?}");
    }

    #[test]
    fn kinetic_rule_matches_rearranged_form() {
        let g = grid(32);
        let states = manufactured_window(&BinaryScenario::trig(), &g, 0.2, 1e-3, SkewConvention::Difference).unwrap();
        let w = TimeWindow::new(&states).unwrap();
        let mut m = w.current().clone();
        m = m
            .modified(|cs| cs[0].body_force_in = VectorField::from_fn(g, |x| Vec3::new(x[2].sin(), 0.5, 0.0)))
            .unwrap();
        let p = Part::new(&g, [4, 6, 8], [20, 18, 26]).unwrap();
        let mut mod_states = states.clone();
        mod_states[1] = m.clone();
        let w2 = TimeWindow::new(&mod_states).unwrap();
        let lhs = kinetic_energy_residual_constituent(&w2, 0, &p, FluxSign::Standard).unwrap();
        let rhs = kinetic_energy_rearranged(&m, 0, &p).unwrap();
        assert!((lhs - rhs).abs() < 2e-3 * rhs.abs().max(1.0), "{lhs} {rhs}");
    }

    #[test]
    fn inertial_force_shift_is_linear() {
        let g = grid(16);
        let states = manufactured_window(&BinaryScenario::trig(), &g, 0.2, 1e-3, SkewConvention::Difference).unwrap();
        let p = Part::new(&g, [3; 3], [11; 3]).unwrap();
        let w = TimeWindow::new(&states).unwrap();
        let base = kinetic_energy_residual_constituent(&w, 0, &p, FluxSign::Standard).unwrap();
        let delta = Vec3::new(0.2, -0.4, 0.1);
        let mut shifted = states.clone();
        shifted[1] = states[1]
            .clone()
            .modified(|cs| cs[0].body_force_in = &cs[0].body_force_in + &VectorField::constant(g, delta))
            .unwrap();
        let w2 = TimeWindow::new(&shifted).unwrap();
        let after = kinetic_energy_residual_constituent(&w2, 0, &p, FluxSign::Standard).unwrap();
        let c = states[1].constituent(0);
        let expect = integrate_volume_with(&g, &p, |n| c.rho.get(n) * delta.dot(&c.velocity.get(n)));
        assert!((after - base - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn co_moving_mixture_reduces_to_single_body() {
        let g = grid(16);
        let mut errs = Vec::new();
        for dt in [2e-2, 1e-2] {
            let states =
                manufactured_window(&BinaryScenario::co_moving_shear(), &g, 0.5, dt, SkewConvention::SkewPart).unwrap();
            let w = TimeWindow::new(&states).unwrap();
            let p = Part::new(&g, [3, 2, 5], [12, 9, 14]).unwrap();
            let k = kinetic_energy_residual_mixture(&w, &p).unwrap();
            assert!(k.flux_term.abs() < 1e-14 && k.production_term.abs() < 1e-14);
            assert!(k.convective_flux.abs() < 1e-12);
            errs.push(k.residual.abs() / k.scale());
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
        assert!(errs[1] < 1e-4);
    }

    #[test]
    fn energy_forms_differ_by_supply_terms() {
        let g = grid(16);
        let m = close_state_via_balances(&BinaryScenario::trig(), &g, 0.3, SkewConvention::SkewPart).unwrap();
        for a in 0..2 {
            let s = energy_residual_constituent(&m, a, SupplyForm::Simple).unwrap();
            let t = energy_residual_constituent(&m, a, SupplyForm::Truesdell).unwrap();
            let c = m.constituent(a);
            let rho = &m.aggregates().unwrap().rho;
            let gv = diffops::grad(&c.velocity);
            for n in 0..g.node_count() {
                let v = c.velocity.get(n);
                let expect = rho.get(n) * c.momentum_growth.get(n).dot(&v)
                    - contract(&c.stress.get(n), &skw(&gv.get(n)))
                    - 0.5 * rho.get(n) * c.mass_growth.get(n) * v.norm_squared();
                assert!((t.get(n) - s.get(n) - expect).abs() < 1e-13 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn closed_energy_residual_converges() {
        let mut errs = Vec::new();
        for n in [16, 32] {
            let m = close_state_via_balances(&BinaryScenario::trig(), &grid(n), 0.3, SkewConvention::SkewPart).unwrap();
            errs.push(energy_residual_constituent(&m, 1, SupplyForm::Simple).unwrap().max_norm());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "{errs:?}");
        let m = close_state_via_balances(&BinaryScenario::trig(), &grid(8), 0.3, SkewConvention::SkewPart).unwrap();
        assert!(energy_growth_sum(&m).max_norm() < 1e-14);
    }

    #[test]
    fn rigid_motion_has_no_simple_stress_power() {
        let g = grid(8);
        let mut c = ConstituentState::at_rest(ScalarField::constant(g, 1.0));
        c.velocity = VectorField::from_fn(g, |x| Vec3::new(0.0, 0.0, 0.5).cross(&x));
        c.stress = TensorField::from_fn(g, |x| Mat3::new(1.0, x[0], 2.0, 0.3, 1.0, 0.0, 0.0, 4.0, x[1]));
        c.rates.internal_energy = Some(ScalarField::zeros(g));
        let m = MixtureState::new(vec![c], 0.0).unwrap();
        let e = energy_residual_constituent(&m, 0, SupplyForm::Simple).unwrap();
        let p = Part::new(&g, [2; 3], [6; 3]).unwrap();
        assert!(p.nodes(&g).all(|n| e.get(n).abs() < 1e-13));
    }

    #[test]
    fn entropy_margin_examples() {
        let g = grid(8);
        let mut c = ConstituentState::at_rest(ScalarField::constant(g, 2.0)).steady();
        c.entropy_source = ScalarField::constant(g, 0.5);
        let m = MixtureState::new(vec![c], 0.0).unwrap();
        let states = repeat(&m, 0.1);
        let w = TimeWindow::new(&states).unwrap();
        let p = Part::new(&g, [2; 3], [5; 3]).unwrap();
        let e = entropy_margin(&w, 0, &p).unwrap();
        assert!((e.margin - 2.0 * 0.5 * p.volume(&g)).abs() < 1e-13);
        assert!(!e.violated(1e-12));

        let mut errs = Vec::new();
        for n in [16, 32] {
            let gr = grid(n);
            let states =
                manufactured_window(&BinaryScenario::trig(), &gr, 0.1, 1e-3, SkewConvention::SkewPart).unwrap();
            let w = TimeWindow::new(&states).unwrap();
            let p = Part::from_bounds(&gr, Vec3::from_element(PI / 4.0), Vec3::from_element(5.0 * PI / 4.0)).unwrap();
            let e = entropy_margin(&w, 1, &p).unwrap();
            errs.push(e.margin.abs() / e.scale);
        }
        // spatial error is below the time-differencing floor here
        assert!(errs.iter().all(|e| *e < 1e-6), "{errs:?}");
    }
}
