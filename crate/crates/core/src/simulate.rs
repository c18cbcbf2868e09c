//! Explicit binary-mixture integrator on a periodic grid.
//!
//! Mass and momentum are advanced in flux form with central differences and
//! classical RK4:
//!
//! `d_t rho_a = -div(rho_a x'_a) + rho c_a`,
//! `d_t (rho_a x'_a) = -div(rho_a x'_a (x) x'_a) - grad p_a + rho_a b_a + rho m_a`.
//!
//! The momentum carried by the mass exchange, `rho c_a x'_a`, appears in the
//! flux-form mass equation and in the constituent momentum balance with
//! opposite signs, so it drops out of the momentum update.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::{AnalyticFieldSpec, VectorSpec};
use crate::diffops;
use crate::error::{Error, Result};
use crate::fields::{Grid, Mat3, ScalarField, TensorField, Vec3, VectorField};
use crate::mixture::{ConstituentState, MixtureState};

/// Ratio `dt max(|x'| + c_s) / h` above which a step is refused.
pub const STABILITY_CFL: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Nodes per axis.
    pub n: usize,
    /// Edge of the periodic cube.
    pub length: f64,
}

/// `p = k rho^gamma`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureLaw {
    pub k: f64,
    pub gamma: f64,
}

impl PressureLaw {
    pub fn pressure(&self, rho: f64) -> f64 {
        self.k * rho.powf(self.gamma)
    }

    pub fn sound_speed(&self, rho: f64) -> f64 {
        (self.k * self.gamma * rho.powf(self.gamma - 1.0)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstituentConfig {
    pub density: AnalyticFieldSpec,
    #[serde(default)]
    pub velocity: VectorSpec,
    pub pressure: PressureLaw,
    /// External (non-inertial) body force per unit mass; may depend on time.
    #[serde(default)]
    pub body_force: VectorSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub constituents: [ConstituentConfig; 2],
    /// `rho m_1 = -drag rho_1 rho_2 (x'_1 - x'_2) / rho`
    #[serde(default)]
    pub drag: f64,
    /// `rho c_1 = reaction_rate (rho_2 - rho_1)`
    #[serde(default)]
    pub reaction_rate: f64,
    pub cfl: f64,
    /// Fixed step; must satisfy the CFL bound at the initial state.
    #[serde(default)]
    pub dt: Option<f64>,
    pub duration: f64,
    /// Steps between stored snapshots.
    pub output_every: usize,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.grid.n < 4 || !(self.grid.length > 0.0 && self.grid.length.is_finite()) {
            return bad("grid needs at least 4 nodes per axis and a positive length");
        }
        for c in &self.constituents {
            if !(c.pressure.k > 0.0 && c.pressure.k.is_finite()) {
                return bad("pressure coefficient k must be positive");
            }
            if !(c.pressure.gamma >= 1.0 && c.pressure.gamma.is_finite()) {
                return bad("pressure exponent gamma must be at least 1");
            }
            c.density.validate()?;
            c.velocity.validate()?;
            c.body_force.validate()?;
        }
        if !(self.drag >= 0.0 && self.drag.is_finite()) {
            return bad("drag must be non-negative");
        }
        if !self.reaction_rate.is_finite() {
            return bad("reaction_rate must be finite");
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return bad("cfl must lie in (0, 0.5]");
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("dt must be positive");
            }
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        if self.output_every == 0 {
            return bad("output_every must be at least 1");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::periodic_cube(self.grid.n, self.grid.length)
    }

    /// Smooth demonstration scenario with drag, reaction and pressure.
    pub fn demo() -> Self {
        use crate::analytic::{AxisFactor, Term};
        let wave = |c: f64, axis: usize| Term::new(c).axis(axis, AxisFactor::Sin { k: 1.0, phase: 0.0 });
        let density = |s: f64| AnalyticFieldSpec::from_terms(vec![Term::new(0.9 + 0.1 * s), wave(0.1 * s, 0)]);
        let vel = |s: f64| {
            VectorSpec::new(
                AnalyticFieldSpec::from_terms(vec![Term::new(0.2 * s), wave(0.05, 1)]),
                AnalyticFieldSpec::zero(),
                AnalyticFieldSpec::from_terms(vec![wave(0.05 * s, 0)]),
            )
        };
        let c = |s: f64, k: f64| ConstituentConfig {
            density: density(s),
            velocity: vel(s),
            pressure: PressureLaw { k, gamma: 1.4 },
            body_force: VectorSpec::default(),
        };
        Self {
            grid: GridSpec { n: 16, length: 2.0 * std::f64::consts::PI },
            constituents: [c(1.0, 1.0), c(-1.0, 0.5)],
            drag: 0.5,
            reaction_rate: 0.1,
            cfl: 0.4,
            dt: None,
            duration: 1.0,
            output_every: 10,
        }
    }
}

/// Evolved variables: densities and momenta of both constituents.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub rho: [ScalarField; 2],
    pub momentum: [VectorField; 2],
}

impl SimState {
    pub fn initial(config: &ScenarioConfig) -> Result<Self> {
        let g = config.grid()?;
        let rho = [0, 1].map(|a| config.constituents[a].density.sample(&g, 0.0).with_unit("kg/m^3"));
        for r in &rho {
            if r.values().iter().any(|&v| !(v > 0.0)) {
                return Err(Error::InvalidConfig("initial densities must be positive".into()));
            }
        }
        let momentum = [0, 1].map(|a| rho[a].times(&config.constituents[a].velocity.sample(&g, 0.0)));
        Ok(Self { time: 0.0, rho, momentum })
    }

    pub fn grid(&self) -> &Grid {
        self.rho[0].grid()
    }

    pub fn velocity(&self, alpha: usize) -> VectorField {
        VectorField::from_index_fn(*self.grid(), |n| self.momentum[alpha].get(n) / self.rho[alpha].get(n))
    }

    fn is_finite(&self) -> bool {
        (0..2).all(|a| {
            self.rho[a].all_finite() && self.momentum[a].all_finite() && self.rho[a].values().iter().all(|&r| r > 0.0)
        })
    }

    /// `max(|x'_a| + c_s)` over nodes and constituents.
    pub fn max_signal_speed(&self, config: &ScenarioConfig) -> f64 {
        let mut s: f64 = 0.0;
        for a in 0..2 {
            let law = config.constituents[a].pressure;
            for n in 0..self.grid().node_count() {
                let r = self.rho[a].get(n);
                s = s.max((self.momentum[a].get(n) / r).norm() + law.sound_speed(r));
            }
        }
        s
    }

    fn axpy(&self, k: &Rates, dt: f64) -> Self {
        Self {
            time: self.time + dt,
            rho: [0, 1].map(|a| &self.rho[a] + &(&k.rho[a] * dt)),
            momentum: [0, 1].map(|a| &self.momentum[a] + &(&k.momentum[a] * dt)),
        }
    }
}

/// Exchange and constitutive fields at one state.
#[derive(Clone, Debug)]
pub struct Exchange {
    /// `rho c_a`
    pub mass: [ScalarField; 2],
    /// `rho m_a`
    pub momentum: [VectorField; 2],
    /// `rho e_a`, the drag dissipation moved between constituents
    pub energy: [ScalarField; 2],
    pub pressure: [ScalarField; 2],
    pub body_force: [VectorField; 2],
}

pub fn exchange(state: &SimState, config: &ScenarioConfig) -> Exchange {
    let g = *state.grid();
    let (r1, r2) = (&state.rho[0], &state.rho[1]);
    let v = [state.velocity(0), state.velocity(1)];
    let mass1 = ScalarField::from_index_fn(g, |n| config.reaction_rate * (r2.get(n) - r1.get(n)));
    let drag1 = VectorField::from_index_fn(g, |n| {
        let (a, b) = (r1.get(n), r2.get(n));
        (v[0].get(n) - v[1].get(n)) * (-config.drag * a * b / (a + b))
    });
    let energy1 = ScalarField::from_index_fn(g, |n| {
        let (a, b) = (r1.get(n), r2.get(n));
        config.drag * a * b / (a + b) * (v[0].get(n) - v[1].get(n)).norm_squared()
    });
    Exchange {
        mass: [mass1.clone(), -&mass1],
        momentum: [drag1.clone(), -&drag1],
        energy: [energy1.clone(), -&energy1],
        pressure: [0, 1].map(|a| state.rho[a].map(|r| config.constituents[a].pressure.pressure(r)).with_unit("Pa")),
        body_force: [0, 1].map(|a| config.constituents[a].body_force.sample(&g, state.time)),
    }
}

struct Rates {
    rho: [ScalarField; 2],
    momentum: [VectorField; 2],
}

fn rates(state: &SimState, config: &ScenarioConfig) -> Rates {
    let ex = exchange(state, config);
    let mut rho = [ScalarField::zeros(*state.grid()), ScalarField::zeros(*state.grid())];
    let mut momentum = [VectorField::zeros(*state.grid()), VectorField::zeros(*state.grid())];
    for a in 0..2 {
        let v = state.velocity(a);
        rho[a] = &ex.mass[a] - &diffops::div(&state.momentum[a]);
        let flux = diffops::div(&diffops::outer(&state.momentum[a], &v));
        let forces = &(&state.rho[a].times(&ex.body_force[a]) + &ex.momentum[a]) - &diffops::grad(&ex.pressure[a]);
        momentum[a] = &forces - &flux;
    }
    Rates { rho, momentum }
}

/// Semi-discrete time rates `(d_t rho_a, d_t (rho_a x'_a))`.
pub fn state_rates(state: &SimState, config: &ScenarioConfig) -> ([ScalarField; 2], [VectorField; 2]) {
    let r = rates(state, config);
    (r.rho, r.momentum)
}

/// One classical RK4 step.
pub fn step(state: &SimState, config: &ScenarioConfig, dt: f64) -> Result<SimState> {
    let limit = STABILITY_CFL * state.grid().spacing() / state.max_signal_speed(config);
    if !(dt <= limit) {
        return Err(Error::CflViolation { dt, limit });
    }
    let k1 = rates(state, config);
    let s2 = state.axpy(&k1, 0.5 * dt);
    let k2 = rates(&s2, config);
    let s3 = state.axpy(&k2, 0.5 * dt);
    let k3 = rates(&s3, config);
    let s4 = state.axpy(&k3, dt);
    let k4 = rates(&s4, config);
    let combine = |f: &dyn Fn(&Rates) -> ScalarField| &(&f(&k1) + &(&f(&k2) * 2.0)) + &(&(&f(&k3) * 2.0) + &f(&k4));
    let combine_v = |f: &dyn Fn(&Rates) -> VectorField| &(&f(&k1) + &(&f(&k2) * 2.0)) + &(&(&f(&k3) * 2.0) + &f(&k4));
    let next = SimState {
        time: state.time + dt,
        rho: [0, 1].map(|a| &state.rho[a] + &(&combine(&|k| k.rho[a].clone()) * (dt / 6.0))),
        momentum: [0, 1].map(|a| &state.momentum[a] + &(&combine_v(&|k| k.momentum[a].clone()) * (dt / 6.0))),
    };
    Ok(next)
}

/// Packs the evolved variables and exchange fields into a mixture state.
///
/// Rates are left empty; see [`Trajectory::time_differenced`].
pub fn to_mixture_state(state: &SimState, config: &ScenarioConfig) -> Result<MixtureState> {
    let ex = exchange(state, config);
    let rho = &state.rho[0] + &state.rho[1];
    let per_rho = |f: &ScalarField| ScalarField::from_index_fn(*state.grid(), |n| f.get(n) / rho.get(n));
    let cs = (0..2)
        .map(|a| {
            let mut c = ConstituentState::at_rest(state.rho[a].clone());
            c.velocity = state.velocity(a).with_unit("m/s");
            c.stress = ex.pressure[a].map(|p| Mat3::identity() * -p).with_unit("Pa");
            c.body_force_ni = ex.body_force[a].clone();
            c.momentum_growth = VectorField::from_index_fn(*state.grid(), |n| ex.momentum[a].get(n) / rho.get(n));
            c.mass_growth = per_rho(&ex.mass[a]);
            c.energy_growth = per_rho(&ex.energy[a]);
            c
        })
        .collect();
    MixtureState::new(cs, state.time)
}

/// Domain totals at one snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationSample {
    pub time: f64,
    pub mass: [f64; 2],
    pub mixture_mass: f64,
    pub momentum: Vec3,
    pub kinetic_energy: f64,
    /// `int_0^t sum_a int rho_a b_a`, trapezoidal in the steps.
    pub momentum_budget: Vec3,
    /// `int rho c_1 + int rho c_2`
    pub exchange_imbalance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub steps: usize,
    pub dt: f64,
    /// Largest `|M_a(t) - M_a(0)| / M_a(0)` for each constituent.
    pub mass_drift: [f64; 2],
    pub mixture_mass_drift: f64,
    /// Largest `|P(t) - P(0) - budget(t)|` relative to the momentum scale.
    pub momentum_drift: f64,
    /// `max(|P(0)|, sum_a int rho_a |x'_a|)` at the start.
    pub momentum_scale: f64,
    pub exchange_imbalance: f64,
    /// Largest pointwise `|sum m_a|`, `|sum c_a|` and `|sum e_a|` over all steps.
    pub momentum_growth_sum: f64,
    pub mass_growth_sum: f64,
    pub energy_growth_sum: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: ScenarioConfig,
    pub dt: f64,
    pub snapshots: Vec<MixtureState>,
    pub series: Vec<ConservationSample>,
    pub report: ConservationReport,
    pub final_state: SimState,
}

/// Domain integral with compensated summation, so drift reports measure the state rather than the sum.
fn total<T: crate::fields::FieldValue>(f: &crate::fields::Field<T>) -> T {
    let mut acc = T::zero();
    let mut carry = T::zero();
    for v in f.values() {
        let y = *v - carry;
        let t = acc + y;
        carry = (t - acc) - y;
        acc = t;
    }
    acc * f.grid().cell_volume()
}

fn external_force(state: &SimState, config: &ScenarioConfig) -> Vec3 {
    let g = *state.grid();
    (0..2).map(|a| total(&state.rho[a].times(&config.constituents[a].body_force.sample(&g, state.time)))).sum()
}

fn sample(state: &SimState, config: &ScenarioConfig, budget: Vec3) -> ConservationSample {
    let ex = exchange(state, config);
    let mass = [total(&state.rho[0]), total(&state.rho[1])];
    let ke = (0..2).map(|a| 0.5 * total(&diffops::dot(&state.momentum[a], &state.velocity(a)))).sum();
    ConservationSample {
        time: state.time,
        mass,
        mixture_mass: mass[0] + mass[1],
        momentum: total(&state.momentum[0]) + total(&state.momentum[1]),
        kinetic_energy: ke,
        momentum_budget: budget,
        exchange_imbalance: total(&ex.mass[0]) + total(&ex.mass[1]),
    }
}

fn growth_sums(state: &SimState, config: &ScenarioConfig) -> [f64; 3] {
    let ex = exchange(state, config);
    [
        (&ex.momentum[0] + &ex.momentum[1]).max_norm(),
        (&ex.mass[0] + &ex.mass[1]).max_norm(),
        (&ex.energy[0] + &ex.energy[1]).max_norm(),
    ]
}

/// Step size and count: `dt` from the config or the CFL bound, shrunk so the steps tile the duration.
pub fn plan_steps(state: &SimState, config: &ScenarioConfig) -> Result<(f64, usize)> {
    let bound = config.cfl * state.grid().spacing() / state.max_signal_speed(config);
    let dt = match config.dt {
        Some(dt) if dt > bound => return Err(Error::CflViolation { dt, limit: bound }),
        Some(dt) => dt,
        None => bound,
    };
    let steps = (config.duration / dt).ceil().max(1.0) as usize;
    Ok((config.duration / steps as f64, steps))
}

pub fn run(config: &ScenarioConfig) -> Result<Trajectory> {
    config.validate()?;
    let mut state = SimState::initial(config)?;
    let (dt, steps) = plan_steps(&state, config)?;
    let mut budget = Vec3::zeros();
    let mut force = external_force(&state, config);
    let first = sample(&state, config, budget);
    let momentum_scale =
        first.momentum.norm().max((0..2).map(|a| total(&state.momentum[a].map(|m| m.norm()))).sum::<f64>());
    let mut series = vec![first];
    let mut snapshots = vec![to_mixture_state(&state, config)?];
    let mut sums = growth_sums(&state, config);
    for k in 1..=steps {
        let next = step(&state, config, dt)?;
        if !next.is_finite() {
            return Err(Error::NonFiniteState { step: k });
        }
        state = SimState { time: k as f64 * dt, ..next };
        let next_force = external_force(&state, config);
        budget += (force + next_force) * (0.5 * dt);
        force = next_force;
        let gs = growth_sums(&state, config);
        for i in 0..3 {
            sums[i] = sums[i].max(gs[i]);
        }
        if k % config.output_every == 0 || k == steps {
            series.push(sample(&state, config, budget));
            snapshots.push(to_mixture_state(&state, config)?);
        }
    }
    let first = series[0];
    let drift = |f: &dyn Fn(&ConservationSample) -> f64| series.iter().map(f).fold(0.0_f64, f64::max);
    let report = ConservationReport {
        steps,
        dt,
        mass_drift: [0, 1].map(|a| drift(&|s| (s.mass[a] - first.mass[a]).abs() / first.mass[a])),
        mixture_mass_drift: drift(&|s| (s.mixture_mass - first.mixture_mass).abs() / first.mixture_mass),
        momentum_drift: drift(&|s| (s.momentum - first.momentum - s.momentum_budget).norm())
            / momentum_scale.max(f64::MIN_POSITIVE),
        momentum_scale,
        exchange_imbalance: drift(&|s| s.exchange_imbalance.abs()),
        momentum_growth_sum: sums[0],
        mass_growth_sum: sums[1],
        energy_growth_sum: sums[2],
    };
    Ok(Trajectory { config: config.clone(), dt, snapshots, series, report, final_state: state })
}

impl Trajectory {
    /// Snapshot `i` with density and velocity rates from central differences of its neighbours,
    /// and the inertial body force that goes with them.
    pub fn time_differenced(&self, i: usize) -> Result<MixtureState> {
        if i == 0 || i + 1 >= self.snapshots.len() {
            return Err(Error::MissingTimeData(format!("snapshot {i} has no neighbours on both sides")));
        }
        let (prev, cur, next) = (&self.snapshots[i - 1], &self.snapshots[i], &self.snapshots[i + 1]);
        let h = next.time() - cur.time();
        if ((cur.time() - prev.time()) - h).abs() > 1e-9 * h {
            return Err(Error::MissingTimeData("snapshots around index {i} are not equally spaced".into()));
        }
        let rated = cur.clone().modified(|cs| {
            for (a, c) in cs.iter_mut().enumerate() {
                let (p, q) = (prev.constituent(a), next.constituent(a));
                c.rates.rho = Some(&(&q.rho - &p.rho) * (0.5 / h));
                c.rates.velocity = Some(&(&q.velocity - &p.velocity) * (0.5 / h));
            }
        })?;
        let b_in: Vec<VectorField> =
            (0..2).map(|a| crate::balances::inertial_body_force(&rated, a)).collect::<Result<_>>()?;
        rated.modified(|cs| {
            for (c, b) in cs.iter_mut().zip(b_in) {
                c.body_force_in = b;
            }
        })
    }

    pub fn write_series_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "time",
            "mass_1",
            "mass_2",
            "mixture_mass",
            "momentum_x",
            "momentum_y",
            "momentum_z",
            "kinetic_energy",
            "budget_x",
            "budget_y",
            "budget_z",
            "exchange_imbalance",
        ])?;
        for s in &self.series {
            let row = [
                s.time,
                s.mass[0],
                s.mass[1],
                s.mixture_mass,
                s.momentum[0],
                s.momentum[1],
                s.momentum[2],
                s.kinetic_energy,
                s.momentum_budget[0],
                s.momentum_budget[1],
                s.momentum_budget[2],
                s.exchange_imbalance,
            ];
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `snapshot_{i}_{field}_{a}.csv` for density and velocity of both constituents.
    pub fn write_snapshots(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (i, s) in self.snapshots.iter().enumerate() {
            for a in 0..2 {
                let c = s.constituent(a);
                let p = dir.join(format!("snapshot_{i:04}_rho_{}.csv", a + 1));
                c.rho.write_csv(std::fs::File::create(&p)?)?;
                out.push(p);
                let p = dir.join(format!("snapshot_{i:04}_velocity_{}.csv", a + 1));
                c.velocity.write_csv(std::fs::File::create(&p)?)?;
                out.push(p);
            }
        }
        Ok(out)
    }
}

/// `u(t) = u0 exp(-drag t)`: relative velocity of two uniform constituents under drag alone.
pub fn drag_relaxation_exact(drag: f64, u0: f64, t: f64) -> f64 {
    u0 * (-drag * t).exp()
}

/// RK4 solution of the two-body drag system for uniform densities, `steps` steps to time `t`.
pub fn drag_relaxation_oracle(drag: f64, rho: [f64; 2], v0: [f64; 2], t: f64, steps: usize) -> [f64; 2] {
    let f = |v: [f64; 2]| {
        let force = -drag * rho[0] * rho[1] / (rho[0] + rho[1]) * (v[0] - v[1]);
        [force / rho[0], -force / rho[1]]
    };
    let dt = t / steps as f64;
    let mut v = v0;
    for _ in 0..steps {
        let add = |v: [f64; 2], k: [f64; 2], s: f64| [v[0] + s * k[0], v[1] + s * k[1]];
        let k1 = f(v);
        let k2 = f(add(v, k1, 0.5 * dt));
        let k3 = f(add(v, k2, 0.5 * dt));
        let k4 = f(add(v, k3, dt));
        v = [0, 1].map(|i| v[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    v
}

/// Stress field `-p I` of a constituent, for tests that feed states to the balance evaluators.
pub fn pressure_stress(p: &ScalarField) -> TensorField {
    p.map(|v| Mat3::identity() * -v)
}
