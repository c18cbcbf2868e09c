//! Manufactured states closed so that the pointwise balances hold analytically.
//!
//! Free fields are supplied by a [`Manufactured`] source as jets. Closure
//! fixes the rest:
//! * the last constituent's momentum and moment growths make the growths sum to zero;
//! * mass growths follow from the constituent mass balance, the last one from the zero sum;
//! * skew stress parts are set from the moment growths under a [`SkewConvention`];
//! * the inertial body force makes the kinetic-energy rule hold;
//! * the non-inertial body force makes the constituent momentum balance hold;
//! * energy growths follow from the pointwise energy balance, with the last
//!   constituent's heat source chosen so that they sum to zero;
//! * entropy growths make the entropy balance an equality.

use serde::{Deserialize, Serialize};

use super::SkewConvention;
use crate::analytic::{
    jmat_div, jmat_value, jvec_const, jvec_div, jvec_dt, jvec_grad, jvec_scale, jvec_value, AnalyticFieldSpec,
    AxisFactor, Jet, JetMat, JetVec, TensorSpec, Term, TimeFactor, VectorSpec,
};
use crate::covariance::{mat_from_rows, ConstitutiveEnergy, EnergyModel};
use crate::diffops::{cross_tensor, sym};
use crate::error::{Error, Result};
use crate::fields::{Grid, Mat3, ScalarField, TensorField, Vec3, VectorField};
use crate::mixture::{ConstituentState, MixtureState, TimeRates};

/// Free fields of a manufactured mixture, evaluated as jets at `(x, t)`.
///
/// Growth and source terms are consulted only for constituents `0..len()-1`;
/// the last constituent's values are fixed by closure.
pub trait Manufactured {
    fn len(&self) -> usize;
    fn density(&self, alpha: usize, x: Vec3, t: f64) -> Jet;
    fn velocity(&self, alpha: usize, x: Vec3, t: f64) -> JetVec;
    /// Only the symmetric part is used.
    fn stress(&self, alpha: usize, x: Vec3, t: f64) -> JetMat;
    fn momentum_growth(&self, alpha: usize, x: Vec3, t: f64) -> Vec3;
    fn moment_growth(&self, alpha: usize, x: Vec3, t: f64) -> JetVec;

    fn internal_energy(&self, _alpha: usize, _x: Vec3, _t: f64) -> Jet {
        Jet::constant(0.0)
    }
    fn heat_flux(&self, _alpha: usize, _x: Vec3, _t: f64) -> JetVec {
        jvec_const(Vec3::zeros())
    }
    fn heat_source(&self, _alpha: usize, _x: Vec3, _t: f64) -> f64 {
        0.0
    }
    fn entropy(&self, _alpha: usize, _x: Vec3, _t: f64) -> Jet {
        Jet::constant(0.0)
    }
    fn entropy_flux(&self, _alpha: usize, _x: Vec3, _t: f64) -> JetVec {
        jvec_const(Vec3::zeros())
    }
    fn entropy_source(&self, _alpha: usize, _x: Vec3, _t: f64) -> f64 {
        0.0
    }
    fn metric(&self, _alpha: usize, _x: Vec3, _t: f64) -> Mat3 {
        Mat3::identity()
    }
}

/// Closed values of one constituent at one point.
#[derive(Clone, Debug)]
pub struct ClosedConstituent {
    pub rho: Jet,
    pub velocity: JetVec,
    pub stress: JetMat,
    pub accel: Vec3,
    pub body_force_ni: Vec3,
    pub body_force_in: Vec3,
    pub momentum_growth: Vec3,
    pub moment_growth: JetVec,
    pub mass_growth: f64,
    pub internal_energy: Jet,
    pub energy_growth: f64,
    pub heat_flux: JetVec,
    pub heat_source: f64,
    pub entropy: Jet,
    pub entropy_growth: f64,
    pub entropy_flux: JetVec,
    pub entropy_source: f64,
    pub metric: Mat3,
}

fn jcross(a: &JetVec) -> JetMat {
    let z = Jet::constant(0.0);
    [[z, -a[2], a[1]], [a[2], z, -a[0]], [-a[1], a[0], z]]
}

fn jmat_sym(m: &JetMat) -> JetMat {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| (m[i][j] + m[j][i]) * 0.5))
}

fn jmat_add(a: &JetMat, b: &JetMat) -> JetMat {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| a[i][j] + b[i][j]))
}

fn jmat_scale(s: Jet, m: &JetMat) -> JetMat {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| s * m[i][j]))
}

fn jvec_sum(vs: &[JetVec]) -> JetVec {
    let mut out = jvec_const(Vec3::zeros());
    for v in vs {
        for c in 0..3 {
            out[c] += v[c];
        }
    }
    out
}

fn jvec_neg(v: &JetVec) -> JetVec {
    v.map(|c| -c)
}

/// Closes the manufactured fields at one point. `None` when a constituent density is not positive.
pub fn close_point(man: &dyn Manufactured, x: Vec3, t: f64, conv: SkewConvention) -> Option<Vec<ClosedConstituent>> {
    let n = man.len();
    let rhos: Vec<Jet> = (0..n).map(|a| man.density(a, x, t)).collect();
    if rhos.iter().any(|r| r.v <= 0.0) {
        return None;
    }
    let rho = rhos.iter().fold(Jet::constant(0.0), |acc, r| acc + *r);
    let vels: Vec<JetVec> = (0..n).map(|a| man.velocity(a, x, t)).collect();

    let mut mus: Vec<JetVec> = (0..n - 1).map(|a| man.moment_growth(a, x, t)).collect();
    mus.push(jvec_neg(&jvec_sum(&mus)));
    let mut mgs: Vec<Vec3> = (0..n - 1).map(|a| man.momentum_growth(a, x, t)).collect();
    let mg_sum: Vec3 = mgs.iter().sum();
    mgs.push(-mg_sum);

    let mut cs: Vec<f64> =
        (0..n - 1).map(|a| (rhos[a].dt() + jvec_div(&jvec_scale(rhos[a], &vels[a]))) / rho.v).collect();
    let c_sum: f64 = cs.iter().sum();
    cs.push(-c_sum);

    let kp = conv.kappa_prime();
    let mut out = Vec::with_capacity(n);
    for a in 0..n {
        let ra = rhos[a];
        let va = vels[a];
        let stress = jmat_add(&jmat_sym(&man.stress(a, x, t)), &jmat_scale(rho * (-kp), &jcross(&mus[a])));
        let vel = jvec_value(&va);
        let grad_v = jvec_grad(&va);
        let accel = jvec_dt(&va) + grad_v * vel;
        let body_force_in = -accel - vel * (rho.v / ra.v * cs[a]);
        let div_t = jmat_div(&stress);
        let body_force_ni = (accel * ra.v + vel * (rho.v * cs[a]) - div_t - mgs[a] * rho.v) / ra.v;

        let eps = man.internal_energy(a, x, t);
        let q = man.heat_flux(a, x, t);
        let eps_follow = eps.dt() + eps.grad().dot(&vel);
        let stress_power = jmat_value(&stress).component_mul(&sym(&grad_v)).sum();
        let balance_wo_supply = ra.v * eps_follow + rho.v * cs[a] * eps.v - stress_power - jvec_div(&q);

        let eta = man.entropy(a, x, t);
        let h = man.entropy_flux(a, x, t);
        let s = man.entropy_source(a, x, t);
        let entropy_growth = ((ra * eta).dt() - jvec_div(&h) + ra.v * s) / rho.v;

        out.push(ClosedConstituent {
            rho: ra,
            velocity: va,
            stress,
            accel,
            body_force_ni,
            body_force_in,
            momentum_growth: mgs[a],
            moment_growth: mus[a],
            mass_growth: cs[a],
            internal_energy: eps,
            energy_growth: 0.0,
            heat_flux: q,
            heat_source: if a + 1 < n { man.heat_source(a, x, t) } else { 0.0 },
            entropy: eta,
            entropy_growth,
            entropy_flux: h,
            entropy_source: s,
            metric: man.metric(a, x, t),
        });
        // supply-free part of the energy balance, finished below
        out[a].energy_growth = balance_wo_supply;
    }
    let mut growth_sum = 0.0;
    for c in out.iter_mut().take(n - 1) {
        c.energy_growth = (c.energy_growth - c.rho.v * c.heat_source) / rho.v;
        growth_sum += c.energy_growth;
    }
    let last = &mut out[n - 1];
    let supply_free = last.energy_growth;
    last.energy_growth = -growth_sum;
    last.heat_source = (supply_free - rho.v * last.energy_growth) / last.rho.v;
    Some(out)
}

/// Samples the closed manufactured state on `grid` at time `t`.
pub fn close_state_via_balances(
    man: &dyn Manufactured,
    grid: &Grid,
    t: f64,
    conv: SkewConvention,
) -> Result<MixtureState> {
    let n = man.len();
    if n == 0 {
        return Err(Error::InvalidConfig("a manufactured mixture needs at least one constituent".into()));
    }
    let count = grid.node_count();
    let mut points = Vec::with_capacity(count);
    let mut vacuum = Vec::new();
    for idx in 0..count {
        match close_point(man, grid.position_of(idx), t, conv) {
            Some(p) => points.push(p),
            None => vacuum.push(idx),
        }
    }
    if !vacuum.is_empty() {
        return Err(Error::FloorViolation { nodes: vacuum });
    }
    let g = *grid;
    let constituents = (0..n)
        .map(|a| {
            let s = |f: &dyn Fn(&ClosedConstituent) -> f64| ScalarField::from_index_fn(g, |i| f(&points[i][a]));
            let v = |f: &dyn Fn(&ClosedConstituent) -> Vec3| VectorField::from_index_fn(g, |i| f(&points[i][a]));
            let m = |f: &dyn Fn(&ClosedConstituent) -> Mat3| TensorField::from_index_fn(g, |i| f(&points[i][a]));
            ConstituentState {
                rho: s(&|c| c.rho.v).with_unit("kg/m^3"),
                velocity: v(&|c| jvec_value(&c.velocity)).with_unit("m/s"),
                accel: Some(v(&|c| c.accel)),
                stress: m(&|c| jmat_value(&c.stress)).with_unit("Pa"),
                body_force_ni: v(&|c| c.body_force_ni),
                body_force_in: v(&|c| c.body_force_in),
                momentum_growth: v(&|c| c.momentum_growth),
                moment_growth: v(&|c| jvec_value(&c.moment_growth)),
                mass_growth: s(&|c| c.mass_growth),
                internal_energy: s(&|c| c.internal_energy.v),
                energy_growth: s(&|c| c.energy_growth),
                heat_flux: v(&|c| jvec_value(&c.heat_flux)),
                heat_source: s(&|c| c.heat_source),
                entropy: s(&|c| c.entropy.v),
                entropy_growth: s(&|c| c.entropy_growth),
                entropy_flux: v(&|c| jvec_value(&c.entropy_flux)),
                entropy_source: s(&|c| c.entropy_source),
                metric: m(&|c| c.metric),
                rates: TimeRates {
                    rho: Some(s(&|c| c.rho.dt())),
                    velocity: Some(v(&|c| jvec_dt(&c.velocity))),
                    internal_energy: Some(s(&|c| c.internal_energy.dt())),
                },
            }
        })
        .collect();
    MixtureState::new(constituents, t)
}

/// Pointwise balance residuals of a closed point, evaluated with exact derivatives.
#[derive(Clone, Debug)]
pub struct ClosureResiduals {
    pub mass: Vec<f64>,
    pub momentum: Vec<Vec3>,
    pub moment: Vec<Mat3>,
    pub energy: Vec<f64>,
    pub momentum_growth_sum: Vec3,
    pub moment_growth_sum: Vec3,
    pub mass_growth_sum: f64,
    pub energy_growth_sum: f64,
    /// Largest magnitude among the terms entering the residuals.
    pub scale: f64,
}

impl ClosureResiduals {
    pub fn max_relative(&self) -> f64 {
        let mut m: f64 = 0.0;
        m = self.mass.iter().fold(m, |acc, r| acc.max(r.abs()));
        m = self.momentum.iter().fold(m, |acc, r| acc.max(r.amax()));
        m = self.moment.iter().fold(m, |acc, r| acc.max(r.amax()));
        m = self.energy.iter().fold(m, |acc, r| acc.max(r.abs()));
        m = m.max(self.momentum_growth_sum.amax()).max(self.moment_growth_sum.amax());
        m = m.max(self.mass_growth_sum.abs()).max(self.energy_growth_sum.abs());
        m / self.scale.max(f64::MIN_POSITIVE)
    }
}

pub fn closure_residuals(man: &dyn Manufactured, x: Vec3, t: f64, conv: SkewConvention) -> Option<ClosureResiduals> {
    let cs = close_point(man, x, t, conv)?;
    let rho = cs.iter().fold(0.0, |acc, c| acc + c.rho.v);
    let mut scale: f64 = 0.0;
    let mut r = ClosureResiduals {
        mass: Vec::new(),
        momentum: Vec::new(),
        moment: Vec::new(),
        energy: Vec::new(),
        momentum_growth_sum: Vec3::zeros(),
        moment_growth_sum: Vec3::zeros(),
        mass_growth_sum: 0.0,
        energy_growth_sum: 0.0,
        scale: 0.0,
    };
    for c in &cs {
        let vel = jvec_value(&c.velocity);
        let flux_div = jvec_div(&jvec_scale(c.rho, &c.velocity));
        r.mass.push(c.rho.dt() + flux_div - rho * c.mass_growth);
        scale = scale.max(c.rho.dt().abs()).max(flux_div.abs());

        let div_t = jmat_div(&c.stress);
        let terms = [
            c.body_force_ni * c.rho.v,
            div_t,
            c.momentum_growth * rho,
            -c.accel * c.rho.v,
            -vel * (rho * c.mass_growth),
        ];
        r.momentum.push(terms.iter().sum());
        scale = terms.iter().fold(scale, |acc, v| acc.max(v.amax()));

        let t_val = jmat_value(&c.stress);
        let mu = jvec_value(&c.moment_growth);
        r.moment.push(t_val - t_val.transpose() + cross_tensor(&mu) * (conv.kappa() * rho));
        scale = scale.max(t_val.amax()).max((mu * rho).amax());

        let eps = c.internal_energy;
        let e_terms = [
            c.rho.v * (eps.dt() + eps.grad().dot(&vel)),
            rho * c.mass_growth * eps.v,
            -rho * c.energy_growth,
            -t_val.component_mul(&sym(&jvec_grad(&c.velocity))).sum(),
            -jvec_div(&c.heat_flux),
            -c.rho.v * c.heat_source,
        ];
        r.energy.push(e_terms.iter().sum());
        scale = e_terms.iter().fold(scale, |acc, v| acc.max(v.abs()));

        r.momentum_growth_sum += c.momentum_growth;
        r.moment_growth_sum += mu;
        r.mass_growth_sum += c.mass_growth;
        r.energy_growth_sum += c.energy_growth;
    }
    r.scale = scale;
    Some(r)
}

/// A manufactured source re-expressed through its own closure, so that closing it again is a no-op.
pub struct Closure<M> {
    pub inner: M,
    pub convention: SkewConvention,
}

impl<M: Manufactured> Closure<M> {
    fn at(&self, alpha: usize, x: Vec3, t: f64) -> ClosedConstituent {
        close_point(&self.inner, x, t, self.convention).expect("closed source evaluated at vacuum").swap_remove(alpha)
    }
}

impl<M: Manufactured> Manufactured for Closure<M> {
    fn len(&self) -> usize {
        self.inner.len()
    }
    fn density(&self, alpha: usize, x: Vec3, t: f64) -> Jet {
        self.inner.density(alpha, x, t)
    }
    fn velocity(&self, alpha: usize, x: Vec3, t: f64) -> JetVec {
        self.inner.velocity(alpha, x, t)
    }
    fn stress(&self, alpha: usize, x: Vec3, t: f64) -> JetMat {
        self.at(alpha, x, t).stress
    }
    fn momentum_growth(&self, alpha: usize, x: Vec3, t: f64) -> Vec3 {
        self.at(alpha, x, t).momentum_growth
    }
    fn moment_growth(&self, alpha: usize, x: Vec3, t: f64) -> JetVec {
        self.at(alpha, x, t).moment_growth
    }
    fn internal_energy(&self, alpha: usize, x: Vec3, t: f64) -> Jet {
        self.inner.internal_energy(alpha, x, t)
    }
    fn heat_flux(&self, alpha: usize, x: Vec3, t: f64) -> JetVec {
        self.inner.heat_flux(alpha, x, t)
    }
    fn heat_source(&self, alpha: usize, x: Vec3, t: f64) -> f64 {
        self.at(alpha, x, t).heat_source
    }
    fn entropy(&self, alpha: usize, x: Vec3, t: f64) -> Jet {
        self.inner.entropy(alpha, x, t)
    }
    fn entropy_flux(&self, alpha: usize, x: Vec3, t: f64) -> JetVec {
        self.inner.entropy_flux(alpha, x, t)
    }
    fn entropy_source(&self, alpha: usize, x: Vec3, t: f64) -> f64 {
        self.inner.entropy_source(alpha, x, t)
    }
    fn metric(&self, alpha: usize, x: Vec3, t: f64) -> Mat3 {
        self.inner.metric(alpha, x, t)
    }
}

/// Symmetric stress of the two constituents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StressLaw {
    /// Analytic stresses; only their symmetric parts are kept.
    Free { stress: [TensorSpec; 2] },
    /// `sym T_a = 2 rho_a d eps_a / d g` at a constant metric `G_a` (row-major).
    Elastic { energy: [EnergyModel; 2], metric: [[[f64; 3]; 3]; 2] },
}

impl Default for StressLaw {
    fn default() -> Self {
        StressLaw::Free { stress: Default::default() }
    }
}

/// Binary manufactured mixture with constant total density.
///
/// `rho_1 = rho_bar (1 + a s)`, `rho_2 = rho_bar (1 - a s)` and the total mass flux
/// `rho_1 x'_1 + rho_2 x'_2 = J` is divergence free, so mixture mass is conserved
/// and the closed mass growths satisfy both the constituent balances and the zero sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinaryScenario {
    pub mean_density: f64,
    pub density_amplitude: f64,
    pub density_shape: AnalyticFieldSpec,
    /// Velocity of the first constituent.
    pub velocity: VectorSpec,
    /// Total mass flux; component `i` must not depend on coordinate `i`.
    pub mixture_flux: VectorSpec,
    pub stress_law: StressLaw,
    /// Growth of momentum of the first constituent.
    pub momentum_growth: VectorSpec,
    /// Growth of moment of momentum of the first constituent.
    pub moment_growth: VectorSpec,
    pub internal_energy: [AnalyticFieldSpec; 2],
    pub heat_flux: [VectorSpec; 2],
    /// Heat source of the first constituent.
    pub heat_source: AnalyticFieldSpec,
    pub entropy: [AnalyticFieldSpec; 2],
    pub entropy_flux: [VectorSpec; 2],
    pub entropy_source: [AnalyticFieldSpec; 2],
}

impl Default for BinaryScenario {
    fn default() -> Self {
        Self::zero()
    }
}

fn axis(kind: char, k: f64, phase: f64) -> AxisFactor {
    match kind {
        's' => AxisFactor::Sin { k, phase },
        'c' => AxisFactor::Cos { k, phase },
        _ => AxisFactor::Const,
    }
}

/// Term `c f(x) g(y) h(z)` from a pattern such as `"s-c"` (sin x, const y, cos z) with unit wavenumbers.
fn term(c: f64, pattern: &str) -> Term {
    let mut t = Term::new(c);
    for (i, ch) in pattern.chars().enumerate() {
        t = t.axis(i, axis(ch, 1.0, 0.0));
    }
    t
}

fn spec(terms: Vec<Term>) -> AnalyticFieldSpec {
    AnalyticFieldSpec::from_terms(terms)
}

fn cst(c: f64) -> AnalyticFieldSpec {
    AnalyticFieldSpec::constant(c)
}

impl BinaryScenario {
    /// Uniform unit densities, no motion, no forces.
    pub fn zero() -> Self {
        Self {
            mean_density: 1.0,
            density_amplitude: 0.0,
            density_shape: AnalyticFieldSpec::zero(),
            velocity: VectorSpec::default(),
            mixture_flux: VectorSpec::default(),
            stress_law: StressLaw::default(),
            momentum_growth: VectorSpec::default(),
            moment_growth: VectorSpec::default(),
            internal_energy: Default::default(),
            heat_flux: Default::default(),
            heat_source: AnalyticFieldSpec::zero(),
            entropy: Default::default(),
            entropy_flux: Default::default(),
            entropy_source: Default::default(),
        }
    }

    /// Smooth, fully coupled binary state, periodic on `[0, 2 pi)^3`.
    pub fn trig() -> Self {
        let osc = TimeFactor::Cos { omega: 1.0, phase: 0.3 };
        let decay = TimeFactor::Exp { rate: -0.2 };
        let stress = |a: f64| {
            let mut comps: [AnalyticFieldSpec; 9] = Default::default();
            comps[0] = spec(vec![Term::new(1.0 + a), term(0.4 * a, "c")]);
            comps[4] = spec(vec![Term::new(0.8), term(0.3, "-s").time(osc.clone())]);
            comps[8] = spec(vec![Term::new(1.2 * a), term(0.2, "s-c")]);
            comps[1] = spec(vec![term(0.25 * a, "-cs")]);
            comps[3] = comps[1].clone();
            comps[2] = spec(vec![term(0.15, "c-c")]);
            comps[6] = spec(vec![term(0.35, "s--")]);
            comps[5] = spec(vec![term(-0.2 * a, "sc-")]);
            comps[7] = spec(vec![term(0.1, "-cs")]);
            TensorSpec { components: comps }
        };
        Self {
            mean_density: 1.0,
            density_amplitude: 0.3,
            density_shape: spec(vec![term(1.0, "sc-").time(osc.clone()), term(0.5, "--s")]),
            velocity: VectorSpec::new(
                spec(vec![term(0.5, "-s-").time(osc.clone()), Term::new(0.1)]),
                spec(vec![term(0.3, "--c"), term(0.2, "s-c").time(decay.clone())]),
                spec(vec![term(0.4, "sc-")]),
            ),
            mixture_flux: VectorSpec::new(
                spec(vec![term(0.4, "-cs").time(decay.clone()), Term::new(0.2)]),
                spec(vec![term(0.3, "s--"), term(0.1, "c-c")]),
                spec(vec![term(0.2, "cs-").time(osc.clone())]),
            ),
            stress_law: StressLaw::Free { stress: [stress(1.0), stress(-0.5)] },
            momentum_growth: VectorSpec::new(
                spec(vec![term(0.3, "--s")]),
                spec(vec![term(0.2, "c--").time(osc.clone())]),
                spec(vec![term(0.1, "-s-")]),
            ),
            moment_growth: VectorSpec::new(
                spec(vec![term(0.2, "-c-")]),
                spec(vec![term(0.1, "--s").time(decay.clone())]),
                spec(vec![term(0.3, "s-c")]),
            ),
            internal_energy: [
                spec(vec![Term::new(2.0), term(0.3, "sc-").time(osc.clone())]),
                spec(vec![Term::new(1.5), term(0.2, "-sc")]),
            ],
            heat_flux: [
                VectorSpec::new(spec(vec![term(0.2, "c--")]), spec(vec![term(0.1, "-s-")]), cst(0.0)),
                VectorSpec::new(cst(0.0), spec(vec![term(0.15, "sc-")]), spec(vec![term(0.05, "--c")])),
            ],
            heat_source: spec(vec![term(0.1, "s--").time(decay.clone())]),
            entropy: [spec(vec![Term::new(1.0), term(0.2, "-c-").time(osc.clone())]), spec(vec![term(0.3, "s-s")])],
            entropy_flux: [
                VectorSpec::new(spec(vec![term(0.1, "-s-")]), cst(0.0), spec(vec![term(0.2, "c--")])),
                VectorSpec::new(spec(vec![term(0.05, "--c")]), spec(vec![term(0.1, "s--")]), cst(0.0)),
            ],
            entropy_source: [spec(vec![term(0.1, "c--")]), spec(vec![Term::new(0.05)])],
        }
    }

    /// The trig state with stresses given by metric-dependent energies (Doyle–Ericksen consistent).
    pub fn elastic() -> Self {
        let g1 = [[1.2, 0.1, 0.0], [0.1, 0.9, 0.05], [0.0, 0.05, 1.1]];
        let g2 = [[1.0, -0.1, 0.2], [-0.1, 1.3, 0.0], [0.2, 0.0, 0.8]];
        Self {
            stress_law: StressLaw::Elastic {
                energy: [
                    EnergyModel::Metric { a: 0.8, b: 0.3, c: 0.2 },
                    EnergyModel::Coupled {
                        base: Box::new(EnergyModel::Metric { a: 1.1, b: -0.2, c: 0.1 }),
                        coupling: 0.25,
                        other: g1,
                    },
                ],
                metric: [g1, g2],
            },
            ..Self::trig()
        }
    }

    /// Both constituents move with `(f(y, z, t), 0, 0)` at uniform density; the
    /// mixture is then a single incompressible body with `b_in = -a`.
    pub fn co_moving_shear() -> Self {
        let osc = TimeFactor::Cos { omega: 1.0, phase: 0.3 };
        let f = spec(vec![term(0.5, "-sc").time(osc), term(0.2, "--s"), Term::new(0.1)]);
        let mean_density = 1.0;
        let flux = spec(
            f.terms.iter().map(|t| Term { coefficient: t.coefficient * 2.0 * mean_density, ..t.clone() }).collect(),
        );
        Self {
            mean_density,
            velocity: VectorSpec::new(f, cst(0.0), cst(0.0)),
            mixture_flux: VectorSpec::new(flux, cst(0.0), cst(0.0)),
            ..Self::zero()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_density.is_finite() && self.mean_density > 0.0) {
            return Err(Error::InvalidConfig("mean_density must be positive".into()));
        }
        if !self.density_amplitude.is_finite() {
            return Err(Error::InvalidConfig("density_amplitude must be finite".into()));
        }
        self.density_shape.validate()?;
        self.velocity.validate()?;
        self.mixture_flux.validate()?;
        for (i, comp) in self.mixture_flux.components.iter().enumerate() {
            if comp.terms.iter().any(|t| t.axes[i] != AxisFactor::Const) {
                return Err(Error::InvalidConfig(format!(
                    "mixture_flux component {i} depends on its own coordinate; the flux must be divergence free"
                )));
            }
        }
        match &self.stress_law {
            StressLaw::Free { stress } => stress.iter().try_for_each(TensorSpec::validate)?,
            StressLaw::Elastic { metric, .. } => {
                for g in metric {
                    let g = mat_from_rows(g);
                    if (g - g.transpose()).amax() > 0.0 || g.cholesky().is_none() {
                        return Err(Error::InvalidConfig("elastic metric must be symmetric positive definite".into()));
                    }
                }
            }
        }
        self.momentum_growth.validate()?;
        self.moment_growth.validate()?;
        self.heat_source.validate()?;
        for a in 0..2 {
            self.internal_energy[a].validate()?;
            self.heat_flux[a].validate()?;
            self.entropy[a].validate()?;
            self.entropy_flux[a].validate()?;
            self.entropy_source[a].validate()?;
        }
        Ok(())
    }

    /// Constitutive energy of constituent `alpha` under an elastic stress law.
    pub fn energy_model(&self, alpha: usize) -> Option<&EnergyModel> {
        match &self.stress_law {
            StressLaw::Elastic { energy, .. } => energy.get(alpha),
            StressLaw::Free { .. } => None,
        }
    }

    fn shape(&self, x: Vec3, t: f64) -> Jet {
        self.density_shape.jet(x, t) * self.density_amplitude
    }
}

impl Manufactured for BinaryScenario {
    fn len(&self) -> usize {
        2
    }

    fn density(&self, alpha: usize, x: Vec3, t: f64) -> Jet {
        let s = self.shape(x, t);
        let sign = if alpha == 0 { 1.0 } else { -1.0 };
        (s * sign + 1.0) * self.mean_density
    }

    fn velocity(&self, alpha: usize, x: Vec3, t: f64) -> JetVec {
        let v1 = self.velocity.jet(x, t);
        if alpha == 0 {
            return v1;
        }
        let r1 = self.density(0, x, t);
        let r2 = self.density(1, x, t);
        let j = self.mixture_flux.jet(x, t);
        [0, 1, 2].map(|c| (j[c] - r1 * v1[c]) / r2)
    }

    fn stress(&self, alpha: usize, x: Vec3, t: f64) -> JetMat {
        match &self.stress_law {
            StressLaw::Free { stress } => stress[alpha].jet(x, t),
            StressLaw::Elastic { energy, metric } => {
                let rho = self.density(alpha, x, t);
                let d = energy[alpha].metric_derivative_jet(rho, &mat_from_rows(&metric[alpha]));
                jmat_scale(rho * 2.0, &d)
            }
        }
    }

    fn momentum_growth(&self, _alpha: usize, x: Vec3, t: f64) -> Vec3 {
        jvec_value(&self.momentum_growth.jet(x, t))
    }

    fn moment_growth(&self, _alpha: usize, x: Vec3, t: f64) -> JetVec {
        self.moment_growth.jet(x, t)
    }

    fn internal_energy(&self, alpha: usize, x: Vec3, t: f64) -> Jet {
        self.internal_energy[alpha].jet(x, t)
    }

    fn heat_flux(&self, alpha: usize, x: Vec3, t: f64) -> JetVec {
        self.heat_flux[alpha].jet(x, t)
    }

    fn heat_source(&self, _alpha: usize, x: Vec3, t: f64) -> f64 {
        self.heat_source.value(x, t)
    }

    fn entropy(&self, alpha: usize, x: Vec3, t: f64) -> Jet {
        self.entropy[alpha].jet(x, t)
    }

    fn entropy_flux(&self, alpha: usize, x: Vec3, t: f64) -> JetVec {
        self.entropy_flux[alpha].jet(x, t)
    }

    fn entropy_source(&self, alpha: usize, x: Vec3, t: f64) -> f64 {
        self.entropy_source[alpha].value(x, t)
    }

    fn metric(&self, alpha: usize, _x: Vec3, _t: f64) -> Mat3 {
        match &self.stress_law {
            StressLaw::Elastic { metric, .. } => mat_from_rows(&metric[alpha]),
            StressLaw::Free { .. } => Mat3::identity(),
        }
    }
}
