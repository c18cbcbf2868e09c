//! Per-constituent state, mixture aggregates and the mixture material-derivative identity.

use std::sync::OnceLock;

use crate::diffops::{self, Divergence, Gradient};
use crate::error::{Error, Result};
use crate::fields::{Field, FieldValue, Grid, Mat3, ScalarField, TensorField, Vec3, VectorField};

/// Relative vacuum floor: nodes with `rho <= RHO_FLOOR_FACTOR * mean(rho)` have no concentration.
pub const RHO_FLOOR_FACTOR: f64 = 1e-12;

/// Partial time derivatives at fixed position, when known.
#[derive(Clone, Debug, Default)]
pub struct TimeRates {
    pub rho: Option<ScalarField>,
    pub velocity: Option<VectorField>,
    pub internal_energy: Option<ScalarField>,
}

/// Every field attached to one constituent.
///
/// Body forces are per unit mass; the growth terms `momentum_growth`,
/// `moment_growth`, `energy_growth` and `entropy_growth` enter the balances
/// multiplied by the *mixture* density.
#[derive(Clone, Debug)]
pub struct ConstituentState {
    pub rho: ScalarField,
    pub velocity: VectorField,
    /// Acceleration following the constituent; reconstructed from `rates` when absent.
    pub accel: Option<VectorField>,
    pub stress: TensorField,
    pub body_force_ni: VectorField,
    pub body_force_in: VectorField,
    pub momentum_growth: VectorField,
    pub moment_growth: VectorField,
    pub mass_growth: ScalarField,
    pub internal_energy: ScalarField,
    pub energy_growth: ScalarField,
    pub heat_flux: VectorField,
    pub heat_source: ScalarField,
    pub entropy: ScalarField,
    pub entropy_growth: ScalarField,
    pub entropy_flux: VectorField,
    pub entropy_source: ScalarField,
    pub metric: TensorField,
    pub rates: TimeRates,
}

impl ConstituentState {
    /// Constituent with density `rho`, identity metric and every other field zero.
    pub fn at_rest(rho: ScalarField) -> Self {
        let g = *rho.grid();
        Self {
            rho,
            velocity: VectorField::zeros(g),
            accel: None,
            stress: TensorField::zeros(g),
            body_force_ni: VectorField::zeros(g),
            body_force_in: VectorField::zeros(g),
            momentum_growth: VectorField::zeros(g),
            moment_growth: VectorField::zeros(g),
            mass_growth: ScalarField::zeros(g),
            internal_energy: ScalarField::zeros(g),
            energy_growth: ScalarField::zeros(g),
            heat_flux: VectorField::zeros(g),
            heat_source: ScalarField::zeros(g),
            entropy: ScalarField::zeros(g),
            entropy_growth: ScalarField::zeros(g),
            entropy_flux: VectorField::zeros(g),
            entropy_source: ScalarField::zeros(g),
            metric: TensorField::constant(g, Mat3::identity()),
            rates: TimeRates::default(),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    /// Zero time rates: the state is declared steady.
    pub fn steady(mut self) -> Self {
        let g = *self.grid();
        self.rates = TimeRates {
            rho: Some(ScalarField::zeros(g)),
            velocity: Some(VectorField::zeros(g)),
            internal_energy: Some(ScalarField::zeros(g)),
        };
        self
    }

    pub fn body_force(&self) -> VectorField {
        &self.body_force_ni + &self.body_force_in
    }

    /// `x'' = d_t x' + (grad x') x'`, from the stored field or the velocity rate.
    pub fn acceleration(&self) -> Result<VectorField> {
        if let Some(a) = &self.accel {
            return Ok(a.clone());
        }
        let dv = self
            .rates
            .velocity
            .as_ref()
            .ok_or_else(|| Error::MissingTimeData("velocity rate needed to reconstruct the acceleration".into()))?;
        let conv = diffops::convective(&diffops::grad(&self.velocity), &self.velocity);
        Ok(dv + &conv)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.grid();
        macro_rules! check {
            ($($f:ident),*) => {$(
                if self.$f.grid() != g {
                    return Err(Error::GridMismatch);
                }
                if !self.$f.all_finite() {
                    return Err(Error::NonFinite(stringify!($f).into()));
                }
            )*};
        }
        check!(
            rho,
            velocity,
            stress,
            body_force_ni,
            body_force_in,
            momentum_growth,
            moment_growth,
            mass_growth,
            internal_energy,
            energy_growth,
            heat_flux,
            heat_source,
            entropy,
            entropy_growth,
            entropy_flux,
            entropy_source,
            metric
        );
        if self.rho.values().iter().any(|&r| r < 0.0) {
            return Err(Error::InvalidConfig("negative constituent density".into()));
        }
        for m in self.metric.values() {
            if (m - m.transpose()).norm() > 1e-12 * m.norm() || m.cholesky().is_none() {
                return Err(Error::InvalidConfig("metric is not symmetric positive definite".into()));
            }
        }
        Ok(())
    }
}

/// Concentration-weighted mixture quantities.
#[derive(Clone, Debug)]
pub struct Aggregates {
    pub rho: ScalarField,
    pub concentrations: Vec<ScalarField>,
    pub velocity: VectorField,
    pub diffusion: Vec<VectorField>,
    pub floor: f64,
}

#[derive(Clone, Debug)]
pub struct Totals {
    pub body_force: VectorField,
    pub body_force_ni: VectorField,
    pub body_force_in: VectorField,
    pub stress: TensorField,
}

/// Ordered constituents at one instant. Aggregates are computed once on first use.
#[derive(Debug)]
pub struct MixtureState {
    constituents: Vec<ConstituentState>,
    time: f64,
    cache: OnceLock<Aggregates>,
}

impl Clone for MixtureState {
    fn clone(&self) -> Self {
        let cache = OnceLock::new();
        if let Some(a) = self.cache.get() {
            let _ = cache.set(a.clone());
        }
        Self { constituents: self.constituents.clone(), time: self.time, cache }
    }
}

impl MixtureState {
    pub fn new(constituents: Vec<ConstituentState>, time: f64) -> Result<Self> {
        let first = constituents
            .first()
            .ok_or_else(|| Error::InvalidConfig("a mixture needs at least one constituent".into()))?;
        let g = *first.grid();
        for c in &constituents {
            if *c.grid() != g {
                return Err(Error::GridMismatch);
            }
            c.validate()?;
        }
        Ok(Self { constituents, time, cache: OnceLock::new() })
    }

    pub fn grid(&self) -> &Grid {
        self.constituents[0].grid()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.constituents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constituents.is_empty()
    }

    pub fn constituents(&self) -> &[ConstituentState] {
        &self.constituents
    }

    pub fn constituent(&self, alpha: usize) -> &ConstituentState {
        &self.constituents[alpha]
    }

    pub fn into_constituents(self) -> Vec<ConstituentState> {
        self.constituents
    }

    /// Rebuilds the state after editing its constituents; cached aggregates are discarded.
    pub fn modified(self, edit: impl FnOnce(&mut Vec<ConstituentState>)) -> Result<Self> {
        let time = self.time;
        let mut cs = self.constituents;
        edit(&mut cs);
        Self::new(cs, time)
    }

    pub fn aggregates(&self) -> Result<&Aggregates> {
        if let Some(a) = self.cache.get() {
            return Ok(a);
        }
        let a = compute_aggregates(&self.constituents)?;
        Ok(self.cache.get_or_init(|| a))
    }

    pub fn totals(&self) -> Result<Totals> {
        let agg = self.aggregates()?;
        let g = *self.grid();
        let mut ni = VectorField::zeros(g);
        let mut inn = VectorField::zeros(g);
        let mut stress = TensorField::zeros(g);
        for (c, conc) in self.constituents.iter().zip(&agg.concentrations) {
            ni = &ni + &conc.times(&c.body_force_ni);
            inn = &inn + &conc.times(&c.body_force_in);
            stress = &stress + &c.stress;
        }
        Ok(Totals { body_force: &ni + &inn, body_force_ni: ni, body_force_in: inn, stress })
    }

    /// `d_t rho` of the mixture, from the constituent density rates.
    pub fn density_rate(&self) -> Result<ScalarField> {
        let mut acc = ScalarField::zeros(*self.grid());
        for (a, c) in self.constituents.iter().enumerate() {
            let r = c
                .rates
                .rho
                .as_ref()
                .ok_or_else(|| Error::MissingTimeData(format!("density rate of constituent {a}")))?;
            acc = &acc + r;
        }
        Ok(acc)
    }

    /// `d_t c_a = (d_t rho_a - c_a d_t rho) / rho`.
    pub fn concentration_rates(&self) -> Result<Vec<ScalarField>> {
        let agg = self.aggregates()?;
        let drho = self.density_rate()?;
        let g = *self.grid();
        self.constituents
            .iter()
            .zip(&agg.concentrations)
            .map(|(c, conc)| {
                let dr = c.rates.rho.as_ref().expect("checked by density_rate");
                Ok(ScalarField::from_index_fn(g, |n| (dr.get(n) - conc.get(n) * drho.get(n)) / agg.rho.get(n)))
            })
            .collect()
    }

    /// `d_t v` at fixed position.
    pub fn velocity_rate(&self) -> Result<VectorField> {
        let agg = self.aggregates()?;
        let dc = self.concentration_rates()?;
        let mut acc = VectorField::zeros(*self.grid());
        for (a, c) in self.constituents.iter().enumerate() {
            let dv = c
                .rates
                .velocity
                .as_ref()
                .ok_or_else(|| Error::MissingTimeData(format!("velocity rate of constituent {a}")))?;
            acc = &acc + &dc[a].times(&c.velocity);
            acc = &acc + &agg.concentrations[a].times(dv);
        }
        Ok(acc)
    }

    /// Mixture acceleration `a = d_t v + (grad v) v`.
    pub fn acceleration(&self) -> Result<VectorField> {
        let v = &self.aggregates()?.velocity;
        Ok(&self.velocity_rate()? + &diffops::convective(&diffops::grad(v), v))
    }
}

fn compute_aggregates(cs: &[ConstituentState]) -> Result<Aggregates> {
    let g = *cs[0].grid();
    let mut rho = ScalarField::zeros(g);
    for c in cs {
        rho = &rho + &c.rho;
    }
    let mean = rho.values().iter().sum::<f64>() / g.node_count() as f64;
    let floor = RHO_FLOOR_FACTOR * mean;
    let bad: Vec<usize> = rho.values().iter().enumerate().filter(|(_, &r)| r <= floor).map(|(n, _)| n).collect();
    if !bad.is_empty() {
        return Err(Error::FloorViolation { nodes: bad });
    }
    let concentrations: Vec<ScalarField> =
        cs.iter().map(|c| c.rho.zip_map(&rho, |a, r| a / r).expect("same grid")).collect();
    let mut velocity = VectorField::zeros(g);
    for (c, conc) in cs.iter().zip(&concentrations) {
        velocity = &velocity + &conc.times(&c.velocity);
    }
    let diffusion = cs.iter().map(|c| &c.velocity - &velocity).collect();
    Ok(Aggregates { rho: rho.with_unit("kg/m^3"), concentrations, velocity, diffusion, floor })
}

/// Fields that can be transported by a velocity: scalars and vectors.
pub trait Transported: Gradient
where
    <Self as Gradient>::Grad: Divergence<Div = Self>,
{
    /// `(grad f) w`
    fn directional(grad: Self::Grad, w: Vec3) -> Self;
    /// `f (x) u`
    fn flux(self, u: Vec3) -> Self::Grad;
}

impl Transported for f64 {
    fn directional(grad: Vec3, w: Vec3) -> f64 {
        grad.dot(&w)
    }
    fn flux(self, u: Vec3) -> Vec3 {
        u * self
    }
}

impl Transported for Vec3 {
    fn directional(grad: Mat3, w: Vec3) -> Vec3 {
        grad * w
    }
    fn flux(self, u: Vec3) -> Mat3 {
        self * u.transpose()
    }
}

/// One constituent's `lambda_a` with its partial time derivative.
#[derive(Clone, Debug)]
pub struct ConstituentQuantity<T: FieldValue> {
    pub value: Field<T>,
    pub rate: Field<T>,
}

/// Both sides of the mixture material-derivative identity.
#[derive(Clone, Debug)]
pub struct MaterialIdentity<T: FieldValue> {
    /// `lambda_dot = d_t lambda + (grad lambda) v` for `lambda = sum c_a lambda_a`.
    pub material_rate: Field<T>,
    /// Right side with concentration-weighted flux `sum c_a lambda_a (x) u_a`.
    pub residual_concentration_weighted: Field<T>,
    /// Right side with density-weighted flux `sum rho_a lambda_a (x) u_a`.
    pub residual_density_weighted: Field<T>,
}

pub fn material_derivative_identity_residual<T>(
    m: &MixtureState,
    lambda: &[ConstituentQuantity<T>],
) -> Result<MaterialIdentity<T>>
where
    T: Transported,
    <T as Gradient>::Grad: Divergence<Div = T>,
{
    if lambda.len() != m.len() {
        return Err(Error::InvalidConfig(format!("{} quantities for {} constituents", lambda.len(), m.len())));
    }
    let agg = m.aggregates()?;
    let dc = m.concentration_rates()?;
    let g = *m.grid();
    for q in lambda {
        q.value.check_grid(&agg.rho)?;
        q.rate.check_grid(&agg.rho)?;
    }

    let mut mix = Field::<T>::zeros(g);
    let mut mix_rate = Field::<T>::zeros(g);
    let mut sum_const_rate = Field::<T>::zeros(g);
    let mut flux_c = Field::<T::Grad>::zeros(g);
    let mut flux_rho = Field::<T::Grad>::zeros(g);
    let mut growth = Field::<T>::zeros(g);
    for (a, (c, q)) in m.constituents().iter().zip(lambda).enumerate() {
        let conc = &agg.concentrations[a];
        let u = &agg.diffusion[a];
        mix = &mix + &conc.times(&q.value);
        mix_rate = &mix_rate + &(&dc[a].times(&q.value) + &conc.times(&q.rate));
        let grad_l = diffops::grad(&q.value);
        let follow = Field::from_index_fn(g, |n| q.rate.get(n) + T::directional(grad_l.get(n), c.velocity.get(n)));
        sum_const_rate = &sum_const_rate + &conc.times(&follow);
        flux_c = &flux_c + &Field::from_index_fn(g, |n| q.value.get(n).flux(u.get(n)) * conc.get(n));
        flux_rho = &flux_rho + &Field::from_index_fn(g, |n| q.value.get(n).flux(u.get(n)) * c.rho.get(n));
        growth = &growth + &c.mass_growth.times(&q.value);
    }
    let grad_mix = diffops::grad(&mix);
    let v = &agg.velocity;
    let material_rate = Field::from_index_fn(g, |n| mix_rate.get(n) + T::directional(grad_mix.get(n), v.get(n)));
    let inv_rho = agg.rho.map(|r| 1.0 / r);
    let rhs = |flux: &Field<T::Grad>| {
        let d = inv_rho.times(&diffops::div(flux));
        &(&sum_const_rate - &d) + &growth
    };
    Ok(MaterialIdentity {
        residual_concentration_weighted: &material_rate - &rhs(&flux_c),
        residual_density_weighted: &material_rate - &rhs(&flux_rho),
        material_rate,
    })
}
