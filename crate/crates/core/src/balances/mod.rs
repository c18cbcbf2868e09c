//! Pointwise residuals of the mass, momentum and moment-of-momentum balances.
//!
//! All evaluators use the discrete operators of [`crate::diffops`] on the
//! sampled state. Time derivatives come from the state's [`TimeRates`] or its
//! stored accelerations.
//!
//! [`TimeRates`]: crate::mixture::TimeRates

pub mod closure;

use serde::{Deserialize, Serialize};

use crate::diffops::{self, cross_tensor, skw};
use crate::error::{Error, Result};
use crate::fields::{Mat3, ScalarField, TensorField, VectorField};
use crate::mixture::MixtureState;

pub use closure::{close_state_via_balances, BinaryScenario, Closure, ClosureResiduals, Manufactured, StressLaw};

/// How the skew part of a constituent stress is tied to its growth of moment of momentum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewConvention {
    /// `T - T^T = -rho (mu x)`, i.e. `skw T = -rho/2 (mu x)`.
    #[default]
    Difference,
    /// `skw T = -rho (mu x)`.
    SkewPart,
}

impl SkewConvention {
    pub const ALL: [SkewConvention; 2] = [SkewConvention::Difference, SkewConvention::SkewPart];

    /// Factor in `(T - T^T) + kappa rho (mu x)`.
    pub fn kappa(self) -> f64 {
        match self {
            Self::Difference => 1.0,
            Self::SkewPart => 2.0,
        }
    }

    /// Factor in `skw T + kappa' rho (mu x)`.
    pub fn kappa_prime(self) -> f64 {
        0.5 * self.kappa()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Difference => "difference",
            Self::SkewPart => "skew_part",
        }
    }
}

/// Diffusive stress in the mixture momentum balance `rho b_ni + div(T + D) - rho a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusiveStress {
    /// `D = + sum c_a u_a (x) u_a`
    ConcentrationWeighted,
    /// `D = + sum rho_a u_a (x) u_a`
    DensityWeighted,
    /// `D = - sum rho_a u_a (x) u_a`
    DensityWeightedNegative,
}

impl DiffusiveStress {
    pub const ALL: [DiffusiveStress; 3] =
        [Self::ConcentrationWeighted, Self::DensityWeighted, Self::DensityWeightedNegative];

    pub fn name(self) -> &'static str {
        match self {
            Self::ConcentrationWeighted => "concentration_weighted",
            Self::DensityWeighted => "density_weighted",
            Self::DensityWeightedNegative => "density_weighted_negative",
        }
    }
}

fn rates_rho(m: &MixtureState, alpha: usize) -> Result<&ScalarField> {
    m.constituent(alpha)
        .rates
        .rho
        .as_ref()
        .ok_or_else(|| Error::MissingTimeData(format!("density rate of constituent {alpha}")))
}

fn check_alpha(m: &MixtureState, alpha: usize) -> Result<()> {
    if alpha >= m.len() {
        return Err(Error::InvalidConfig(format!("constituent {alpha} out of range ({} present)", m.len())));
    }
    Ok(())
}

fn total_density(m: &MixtureState) -> ScalarField {
    let mut rho = ScalarField::zeros(*m.grid());
    for c in m.constituents() {
        rho = &rho + &c.rho;
    }
    rho
}

/// `d_t rho_a + div(rho_a x'_a) - rho c_a`.
pub fn mass_residual_constituent(m: &MixtureState, alpha: usize) -> Result<ScalarField> {
    check_alpha(m, alpha)?;
    let c = m.constituent(alpha);
    let flux = c.rho.times(&c.velocity);
    let rho = total_density(m);
    Ok(&(rates_rho(m, alpha)? + &diffops::div(&flux)) - &rho.times(&c.mass_growth))
}

/// `(rho_dot + rho div v, sum c_a)` with `rho_dot = d_t rho + grad rho . v`.
pub fn mass_residual_mixture(m: &MixtureState) -> Result<(ScalarField, ScalarField)> {
    let agg = m.aggregates()?;
    let drho = m.density_rate()?;
    let v = &agg.velocity;
    let material = &drho + &diffops::dot(&diffops::grad(&agg.rho), v);
    let continuity = &material + &agg.rho.times(&diffops::div(v));
    let mut sum = ScalarField::zeros(*m.grid());
    for c in m.constituents() {
        sum = &sum + &c.mass_growth;
    }
    Ok((continuity, sum))
}

/// `b_in = -x'' - (rho / rho_a) c_a x'`, the inertial body force that makes the kinetic-energy rule hold.
pub fn inertial_body_force(m: &MixtureState, alpha: usize) -> Result<VectorField> {
    check_alpha(m, alpha)?;
    let agg = m.aggregates()?;
    let c = m.constituent(alpha);
    let bad: Vec<usize> = c.rho.values().iter().enumerate().filter(|(_, &r)| r <= agg.floor).map(|(n, _)| n).collect();
    if !bad.is_empty() {
        return Err(Error::FloorViolation { nodes: bad });
    }
    let accel = c.acceleration()?;
    let g = *m.grid();
    Ok(VectorField::from_index_fn(g, |n| {
        -accel.get(n) - c.velocity.get(n) * (agg.rho.get(n) / c.rho.get(n) * c.mass_growth.get(n))
    }))
}

/// `rho_a b_ni + div T_a + rho m_a - rho_a x'' - rho c_a x'`.
pub fn momentum_residual_constituent(m: &MixtureState, alpha: usize) -> Result<VectorField> {
    check_alpha(m, alpha)?;
    let c = m.constituent(alpha);
    let rho = total_density(m);
    let accel = c.acceleration()?;
    let div_t = diffops::div(&c.stress);
    let g = *m.grid();
    Ok(VectorField::from_index_fn(g, |n| {
        c.body_force_ni.get(n) * c.rho.get(n) + div_t.get(n) + c.momentum_growth.get(n) * rho.get(n)
            - accel.get(n) * c.rho.get(n)
            - c.velocity.get(n) * (rho.get(n) * c.mass_growth.get(n))
    }))
}

/// Static form `rho_a (b_ni + b_in) + div T_a + rho m_a`.
pub fn momentum_residual_static(m: &MixtureState, alpha: usize) -> Result<VectorField> {
    check_alpha(m, alpha)?;
    let c = m.constituent(alpha);
    let rho = total_density(m);
    let div_t = diffops::div(&c.stress);
    let b = c.body_force();
    Ok(VectorField::from_index_fn(*m.grid(), |n| {
        b.get(n) * c.rho.get(n) + div_t.get(n) + c.momentum_growth.get(n) * rho.get(n)
    }))
}

/// `(T_a - T_a^T) + kappa rho (mu_a x)`.
pub fn moment_residual_constituent(m: &MixtureState, alpha: usize, conv: SkewConvention) -> Result<TensorField> {
    check_alpha(m, alpha)?;
    let c = m.constituent(alpha);
    let rho = total_density(m);
    let k = conv.kappa();
    Ok(TensorField::from_index_fn(*m.grid(), |n| {
        let t = c.stress.get(n);
        t - t.transpose() + cross_tensor(&c.moment_growth.get(n)) * (k * rho.get(n))
    }))
}

/// `(sum m_a, sum mu_a)`.
pub fn growth_self_equilibration(m: &MixtureState) -> (VectorField, VectorField) {
    let g = *m.grid();
    let mut sm = VectorField::zeros(g);
    let mut smu = VectorField::zeros(g);
    for c in m.constituents() {
        sm = &sm + &c.momentum_growth;
        smu = &smu + &c.moment_growth;
    }
    (sm, smu)
}

pub fn diffusive_stress(m: &MixtureState, variant: DiffusiveStress) -> Result<TensorField> {
    let agg = m.aggregates()?;
    let mut d = TensorField::zeros(*m.grid());
    for (a, c) in m.constituents().iter().enumerate() {
        let u = &agg.diffusion[a];
        let w = match variant {
            DiffusiveStress::ConcentrationWeighted => &agg.concentrations[a],
            _ => &c.rho,
        };
        d = &d + &w.times(&diffops::outer(u, u));
    }
    if variant == DiffusiveStress::DensityWeightedNegative {
        d = -&d;
    }
    Ok(d)
}

/// `rho b_ni + div(T + D) - rho a` for the chosen diffusive stress `D`.
pub fn momentum_residual_mixture(m: &MixtureState, variant: DiffusiveStress) -> Result<VectorField> {
    let agg = m.aggregates()?;
    let totals = m.totals()?;
    let a = m.acceleration()?;
    let d = diffusive_stress(m, variant)?;
    let div = diffops::div(&(&totals.stress + &d));
    Ok(&(&agg.rho.times(&totals.body_force_ni) + &div) - &agg.rho.times(&a))
}

/// Sum of the constituent momentum residuals, the reference for the mixture variants.
pub fn momentum_summation_oracle(m: &MixtureState) -> Result<VectorField> {
    let mut acc = VectorField::zeros(*m.grid());
    for a in 0..m.len() {
        acc = &acc + &momentum_residual_constituent(m, a)?;
    }
    Ok(acc)
}

/// `skw(sum T_a)`.
pub fn moment_residual_mixture(m: &MixtureState) -> TensorField {
    let mut t = TensorField::zeros(*m.grid());
    for c in m.constituents() {
        t = &t + &c.stress;
    }
    t.map(|x: Mat3| skw(&x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Grid, Vec3};
    use crate::mixture::ConstituentState;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::periodic_cube(16, 2.0 * PI).unwrap()
    }

    fn still(rho: f64) -> ConstituentState {
        ConstituentState::at_rest(ScalarField::constant(grid(), rho)).steady()
    }

    #[test]
    fn static_uniform_state_is_balanced() {
        let m = MixtureState::new(vec![still(1.0), still(2.0)], 0.0).unwrap();
        assert_eq!(mass_residual_constituent(&m, 0).unwrap().max_norm(), 0.0);
        assert_eq!(momentum_residual_constituent(&m, 1).unwrap().max_norm(), 0.0);
        assert_eq!(inertial_body_force(&m, 0).unwrap().max_norm(), 0.0);
        for v in DiffusiveStress::ALL {
            assert_eq!(momentum_residual_mixture(&m, v).unwrap().max_norm(), 0.0);
        }
        let (cont, sum) = mass_residual_mixture(&m).unwrap();
        assert_eq!(cont.max_norm() + sum.max_norm(), 0.0);
    }

    #[test]
    fn exponential_growth_plug_in() {
        let g = grid();
        let k = 0.3;
        let mut c = still(2.0);
        c.rates.rho = Some(ScalarField::constant(g, 2.0 * k));
        c.mass_growth = ScalarField::constant(g, k * 2.0 / 3.0);
        let m = MixtureState::new(vec![c, still(1.0)], 0.0).unwrap();
        assert!(mass_residual_constituent(&m, 0).unwrap().max_norm() < 1e-15);
    }

    #[test]
    fn opposite_mass_growths_sum_to_zero() {
        let g = grid();
        let mut a = still(1.0);
        let mut b = still(1.0);
        a.mass_growth = ScalarField::from_fn(g, |x| x[0].sin());
        b.mass_growth = -&a.mass_growth;
        let m = MixtureState::new(vec![a, b], 0.0).unwrap();
        assert_eq!(mass_residual_mixture(&m).unwrap().1.max_norm(), 0.0);
    }

    #[test]
    fn constant_acceleration_gives_opposite_inertial_force() {
        let g = grid();
        let mut c = still(1.0);
        c.accel = Some(VectorField::constant(g, Vec3::new(1.0, -2.0, 0.5)));
        let m = MixtureState::new(vec![c], 0.0).unwrap();
        let b = inertial_body_force(&m, 0).unwrap();
        assert!((b.get(11) - Vec3::new(-1.0, 2.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn hydrostatic_equilibrium() {
        let g = Grid::cell_centered_box(32, 0.0, 1.0, 2).unwrap();
        let p = |z: f64| 1.0 + 0.5 * (3.0 * z).sin();
        let dp = |z: f64| 1.5 * (3.0 * z).cos();
        let mut c = ConstituentState::at_rest(ScalarField::constant(g, 1.0)).steady();
        c.stress = TensorField::from_fn(g, |x| -Mat3::identity() * p(x[2]));
        c.body_force_ni = VectorField::from_fn(g, |x| Vec3::new(0.0, 0.0, dp(x[2])));
        let m = MixtureState::new(vec![c], 0.0).unwrap();
        let r = momentum_residual_constituent(&m, 0).unwrap();
        assert!(r.max_norm() < 2.5 * (3.0f64).powi(3) * g.spacing().powi(2));
    }

    #[test]
    fn moment_residual_examples() {
        let g = grid();
        let mu = Vec3::z();
        let mut c = still(1.0);
        c.moment_growth = VectorField::constant(g, mu);
        c.stress = TensorField::constant(g, -cross_tensor(&mu) * 0.5);
        let m = MixtureState::new(vec![c.clone()], 0.0).unwrap();
        assert!(moment_residual_constituent(&m, 0, SkewConvention::Difference).unwrap().max_norm() < 1e-15);

        let dw = Mat3::new(0.0, 0.3, -1.0, -0.3, 0.0, 2.0, 1.0, -2.0, 0.0);
        let base = moment_residual_constituent(&m, 0, SkewConvention::SkewPart).unwrap();
        c.stress = &c.stress + &TensorField::constant(g, dw);
        let m2 = MixtureState::new(vec![c], 0.0).unwrap();
        let pert = moment_residual_constituent(&m2, 0, SkewConvention::SkewPart).unwrap();
        assert!((&(&pert - &base) - &TensorField::constant(g, dw * 2.0)).max_norm() < 1e-15);
    }

    #[test]
    fn opposite_skew_parts_cancel_in_the_mixture() {
        let g = grid();
        let w = Mat3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let mut a = still(1.0);
        let mut b = still(1.0);
        a.stress = TensorField::constant(g, Mat3::identity() + w);
        b.stress = TensorField::constant(g, Mat3::identity() * 2.0 - w);
        let m = MixtureState::new(vec![a, b], 0.0).unwrap();
        assert!(moment_residual_mixture(&m).max_norm() < 1e-15);
    }

    #[test]
    fn comoving_variants_coincide() {
        let g = grid();
        let mut cs = Vec::new();
        for rho in [1.0, 3.0] {
            let mut c = ConstituentState::at_rest(ScalarField::from_fn(g, |x| rho + 0.2 * x[0].sin()));
            c.velocity = VectorField::from_fn(g, |x| Vec3::new(x[1].cos(), 0.3, x[0].sin()));
            c.stress = TensorField::from_fn(g, |x| Mat3::identity() * x[2].cos());
            cs.push(c.steady());
        }
        let m = MixtureState::new(cs, 0.0).unwrap();
        let r0 = momentum_residual_mixture(&m, DiffusiveStress::ConcentrationWeighted).unwrap();
        for v in DiffusiveStress::ALL {
            assert!((&momentum_residual_mixture(&m, v).unwrap() - &r0).max_norm() < 1e-14);
        }
    }

    #[test]
    fn doubling_growth_adds_rho_m() {
        let g = grid();
        let mut c = still(2.0);
        c.momentum_growth = VectorField::from_fn(g, |x| Vec3::new(x[0].sin(), 1.0, 0.0));
        let m1 = MixtureState::new(vec![c.clone(), still(1.0)], 0.0).unwrap();
        let r1 = momentum_residual_constituent(&m1, 0).unwrap();
        let mut c2 = c.clone();
        c2.momentum_growth = &c.momentum_growth * 2.0;
        let m2 = MixtureState::new(vec![c2, still(1.0)], 0.0).unwrap();
        let r2 = momentum_residual_constituent(&m2, 0).unwrap();
        let expect = &c.momentum_growth * 3.0;
        assert!((&(&r2 - &r1) - &expect).max_norm() < 1e-14);
    }
}
