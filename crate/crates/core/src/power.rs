//! External power, rigid changes of observer and the invariance gaps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffops;
use crate::error::{Error, Result};
use crate::fields::{integrate_surface_with, integrate_volume_with, Grid, Part, ScalarField, Vec3, VectorField};
use crate::mixture::MixtureState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverKind {
    General,
    /// Constant translation velocity, no rotation.
    Galilean,
    /// Constant angular velocity, no translation.
    Rotational,
}

/// Rigid change of observer `x'* = x' + c(t) + qdot(t) x (x - x0)`.
///
/// `c` and `qdot` are polynomials in time; entry `k` multiplies `t^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverChange {
    pub kind: ObserverKind,
    pub translation: Vec<Vec3>,
    pub rotation: Vec<Vec3>,
    pub pivot: Vec3,
}

fn poly(coeffs: &[Vec3], t: f64) -> Vec3 {
    coeffs.iter().rev().fold(Vec3::zeros(), |acc, c| acc * t + c)
}

fn poly_rate(coeffs: &[Vec3], t: f64) -> Vec3 {
    coeffs.iter().enumerate().skip(1).rev().fold(Vec3::zeros(), |acc, (k, c)| acc * t + c * k as f64)
}

impl ObserverChange {
    pub fn identity() -> Self {
        Self::galilean(Vec3::zeros())
    }

    pub fn galilean(c: Vec3) -> Self {
        Self { kind: ObserverKind::Galilean, translation: vec![c], rotation: vec![], pivot: Vec3::zeros() }
    }

    pub fn rotational(qdot: Vec3, pivot: Vec3) -> Self {
        Self { kind: ObserverKind::Rotational, translation: vec![], rotation: vec![qdot], pivot }
    }

    pub fn general(translation: Vec<Vec3>, rotation: Vec<Vec3>, pivot: Vec3) -> Self {
        Self { kind: ObserverKind::General, translation, rotation, pivot }
    }

    pub fn validate(&self) -> Result<()> {
        let time_dependent = |c: &[Vec3]| c.iter().skip(1).any(|v| v.amax() > 0.0);
        let nonzero = |c: &[Vec3]| c.iter().any(|v| v.amax() > 0.0);
        let ok = match self.kind {
            ObserverKind::General => true,
            ObserverKind::Galilean => !time_dependent(&self.translation) && !nonzero(&self.rotation),
            ObserverKind::Rotational => !nonzero(&self.translation) && !time_dependent(&self.rotation),
        };
        let finite = self.translation.iter().chain(&self.rotation).all(|v| v.iter().all(|x| x.is_finite()));
        if !ok || !finite || !self.pivot.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidConfig(format!("observer change inconsistent with kind {:?}", self.kind)));
        }
        Ok(())
    }

    pub fn translation_at(&self, t: f64) -> Vec3 {
        poly(&self.translation, t)
    }

    pub fn rotation_at(&self, t: f64) -> Vec3 {
        poly(&self.rotation, t)
    }

    pub fn velocity_at(&self, x: Vec3, t: f64) -> Vec3 {
        self.translation_at(t) + self.rotation_at(t).cross(&(x - self.pivot))
    }

    /// `d_t v_R` at fixed position.
    pub fn velocity_rate_at(&self, x: Vec3, t: f64) -> Vec3 {
        poly_rate(&self.translation, t) + poly_rate(&self.rotation, t).cross(&(x - self.pivot))
    }
}

pub fn rigid_velocity(o: &ObserverChange, grid: &Grid, t: f64) -> VectorField {
    VectorField::from_fn(*grid, |x| o.velocity_at(x, t)).with_unit("m/s")
}

/// Adds the rigid field to every constituent velocity.
///
/// Velocity rates pick up `d_t v_R`; stored accelerations are dropped and
/// are reconstructed from the rates when needed.
pub fn transform_velocities(m: &MixtureState, o: &ObserverChange, t: f64) -> Result<MixtureState> {
    let g = *m.grid();
    let vr = rigid_velocity(o, &g, t);
    let dvr = VectorField::from_fn(g, |x| o.velocity_rate_at(x, t));
    m.clone().modified(|cs| {
        for c in cs.iter_mut() {
            c.velocity = &c.velocity + &vr;
            c.accel = None;
            if let Some(dv) = c.rates.velocity.as_mut() {
                *dv = &*dv + &dvr;
            }
        }
    })
}

fn check(m: &MixtureState, alpha: usize, w: Option<&VectorField>) -> Result<()> {
    if alpha >= m.len() {
        return Err(Error::InvalidConfig(format!("constituent {alpha} out of range")));
    }
    if let Some(w) = w {
        w.check_grid(&m.constituent(alpha).rho)?;
    }
    Ok(())
}

fn total_density(m: &MixtureState) -> ScalarField {
    m.constituents().iter().fold(ScalarField::zeros(*m.grid()), |acc, c| &acc + &c.rho)
}

/// `int rho_a b_a . w + int_d (T_a n) . w + int rho m_a . w + int rho mu_a . curl w`, with `w = x'_a` by default.
pub fn power_constituent(m: &MixtureState, alpha: usize, part: &Part, w: Option<&VectorField>) -> Result<f64> {
    check(m, alpha, w)?;
    let c = m.constituent(alpha);
    let w = w.unwrap_or(&c.velocity);
    let g = *m.grid();
    part_fits(part, &g)?;
    let rho = total_density(m);
    let b = c.body_force();
    let curl = diffops::curl(w);
    let volume = integrate_volume_with(&g, part, |n| {
        c.rho.get(n) * b.get(n).dot(&w.get(n))
            + rho.get(n) * c.momentum_growth.get(n).dot(&w.get(n))
            + rho.get(n) * c.moment_growth.get(n).dot(&curl.get(n))
    });
    let surface = integrate_surface_with(&g, part, |n, normal| (c.stress.get(n) * normal).dot(&w.get(n)));
    Ok(volume + surface)
}

/// `int rho b . v + int_d (T n) . v` with mixture totals, `v` the mixture velocity by default.
pub fn power_mixture(m: &MixtureState, part: &Part, w: Option<&VectorField>) -> Result<f64> {
    let g = *m.grid();
    part_fits(part, &g)?;
    if let Some(w) = w {
        w.check_grid(&m.constituent(0).rho)?;
    }
    let agg = m.aggregates()?;
    let totals = m.totals()?;
    let w = w.unwrap_or(&agg.velocity);
    let volume = integrate_volume_with(&g, part, |n| agg.rho.get(n) * totals.body_force.get(n).dot(&w.get(n)));
    let surface = integrate_surface_with(&g, part, |n, normal| (totals.stress.get(n) * normal).dot(&w.get(n)));
    Ok(volume + surface)
}

fn part_fits(part: &Part, g: &Grid) -> Result<()> {
    Part::new(g, part.lo(), part.hi()).map(|_| ())
}

/// Coefficients of `c` and `qdot` in `P(x' + v_R) - P(x')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceGaps {
    pub force: Vec3,
    pub couple: Vec3,
}

/// Force gap `int rho_a b_a + int_d T_a n + int rho m_a` and couple gap
/// `int r x rho_a b_a + int_d r x T_a n + int r x rho m_a + 2 int rho mu_a`, `r = x - x0`.
///
/// The weight 2 on the moment growth is `curl(qdot x r) = 2 qdot`, which makes
/// `P(x'*) - P(x') = c . force + qdot . couple` an identity of the quadrature.
pub fn invariance_residual(m: &MixtureState, alpha: usize, part: &Part, o: &ObserverChange) -> Result<InvarianceGaps> {
    check(m, alpha, None)?;
    let g = *m.grid();
    part_fits(part, &g)?;
    let c = m.constituent(alpha);
    let rho = total_density(m);
    let b = c.body_force();
    let x0 = o.pivot;
    let density = |n: usize| b.get(n) * c.rho.get(n) + c.momentum_growth.get(n) * rho.get(n);
    let force =
        integrate_volume_with(&g, part, density) + integrate_surface_with(&g, part, |n, nrm| c.stress.get(n) * nrm);
    let couple =
        integrate_volume_with(&g, part, |n| {
            (g.position_of(n) - x0).cross(&density(n)) + c.moment_growth.get(n) * (2.0 * rho.get(n))
        }) + integrate_surface_with(&g, part, |n, nrm| (g.position_of(n) - x0).cross(&(c.stress.get(n) * nrm)));
    Ok(InvarianceGaps { force, couple })
}

/// Total-power defect: `P_mix(v) - sum_a P_a(v)`.
pub struct TotalPowerResidual<'a> {
    /// `int rho sum m_a`
    pub force: Vec3,
    /// `int r x rho sum m_a + 2 int rho sum mu_a`
    pub couple: Vec3,
    state: &'a MixtureState,
    part: Part,
}

impl TotalPowerResidual<'_> {
    /// For a rigid `w` this equals `-(c . force + qdot . couple)`.
    pub fn raw(&self, w: &VectorField) -> Result<f64> {
        let mut p = power_mixture(self.state, &self.part, Some(w))?;
        for a in 0..self.state.len() {
            p -= power_constituent(self.state, a, &self.part, Some(w))?;
        }
        Ok(p)
    }
}

pub fn total_power_residual<'a>(m: &'a MixtureState, part: &Part, pivot: Vec3) -> Result<TotalPowerResidual<'a>> {
    let g = *m.grid();
    part_fits(part, &g)?;
    let rho = total_density(m);
    let mut sm = VectorField::zeros(g);
    let mut smu = VectorField::zeros(g);
    for c in m.constituents() {
        sm = &sm + &c.momentum_growth;
        smu = &smu + &c.moment_growth;
    }
    let force = integrate_volume_with(&g, part, |n| sm.get(n) * rho.get(n));
    let couple = integrate_volume_with(&g, part, |n| {
        (g.position_of(n) - pivot).cross(&(sm.get(n) * rho.get(n))) + smu.get(n) * (2.0 * rho.get(n))
    });
    Ok(TotalPowerResidual { force, couple, state: m, part: *part })
}

fn unit_ball(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm_squared() <= 1.0 {
            return v;
        }
    }
}

/// Three axis translations, three axis rotations about `pivot`, then `random` draws of `(c, qdot)` from unit balls.
pub fn sample_observers(seed: u64, random: usize, pivot: Vec3) -> Vec<ObserverChange> {
    let mut out = Vec::with_capacity(6 + random);
    for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
        out.push(ObserverChange::galilean(axis));
    }
    for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
        out.push(ObserverChange::rotational(axis, pivot));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let c = unit_ball(&mut rng);
        let q = unit_ball(&mut rng);
        out.push(ObserverChange::general(vec![c], vec![q], pivot));
    }
    out
}

/// Physical bounds of nested cubes at three scales around `placements` random centres.
///
/// Bounds are aligned with the cells of `grid` and of every refinement of it,
/// so the same parts can be evaluated across a convergence study.
pub fn sample_part_bounds(grid: &Grid, seed: u64, placements: usize) -> Result<Vec<(Vec3, Vec3)>> {
    let margin = crate::fields::PART_MARGIN;
    let dims = grid.dims();
    let usable = dims.iter().map(|&n| n.saturating_sub(2 * margin)).min().unwrap_or(0);
    let big = (usable / 3).max(1);
    if 2 * big > usable {
        return Err(Error::InvalidGrid("grid too small to sample parts".into()));
    }
    let halves = [big, (big / 2).max(1), (big / 4).max(1)];
    let h = grid.spacing();
    let o = grid.origin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * placements);
    for _ in 0..placements {
        let c: [usize; 3] = [0, 1, 2].map(|a| rng.gen_range(margin + big..=dims[a] - margin - big));
        for hw in halves {
            let lo = Vec3::from_fn(|a, _| o[a] - 0.5 * h + (c[a] - hw) as f64 * h);
            let hi = Vec3::from_fn(|a, _| o[a] - 0.5 * h + (c[a] + hw) as f64 * h);
            out.push((lo, hi));
        }
    }
    Ok(out)
}

pub fn sample_parts(grid: &Grid, seed: u64, placements: usize) -> Result<Vec<Part>> {
    sample_part_bounds(grid, seed, placements)?.into_iter().map(|(lo, hi)| Part::from_bounds(grid, lo, hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balances::{close_state_via_balances, BinaryScenario, SkewConvention};
    use crate::fields::{Mat3, TensorField};
    use crate::mixture::ConstituentState;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::periodic_cube(n, 2.0 * PI).unwrap()
    }

    fn unbalanced(g: Grid) -> MixtureState {
        let mut cs = Vec::new();
        for a in 0..2 {
            let s = a as f64;
            let mut c = ConstituentState::at_rest(ScalarField::from_fn(g, |x| 1.0 + 0.3 * (x[0] + s).sin()));
            c.velocity = VectorField::from_fn(g, |x| Vec3::new(x[1].sin(), (x[2] * 2.0).cos(), s + x[0].cos()));
            c.stress =
                TensorField::from_fn(g, |x| Mat3::new(x[0].cos(), 0.2, x[1].sin(), s, 1.0, 0.0, 0.3, x[2].sin(), 2.0));
            c.body_force_ni = VectorField::from_fn(g, |x| Vec3::new(0.1, x[2].sin(), s));
            c.momentum_growth = VectorField::from_fn(g, |x| Vec3::new(x[1].cos(), 0.5, -s));
            c.moment_growth = VectorField::from_fn(g, |x| Vec3::new(0.2 * s, x[0].sin(), 0.1));
            cs.push(c);
        }
        MixtureState::new(cs, 0.0).unwrap()
    }

    #[test]
    fn rigid_velocity_examples() {
        let g = grid(16);
        let v = rigid_velocity(&ObserverChange::galilean(Vec3::x()), &g, 0.0);
        assert!(v.values().iter().all(|w| (w - Vec3::x()).norm() == 0.0));
        let o = ObserverChange::rotational(Vec3::new(0.0, 0.0, 2.0), Vec3::zeros());
        assert!((o.velocity_at(Vec3::new(1.5, 0.0, 0.0), 0.0) - Vec3::new(0.0, 3.0, 0.0)).norm() < 1e-15);
        let q = Vec3::new(0.3, -0.7, 0.2);
        let curl = diffops::curl(&rigid_velocity(&ObserverChange::rotational(q, Vec3::new(3.0, 3.0, 3.0)), &g, 0.0));
        let p = Part::new(&g, [2; 3], [14; 3]).unwrap();
        for n in p.nodes(&g) {
            assert!((curl.get(n) - q * 2.0).amax() < 1e-12);
        }
    }

    #[test]
    fn observer_kind_checks() {
        assert!(ObserverChange::galilean(Vec3::x()).validate().is_ok());
        let mut bad = ObserverChange::galilean(Vec3::x());
        bad.rotation.push(Vec3::y());
        assert!(bad.validate().is_err());
        let accel = ObserverChange {
            kind: ObserverKind::Rotational,
            translation: vec![],
            rotation: vec![Vec3::x(), Vec3::y()],
            pivot: Vec3::zeros(),
        };
        assert!(accel.validate().is_err());
    }

    #[test]
    fn transform_shifts_mixture_velocity_only() {
        let g = grid(8);
        let m = unbalanced(g);
        let o = ObserverChange::general(
            vec![Vec3::new(0.1, 0.2, 0.3)],
            vec![Vec3::new(0.0, 0.4, 0.0)],
            Vec3::new(3.0, 3.0, 3.0),
        );
        let ms = transform_velocities(&m, &o, 0.0).unwrap();
        let a = m.aggregates().unwrap();
        let b = ms.aggregates().unwrap();
        for k in 0..2 {
            assert!((&a.diffusion[k] - &b.diffusion[k]).max_norm() < 1e-15);
        }
        let vr = rigid_velocity(&o, &g, 0.0);
        assert!((&(&b.velocity - &a.velocity) - &vr).max_norm() < 1e-14);
        let same = transform_velocities(&m, &ObserverChange::identity(), 0.0).unwrap();
        assert_eq!((&same.constituent(1).velocity - &m.constituent(1).velocity).max_norm(), 0.0);
    }

    #[test]
    fn uniform_body_force_power_is_volume() {
        let g = grid(16);
        let mut c = ConstituentState::at_rest(ScalarField::constant(g, 1.0));
        c.body_force_ni = VectorField::constant(g, Vec3::x());
        c.velocity = VectorField::constant(g, Vec3::x());
        let m = MixtureState::new(vec![c], 0.0).unwrap();
        let p = Part::new(&g, [3, 4, 2], [9, 7, 12]).unwrap();
        let pw = power_constituent(&m, 0, &p, None).unwrap();
        assert!((pw - p.volume(&g)).abs() < 1e-12);
    }

    #[test]
    fn decomposition_identity_on_unbalanced_state() {
        let g = grid(16);
        let m = unbalanced(g);
        let center = Vec3::from_element(PI);
        let parts = sample_parts(&g, 3, 2).unwrap();
        for o in sample_observers(11, 4, center) {
            let ms = transform_velocities(&m, &o, 0.0).unwrap();
            let c = o.translation_at(0.0);
            let q = o.rotation_at(0.0);
            for p in &parts {
                for a in 0..2 {
                    let before = power_constituent(&m, a, p, None).unwrap();
                    let after = power_constituent(&ms, a, p, None).unwrap();
                    let gaps = invariance_residual(&m, a, p, &o).unwrap();
                    let pred = c.dot(&gaps.force) + q.dot(&gaps.couple);
                    let scale = before.abs().max(after.abs()).max(1.0);
                    assert!((after - before - pred).abs() < 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn growth_shift_moves_force_gap_linearly() {
        let g = grid(16);
        let m = unbalanced(g);
        let p = Part::new(&g, [3; 3], [9; 3]).unwrap();
        let o = ObserverChange::identity();
        let base = invariance_residual(&m, 0, &p, &o).unwrap();
        let delta = Vec3::new(0.5, -1.0, 0.25);
        let shifted = m
            .clone()
            .modified(|cs| cs[0].momentum_growth = &cs[0].momentum_growth + &VectorField::constant(g, delta))
            .unwrap();
        let after = invariance_residual(&shifted, 0, &p, &o).unwrap();
        let rho = m.aggregates().unwrap().rho.clone();
        let expect = delta * crate::fields::integrate_volume(&rho, &p).unwrap();
        assert!((after.force - base.force - expect).amax() < 1e-12);
    }

    #[test]
    fn total_power_matches_double_evaluation() {
        let g = grid(16);
        let m = unbalanced(g);
        let center = Vec3::from_element(PI);
        let p = Part::new(&g, [4; 3], [12; 3]).unwrap();
        let tp = total_power_residual(&m, &p, center).unwrap();
        for o in sample_observers(5, 14, center) {
            let w = rigid_velocity(&o, &g, 0.0);
            let raw = tp.raw(&w).unwrap();
            let pred = -(o.translation_at(0.0).dot(&tp.force) + o.rotation_at(0.0).dot(&tp.couple));
            assert!((raw - pred).abs() < 1e-12 * raw.abs().max(1.0));
        }
    }

    #[test]
    fn closed_state_gaps_converge() {
        let mut worst = Vec::new();
        let coarse = grid(16);
        let bounds = sample_part_bounds(&coarse, 1, 2).unwrap();
        for n in [16, 32] {
            let g = grid(n);
            let m = close_state_via_balances(&BinaryScenario::trig(), &g, 0.1, SkewConvention::SkewPart).unwrap();
            let mut e: f64 = 0.0;
            for (lo, hi) in &bounds {
                let p = Part::from_bounds(&g, *lo, *hi).unwrap();
                for o in sample_observers(2, 2, Vec3::from_element(PI)) {
                    let gaps = invariance_residual(&m, 1, &p, &o).unwrap();
                    e = e.max(gaps.force.amax() / p.volume(&g)).max(gaps.couple.amax() / p.volume(&g));
                }
            }
            worst.push(e);
            let tp = total_power_residual(&m, &Part::from_bounds(&g, bounds[0].0, bounds[0].1).unwrap(), Vec3::zeros())
                .unwrap();
            assert!(tp.force.amax() < 1e-12 && tp.couple.amax() < 1e-12);
        }
        assert!(worst[0] / worst[1] > 3.2, "{worst:?}");
    }

    #[test]
    fn part_sampler_is_deterministic_and_nested() {
        let g = grid(16);
        let a = sample_part_bounds(&g, 9, 5).unwrap();
        assert_eq!(a, sample_part_bounds(&g, 9, 5).unwrap());
        assert_eq!(a.len(), 15);
        for chunk in a.chunks(3) {
            assert!(chunk[0].0 <= chunk[1].0 && chunk[1].0 <= chunk[2].0);
            assert!(chunk[2].1 <= chunk[1].1 && chunk[1].1 <= chunk[0].1);
        }
        let fine = grid(32);
        for (lo, hi) in &a {
            assert!(Part::from_bounds(&fine, *lo, *hi).is_ok());
        }
    }
}
