//! Metric dependence of constituent energies: Lie derivative of the metric,
//! the Doyle–Ericksen residual and the covariance terms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{Jet, JetMat};
use crate::balances::SkewConvention;
use crate::diffops::{self, contract, cross_tensor, partial, skw, sym};
use crate::error::{Error, Result};
use crate::fields::{integrate_surface_with, integrate_volume_with, Grid, Mat3, Part, TensorField, Vec3, VectorField};
use crate::mixture::MixtureState;

/// Internal energy per unit mass as a function of density and metric.
pub trait ConstitutiveEnergy {
    fn energy(&self, rho: f64, g: &Mat3) -> f64;

    /// Analytic `d eps / d g`, symmetric.
    fn metric_derivative(&self, rho: f64, g: &Mat3) -> Mat3;

    /// `d eps / d g` with the density carried as a jet and the metric held fixed.
    fn metric_derivative_jet(&self, rho: Jet, g: &Mat3) -> JetMat;
}

/// Serializable energies used by scenarios and tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyModel {
    /// `eps = k/2 tr g`
    Trace { k: f64 },
    /// `eps = a/rho tr g + b ln det g + c tr(g g)`
    Metric { a: f64, b: f64, c: f64 },
    /// `base + coupling tr(g g_other)` with the other constituent's metric frozen.
    Coupled { base: Box<EnergyModel>, coupling: f64, other: [[f64; 3]; 3] },
}

pub fn mat_from_rows(rows: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| rows[i][j])
}

pub fn mat_to_rows(m: &Mat3) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]))
}

fn inverse(g: &Mat3) -> Mat3 {
    g.try_inverse().unwrap_or_else(|| Mat3::from_element(f64::NAN))
}

fn jet_mat(m: &Mat3) -> JetMat {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| Jet::constant(m[(i, j)])))
}

impl ConstitutiveEnergy for EnergyModel {
    fn energy(&self, rho: f64, g: &Mat3) -> f64 {
        match self {
            Self::Trace { k } => 0.5 * k * g.trace(),
            Self::Metric { a, b, c } => a / rho * g.trace() + b * g.determinant().ln() + c * (g * g).trace(),
            Self::Coupled { base, coupling, other } => {
                base.energy(rho, g) + coupling * (g * mat_from_rows(other)).trace()
            }
        }
    }

    fn metric_derivative(&self, rho: f64, g: &Mat3) -> Mat3 {
        match self {
            Self::Trace { k } => Mat3::identity() * (0.5 * k),
            Self::Metric { a, b, c } => {
                let ginv = inverse(g);
                Mat3::identity() * (a / rho) + (ginv + ginv.transpose()) * (0.5 * b) + (g + g.transpose()) * *c
            }
            Self::Coupled { base, coupling, other } => {
                let o = mat_from_rows(other);
                base.metric_derivative(rho, g) + (o + o.transpose()) * (0.5 * coupling)
            }
        }
    }

    fn metric_derivative_jet(&self, rho: Jet, g: &Mat3) -> JetMat {
        match self {
            Self::Metric { a, .. } => {
                let mut out = jet_mat(&self.metric_derivative(1.0, g));
                let scale = rho.recip() * *a;
                for (i, row) in out.iter_mut().enumerate() {
                    row[i] = row[i] + (-a) + scale;
                }
                out
            }
            Self::Coupled { base, coupling, other } => {
                let mut out = base.metric_derivative_jet(rho, g);
                let o = mat_from_rows(other);
                let extra = (o + o.transpose()) * (0.5 * coupling);
                for (i, row) in out.iter_mut().enumerate() {
                    for (j, e) in row.iter_mut().enumerate() {
                        *e = *e + extra[(i, j)];
                    }
                }
                out
            }
            Self::Trace { .. } => jet_mat(&self.metric_derivative(rho.v, g)),
        }
    }
}

/// `d eps / d g` by central differences over the six independent metric components.
pub fn metric_derivative_fd(ce: &dyn ConstitutiveEnergy, rho: f64, g: &Mat3, step: f64) -> Mat3 {
    let mut out = Mat3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let mut e = Mat3::zeros();
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = 0.5;
                e[(j, i)] = 0.5;
            }
            let d = (ce.energy(rho, &(g + e * step)) - ce.energy(rho, &(g - e * step))) / (2.0 * step);
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    out
}

/// Infinitesimal deformation of one constituent's placement, `x'_# = x'_a + w`.
#[derive(Clone, Debug)]
pub struct SpatialDeformation {
    generator: VectorField,
    target: usize,
    step: f64,
}

impl SpatialDeformation {
    pub const DEFAULT_STEP: f64 = 1e-5;

    pub fn new(generator: VectorField, target: usize) -> Result<Self> {
        Self::with_step(generator, target, Self::DEFAULT_STEP)
    }

    /// `step` is the metric perturbation used for finite differences in `g`.
    pub fn with_step(generator: VectorField, target: usize, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidConfig("metric perturbation step must be positive".into()));
        }
        if !generator.all_finite() {
            return Err(Error::NonFinite("deformation generator".into()));
        }
        Ok(Self { generator, target, step })
    }

    pub fn generator(&self) -> &VectorField {
        &self.generator
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn step(&self) -> f64 {
        self.step
    }
}

/// `L_w g = (grad w)^T g + g grad w + (w . grad) g`.
pub fn lie_metric(w: &VectorField, g: &TensorField) -> Result<TensorField> {
    w.check_grid(g)?;
    let gw = diffops::grad(w);
    let dg = [0, 1, 2].map(|k| partial(g, k));
    Ok(TensorField::from_index_fn(*w.grid(), |n| {
        let l = gw.get(n);
        let m = g.get(n);
        let v = w.get(n);
        l.transpose() * m + m * l + dg[0].get(n) * v[0] + dg[1].get(n) * v[1] + dg[2].get(n) * v[2]
    }))
}

/// How `d eps / d g` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricDerivative {
    Analytic,
    Central { step: f64 },
}

fn metric_derivative_with(ce: &dyn ConstitutiveEnergy, rho: f64, g: &Mat3, how: MetricDerivative) -> Mat3 {
    match how {
        MetricDerivative::Analytic => ce.metric_derivative(rho, g),
        MetricDerivative::Central { step } => metric_derivative_fd(ce, rho, g, step),
    }
}

/// `sym T_a - 2 rho_a d eps_a / d g_a` at the state's metric.
pub fn doyle_ericksen_residual(
    m: &MixtureState,
    alpha: usize,
    ce: &dyn ConstitutiveEnergy,
    how: MetricDerivative,
) -> Result<TensorField> {
    if alpha >= m.len() {
        return Err(Error::InvalidConfig(format!("constituent {alpha} out of range")));
    }
    let c = m.constituent(alpha);
    Ok(TensorField::from_index_fn(*m.grid(), |n| {
        let rho = c.rho.get(n);
        sym(&c.stress.get(n)) - metric_derivative_with(ce, rho, &c.metric.get(n), how) * (2.0 * rho)
    })
    .with_unit("Pa"))
}

/// The three integrals of the covariance requirement for one deformation and part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceTerms {
    /// `int (rho_a d eps/d g - 1/2 sym T_a) : L_w g`
    pub de_term: f64,
    /// `-int (rho_a b_a + div T_a + rho m_a) . w`, with the divergence moved onto `w` by parts
    pub momentum_term: f64,
    /// `-int (skw T_a + k' rho mu_a x) : skw grad w`
    pub moment_term: f64,
    /// The momentum term with the nodal divergence of `T_a`; differs from `momentum_term` by quadrature error.
    pub momentum_pointwise: f64,
}

impl CovarianceTerms {
    pub fn max_abs(&self) -> f64 {
        self.de_term.abs().max(self.momentum_term.abs()).max(self.moment_term.abs())
    }
}

/// Evaluates the covariance terms with the skew convention `conv` supplying `k'`.
///
/// The momentum term uses `int div T . w = int_d (T n) . w - int T : grad w`, so that for
/// a rigid `w` the sum of the momentum and moment terms (with `k' = 1`) equals
/// `-(c . force + qdot . couple)` of the rigid invariance gaps on the same quadrature.
pub fn covariance_residual(
    m: &MixtureState,
    d: &SpatialDeformation,
    ce: &dyn ConstitutiveEnergy,
    part: &Part,
    conv: SkewConvention,
) -> Result<CovarianceTerms> {
    let alpha = d.target;
    if alpha >= m.len() {
        return Err(Error::InvalidConfig(format!("constituent {alpha} out of range")));
    }
    let g = *m.grid();
    Part::new(&g, part.lo(), part.hi())?;
    let c = m.constituent(alpha);
    let w = &d.generator;
    w.check_grid(&c.rho)?;
    let rho = &m.aggregates()?.rho;
    let lie = lie_metric(w, &c.metric)?;
    let grad_w = diffops::grad(w);
    let div_t = diffops::div(&c.stress);
    let b = c.body_force();
    let kp = conv.kappa_prime();

    let de_term = integrate_volume_with(&g, part, |n| {
        let ra = c.rho.get(n);
        let de = ce.metric_derivative(ra, &c.metric.get(n)) * ra - sym(&c.stress.get(n)) * 0.5;
        contract(&de, &lie.get(n))
    });
    let forces = |n: usize| b.get(n) * c.rho.get(n) + c.momentum_growth.get(n) * rho.get(n);
    let by_parts =
        integrate_volume_with(&g, part, |n| forces(n).dot(&w.get(n)) - contract(&c.stress.get(n), &grad_w.get(n)))
            + integrate_surface_with(&g, part, |n, nrm| (c.stress.get(n) * nrm).dot(&w.get(n)));
    let momentum_pointwise = -integrate_volume_with(&g, part, |n| (forces(n) + div_t.get(n)).dot(&w.get(n)));
    let moment_term = -integrate_volume_with(&g, part, |n| {
        let t = c.stress.get(n);
        contract(&(skw(&t) + cross_tensor(&c.moment_growth.get(n)) * (kp * rho.get(n))), &skw(&grad_w.get(n)))
    });
    Ok(CovarianceTerms { de_term, momentum_term: -by_parts, moment_term, momentum_pointwise })
}

/// Smooth periodic generator with random wavenumbers in `1..=2`, phases and unit-ball amplitudes.
pub fn random_generator(grid: &Grid, rng: &mut impl Rng) -> VectorField {
    let modes: Vec<(Vec3, [f64; 3], Vec3)> = (0..2)
        .map(|_| {
            let amp = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let k = [0, 1, 2].map(|_| rng.gen_range(1..=2) as f64);
            let phase = Vec3::new(rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3));
            (amp, k, phase)
        })
        .collect();
    let l = grid.extent();
    VectorField::from_fn(*grid, |x| {
        let mut v = Vec3::zeros();
        for (amp, k, ph) in &modes {
            for a in 0..3 {
                let b = (a + 1) % 3;
                let cc = (a + 2) % 3;
                let arg_b = 2.0 * std::f64::consts::PI * k[b] * x[b] / l[b] + ph[b];
                let arg_c = 2.0 * std::f64::consts::PI * k[cc] * x[cc] / l[cc] + ph[cc];
                let arg_a = 2.0 * std::f64::consts::PI * k[a] * x[a] / l[a] + ph[a];
                v[a] += amp[a] * (arg_b.sin() * arg_c.cos() + 0.5 * arg_a.sin());
            }
        }
        v
    })
}

pub fn sample_generators(grid: &Grid, seed: u64, count: usize) -> Vec<VectorField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_generator(grid, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balances::{close_state_via_balances, BinaryScenario};
    use crate::fields::ScalarField;
    use crate::mixture::ConstituentState;
    use crate::power::invariance_residual;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::periodic_cube(n, 2.0 * PI).unwrap()
    }

    fn spd(seed: u64) -> Mat3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Mat3::from_fn(|_, _| rng.gen_range(-0.4..0.4));
        Mat3::identity() + a * a.transpose()
    }

    #[test]
    fn lie_metric_examples() {
        let g = Grid::cell_centered_box(10, 0.0, 1.0, 2).unwrap();
        let id = TensorField::constant(g, Mat3::identity());
        let stretch = VectorField::from_fn(g, |x| Vec3::new(x[0], 0.0, 0.0));
        let l = lie_metric(&stretch, &id).unwrap();
        assert!(l.values().iter().all(|m| (m - Mat3::from_diagonal(&Vec3::new(2.0, 0.0, 0.0))).amax() < 1e-13));
        let rigid = VectorField::from_fn(g, |x| Vec3::new(0.1, 0.2, 0.3) + Vec3::new(1.0, -2.0, 0.5).cross(&x));
        assert!(lie_metric(&rigid, &id).unwrap().max_norm() < 1e-12);

        let gp = grid(16);
        let w = sample_generators(&gp, 3, 1).pop().unwrap();
        let ip = TensorField::constant(gp, Mat3::identity());
        let two_sym = diffops::grad(&w).map(|m| sym(&m) * 2.0);
        assert!((&lie_metric(&w, &ip).unwrap() - &two_sym).max_norm() < 1e-14);
    }

    #[test]
    fn lie_metric_matches_pull_back() {
        let gp = grid(32);
        let w = sample_generators(&gp, 8, 1).pop().unwrap();
        let gfun = |x: Vec3| {
            Mat3::identity() * (1.5 + 0.3 * x[0].sin()) + Mat3::from_fn(|i, j| 0.1 * ((i + j) as f64 + x[1]).cos())
        };
        let gf = TensorField::from_fn(gp, gfun);
        let l = lie_metric(&w, &gf).unwrap();
        let gw = diffops::grad(&w);
        let s = 1e-6;
        let mut worst: f64 = 0.0;
        for n in (0..gp.node_count()).step_by(97) {
            let x = gp.position_of(n);
            let pull = |t: f64| {
                let f = Mat3::identity() + gw.get(n) * t;
                f.transpose() * gfun(x + w.get(n) * t) * f
            };
            let fd = (pull(s) - pull(-s)) / (2.0 * s);
            worst = worst.max((fd - l.get(n)).amax());
        }
        // analytic vs discrete spatial derivative of g
        assert!(worst < 5e-3, "{worst}");
    }

    #[test]
    fn metric_derivative_matches_finite_differences() {
        let models = [
            EnergyModel::Trace { k: 2.0 },
            EnergyModel::Metric { a: 0.8, b: 0.3, c: 0.2 },
            EnergyModel::Coupled {
                base: Box::new(EnergyModel::Metric { a: 1.1, b: -0.2, c: 0.1 }),
                coupling: 0.25,
                other: mat_to_rows(&spd(4)),
            },
        ];
        for (i, ce) in models.iter().enumerate() {
            let g = spd(i as u64);
            let an = ce.metric_derivative(1.3, &g);
            let fd = metric_derivative_fd(ce, 1.3, &g, 1e-5);
            assert!((an - fd).amax() < 1e-8, "{i}: {}", (an - fd).amax());
            assert!((an - an.transpose()).amax() < 1e-15);
        }
    }

    #[test]
    fn jet_derivative_matches_value() {
        let ce = EnergyModel::Metric { a: 0.8, b: 0.3, c: 0.2 };
        let g = spd(2);
        let rho = Jet::new(1.7, Vec3::new(0.3, 0.0, -0.2), 1.0);
        let j = ce.metric_derivative_jet(rho, &g);
        let v = ce.metric_derivative(1.7, &g);
        let h = 1e-6;
        let dv = (ce.metric_derivative(1.7 + h, &g) - ce.metric_derivative(1.7 - h, &g)) / (2.0 * h);
        for i in 0..3 {
            for k in 0..3 {
                assert!((j[i][k].v - v[(i, k)]).abs() < 1e-14);
                assert!((j[i][k].d[3] - dv[(i, k)]).abs() < 1e-8);
            }
        }
    }

    fn trace_state(g: Grid, k: f64) -> MixtureState {
        let rho = ScalarField::from_fn(g, |x| 1.0 + 0.2 * x[2].cos());
        let mut c = ConstituentState::at_rest(rho.clone());
        c.stress = TensorField::from_index_fn(g, |n| Mat3::identity() * (rho.get(n) * k));
        MixtureState::new(vec![c], 0.0).unwrap()
    }

    #[test]
    fn doyle_ericksen_examples() {
        let g = grid(8);
        let ce = EnergyModel::Trace { k: 1.5 };
        let m = trace_state(g, 1.5);
        assert_eq!(doyle_ericksen_residual(&m, 0, &ce, MetricDerivative::Analytic).unwrap().max_norm(), 0.0);
        let skewed = m
            .clone()
            .modified(|cs| {
                cs[0].stress = &cs[0].stress + &TensorField::constant(g, cross_tensor(&Vec3::new(1.0, 2.0, 3.0)))
            })
            .unwrap();
        assert_eq!(doyle_ericksen_residual(&skewed, 0, &ce, MetricDerivative::Analytic).unwrap().max_norm(), 0.0);

        let el = BinaryScenario::elastic();
        let ms = close_state_via_balances(&el, &g, 0.2, SkewConvention::SkewPart).unwrap();
        for a in 0..2 {
            let ce = el.energy_model(a).unwrap();
            let an = doyle_ericksen_residual(&ms, a, ce, MetricDerivative::Analytic).unwrap();
            let fd = doyle_ericksen_residual(&ms, a, ce, MetricDerivative::Central { step: 1e-5 }).unwrap();
            assert!(an.max_norm() < 1e-12);
            assert!((&an - &fd).max_norm() < 1e-8);
        }
    }

    #[test]
    fn doyle_ericksen_ignores_other_constituents_order() {
        let g = grid(8);
        let base = trace_state(g, 2.0).into_constituents().remove(0);
        let mut other = base.clone();
        other.stress = TensorField::constant(g, Mat3::identity() * 7.0);
        let mut third = base.clone();
        third.metric = TensorField::constant(g, spd(1));
        let ce = EnergyModel::Coupled {
            base: Box::new(EnergyModel::Trace { k: 2.0 }),
            coupling: 0.1,
            other: mat_to_rows(&spd(1)),
        };
        let a = MixtureState::new(vec![base.clone(), other.clone(), third.clone()], 0.0).unwrap();
        let b = MixtureState::new(vec![base, third, other], 0.0).unwrap();
        let ra = doyle_ericksen_residual(&a, 0, &ce, MetricDerivative::Analytic).unwrap();
        let rb = doyle_ericksen_residual(&b, 0, &ce, MetricDerivative::Analytic).unwrap();
        assert_eq!((&ra - &rb).max_norm(), 0.0);
    }

    #[test]
    fn zero_generator_gives_zero_terms() {
        let g = grid(16);
        let el = BinaryScenario::elastic();
        let m = close_state_via_balances(&el, &g, 0.0, SkewConvention::SkewPart).unwrap();
        let d = SpatialDeformation::new(VectorField::zeros(g), 0).unwrap();
        let p = Part::new(&g, [3; 3], [12; 3]).unwrap();
        let t = covariance_residual(&m, &d, el.energy_model(0).unwrap(), &p, SkewConvention::SkewPart).unwrap();
        assert_eq!(t.max_abs(), 0.0);
        assert!(SpatialDeformation::with_step(VectorField::zeros(g), 0, 0.0).is_err());
    }

    #[test]
    fn closed_elastic_state_terms_converge() {
        let el = BinaryScenario::elastic();
        let coarse = grid(16);
        let bounds = crate::power::sample_part_bounds(&coarse, 2, 1).unwrap()[0];
        let mut errs = Vec::new();
        for n in [16, 32] {
            let g = grid(n);
            let m = close_state_via_balances(&el, &g, 0.1, SkewConvention::SkewPart).unwrap();
            let p = Part::from_bounds(&g, bounds.0, bounds.1).unwrap();
            let mut e: f64 = 0.0;
            for w in sample_generators(&g, 17, 3) {
                let d = SpatialDeformation::new(w, 1).unwrap();
                let t = covariance_residual(&m, &d, el.energy_model(1).unwrap(), &p, SkewConvention::SkewPart).unwrap();
                assert!(t.de_term.abs() < 1e-12 && t.moment_term.abs() < 1e-12, "{t:?}");
                e = e.max(t.momentum_term.abs()).max(t.momentum_pointwise.abs());
            }
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.2, "{errs:?}");
    }

    #[test]
    fn rigid_generator_reproduces_invariance_gaps() {
        let g = grid(16);
        let el = BinaryScenario::elastic();
        let m = close_state_via_balances(&el, &g, 0.3, SkewConvention::Difference).unwrap();
        let m = m
            .modified(|cs| {
                cs[0].momentum_growth = &cs[0].momentum_growth + &VectorField::constant(g, Vec3::new(0.3, 0.0, -0.2))
            })
            .unwrap();
        let p = Part::new(&g, [3, 4, 5], [11, 13, 12]).unwrap();
        let pivot = Vec3::from_element(PI);
        for o in crate::power::sample_observers(21, 4, pivot) {
            let w = crate::power::rigid_velocity(&o, &g, 0.0);
            let d = SpatialDeformation::new(w, 0).unwrap();
            let t = covariance_residual(&m, &d, el.energy_model(0).unwrap(), &p, SkewConvention::SkewPart).unwrap();
            assert!(t.de_term.abs() < 1e-10);
            let gaps = invariance_residual(&m, 0, &p, &o).unwrap();
            let expect = -(o.translation_at(0.0).dot(&gaps.force) + o.rotation_at(0.0).dot(&gaps.couple));
            let got = t.momentum_term + t.moment_term;
            assert!((got - expect).abs() <= 1e-10 * expect.abs().max(1.0), "{got} {expect}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn lie_metric_of_identity_is_twice_sym_grad(seed in 0u64..1000) {
            let g = grid(8);
            let w = sample_generators(&g, seed, 1).pop().unwrap();
            let id = TensorField::constant(g, Mat3::identity());
            let diff = &lie_metric(&w, &id).unwrap() - &diffops::grad(&w).map(|m| sym(&m) * 2.0);
            prop_assert!(diff.max_norm() < 1e-14);
        }

        #[test]
        fn metric_fd_agrees_for_random_spd(seed in 0u64..1000, a in 0.1f64..2.0, b in -1.0f64..1.0, c in -0.5f64..0.5) {
            let ce = EnergyModel::Metric { a, b, c };
            let g = spd(seed);
            let d = (ce.metric_derivative(1.2, &g) - metric_derivative_fd(&ce, 1.2, &g, 1e-5)).amax();
            prop_assert!(d < 1e-8);
        }
    }
}
