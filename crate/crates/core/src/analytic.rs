//! Closed-form fields for manufactured solutions.
//!
//! [`AnalyticFieldSpec`] is a JSON-serialisable sum of separable terms with
//! exact first and second space derivatives and first time derivative.
//! [`Jet`] carries a value with its exact partials in `(x, y, z, t)` so that
//! products and quotients of specs keep exact first derivatives.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid, Mat3, ScalarField, TensorField, Vec3, VectorField};

/// A value together with its partial derivatives in `x, y, z, t`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 4],
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Self { v, d: [0.0; 4] }
    }

    pub fn new(v: f64, grad: Vec3, dt: f64) -> Self {
        Self { v, d: [grad[0], grad[1], grad[2], dt] }
    }

    pub fn grad(&self) -> Vec3 {
        Vec3::new(self.d[0], self.d[1], self.d[2])
    }

    pub fn dt(&self) -> f64 {
        self.d[3]
    }

    fn chain(self, v: f64, dv: f64) -> Self {
        Self { v, d: self.d.map(|x| x * dv) }
    }

    pub fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }

    pub fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }

    pub fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }

    pub fn powf(self, p: f64) -> Self {
        self.chain(self.v.powf(p), p * self.v.powf(p - 1.0))
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }

    pub fn recip(self) -> Self {
        self.chain(1.0 / self.v, -1.0 / (self.v * self.v))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, d: [0, 1, 2, 3].map(|i| self.d[i] + o.d[i]) }
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet { v: self.v - o.v, d: [0, 1, 2, 3].map(|i| self.d[i] - o.d[i]) }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet { v: -self.v, d: self.d.map(|x| -x) }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet { v: self.v * o.v, d: [0, 1, 2, 3].map(|i| self.d[i] * o.v + self.v * o.d[i]) }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, s: f64) -> Jet {
        Jet { v: self.v + s, d: self.d }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        Jet { v: self.v * s, d: self.d.map(|x| x * s) }
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j * self
    }
}

pub type JetVec = [Jet; 3];
/// Row-major 3x3 tensor of jets.
pub type JetMat = [[Jet; 3]; 3];

pub fn jvec_value(v: &JetVec) -> Vec3 {
    Vec3::new(v[0].v, v[1].v, v[2].v)
}

pub fn jvec_dt(v: &JetVec) -> Vec3 {
    Vec3::new(v[0].dt(), v[1].dt(), v[2].dt())
}

/// `(grad v)_{ij} = d v_i / d x_j`.
pub fn jvec_grad(v: &JetVec) -> Mat3 {
    Mat3::from_fn(|i, j| v[i].d[j])
}

pub fn jvec_div(v: &JetVec) -> f64 {
    v[0].d[0] + v[1].d[1] + v[2].d[2]
}

pub fn jvec_dot(a: &JetVec, b: &JetVec) -> Jet {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn jvec_scale(s: Jet, v: &JetVec) -> JetVec {
    [s * v[0], s * v[1], s * v[2]]
}

pub fn jvec_const(v: Vec3) -> JetVec {
    [Jet::constant(v[0]), Jet::constant(v[1]), Jet::constant(v[2])]
}

pub fn jmat_value(m: &JetMat) -> Mat3 {
    Mat3::from_fn(|i, j| m[i][j].v)
}

/// Divergence on the second index: `(div T)_i = d T_ij / d x_j`.
pub fn jmat_div(m: &JetMat) -> Vec3 {
    Vec3::from_fn(|i, _| (0..3).map(|j| m[i][j].d[j]).sum())
}

/// The jets of `x`, `y`, `z`, `t` themselves at a point.
pub fn coordinate_jets(x: Vec3, t: f64) -> [Jet; 4] {
    let mut out = [Jet::default(); 4];
    for (slot, value) in [x[0], x[1], x[2], t].into_iter().enumerate() {
        out[slot].v = value;
        out[slot].d[slot] = 1.0;
    }
    out
}

/// One-dimensional factor of a separable term along a space axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxisFactor {
    Const,
    Sin {
        k: f64,
        #[serde(default)]
        phase: f64,
    },
    Cos {
        k: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `sum_n coeffs[n] * s^n`
    Poly {
        coeffs: Vec<f64>,
    },
}

/// Time factor of a separable term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFactor {
    Const,
    Exp {
        rate: f64,
    },
    Sin {
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    Cos {
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    Poly {
        coeffs: Vec<f64>,
    },
}

fn poly_eval(c: &[f64], s: f64) -> [f64; 3] {
    let mut v = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for &a in c.iter().rev() {
        d2 = d2 * s + 2.0 * d1;
        d1 = d1 * s + v;
        v = v * s + a;
    }
    [v, d1, d2]
}

impl AxisFactor {
    /// Value, first and second derivative.
    pub fn eval(&self, s: f64) -> [f64; 3] {
        match self {
            AxisFactor::Const => [1.0, 0.0, 0.0],
            AxisFactor::Sin { k, phase } => {
                let a = k * s + phase;
                [a.sin(), k * a.cos(), -k * k * a.sin()]
            }
            AxisFactor::Cos { k, phase } => {
                let a = k * s + phase;
                [a.cos(), -k * a.sin(), -k * k * a.cos()]
            }
            AxisFactor::Poly { coeffs } => poly_eval(coeffs, s),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            AxisFactor::Const => true,
            AxisFactor::Sin { k, phase } | AxisFactor::Cos { k, phase } => k.is_finite() && phase.is_finite(),
            AxisFactor::Poly { coeffs } => !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite()),
        };
        ok.then_some(()).ok_or_else(|| Error::MalformedSpec(format!("bad axis factor {self:?}")))
    }
}

impl TimeFactor {
    /// Value and first derivative.
    pub fn eval(&self, t: f64) -> [f64; 2] {
        match self {
            TimeFactor::Const => [1.0, 0.0],
            TimeFactor::Exp { rate } => {
                let e = (rate * t).exp();
                [e, rate * e]
            }
            TimeFactor::Sin { omega, phase } => {
                let a = omega * t + phase;
                [a.sin(), omega * a.cos()]
            }
            TimeFactor::Cos { omega, phase } => {
                let a = omega * t + phase;
                [a.cos(), -omega * a.sin()]
            }
            TimeFactor::Poly { coeffs } => {
                let [v, d, _] = poly_eval(coeffs, t);
                [v, d]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            TimeFactor::Const => true,
            TimeFactor::Exp { rate } => rate.is_finite(),
            TimeFactor::Sin { omega, phase } | TimeFactor::Cos { omega, phase } => {
                omega.is_finite() && phase.is_finite()
            }
            TimeFactor::Poly { coeffs } => !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite()),
        };
        ok.then_some(()).ok_or_else(|| Error::MalformedSpec(format!("bad time factor {self:?}")))
    }
}

fn const_axes() -> [AxisFactor; 3] {
    [AxisFactor::Const, AxisFactor::Const, AxisFactor::Const]
}

fn const_time() -> TimeFactor {
    TimeFactor::Const
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coefficient: f64,
    #[serde(default = "const_axes")]
    pub axes: [AxisFactor; 3],
    #[serde(default = "const_time")]
    pub time: TimeFactor,
}

impl Term {
    pub fn new(coefficient: f64) -> Self {
        Self { coefficient, axes: const_axes(), time: TimeFactor::Const }
    }

    pub fn axis(mut self, axis: usize, factor: AxisFactor) -> Self {
        self.axes[axis] = factor;
        self
    }

    pub fn time(mut self, factor: TimeFactor) -> Self {
        self.time = factor;
        self
    }
}

/// Sum of separable terms `c * X(x) Y(y) Z(z) tau(t)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalyticFieldSpec {
    pub terms: Vec<Term>,
}

impl AnalyticFieldSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: vec![Term::new(c)] }
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn plus(mut self, term: Term) -> Self {
        self.terms.push(term);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for term in &self.terms {
            if !term.coefficient.is_finite() {
                return Err(Error::MalformedSpec("non-finite coefficient".into()));
            }
            term.axes.iter().try_for_each(AxisFactor::validate)?;
            term.time.validate()?;
        }
        Ok(())
    }

    /// Value with exact gradient and time derivative.
    pub fn jet(&self, x: Vec3, t: f64) -> Jet {
        let mut out = Jet::default();
        for term in &self.terms {
            let f = [0, 1, 2].map(|a| term.axes[a].eval(x[a]));
            let [tv, td] = term.time.eval(t);
            let c = term.coefficient;
            let p = f[0][0] * f[1][0] * f[2][0];
            out.v += c * p * tv;
            out.d[0] += c * f[0][1] * f[1][0] * f[2][0] * tv;
            out.d[1] += c * f[0][0] * f[1][1] * f[2][0] * tv;
            out.d[2] += c * f[0][0] * f[1][0] * f[2][1] * tv;
            out.d[3] += c * p * td;
        }
        out
    }

    pub fn value(&self, x: Vec3, t: f64) -> f64 {
        self.jet(x, t).v
    }

    /// Exact spatial Hessian.
    pub fn hessian(&self, x: Vec3, t: f64) -> Mat3 {
        let mut h = Mat3::zeros();
        for term in &self.terms {
            let f = [0, 1, 2].map(|a| term.axes[a].eval(x[a]));
            let scale = term.coefficient * term.time.eval(t)[0];
            for a in 0..3 {
                for b in 0..3 {
                    let mut prod = scale;
                    for (axis, fa) in f.iter().enumerate() {
                        let order = (a == axis) as usize + (b == axis) as usize;
                        prod *= fa[order];
                    }
                    h[(a, b)] += prod;
                }
            }
        }
        h
    }

    pub fn sample(&self, grid: &Grid, t: f64) -> ScalarField {
        ScalarField::from_fn(*grid, |x| self.value(x, t))
    }

    pub fn sample_gradient(&self, grid: &Grid, t: f64) -> VectorField {
        VectorField::from_fn(*grid, |x| self.jet(x, t).grad())
    }

    pub fn sample_time_derivative(&self, grid: &Grid, t: f64) -> ScalarField {
        ScalarField::from_fn(*grid, |x| self.jet(x, t).dt())
    }

    pub fn sample_hessian(&self, grid: &Grid, t: f64) -> TensorField {
        TensorField::from_fn(*grid, |x| self.hessian(x, t))
    }
}

/// Three scalar specs forming a vector field.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VectorSpec {
    pub components: [AnalyticFieldSpec; 3],
}

impl VectorSpec {
    pub fn new(x: AnalyticFieldSpec, y: AnalyticFieldSpec, z: AnalyticFieldSpec) -> Self {
        Self { components: [x, y, z] }
    }

    pub fn constant(v: Vec3) -> Self {
        Self::new(
            AnalyticFieldSpec::constant(v[0]),
            AnalyticFieldSpec::constant(v[1]),
            AnalyticFieldSpec::constant(v[2]),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.components.iter().try_for_each(AnalyticFieldSpec::validate)
    }

    pub fn jet(&self, x: Vec3, t: f64) -> JetVec {
        [0, 1, 2].map(|c| self.components[c].jet(x, t))
    }

    pub fn sample(&self, grid: &Grid, t: f64) -> VectorField {
        VectorField::from_fn(*grid, |x| jvec_value(&self.jet(x, t)))
    }

    pub fn sample_gradient(&self, grid: &Grid, t: f64) -> TensorField {
        TensorField::from_fn(*grid, |x| jvec_grad(&self.jet(x, t)))
    }

    pub fn sample_time_derivative(&self, grid: &Grid, t: f64) -> VectorField {
        VectorField::from_fn(*grid, |x| jvec_dt(&self.jet(x, t)))
    }
}

/// Nine scalar specs, row major, forming a second-order tensor field.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub components: [AnalyticFieldSpec; 9],
}

impl TensorSpec {
    pub fn validate(&self) -> Result<()> {
        self.components.iter().try_for_each(AnalyticFieldSpec::validate)
    }

    pub fn jet(&self, x: Vec3, t: f64) -> JetMat {
        let mut m = [[Jet::default(); 3]; 3];
        for (c, spec) in self.components.iter().enumerate() {
            m[c / 3][c % 3] = spec.jet(x, t);
        }
        m
    }

    pub fn sample(&self, grid: &Grid, t: f64) -> TensorField {
        TensorField::from_fn(*grid, |x| jmat_value(&self.jet(x, t)))
    }

    pub fn sample_divergence(&self, grid: &Grid, t: f64) -> VectorField {
        VectorField::from_fn(*grid, |x| jmat_div(&self.jet(x, t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_spec() -> AnalyticFieldSpec {
        AnalyticFieldSpec::from_terms(vec![
            Term::new(1.3)
                .axis(0, AxisFactor::Sin { k: 2.0, phase: 0.3 })
                .axis(1, AxisFactor::Cos { k: 1.0, phase: 0.0 })
                .time(TimeFactor::Exp { rate: -0.7 }),
            Term::new(-0.4)
                .axis(2, AxisFactor::Poly { coeffs: vec![1.0, -2.0, 0.5] })
                .axis(0, AxisFactor::Cos { k: 3.0, phase: 1.0 })
                .time(TimeFactor::Sin { omega: 2.0, phase: 0.1 }),
        ])
    }

    #[test]
    fn zero_spec_samples_zero() {
        let g = Grid::periodic_cube(6, 1.0).unwrap();
        assert_eq!(AnalyticFieldSpec::zero().sample(&g, 0.3).max_norm(), 0.0);
    }

    #[test]
    fn sine_derivative_is_cosine() {
        let spec = AnalyticFieldSpec::from_terms(vec![Term::new(1.0).axis(0, AxisFactor::Sin { k: 1.0, phase: 0.0 })]);
        let g = Grid::periodic_cube(8, 6.0).unwrap();
        let d = spec.sample_gradient(&g, 0.0);
        for n in 0..g.node_count() {
            let x = g.position_of(n);
            assert_eq!(d.get(n), Vec3::new(x[0].cos(), 0.0, 0.0));
        }
    }

    #[test]
    fn time_derivative_matches_central_difference() {
        let spec = AnalyticFieldSpec::from_terms(vec![Term::new(2.0)
            .axis(0, AxisFactor::Sin { k: 1.0, phase: 0.0 })
            .time(TimeFactor::Exp { rate: 0.8 })]);
        let x = Vec3::new(0.7, 0.0, 0.0);
        let dt = 1e-4;
        let fd = (spec.value(x, dt) - spec.value(x, -dt)) / (2.0 * dt);
        assert!((spec.jet(x, 0.0).dt() - fd).abs() < 1e-8);
    }

    #[test]
    fn json_round_trip() {
        let spec = sample_spec();
        let s = serde_json::to_string(&spec).unwrap();
        let back: AnalyticFieldSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let minimal: AnalyticFieldSpec = serde_json::from_str(r#"{"terms":[{"coefficient":2.0}]}"#).unwrap();
        assert_eq!(minimal.value(Vec3::new(1.0, 2.0, 3.0), 4.0), 2.0);
    }

    #[test]
    fn malformed_specs_rejected() {
        let bad = AnalyticFieldSpec::from_terms(vec![Term::new(1.0).axis(1, AxisFactor::Poly { coeffs: vec![] })]);
        assert!(bad.validate().is_err());
        assert!(AnalyticFieldSpec::constant(f64::NAN).validate().is_err());
        assert!(sample_spec().validate().is_ok());
    }

    #[test]
    fn jet_arithmetic_product_and_quotient() {
        let [x, y, _, t] = coordinate_jets(Vec3::new(0.5, 2.0, 0.0), 1.5);
        let f = (x * y + t).sin() / (x + 2.0);
        let h = 1e-6;
        let g = |a: f64, b: f64, s: f64| (a * b + s).sin() / (a + 2.0);
        let fdx = (g(0.5 + h, 2.0, 1.5) - g(0.5 - h, 2.0, 1.5)) / (2.0 * h);
        let fdt = (g(0.5, 2.0, 1.5 + h) - g(0.5, 2.0, 1.5 - h)) / (2.0 * h);
        assert!((f.d[0] - fdx).abs() < 1e-8);
        assert!((f.dt() - fdt).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn derivatives_agree_with_finite_differences(
            px in -3.0f64..3.0, py in -3.0f64..3.0, pz in -3.0f64..3.0, t in -1.0f64..1.0
        ) {
            let spec = sample_spec();
            let x = Vec3::new(px, py, pz);
            let j = spec.jet(x, t);
            let hs = 1e-5;
            for a in 0..3 {
                let mut e = Vec3::zeros();
                e[a] = hs;
                let fd = (spec.value(x + e, t) - spec.value(x - e, t)) / (2.0 * hs);
                prop_assert!((j.d[a] - fd).abs() < 1e-7);
                let fd2 = (spec.jet(x + e, t).grad() - spec.jet(x - e, t).grad()) / (2.0 * hs);
                let hess = spec.hessian(x, t);
                for b in 0..3 {
                    prop_assert!((hess[(b, a)] - fd2[b]).abs() < 1e-6);
                }
            }
            let fdt = (spec.value(x, t + hs) - spec.value(x, t - hs)) / (2.0 * hs);
            prop_assert!((j.dt() - fdt).abs() < 1e-7);
        }
    }
}
