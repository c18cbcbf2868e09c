//! Second-order central difference operators and tensor decompositions.
//!
//! Conventions: `(grad v)_ij = d v_i / d x_j`; tensor divergence contracts the
//! second index, `(div T)_i = d T_ij / d x_j`; `cross_tensor(a)` is the matrix
//! with `cross_tensor(a) * b = a x b`, i.e. `(a x)_ik = e_ijk a_j`, and
//! `axial` inverts it on skew tensors. `curl v = 2 axial(grad v)`, so the
//! pairing `mu . curl w = cross_tensor(mu) : skw grad w` holds node by node.

use crate::fields::{BoundaryMode, Field, FieldValue, Mat3, ScalarField, TensorField, Vec3, VectorField};

/// Partial derivative along `axis`: central in the interior and on periodic
/// grids, one-sided second order at clamped edges.
pub fn partial<T: FieldValue>(f: &Field<T>, axis: usize) -> Field<T> {
    let g = *f.grid();
    let inv2h = 0.5 / g.spacing();
    let n_axis = g.dims()[axis];
    Field::from_index_fn(g, |n| {
        let c = g.coords(n)[axis];
        let at = |d: isize| f.get(g.neighbor(n, axis, d).expect("stencil inside grid"));
        match g.boundary() {
            BoundaryMode::Periodic => (at(1) - at(-1)) * inv2h,
            BoundaryMode::Clamped if c == 0 => (at(0) * -3.0 + at(1) * 4.0 - at(2)) * inv2h,
            BoundaryMode::Clamped if c == n_axis - 1 => (at(0) * 3.0 - at(-1) * 4.0 + at(-2)) * inv2h,
            BoundaryMode::Clamped => (at(1) - at(-1)) * inv2h,
        }
    })
}

/// Ranks that have a gradient one order up.
pub trait Gradient: FieldValue {
    type Grad: FieldValue;
    fn assemble(partials: [Self; 3]) -> Self::Grad;
}

impl Gradient for f64 {
    type Grad = Vec3;
    fn assemble(p: [f64; 3]) -> Vec3 {
        Vec3::new(p[0], p[1], p[2])
    }
}

impl Gradient for Vec3 {
    type Grad = Mat3;
    fn assemble(p: [Vec3; 3]) -> Mat3 {
        Mat3::from_columns(&p)
    }
}

/// Ranks that have a divergence one order down.
pub trait Divergence: FieldValue {
    type Div: FieldValue;
    /// Sum of `d/dx_j` of the j-th slice given the three partials.
    fn contract(partials: [Self; 3]) -> Self::Div;
}

impl Divergence for Vec3 {
    type Div = f64;
    fn contract(p: [Vec3; 3]) -> f64 {
        p[0][0] + p[1][1] + p[2][2]
    }
}

impl Divergence for Mat3 {
    type Div = Vec3;
    fn contract(p: [Mat3; 3]) -> Vec3 {
        p[0].column(0) + p[1].column(1) + p[2].column(2)
    }
}

pub fn grad<T: Gradient>(f: &Field<T>) -> Field<T::Grad> {
    let [px, py, pz] = [0, 1, 2].map(|a| partial(f, a));
    Field::from_index_fn(*f.grid(), |n| T::assemble([px.get(n), py.get(n), pz.get(n)]))
}

pub fn div<T: Divergence>(f: &Field<T>) -> Field<T::Div> {
    let [px, py, pz] = [0, 1, 2].map(|a| partial(f, a));
    Field::from_index_fn(*f.grid(), |n| T::contract([px.get(n), py.get(n), pz.get(n)]))
}

pub fn curl(v: &VectorField) -> VectorField {
    grad(v).map(|g| axial(&g) * 2.0)
}

pub fn sym(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

pub fn skw(m: &Mat3) -> Mat3 {
    (m - m.transpose()) * 0.5
}

/// Axial vector of the skew part of `m`.
pub fn axial(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

pub fn cross_tensor(a: &Vec3) -> Mat3 {
    a.cross_matrix()
}

/// Frobenius pairing `A : B = A_ij B_ij`.
pub fn contract(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

/// Symmetric part, skew part and axial vector of a tensor field.
pub fn sym_skw_axial(w: &TensorField) -> (TensorField, TensorField, VectorField) {
    (w.map(|m| sym(&m)), w.map(|m| skw(&m)), w.map(|m| axial(&m)))
}

pub fn cross_tensor_field(a: &VectorField) -> TensorField {
    a.map(|v| cross_tensor(&v))
}

/// `(grad v) w` at every node.
pub fn convective(grad_v: &TensorField, w: &VectorField) -> VectorField {
    grad_v.zip_map(w, |g, w| g * w).expect("convective term across grids")
}

pub fn dot(a: &VectorField, b: &VectorField) -> ScalarField {
    a.zip_map(b, |x, y| x.dot(&y)).expect("dot across grids")
}

/// Outer product field `a (x) b`.
pub fn outer(a: &VectorField, b: &VectorField) -> TensorField {
    a.zip_map(b, |x, y| x * y.transpose()).expect("outer across grids")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn periodic(n: usize) -> Grid {
        Grid::periodic_cube(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = periodic(8);
        assert_eq!(grad(&ScalarField::constant(g, 3.5)).max_norm(), 0.0);
        let c = Grid::new([6, 7, 8], 0.3, [0.0; 3], BoundaryMode::Clamped).unwrap();
        assert_eq!(grad(&VectorField::constant(c, Vec3::new(1.0, 2.0, 3.0))).max_norm(), 0.0);
    }

    #[test]
    fn linear_field_gradient_is_exact_on_clamped_grid() {
        let g = Grid::new([6, 7, 8], 0.3, [-1.0, 0.2, 0.5], BoundaryMode::Clamped).unwrap();
        let a = Vec3::new(1.5, -2.0, 0.25);
        let gr = grad(&ScalarField::from_fn(g, |x| a.dot(&x) + 4.0));
        assert!(gr.values().iter().all(|v| (v - a).norm() < 1e-12));
        assert!((div(&VectorField::from_fn(g, |x| x)).values().iter().all(|&d| (d - 3.0).abs() < 1e-12)));
    }

    #[test]
    fn sine_gradient_converges_quadratically() {
        let err = |n: usize| {
            let g = periodic(n);
            let gr = grad(&ScalarField::from_fn(g, |x| x[0].sin()));
            let exact = VectorField::from_fn(g, |x| Vec3::new(x[0].cos(), 0.0, 0.0));
            (&gr - &exact).max_norm()
        };
        let (e1, e2) = (err(16), err(32));
        let h = 2.0 * PI / 32.0;
        assert!(e2 <= h * h / 6.0 * 1.01);
        assert!(((e1 / e2).log2() - 2.0).abs() < 0.1);
    }

    #[test]
    fn rigid_field_is_divergence_free_and_has_twice_spin_curl() {
        let g = Grid::new([8; 3], 0.25, [-1.0; 3], BoundaryMode::Clamped).unwrap();
        let w = Vec3::new(0.3, -0.7, 1.1);
        let c = Vec3::new(1.0, 2.0, 3.0);
        let v = VectorField::from_fn(g, |x| c + w.cross(&x));
        assert!(div(&v).max_norm() < 1e-12);
        assert!(curl(&v).values().iter().all(|cv| (cv - 2.0 * w).norm() < 1e-12));
        let spin = VectorField::from_fn(g, |x| Vec3::new(0.0, 0.0, 0.9).cross(&x));
        assert!(curl(&spin).values().iter().all(|cv| (cv - Vec3::new(0.0, 0.0, 1.8)).norm() < 1e-12));
    }

    #[test]
    fn shear_curl() {
        let g = Grid::new([6; 3], 0.5, [0.0; 3], BoundaryMode::Clamped).unwrap();
        let v = VectorField::from_fn(g, |x| Vec3::new(0.0, x[0], 0.0));
        assert!(curl(&v).values().iter().all(|cv| (cv - Vec3::z()).norm() < 1e-12));
    }

    #[test]
    fn tensor_divergence_of_scaled_identity() {
        let err = |n: usize| {
            let g = periodic(n);
            let t = TensorField::from_fn(g, |x| Mat3::identity() * x[0].sin());
            let exact = VectorField::from_fn(g, |x| Vec3::new(x[0].cos(), 0.0, 0.0));
            (&div(&t) - &exact).max_norm()
        };
        let (e1, e2) = (err(16), err(32));
        assert!(((e1 / e2).log2() - 2.0).abs() < 0.1);
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let g = periodic(24);
        let phi = ScalarField::from_fn(g, |x| x[0].sin() * (2.0 * x[1]).cos() + x[2].sin());
        assert!(curl(&grad(&phi)).max_norm() < 0.05);
        let c = Grid::new([8; 3], 0.4, [0.0; 3], BoundaryMode::Clamped).unwrap();
        let quad = ScalarField::from_fn(c, |x| x[0] * x[1] + x[2] * x[2] - 3.0 * x[0]);
        // interior nodes: stencils of stencils stay central
        let cg = curl(&grad(&quad));
        for n in 0..c.node_count() {
            let ijk = c.coords(n);
            if ijk.iter().all(|&i| (2..6).contains(&i)) {
                assert!(cg.get(n).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cross_tensor_convention() {
        let z = Vec3::z();
        assert_eq!(cross_tensor(&z) * Vec3::x(), Vec3::y());
        let sym_m = Mat3::new(1.0, 2.0, 3.0, 2.0, 5.0, 6.0, 3.0, 6.0, 9.0);
        assert_eq!(skw(&sym_m), Mat3::zeros());
        assert_eq!(axial(&sym_m), Vec3::zeros());
    }

    #[test]
    fn field_decomposition() {
        let g = periodic(4);
        let w = TensorField::from_fn(g, |x| Mat3::from_fn(|i, j| (x[i] * (j + 1) as f64).sin()));
        let (s, k, a) = sym_skw_axial(&w);
        assert!((&(&s + &k) - &w).max_norm() < 1e-15);
        let back = cross_tensor_field(&a);
        assert!((&back - &k).max_norm() < 1e-15);
    }

    #[test]
    fn product_rule_for_tensor_divergence() {
        let g = periodic(32);
        let a = VectorField::from_fn(g, |x| Vec3::new(x[1].sin(), x[0].cos(), 1.0 + 0.3 * x[2].sin()));
        let b = VectorField::from_fn(g, |x| Vec3::new(x[2].cos(), 0.5 * x[0].sin(), x[1].sin()));
        let lhs = div(&outer(&a, &b));
        let rhs = &convective(&grad(&a), &b) + &div(&b).times(&a);
        let h = g.spacing();
        assert!((&lhs - &rhs).max_norm() < 2.0 * h * h);
    }

    proptest! {
        #[test]
        fn axial_inverts_cross_tensor(a in prop::array::uniform3(-1e3f64..1e3)) {
            let v = Vec3::from(a);
            let w = cross_tensor(&v);
            prop_assert!((axial(&w) - v).norm() <= 1e-15 * v.norm().max(1.0));
            prop_assert!((w + w.transpose()).norm() <= 1e-15 * v.norm().max(1.0));
        }

        #[test]
        fn sym_plus_skw_reassembles(m in prop::array::uniform9(-10.0f64..10.0)) {
            let w = Mat3::from_row_slice(&m);
            prop_assert!((sym(&w) + skw(&w) - w).norm() <= 1e-15 * w.norm().max(1.0));
        }

        #[test]
        fn cross_pairing_matches_curl_contraction(mu in prop::array::uniform3(-5.0f64..5.0), m in prop::array::uniform9(-5.0f64..5.0)) {
            let mu = Vec3::from(mu);
            let gm = Mat3::from_row_slice(&m);
            let lhs = mu.dot(&(axial(&gm) * 2.0));
            let rhs = contract(&cross_tensor(&mu), &skw(&gm));
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
