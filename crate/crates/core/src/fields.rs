//! Structured-grid fields, axis-aligned parts and midpoint quadrature.
//!
//! Nodes are cell centred: node `(i, j, k)` sits at `origin + h * (i, j, k)`
//! and owns the cube of side `h` around it. A [`Part`] covering nodes
//! `[lo, hi)` therefore occupies the box `[x_lo - h/2, x_{hi-1} + h/2]`, and
//! its faces lie halfway between the last node inside and the first node
//! outside. Face values are the average of those two nodes, which makes the
//! discrete divergence theorem exact for central differences.

use std::fmt::Debug;
use std::io::{Read, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Number of nodes a part must keep between itself and the grid edge.
pub const PART_MARGIN: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    Periodic,
    Clamped,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dims: [usize; 3],
    spacing: f64,
    origin: [f64; 3],
    boundary: BoundaryMode,
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: f64, origin: [f64; 3], boundary: BoundaryMode) -> Result<Self> {
        if dims.iter().any(|&n| n < 4) {
            return Err(Error::InvalidGrid(format!("every dimension needs at least 4 nodes, got {dims:?}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { dims, spacing, origin, boundary })
    }

    /// Periodic cube `[0, length)^3` with `n` cell-centred nodes per axis.
    pub fn periodic_cube(n: usize, length: f64) -> Result<Self> {
        let h = length / n as f64;
        Self::new([n; 3], h, [0.5 * h; 3], BoundaryMode::Periodic)
    }

    /// Clamped grid whose central `n_cells^3` nodes tile `[lo, hi]^3`, padded
    /// by `margin` nodes on every side.
    pub fn cell_centered_box(n_cells: usize, lo: f64, hi: f64, margin: usize) -> Result<Self> {
        let h = (hi - lo) / n_cells as f64;
        let o = lo + 0.5 * h - margin as f64 * h;
        Self::new([n_cells + 2 * margin; 3], h, [o; 3], BoundaryMode::Clamped)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn boundary(&self) -> BoundaryMode {
        self.boundary
    }

    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    /// Period along each axis (meaningful for periodic grids).
    pub fn extent(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.dims[a] as f64 * self.spacing)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        [i, j, k]
    }

    #[inline]
    pub fn position(&self, ijk: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.origin[0] + ijk[0] as f64 * self.spacing,
            self.origin[1] + ijk[1] as f64 * self.spacing,
            self.origin[2] + ijk[2] as f64 * self.spacing,
        )
    }

    #[inline]
    pub fn position_of(&self, idx: usize) -> Vec3 {
        self.position(self.coords(idx))
    }

    /// Node `delta` steps away along `axis`; wraps on periodic grids and
    /// returns `None` past a clamped edge.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, delta: isize) -> Option<usize> {
        let mut c = self.coords(idx);
        let n = self.dims[axis] as isize;
        let m = c[axis] as isize + delta;
        let m = match self.boundary {
            BoundaryMode::Periodic => m.rem_euclid(n),
            BoundaryMode::Clamped if (0..n).contains(&m) => m,
            BoundaryMode::Clamped => return None,
        };
        c[axis] = m as usize;
        Some(self.index(c[0], c[1], c[2]))
    }
}

/// Values a field can carry at a node: scalars, vectors, second-order tensors.
pub trait FieldValue:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
    + 'static
{
    const COMPONENTS: usize;
    fn zero() -> Self;
    /// Component `c`; tensors are row major (`c = 3 * row + col`).
    fn component(&self, c: usize) -> f64;
    fn from_components(c: &[f64]) -> Self;
    fn norm(&self) -> f64;

    fn is_finite(&self) -> bool {
        (0..Self::COMPONENTS).all(|c| self.component(c).is_finite())
    }
}

impl FieldValue for f64 {
    const COMPONENTS: usize = 1;
    fn zero() -> Self {
        0.0
    }
    fn component(&self, _c: usize) -> f64 {
        *self
    }
    fn from_components(c: &[f64]) -> Self {
        c[0]
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl FieldValue for Vec3 {
    const COMPONENTS: usize = 3;
    fn zero() -> Self {
        Vec3::zeros()
    }
    fn component(&self, c: usize) -> f64 {
        self[c]
    }
    fn from_components(c: &[f64]) -> Self {
        Vec3::new(c[0], c[1], c[2])
    }
    fn norm(&self) -> f64 {
        Vector3::norm(self)
    }
}

impl FieldValue for Mat3 {
    const COMPONENTS: usize = 9;
    fn zero() -> Self {
        Mat3::zeros()
    }
    fn component(&self, c: usize) -> f64 {
        self[(c / 3, c % 3)]
    }
    fn from_components(c: &[f64]) -> Self {
        Mat3::from_row_slice(&c[..9])
    }
    fn norm(&self) -> f64 {
        Matrix3::norm(self)
    }
}

/// Node-centred field on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T: FieldValue> {
    grid: Grid,
    values: Vec<T>,
    unit: String,
}

pub type ScalarField = Field<f64>;
pub type VectorField = Field<Vec3>;
pub type TensorField = Field<Mat3>;

impl<T: FieldValue> Field<T> {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: Grid, value: T) -> Self {
        Self { grid, values: vec![value; grid.node_count()], unit: String::new() }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(Vec3) -> T) -> Self {
        let values = (0..grid.node_count()).map(|n| f(grid.position_of(n))).collect();
        Self { grid, values, unit: String::new() }
    }

    pub fn from_index_fn(grid: Grid, f: impl FnMut(usize) -> T) -> Self {
        let values = (0..grid.node_count()).map(f).collect();
        Self { grid, values, unit: String::new() }
    }

    pub fn from_values(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::LengthMismatch { name: "field".into(), got: values.len(), expected: grid.node_count() });
        }
        if let Some(_bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field".into()));
        }
        Ok(Self { grid, values, unit: String::new() })
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> T {
        self.values[idx]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn check_grid<U: FieldValue>(&self, other: &Field<U>) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect(), unit: String::new() }
    }

    /// Node-wise combination of two fields on the same grid.
    pub fn zip_map<U: FieldValue, V: FieldValue>(&self, other: &Field<U>, f: impl Fn(T, U) -> V) -> Result<Field<V>> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid, values, unit: String::new() })
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Discrete L2 norm `sqrt(sum |v|^2 h^3)`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm().powi(2)).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// Largest node norm restricted to `part`.
    pub fn max_norm_on(&self, part: &Part) -> f64 {
        part.nodes(&self.grid).fold(0.0, |m, n| m.max(self.values[n].norm()))
    }

    /// CSV dump with columns `i,j,k,c0,...`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["i".to_string(), "j".into(), "k".into()];
        header.extend((0..T::COMPONENTS).map(|c| format!("c{c}")));
        w.write_record(&header)?;
        for (n, v) in self.values.iter().enumerate() {
            let [i, j, k] = self.grid.coords(n);
            let mut row = vec![i.to_string(), j.to_string(), k.to_string()];
            row.extend((0..T::COMPONENTS).map(|c| format!("{:e}", v.component(c))));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(grid: Grid, reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut values = vec![None; grid.node_count()];
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 3 + T::COMPONENTS {
                return Err(Error::InvalidConfig(format!(
                    "CSV row has {} columns, expected {}",
                    rec.len(),
                    3 + T::COMPONENTS
                )));
            }
            let parse_idx = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::InvalidConfig(e.to_string()));
            let (i, j, k) = (parse_idx(&rec[0])?, parse_idx(&rec[1])?, parse_idx(&rec[2])?);
            let d = grid.dims();
            if i >= d[0] || j >= d[1] || k >= d[2] {
                return Err(Error::InvalidConfig(format!("CSV node ({i},{j},{k}) outside grid")));
            }
            let comps = (0..T::COMPONENTS)
                .map(|c| rec[3 + c].trim().parse::<f64>().map_err(|e| Error::InvalidConfig(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            values[grid.index(i, j, k)] = Some(T::from_components(&comps));
        }
        let values = values
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidConfig("CSV does not cover every node".into()))?;
        Self::from_values(grid, values)
    }
}

impl<T: FieldValue> Add for &Field<T> {
    type Output = Field<T>;
    fn add(self, rhs: Self) -> Field<T> {
        self.zip_map(rhs, |a, b| a + b).expect("field addition across grids")
    }
}

impl<T: FieldValue> Sub for &Field<T> {
    type Output = Field<T>;
    fn sub(self, rhs: Self) -> Field<T> {
        self.zip_map(rhs, |a, b| a - b).expect("field subtraction across grids")
    }
}

impl<T: FieldValue> Mul<f64> for &Field<T> {
    type Output = Field<T>;
    fn mul(self, s: f64) -> Field<T> {
        self.map(|v| v * s)
    }
}

impl<T: FieldValue> Neg for &Field<T> {
    type Output = Field<T>;
    fn neg(self) -> Field<T> {
        self.map(|v| -v)
    }
}

impl ScalarField {
    /// Node-wise product with a field of any rank.
    pub fn times<T: FieldValue>(&self, other: &Field<T>) -> Field<T> {
        self.zip_map(other, |s, v| v * s).expect("field product across grids")
    }
}

/// Axis-aligned box of nodes `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Part {
    lo: [usize; 3],
    hi: [usize; 3],
}

impl Part {
    pub fn new(grid: &Grid, lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        let d = grid.dims();
        for a in 0..3 {
            if lo[a] >= hi[a] {
                return Err(Error::InvalidPart(format!("empty along axis {a}: [{}, {})", lo[a], hi[a])));
            }
            if lo[a] < PART_MARGIN || hi[a] + PART_MARGIN > d[a] {
                return Err(Error::InvalidPart(format!(
                    "axis {a} range [{}, {}) violates the {PART_MARGIN}-node margin of a {}-node grid",
                    lo[a], hi[a], d[a]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// Cube of side `2 * half_width + 1` nodes centred on `center`.
    pub fn centered(grid: &Grid, center: [usize; 3], half_width: usize) -> Result<Self> {
        let lo = center.map(|c| c.saturating_sub(half_width));
        if center.iter().any(|&c| c < half_width) {
            return Err(Error::InvalidPart("centre too close to the grid edge".into()));
        }
        Self::new(grid, lo, center.map(|c| c + half_width + 1))
    }

    /// The box `[lo, hi]^3` in physical coordinates; both bounds must fall on cell faces.
    pub fn from_bounds(grid: &Grid, lo: Vec3, hi: Vec3) -> Result<Self> {
        let h = grid.spacing();
        let o = grid.origin();
        let mut ilo = [0; 3];
        let mut ihi = [0; 3];
        for a in 0..3 {
            let to_face = |x: f64| (x - (o[a] - 0.5 * h)) / h;
            let (fl, fh) = (to_face(lo[a]), to_face(hi[a]));
            if (fl - fl.round()).abs() > 1e-8 || (fh - fh.round()).abs() > 1e-8 || fl.round() < 0.0 {
                return Err(Error::InvalidPart(format!("bounds on axis {a} are not aligned with cell faces")));
            }
            ilo[a] = fl.round() as usize;
            ihi[a] = fh.round() as usize;
        }
        Self::new(grid, ilo, ihi)
    }

    pub fn lo(&self) -> [usize; 3] {
        self.lo
    }

    pub fn hi(&self) -> [usize; 3] {
        self.hi
    }

    pub fn node_count(&self) -> usize {
        (0..3).map(|a| self.hi[a] - self.lo[a]).product()
    }

    pub fn volume(&self, grid: &Grid) -> f64 {
        self.node_count() as f64 * grid.cell_volume()
    }

    /// Physical corners of the box.
    pub fn bounds(&self, grid: &Grid) -> (Vec3, Vec3) {
        let h = grid.spacing();
        let lo = grid.position(self.lo) - Vec3::repeat(0.5 * h);
        let hi = grid.position(self.hi.map(|x| x - 1)) + Vec3::repeat(0.5 * h);
        (lo, hi)
    }

    /// Longest edge length.
    pub fn diameter(&self, grid: &Grid) -> f64 {
        let (lo, hi) = self.bounds(grid);
        (hi - lo).max()
    }

    pub fn contains(&self, ijk: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= ijk[a] && ijk[a] < self.hi[a])
    }

    pub fn nodes<'a>(&'a self, grid: &'a Grid) -> impl Iterator<Item = usize> + 'a {
        let (lo, hi) = (self.lo, self.hi);
        (lo[0]..hi[0])
            .flat_map(move |i| (lo[1]..hi[1]).flat_map(move |j| (lo[2]..hi[2]).map(move |k| grid.index(i, j, k))))
    }

    /// Visits every boundary face element as `(inside node, outside node, outward normal)`.
    pub fn for_each_face(&self, grid: &Grid, mut visit: impl FnMut(usize, usize, Vec3)) {
        for axis in 0..3 {
            let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
            for (layer, delta, sign) in [(self.lo[axis], -1isize, -1.0), (self.hi[axis] - 1, 1, 1.0)] {
                let mut normal = Vec3::zeros();
                normal[axis] = sign;
                for u in self.lo[b]..self.hi[b] {
                    for v in self.lo[c]..self.hi[c] {
                        let mut ijk = [0; 3];
                        ijk[axis] = layer;
                        ijk[b] = u;
                        ijk[c] = v;
                        let inside = grid.index(ijk[0], ijk[1], ijk[2]);
                        let outside =
                            grid.neighbor(inside, axis, delta).expect("part margin guarantees an outside neighbour");
                        visit(inside, outside, normal);
                    }
                }
            }
        }
    }
}

fn check_part(grid: &Grid, part: &Part) -> Result<()> {
    let d = grid.dims();
    if part.node_count() == 0 {
        return Err(Error::InvalidPart("empty part".into()));
    }
    if (0..3).any(|a| part.lo[a] < PART_MARGIN || part.hi[a] + PART_MARGIN > d[a]) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Midpoint rule over `part` of an arbitrary node integrand.
pub fn integrate_volume_with<T: FieldValue>(grid: &Grid, part: &Part, mut f: impl FnMut(usize) -> T) -> T {
    let mut acc = T::zero();
    for n in part.nodes(grid) {
        acc += f(n);
    }
    acc * grid.cell_volume()
}

/// Surface quadrature of an integrand depending on node and outward normal; the
/// face value is the mean of the integrand at the two nodes straddling the face.
pub fn integrate_surface_with<T: FieldValue>(grid: &Grid, part: &Part, mut f: impl FnMut(usize, Vec3) -> T) -> T {
    let mut acc = T::zero();
    part.for_each_face(grid, |inside, outside, n| {
        acc += (f(inside, n) + f(outside, n)) * 0.5;
    });
    acc * grid.spacing().powi(2)
}

pub fn integrate_volume<T: FieldValue>(f: &Field<T>, part: &Part) -> Result<T> {
    check_part(f.grid(), part)?;
    Ok(integrate_volume_with(f.grid(), part, |n| f.get(n)))
}

/// Contraction of a field value with a unit normal: flux for vectors, traction for tensors.
pub trait NormalContraction: FieldValue {
    type Contracted: FieldValue;
    fn contract(&self, n: &Vec3) -> Self::Contracted;
}

impl NormalContraction for Vec3 {
    type Contracted = f64;
    fn contract(&self, n: &Vec3) -> f64 {
        self.dot(n)
    }
}

impl NormalContraction for Mat3 {
    type Contracted = Vec3;
    fn contract(&self, n: &Vec3) -> Vec3 {
        self * n
    }
}

pub fn integrate_surface<T: NormalContraction>(f: &Field<T>, part: &Part) -> Result<T::Contracted> {
    check_part(f.grid(), part)?;
    Ok(integrate_surface_with(f.grid(), part, |node, n| f.get(node).contract(&n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_rejects_small_or_degenerate() {
        assert!(Grid::new([3, 4, 4], 1.0, [0.0; 3], BoundaryMode::Clamped).is_err());
        assert!(Grid::new([4, 4, 4], 0.0, [0.0; 3], BoundaryMode::Clamped).is_err());
        assert!(Grid::new([4, 4, 4], 1.0, [0.0; 3], BoundaryMode::Periodic).is_ok());
    }

    #[test]
    fn periodic_neighbours_wrap() {
        let g = Grid::periodic_cube(8, 1.0).unwrap();
        let n = g.index(0, 3, 7);
        assert_eq!(g.coords(g.neighbor(n, 0, -1).unwrap()), [7, 3, 7]);
        assert_eq!(g.coords(g.neighbor(n, 2, 1).unwrap()), [0, 3, 0]);
        let c = Grid::new([8; 3], 1.0, [0.0; 3], BoundaryMode::Clamped).unwrap();
        assert_eq!(c.neighbor(n, 0, -1), None);
    }

    #[test]
    fn constant_field_integrates_to_volume() {
        let g = Grid::periodic_cube(16, 2.0).unwrap();
        let p = Part::new(&g, [2, 3, 4], [9, 12, 10]).unwrap();
        let v = integrate_volume(&ScalarField::constant(g, 1.0), &p).unwrap();
        let vol = p.volume(&g);
        assert!((v - vol).abs() <= 1e-12 * vol);
        assert!((vol - 7.0 * 9.0 * 6.0 * 0.125f64.powi(3)).abs() < 1e-14);
    }

    #[test]
    fn odd_field_over_symmetric_part_vanishes() {
        // box symmetric about x = 0
        let g = Grid::cell_centered_box(20, -PI, PI, 2).unwrap();
        let p = Part::new(&g, [2; 3], [22; 3]).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0].sin());
        let v = integrate_volume(&f, &p).unwrap();
        assert!(v.abs() <= 1e-12 * p.volume(&g));
    }

    #[test]
    fn triple_sine_over_half_period_cube() {
        // exact value: (int_0^pi sin)^3 = 8; midpoint error is O(h^2)
        let mut errs = vec![];
        for n in [16, 32] {
            let g = Grid::cell_centered_box(n, 0.0, PI, 2).unwrap();
            let p = Part::new(&g, [2; 3], [n + 2; 3]).unwrap();
            let f = ScalarField::from_fn(g, |x| x[0].sin() * x[1].sin() * x[2].sin());
            let err = (integrate_volume(&f, &p).unwrap() - 8.0).abs();
            let h = g.spacing();
            assert!(err <= 8.0 * h * h, "n={n} err={err}");
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn constant_vector_has_zero_net_flux() {
        let g = Grid::periodic_cube(12, 1.0).unwrap();
        let p = Part::new(&g, [2, 2, 3], [7, 9, 8]).unwrap();
        let f = VectorField::constant(g, Vec3::new(1.3, -0.2, 4.0));
        assert!(integrate_surface(&f, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn position_field_flux_is_three_volumes() {
        let g = Grid::cell_centered_box(10, 0.0, 1.0, 2).unwrap();
        let p = Part::new(&g, [2; 3], [12; 3]).unwrap();
        let f = VectorField::from_fn(g, |x| x);
        let flux = integrate_surface(&f, &p).unwrap();
        assert!((flux - 3.0).abs() < 1e-12, "{flux}");
        let (lo, hi) = p.bounds(&g);
        assert!((lo - Vec3::zeros()).norm() < 1e-14 && (hi - Vec3::repeat(1.0)).norm() < 1e-14);
    }

    #[test]
    fn uniform_pressure_has_zero_traction_resultant() {
        let g = Grid::periodic_cube(12, 1.0).unwrap();
        let p = Part::new(&g, [3, 2, 2], [9, 10, 6]).unwrap();
        let t = TensorField::constant(g, Mat3::identity() * -2.5e5);
        assert!(integrate_surface(&t, &p).unwrap().norm() <= 1e-12 * 2.5e5);
    }

    #[test]
    fn part_validation() {
        let g = Grid::periodic_cube(12, 1.0).unwrap();
        assert!(Part::new(&g, [2, 2, 2], [2, 5, 5]).is_err());
        assert!(Part::new(&g, [1, 2, 2], [5, 5, 5]).is_err());
        assert!(Part::new(&g, [2, 2, 2], [11, 5, 5]).is_err());
        assert!(Part::centered(&g, [6, 6, 6], 2).is_ok());
        let other = Grid::periodic_cube(16, 1.0).unwrap();
        let p = Part::new(&other, [2; 3], [14; 3]).unwrap();
        assert!(integrate_volume(&ScalarField::zeros(g), &p).is_err());
    }

    #[test]
    fn from_bounds_round_trips() {
        let g = Grid::periodic_cube(16, 2.0).unwrap();
        let p = Part::new(&g, [2, 4, 6], [10, 9, 13]).unwrap();
        let (lo, hi) = p.bounds(&g);
        assert_eq!(Part::from_bounds(&g, lo, hi).unwrap(), p);
        let fine = Grid::periodic_cube(32, 2.0).unwrap();
        let q = Part::from_bounds(&fine, lo, hi).unwrap();
        assert_eq!(q.lo(), [4, 8, 12]);
        assert!((q.volume(&fine) - p.volume(&g)).abs() < 1e-14);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::periodic_cube(4, 1.0).unwrap();
        let f = TensorField::from_fn(g, |x| Mat3::new(x[0], 1.0, 2.0, 3.0, x[1], 5.0, 6.0, 7.0, x[2]));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = TensorField::read_csv(g, buf.as_slice()).unwrap();
        assert!((&back - &f).max_norm() < 1e-15);
    }

    #[test]
    fn from_values_rejects_nan_and_length() {
        let g = Grid::periodic_cube(4, 1.0).unwrap();
        assert!(ScalarField::from_values(g, vec![0.0; 3]).is_err());
        let mut v = vec![0.0; 64];
        v[5] = f64::NAN;
        assert!(matches!(ScalarField::from_values(g, v), Err(Error::NonFinite(_))));
    }
}
