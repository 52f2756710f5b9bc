use std::sync::Arc;

use ndarray::{ArrayD, Dimension, IxDyn, Zip};
use num_complex::Complex64;

use super::grid::{Basis, Grid};
use super::spectral;
use crate::error::{Error, Result};

/// Real samples on a grid together with per-axis basis tags.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    data: ArrayD<f64>,
    basis: Vec<Basis>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, data: ArrayD<f64>, basis: Vec<Basis>) -> Result<Field> {
        spectral::check_basis(&grid, &basis)?;
        if data.shape() != grid.shape() {
            return Err(Error::Grid(format!(
                "sample shape {:?} does not match grid shape {:?}",
                data.shape(),
                grid.shape()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field samples".into()));
        }
        Ok(Field { grid, data, basis })
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, data: ArrayD<f64>, basis: Vec<Basis>) -> Field {
        debug_assert_eq!(data.shape(), grid.shape());
        Field { grid, data, basis }
    }

    pub fn zeros(grid: &Arc<Grid>, basis: Vec<Basis>) -> Field {
        Field::constant(grid, basis, 0.0)
    }

    pub fn constant(grid: &Arc<Grid>, basis: Vec<Basis>, c: f64) -> Field {
        let data = ArrayD::from_elem(IxDyn(grid.shape()), c);
        Field::from_parts(grid.clone(), data, basis)
    }

    /// Density-type field (cosine on walls) filled with a constant.
    pub fn scalar_constant(grid: &Arc<Grid>, c: f64) -> Field {
        Field::constant(grid, grid.scalar_basis(), c)
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &Arc<Grid>, basis: Vec<Basis>, f: F) -> Field {
        let mut data = ArrayD::zeros(IxDyn(grid.shape()));
        for (idx, v) in data.indexed_iter_mut() {
            *v = f(&grid.coords(idx.slice()));
        }
        Field::from_parts(grid.clone(), data, basis)
    }

    pub fn scalar_fn<F: Fn(&[f64]) -> f64>(grid: &Arc<Grid>, f: F) -> Field {
        Field::from_fn(grid, grid.scalar_basis(), f)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn data(&self) -> &ArrayD<f64> {
        &self.data
    }

    pub fn into_data(self) -> ArrayD<f64> {
        self.data
    }

    pub fn basis(&self) -> &[Basis] {
        &self.basis
    }

    /// Summary basis tag: the tag of the first wall axis, or exponential on a torus.
    pub fn tag(&self) -> Basis {
        self.basis
            .iter()
            .copied()
            .find(|b| *b != Basis::Exponential)
            .unwrap_or(Basis::Exponential)
    }

    pub fn with_basis(mut self, basis: Vec<Basis>) -> Result<Field> {
        spectral::check_basis(&self.grid, &basis)?;
        self.basis = basis;
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        Field::from_parts(self.grid.clone(), self.data.mapv(f), self.basis.clone())
    }

    /// Pointwise combination; the result keeps the basis of `self`.
    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Field, f: F) -> Field {
        assert!(Grid::same(&self.grid, &other.grid), "fields on different grids");
        let mut data = self.data.clone();
        Zip::from(&mut data).and(&other.data).for_each(|a, &b| *a = f(*a, b));
        Field::from_parts(self.grid.clone(), data, self.basis.clone())
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product with the parity rule applied to the basis tags.
    pub fn mul(&self, other: &Field) -> Field {
        let mut out = self.zip_map(other, |a, b| a * b);
        out.basis = self
            .basis
            .iter()
            .zip(&other.basis)
            .map(|(a, b)| a.product(*b))
            .collect();
        out
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn shift(&self, c: f64) -> Field {
        self.map(|v| v + c)
    }

    pub fn integrate(&self) -> f64 {
        Zip::from(&self.data)
            .and(self.grid.weights())
            .fold(0.0, |acc, &v, &w| acc + v * w)
    }

    pub fn mean(&self) -> f64 {
        self.integrate() / self.grid.volume()
    }

    pub fn dot(&self, other: &Field) -> f64 {
        Zip::from(&self.data)
            .and(&other.data)
            .and(self.grid.weights())
            .fold(0.0, |acc, &a, &b, &w| acc + a * b * w)
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        let s = Zip::from(&self.data)
            .and(self.grid.weights())
            .fold(0.0, |acc, &v, &w| acc + v.abs().powf(p) * w);
        s.powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        Zip::from(&self.data)
            .and(&other.data)
            .fold(0.0, |m: f64, a, b| m.max((a - b).abs()))
    }

    /// Most negative sample relative to the sup norm, if beyond the density tolerance.
    pub fn density_violation(&self) -> Option<f64> {
        let sup = self.sup_norm();
        let min = self.min();
        if min < -1e-12 * sup {
            Some(min)
        } else {
            None
        }
    }

    /// Spectral derivative along `axis`; flips cosine and sine on wall axes.
    pub fn differentiate(&self, axis: usize) -> Result<Field> {
        if axis >= self.grid.dim() {
            return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
        }
        spectral::check_basis(&self.grid, &self.basis)?;
        let ax = self.grid.axis(axis);
        let data = spectral::apply_axis_multiplier(&self.grid, &self.data, &self.basis, axis, |m| {
            if ax.is_nyquist(m) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, ax.wavenumber(m))
            }
        });
        let mut basis = self.basis.clone();
        basis[axis] = basis[axis].flipped();
        Ok(Field::from_parts(self.grid.clone(), data, basis))
    }

    pub fn gradient(&self) -> Result<VectorField> {
        let comps = (0..self.grid.dim())
            .map(|a| self.differentiate(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField::from_components_unchecked(comps))
    }

    /// Sum of second derivatives along each axis.
    pub fn laplacian(&self) -> Result<Field> {
        let mut out = Field::zeros(&self.grid, self.basis.clone());
        for a in 0..self.grid.dim() {
            let d2 = self.differentiate(a)?.differentiate(a)?;
            out.data += &d2.data;
        }
        Ok(out)
    }

    /// Convolution with the discrete positive mass-one Gaussian kernel of width `eta`.
    pub fn mollify(&self, eta: f64) -> Result<Field> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mollifier radius must be >= 0, got {eta}"
            )));
        }
        if eta == 0.0 {
            return Ok(self.clone());
        }
        spectral::check_basis(&self.grid, &self.basis)?;
        let symbols: Vec<Vec<f64>> = self
            .grid
            .axes()
            .iter()
            .map(|ax| super::mollifier::kernel_symbol(ax, eta))
            .collect();
        let data = spectral::apply_multiplier(&self.grid, &self.data, &self.basis, |idx| {
            let s: f64 = idx.iter().zip(&symbols).map(|(&m, sym)| sym[m]).product();
            Complex64::new(s, 0.0)
        });
        Ok(Field::from_parts(self.grid.clone(), data, self.basis.clone()))
    }

    /// L2 norm computed from the spectral coefficients.
    pub fn spectral_l2_norm(&self) -> f64 {
        let c = spectral::coefficients(&self.grid, &self.data, &self.basis);
        (self.grid.volume() * c.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// A d-component vector field on one grid.
#[derive(Clone, Debug)]
pub struct VectorField {
    comps: Vec<Field>,
}

impl VectorField {
    pub fn new(comps: Vec<Field>) -> Result<VectorField> {
        let first = comps
            .first()
            .ok_or_else(|| Error::InvalidArgument("vector field needs components".into()))?;
        let grid = first.grid().clone();
        if comps.len() != grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} components for a {}-dimensional grid",
                comps.len(),
                grid.dim()
            )));
        }
        if comps.iter().any(|c| !Grid::same(c.grid(), &grid)) {
            return Err(Error::Grid("vector components on different grids".into()));
        }
        Ok(VectorField { comps })
    }

    pub(crate) fn from_components_unchecked(comps: Vec<Field>) -> VectorField {
        VectorField { comps }
    }

    pub fn zeros(grid: &Arc<Grid>) -> VectorField {
        VectorField {
            comps: (0..grid.dim())
                .map(|_| Field::zeros(grid, grid.vector_basis()))
                .collect(),
        }
    }

    pub fn from_fn<F: Fn(usize, &[f64]) -> f64>(grid: &Arc<Grid>, f: F) -> VectorField {
        VectorField {
            comps: (0..grid.dim())
                .map(|c| Field::from_fn(grid, grid.vector_basis(), |x| f(c, x)))
                .collect(),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.comps[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[Field] {
        &self.comps
    }

    pub fn component(&self, c: usize) -> &Field {
        &self.comps[c]
    }

    pub fn into_components(self) -> Vec<Field> {
        self.comps
    }

    pub fn map_components<F: Fn(&Field) -> Field>(&self, f: F) -> VectorField {
        VectorField {
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn divergence(&self) -> Result<Field> {
        let mut out: Option<Field> = None;
        for (a, c) in self.comps.iter().enumerate() {
            let d = c.differentiate(a)?;
            out = Some(match out {
                None => d,
                Some(acc) => acc.add(&d),
            });
        }
        Ok(out.expect("non-empty"))
    }

    pub fn dot(&self, other: &VectorField) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.comps.iter().map(Field::sup_norm).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Pointwise |v|^2.
    pub fn norm_sqr_field(&self) -> Field {
        let mut out = self.comps[0].mul(&self.comps[0]);
        for c in &self.comps[1..] {
            out = out.add(&c.mul(c));
        }
        out.with_basis(self.grid().scalar_basis()).expect("scalar basis")
    }

    /// L2 norm of the full gradient tensor.
    pub fn gradient_l2_norm(&self) -> Result<f64> {
        let mut s = 0.0;
        for c in &self.comps {
            for a in 0..self.dim() {
                let d = c.differentiate(a)?;
                s += d.dot(&d);
            }
        }
        Ok(s.sqrt())
    }

    /// Largest sample on a wall node relative to the sup norm.
    pub fn wall_trace_violation(&self) -> f64 {
        let grid = self.grid();
        if grid.is_periodic() {
            return 0.0;
        }
        let sup = self.sup_norm();
        if sup == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for c in &self.comps {
            for (idx, v) in c.data().indexed_iter() {
                if grid.is_wall_node(idx.slice()) {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst / sup
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(Field::is_finite)
    }

    pub fn scale(&self, c: f64) -> VectorField {
        self.map_components(|f| f.scale(c))
    }

    pub fn mollify(&self, eta: f64) -> Result<VectorField> {
        Ok(VectorField {
            comps: self
                .comps
                .iter()
                .map(|c| c.mollify(eta))
                .collect::<Result<_>>()?,
        })
    }
}
