//! L2-orthonormal trigonometric velocity basis, ordered by |k|.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::{Axis, Boundary, Field, Grid, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Const,
    Cos,
    Sin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Mode1 {
    m: usize,
    kind: Kind,
}

impl Mode1 {
    fn wavenumber(self, ax: &Axis) -> f64 {
        match ax.boundary {
            Boundary::Periodic => 2.0 * PI * self.m as f64 / ax.length,
            Boundary::Wall => PI * self.m as f64 / ax.length,
        }
    }

    fn eval(self, ax: &Axis, x: f64) -> (f64, f64) {
        let k = self.wavenumber(ax);
        let c = (2.0 / ax.length).sqrt();
        match self.kind {
            Kind::Const => (1.0 / ax.length.sqrt(), 0.0),
            Kind::Cos => (c * (k * x).cos(), -c * k * (k * x).sin()),
            Kind::Sin => (c * (k * x).sin(), c * k * (k * x).cos()),
        }
    }

    fn rank(self) -> (usize, u8) {
        let kind = match self.kind {
            Kind::Const => 0,
            Kind::Cos => 1,
            Kind::Sin => 2,
        };
        (self.m, kind)
    }
}

fn axis_modes(ax: &Axis) -> Vec<Mode1> {
    match ax.boundary {
        Boundary::Periodic => {
            let mut v = vec![Mode1 { m: 0, kind: Kind::Const }];
            for m in 1..ax.n / 2 {
                v.push(Mode1 { m, kind: Kind::Cos });
                v.push(Mode1 { m, kind: Kind::Sin });
            }
            v
        }
        Boundary::Wall => (1..ax.n).map(|m| Mode1 { m, kind: Kind::Sin }).collect(),
    }
}

/// Retained vector basis `phi_s(x) e_c`, with node values and analytic gradients.
#[derive(Clone, Debug)]
pub struct GalerkinBasis {
    grid: Arc<Grid>,
    /// (scalar index, component) per vector function.
    index: Vec<(usize, usize)>,
    k_sq: Vec<f64>,
    /// Scalar profiles as rows, one column per node.
    values: DMatrix<f64>,
    grads: Vec<DMatrix<f64>>,
    weights: DVector<f64>,
}

impl GalerkinBasis {
    /// Largest admissible number of vector functions on `grid`.
    pub fn capacity(grid: &Grid) -> usize {
        grid.dim()
            * grid
                .axes()
                .iter()
                .map(|a| axis_modes(a).len())
                .product::<usize>()
    }

    pub fn new(grid: &Arc<Grid>, n: Option<usize>) -> Result<GalerkinBasis> {
        let d = grid.dim();
        let cap = GalerkinBasis::capacity(grid);
        let n = n.unwrap_or(cap);
        if n == 0 || n > cap {
            return Err(Error::InvalidArgument(format!(
                "Galerkin dimension {n} outside 1..={cap}"
            )));
        }
        let per_axis: Vec<Vec<Mode1>> = grid.axes().iter().map(axis_modes).collect();
        let mut scalars: Vec<(f64, Vec<Mode1>)> = vec![(0.0, Vec::new())];
        for (a, modes) in per_axis.iter().enumerate() {
            let ax = grid.axis(a);
            scalars = scalars
                .into_iter()
                .flat_map(|(k2, p)| {
                    modes.iter().map(move |m| {
                        let mut q = p.clone();
                        q.push(*m);
                        (k2 + m.wavenumber(ax).powi(2), q)
                    })
                })
                .collect();
        }
        scalars.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| {
                    let ra: Vec<_> = a.1.iter().map(|m| m.rank()).collect();
                    let rb: Vec<_> = b.1.iter().map(|m| m.rank()).collect();
                    ra.cmp(&rb)
                })
        });
        let n_scalar = n.div_ceil(d);
        scalars.truncate(n_scalar);
        let index: Vec<(usize, usize)> = (0..n).map(|j| (j / d, j % d)).collect();

        let nodes = grid.len();
        let mut values = DMatrix::zeros(n_scalar, nodes);
        let mut grads = vec![DMatrix::zeros(n_scalar, nodes); d];
        let weights = DVector::from_iterator(nodes, grid.weights().iter().copied());
        let shape = grid.shape().to_vec();
        let mut idx = vec![0usize; d];
        for node in 0..nodes {
            let mut r = node;
            for a in (0..d).rev() {
                idx[a] = r % shape[a];
                r /= shape[a];
            }
            let x = grid.coords(&idx);
            for (s, (_, modes)) in scalars.iter().enumerate() {
                let evals: Vec<(f64, f64)> = modes
                    .iter()
                    .enumerate()
                    .map(|(a, m)| m.eval(grid.axis(a), x[a]))
                    .collect();
                values[(s, node)] = evals.iter().map(|e| e.0).product();
                for (a, g) in grads.iter_mut().enumerate() {
                    g[(s, node)] = evals
                        .iter()
                        .enumerate()
                        .map(|(b, e)| if a == b { e.1 } else { e.0 })
                        .product();
                }
            }
        }
        // pin exact zeros on walls (sine factors vanish analytically)
        if grid.has_walls() {
            for node in 0..nodes {
                let mut r = node;
                for a in (0..d).rev() {
                    idx[a] = r % shape[a];
                    r /= shape[a];
                }
                if grid.is_wall_node(&idx) {
                    for s in 0..n_scalar {
                        values[(s, node)] = 0.0;
                    }
                }
            }
        }
        let k_sq = scalars.iter().map(|s| s.0).collect();
        Ok(GalerkinBasis {
            grid: grid.clone(),
            index,
            k_sq,
            values,
            grads,
            weights,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.values.nrows()
    }

    /// (scalar profile, component) of vector function `j`.
    pub fn index(&self, j: usize) -> (usize, usize) {
        self.index[j]
    }

    pub fn k_sq(&self, j: usize) -> f64 {
        self.k_sq[self.index[j].0]
    }

    pub(crate) fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    fn comp_coeffs(&self, a: &[f64], c: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.scalar_count());
        for (j, &(s, cc)) in self.index.iter().enumerate() {
            if cc == c {
                v[s] = a[j];
            }
        }
        v
    }

    /// Node values of component `c` of `sum_j a_j Phi_j`.
    pub(crate) fn eval_component(&self, a: &[f64], c: usize) -> DVector<f64> {
        self.values.tr_mul(&self.comp_coeffs(a, c))
    }

    /// Node values of `d_axis u_c`.
    pub(crate) fn eval_gradient(&self, a: &[f64], c: usize, axis: usize) -> DVector<f64> {
        self.grads[axis].tr_mul(&self.comp_coeffs(a, c))
    }

    fn to_field(&self, v: &DVector<f64>, basis: Vec<crate::fields::Basis>) -> Field {
        let data = ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(self.grid.shape()), v.as_slice().to_vec())
            .expect("node count");
        Field::new(self.grid.clone(), data, basis).expect("finite basis samples")
    }

    pub fn velocity(&self, a: &[f64]) -> VectorField {
        let comps = (0..self.grid.dim())
            .map(|c| self.to_field(&self.eval_component(a, c), self.grid.vector_basis()))
            .collect();
        VectorField::new(comps).expect("consistent components")
    }

    /// Plain L2 projection (the basis is orthonormal under the node quadrature).
    pub fn project(&self, u: &VectorField) -> Vec<f64> {
        let d = self.grid.dim();
        let per_comp: Vec<DVector<f64>> = (0..d)
            .map(|c| {
                let vals = DVector::from_iterator(
                    self.grid.len(),
                    u.component(c).data().iter().copied(),
                );
                &self.values * vals.component_mul(&self.weights)
            })
            .collect();
        self.index.iter().map(|&(s, c)| per_comp[c][s]).collect()
    }

    /// Project node values of a vector integrand: `b_j = sum_x w (R_c phi_s + Q_ca d_a phi_s)`.
    pub(crate) fn project_weak(&self, r: &[DVector<f64>], q: &[Vec<DVector<f64>>]) -> Vec<f64> {
        let d = self.grid.dim();
        let per_comp: Vec<DVector<f64>> = (0..d)
            .map(|c| {
                let mut acc = &self.values * r[c].component_mul(&self.weights);
                for (a, g) in self.grads.iter().enumerate() {
                    acc += g * q[c][a].component_mul(&self.weights);
                }
                acc
            })
            .collect();
        self.index.iter().map(|&(s, c)| per_comp[c][s]).collect()
    }

    /// `M_ij = int rho Phi_i . Phi_j`.
    pub fn mass_matrix(&self, rho: &Field) -> DMatrix<f64> {
        let wr = DVector::from_iterator(self.grid.len(), rho.data().iter().copied()).component_mul(&self.weights);
        let mut scaled = self.values.clone();
        for (mut col, w) in scaled.column_iter_mut().zip(wr.iter()) {
            col *= *w;
        }
        let ms = &scaled * self.values.transpose();
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            let (si, ci) = self.index[i];
            let (sj, cj) = self.index[j];
            if ci == cj {
                ms[(si, sj)]
            } else {
                0.0
            }
        })
    }

    /// `K_ij = int mu grad Phi_i : grad Phi_j + (mu + lambda) div Phi_i div Phi_j`.
    pub fn stiffness_matrix(&self, mu: f64, lambda: f64) -> DMatrix<f64> {
        let d = self.grid.dim();
        let weighted: Vec<DMatrix<f64>> = self
            .grads
            .iter()
            .map(|g| {
                let mut s = g.clone();
                for (mut col, w) in s.column_iter_mut().zip(self.weights.iter()) {
                    col *= *w;
                }
                s
            })
            .collect();
        let gram: Vec<Vec<DMatrix<f64>>> = (0..d)
            .map(|a| (0..d).map(|b| &weighted[a] * self.grads[b].transpose()).collect())
            .collect();
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            let (si, ci) = self.index[i];
            let (sj, cj) = self.index[j];
            let mut v = (mu + lambda) * gram[ci][cj][(si, sj)];
            if ci == cj {
                v += mu * (0..d).map(|a| gram[a][a][(si, sj)]).sum::<f64>();
            }
            v
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_under_quadrature() {
        for g in [
            Grid::torus(1, 16, 2.0).unwrap(),
            Grid::walled(1, 16, 1.3).unwrap(),
            Grid::new(vec![Axis::new(8, 1.0, Boundary::Wall), Axis::new(8, 2.0, Boundary::Periodic)]).unwrap(),
        ] {
            let b = GalerkinBasis::new(&g, None).unwrap();
            let m = b.mass_matrix(&Field::scalar_constant(&g, 1.0));
            let err = (&m - DMatrix::identity(b.len(), b.len())).abs().max();
            assert!(err < 1e-12, "{err}");
        }
    }

    #[test]
    fn ordered_by_wavenumber() {
        let g = Grid::torus(2, 16, 2.0 * PI).unwrap();
        let b = GalerkinBasis::new(&g, Some(40)).unwrap();
        for j in 1..b.len() {
            assert!(b.k_sq(j) >= b.k_sq(j - 1));
        }
        assert_eq!(b.len(), 40);
        assert_eq!(b.index(0), (0, 0));
        assert_eq!(b.index(1), (0, 1));
        assert!(GalerkinBasis::new(&g, Some(0)).is_err());
        assert!(GalerkinBasis::new(&g, Some(GalerkinBasis::capacity(&g) + 1)).is_err());
    }

    #[test]
    fn stiffness_matches_wavenumbers() {
        let g = Grid::torus(1, 16, 2.0 * PI).unwrap();
        let b = GalerkinBasis::new(&g, None).unwrap();
        let k = b.stiffness_matrix(1.0, 0.5);
        for j in 0..b.len() {
            assert!((k[(j, j)] - 2.5 * b.k_sq(j)).abs() < 1e-11);
        }
    }

    #[test]
    fn projection_round_trip_and_wall_zero() {
        let g = Grid::walled(2, 8, 1.0).unwrap();
        let b = GalerkinBasis::new(&g, Some(30)).unwrap();
        let a: Vec<f64> = (0..30).map(|j| ((j * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let u = b.velocity(&a);
        assert!(u.wall_trace_violation() == 0.0);
        let back = b.project(&u);
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
