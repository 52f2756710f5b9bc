//! Spectral inverse Laplacian, Riesz transforms, inverse divergence and the Lame operator.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{spectral, Field, Grid, VectorField};

pub fn check_viscosity(mu: f64, lambda: f64) -> Result<()> {
    if mu > 0.0 && 3.0 * lambda + 2.0 * mu > 0.0 && lambda.is_finite() && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::Viscosity { mu, lambda })
    }
}

/// Wavenumber tables shared by every operator on one grid.
#[derive(Clone, Debug)]
pub struct OperatorContext {
    grid: Arc<Grid>,
    k: Vec<Vec<f64>>,
    nyquist: Vec<Vec<bool>>,
}

#[derive(Clone, Debug)]
pub struct InverseDivergence {
    pub v: VectorField,
    /// Ratio `||grad v||_2 / ||f||_2` (0 for vanishing input).
    pub bound: f64,
    /// True when the walls only see a vanishing normal component.
    pub normal_trace_only: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoercivityReport {
    pub modes_checked: usize,
    /// Smallest `lambda_min / |k|^2` over resolved modes.
    pub min_ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

impl OperatorContext {
    pub fn new(grid: &Arc<Grid>) -> OperatorContext {
        let k = grid
            .axes()
            .iter()
            .map(|ax| (0..ax.ext_len()).map(|m| ax.wavenumber(m)).collect())
            .collect();
        let nyquist = grid
            .axes()
            .iter()
            .map(|ax| (0..ax.ext_len()).map(|m| ax.is_nyquist(m)).collect())
            .collect();
        OperatorContext {
            grid: grid.clone(),
            k,
            nyquist,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn k_sq(&self, idx: &[usize]) -> f64 {
        idx.iter().enumerate().map(|(a, &m)| self.k[a][m].powi(2)).sum()
    }

    /// |k|^2 with Nyquist components dropped, matching repeated first derivatives.
    fn k_sq_resolved(&self, idx: &[usize]) -> f64 {
        idx.iter()
            .enumerate()
            .filter(|(a, &m)| !self.nyquist[*a][m])
            .map(|(a, &m)| self.k[a][m].powi(2))
            .sum()
    }

    fn check_grid(&self, f: &Field) -> Result<()> {
        if Grid::same(f.grid(), &self.grid) {
            Ok(())
        } else {
            Err(Error::Grid("field lives on a different grid".into()))
        }
    }

    fn check_mean_free(&self, f: &Field) -> Result<()> {
        let integral = f.integrate();
        let tol = 1e-10 * f.l2_norm() * self.grid.volume().sqrt();
        if integral.abs() > tol {
            return Err(Error::NotMeanFree { integral, tol });
        }
        Ok(())
    }

    fn multiply<F: Fn(&[usize]) -> f64>(&self, f: &Field, basis: Vec<crate::fields::Basis>, symbol: F) -> Field {
        let data = spectral::apply_multiplier(&self.grid, f.data(), f.basis(), |idx| {
            Complex64::new(symbol(idx), 0.0)
        });
        Field::new(self.grid.clone(), data, basis).expect("valid multiplier output")
    }

    pub fn inv_laplacian(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        self.check_mean_free(f)?;
        Ok(self.multiply(f, f.basis().to_vec(), |idx| {
            let k2 = self.k_sq(idx);
            if k2 == 0.0 {
                0.0
            } else {
                -1.0 / k2
            }
        }))
    }

    /// `R_ij = d_i d_j (Laplacian)^-1`, zero mode mapped to 0.
    pub fn riesz_apply(&self, i: usize, j: usize, g: &Field) -> Result<Field> {
        self.check_grid(g)?;
        let d = self.grid.dim();
        if i >= d || j >= d {
            return Err(Error::InvalidArgument(format!("Riesz index ({i},{j}) out of range")));
        }
        let mut basis = g.basis().to_vec();
        if i != j {
            basis[i] = basis[i].flipped();
            basis[j] = basis[j].flipped();
        }
        Ok(self.multiply(g, basis, |idx| {
            let k2 = self.k_sq(idx);
            if k2 == 0.0 || (i != j && (self.nyquist[i][idx[i]] || self.nyquist[j][idx[j]])) {
                0.0
            } else {
                self.k[i][idx[i]] * self.k[j][idx[j]] / k2
            }
        }))
    }

    /// Gradient of the (Neumann, on walls) potential solving `div v = f`.
    pub fn inverse_divergence(&self, f: &Field) -> Result<InverseDivergence> {
        self.check_grid(f)?;
        self.check_mean_free(f)?;
        let potential = self.multiply(f, f.basis().to_vec(), |idx| {
            let k2 = self.k_sq_resolved(idx);
            if k2 == 0.0 {
                0.0
            } else {
                -1.0 / k2
            }
        });
        let v = potential.gradient()?;
        let norm = f.l2_norm();
        let bound = if norm > 0.0 {
            v.gradient_l2_norm()? / norm
        } else {
            0.0
        };
        Ok(InverseDivergence {
            v,
            bound,
            normal_trace_only: self.grid.has_walls(),
        })
    }

    /// `mu Lap u + (mu + lambda) grad div u`.
    pub fn lame_apply(&self, u: &VectorField, mu: f64, lambda: f64) -> Result<VectorField> {
        check_viscosity(mu, lambda)?;
        let div = u.divergence()?;
        let comps = u
            .components()
            .iter()
            .enumerate()
            .map(|(c, uc)| {
                let lap = uc.laplacian()?;
                let gd = div.differentiate(c)?;
                Ok(lap.zip_map(&gd, |a, b| mu * a + (mu + lambda) * b))
            })
            .collect::<Result<Vec<_>>>()?;
        VectorField::new(comps)
    }

    /// `(mu ||grad u||^2 + (lambda + mu) ||div u||^2) / ||grad u||^2`, infinite for `grad u = 0`.
    pub fn korn_ratio(&self, u: &VectorField, mu: f64, lambda: f64) -> Result<f64> {
        check_viscosity(mu, lambda)?;
        let g2 = u.gradient_l2_norm()?.powi(2);
        if g2 == 0.0 {
            return Ok(f64::INFINITY);
        }
        let div = u.divergence()?;
        Ok((mu * g2 + (lambda + mu) * div.dot(&div)) / g2)
    }

    /// Smallest eigenvalue of the Lame symbol over every resolved mode, relative to |k|^2.
    pub fn lame_coercivity(&self, mu: f64, lambda: f64) -> Result<CoercivityReport> {
        check_viscosity(mu, lambda)?;
        let d = self.grid.dim();
        let bound = mu.min(lambda + 2.0 * mu);
        let mut min_ratio = f64::INFINITY;
        let mut modes = 0;
        let shape = self.grid.ext_shape().to_vec();
        let total: usize = shape.iter().product();
        let mut idx = vec![0usize; d];
        for flat in 0..total {
            let mut r = flat;
            for a in (0..d).rev() {
                idx[a] = r % shape[a];
                r /= shape[a];
            }
            if idx.iter().enumerate().any(|(a, &m)| self.nyquist[a][m]) {
                continue;
            }
            let k: Vec<f64> = idx.iter().enumerate().map(|(a, &m)| self.k[a][m]).collect();
            let k2: f64 = k.iter().map(|x| x * x).sum();
            if k2 == 0.0 {
                continue;
            }
            let m = DMatrix::from_fn(d, d, |p, q| {
                let diag = if p == q { mu * k2 } else { 0.0 };
                diag + (mu + lambda) * k[p] * k[q]
            });
            let eig = SymmetricEigen::new(m).eigenvalues.min();
            min_ratio = min_ratio.min(eig / k2);
            modes += 1;
        }
        Ok(CoercivityReport {
            modes_checked: modes,
            min_ratio,
            bound,
            pass: min_ratio >= bound * (1.0 - 1e-12),
        })
    }

    /// Empirical `||R_ij g||_p / ||g||_p`, reported rather than asserted.
    pub fn riesz_lp_ratio(&self, i: usize, j: usize, g: &Field, p: f64) -> Result<f64> {
        let r = self.riesz_apply(i, j, g)?;
        let n = g.lp_norm(p);
        Ok(if n > 0.0 { r.lp_norm(p) / n } else { 0.0 })
    }
}
