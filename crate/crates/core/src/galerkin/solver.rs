//! Density stepper, Galerkin momentum balance and the Picard-coupled step.

// Tensor components are indexed as in index notation.
#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use super::basis::GalerkinBasis;
use super::params::{ApproxParams, PhysParams};
use super::State;
use crate::error::{Error, Result};
use crate::fields::{spectral, Field, Grid, VectorField};
use crate::operators::check_viscosity;

/// Body force `f_c(t, x)` per unit mass.
pub type ForcingFn = Arc<dyn Fn(f64, usize, &[f64]) -> f64 + Send + Sync>;

fn to_vec(f: &Field) -> DVector<f64> {
    DVector::from_iterator(f.data().len(), f.data().iter().copied())
}

fn check_stability(u: &VectorField, dt: f64) -> Result<()> {
    let sup: Vec<f64> = u.components().iter().map(Field::sup_norm).collect();
    let bound = u.grid().advective_bound(&sup);
    if dt > bound {
        Err(Error::Stability { dt, bound })
    } else {
        Ok(())
    }
}

/// `(1 + eps dt |k|^2)^{-1}` applied to `rhs`.
fn implicit_diffusion(rhs: &Field, eps: f64, dt: f64) -> Field {
    if eps == 0.0 {
        return rhs.clone();
    }
    let grid = rhs.grid();
    let k: Vec<Vec<f64>> = grid
        .axes()
        .iter()
        .map(|ax| (0..ax.ext_len()).map(|m| ax.wavenumber(m).powi(2)).collect())
        .collect();
    let data = spectral::apply_multiplier(grid, rhs.data(), rhs.basis(), |idx| {
        let k2: f64 = idx.iter().zip(&k).map(|(&m, t)| t[m]).sum();
        Complex64::new(1.0 / (1.0 + eps * dt * k2), 0.0)
    });
    Field::new(grid.clone(), data, rhs.basis().to_vec()).expect("finite")
}

/// Returns the new density and `div(c u)`.
fn density_update(c: &Field, u: &VectorField, eps: f64, dt: f64) -> Result<(Field, Field)> {
    let flux = VectorField::new(u.components().iter().map(|uc| c.mul(uc)).collect())?;
    let div = flux.divergence()?.with_basis(c.basis().to_vec())?;
    let rhs = c.sub(&div.scale(dt));
    Ok((implicit_diffusion(&rhs, eps, dt), div))
}

/// One step of `c_t + div(c u) = eps Lap c`: explicit conservative advection, implicit diffusion.
pub fn advect_diffuse_step(c: &Field, u: &VectorField, eps: f64, dt: f64) -> Result<Field> {
    if !(eps >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("need eps >= 0 and dt > 0, got {eps}, {dt}")));
    }
    if !Grid::same(c.grid(), u.grid()) {
        return Err(Error::Grid("density and velocity on different grids".into()));
    }
    if c.basis() != c.grid().scalar_basis().as_slice() {
        return Err(Error::Basis("density must carry the scalar basis".into()));
    }
    check_stability(u, dt)?;
    Ok(density_update(c, u, eps, dt)?.0)
}

/// One step of `a_t + u . grad a = eps Lap a` with the same splitting as the density step.
pub fn transport_step(a: &Field, u: &VectorField, eps: f64, dt: f64) -> Result<Field> {
    if !(eps >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("need eps >= 0 and dt > 0, got {eps}, {dt}")));
    }
    if !Grid::same(a.grid(), u.grid()) {
        return Err(Error::Grid("transported field and velocity on different grids".into()));
    }
    check_stability(u, dt)?;
    let grad = a.gradient()?;
    let adv = grad
        .components()
        .iter()
        .zip(u.components())
        .fold(Field::zeros(a.grid(), a.basis().to_vec()), |acc, (g, uc)| acc.add(&g.mul(uc)));
    let rhs = a.sub(&adv.with_basis(a.basis().to_vec())?.scale(dt));
    Ok(implicit_diffusion(&rhs, eps, dt))
}

/// Projected momentum balance, term by term, plus the solved coefficient derivative.
#[derive(Clone, Debug)]
pub struct MomentumRhs {
    pub derivative: Vec<f64>,
    pub terms: Vec<(&'static str, Vec<f64>)>,
    pub regularized: bool,
}

/// Per-step bookkeeping returned by [`Galerkin::coupled_step`].
#[derive(Clone, Debug, Default)]
pub struct StepInfo {
    pub picard_iters: usize,
    pub history: Vec<f64>,
    /// `dt * (mu ||grad u||^2 + (mu + lambda) ||div u||^2)`.
    pub dissipation: f64,
    pub eps_gamma_term: f64,
    pub eps_beta_term: f64,
    pub forcing_work: f64,
    pub regularized: bool,
    /// Smallest density sample after the step (positivity monitor).
    pub min_rho: f64,
    pub min_z: f64,
}

pub struct Galerkin {
    basis: GalerkinBasis,
    phys: PhysParams,
    approx: ApproxParams,
    stiffness: DMatrix<f64>,
    forcing: Option<ForcingFn>,
}

fn factor(a: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, bool)> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok((c, false));
    }
    let n = a.nrows();
    let shift = 1e-12 * (a.trace().abs() / n as f64).max(f64::MIN_POSITIVE);
    let reg = a + DMatrix::identity(n, n) * shift;
    match Cholesky::new(reg) {
        Some(c) => Ok((c, true)),
        None => Err(Error::SingularMass(format!(
            "mass matrix not positive definite even after a {shift:.3e} shift"
        ))),
    }
}

struct Nodes {
    u: Vec<DVector<f64>>,
    grad: Vec<Vec<DVector<f64>>>,
}

impl Galerkin {
    pub fn new(grid: &Arc<Grid>, phys: PhysParams, approx: ApproxParams) -> Result<Galerkin> {
        phys.validate()?;
        approx.validate()?;
        check_viscosity(phys.mu, phys.lambda)?;
        let basis = GalerkinBasis::new(grid, approx.n_modes)?;
        let stiffness = basis.stiffness_matrix(phys.mu, phys.lambda);
        Ok(Galerkin {
            basis,
            phys,
            approx,
            stiffness,
            forcing: None,
        })
    }

    pub fn with_forcing(mut self, f: ForcingFn) -> Galerkin {
        self.forcing = Some(f);
        self
    }

    pub fn basis(&self) -> &GalerkinBasis {
        &self.basis
    }

    pub fn phys(&self) -> &PhysParams {
        &self.phys
    }

    pub fn approx(&self) -> &ApproxParams {
        &self.approx
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.basis.grid()
    }

    pub fn forcing(&self) -> Option<&ForcingFn> {
        self.forcing.as_ref()
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn project(&self, u: &VectorField) -> Vec<f64> {
        self.basis.project(u)
    }

    pub fn velocity(&self, a: &[f64]) -> VectorField {
        self.basis.velocity(a)
    }

    /// Solve `M(rho) a = int q . Phi`; the flag reports a regularized mass matrix.
    pub fn velocity_from_momentum(&self, rho: &Field, q: &VectorField) -> Result<(Vec<f64>, bool)> {
        let (chol, reg) = factor(self.basis.mass_matrix(rho))?;
        let b = DVector::from_vec(self.basis.project(q));
        Ok((chol.solve(&b).as_slice().to_vec(), reg))
    }

    /// State with Galerkin velocity recovered from the initial momentum.
    pub fn initial_state(&self, rho: Field, z: Field, q: &VectorField) -> Result<(State, bool)> {
        let (a, reg) = self.velocity_from_momentum(&rho, q)?;
        let u = self.velocity(&a);
        Ok((State { t: 0.0, rho, z, u }, reg))
    }

    fn nodes(&self, a: &[f64]) -> Nodes {
        let d = self.grid().dim();
        Nodes {
            u: (0..d).map(|c| self.basis.eval_component(a, c)).collect(),
            grad: (0..d)
                .map(|c| (0..d).map(|ax| self.basis.eval_gradient(a, c, ax)).collect())
                .collect(),
        }
    }

    fn forcing_nodes(&self, t: f64) -> Option<Vec<DVector<f64>>> {
        let f = self.forcing.as_ref()?;
        let grid = self.grid();
        let d = grid.dim();
        let shape = grid.shape();
        let mut out = vec![DVector::zeros(grid.len()); d];
        let mut idx = vec![0usize; d];
        for node in 0..grid.len() {
            let mut r = node;
            for a in (0..d).rev() {
                idx[a] = r % shape[a];
                r /= shape[a];
            }
            let x = grid.coords(&idx);
            for (c, o) in out.iter_mut().enumerate() {
                o[node] = f(t, c, &x);
            }
        }
        Some(out)
    }

    fn pressure_nodes(&self, z: &Field) -> DVector<f64> {
        let delta = self.approx.delta;
        DVector::from_iterator(z.data().len(), z.data().iter().map(|&v| self.phys.pressure(v, delta)))
    }

    /// Coefficient derivatives of the Galerkin momentum balance at `state`.
    pub fn momentum_rhs(&self, state: &State) -> Result<MomentumRhs> {
        let grid = self.grid().clone();
        let d = grid.dim();
        let n = grid.len();
        let eps = self.approx.epsilon;
        let a = self.basis.project(&state.u);
        let nd = self.nodes(&a);
        let rho = to_vec(&state.rho);
        let zero = || DVector::<f64>::zeros(n);
        let zeros_q = || vec![vec![DVector::<f64>::zeros(n); d]; d];
        let zeros_r = || vec![DVector::<f64>::zeros(n); d];
        let div_u: DVector<f64> = (0..d).fold(zero(), |acc, c| acc + &nd.grad[c][c]);

        let mut terms = Vec::new();

        let mut q = zeros_q();
        for c in 0..d {
            for ax in 0..d {
                q[c][ax] = rho.component_mul(&nd.u[ax]).component_mul(&nd.u[c]);
            }
        }
        terms.push(("convection", self.basis.project_weak(&zeros_r(), &q)));

        let p = self.pressure_nodes(&state.z);
        let mut q = zeros_q();
        for c in 0..d {
            q[c][c] = p.clone();
        }
        terms.push(("pressure", self.basis.project_weak(&zeros_r(), &q)));

        let (mu, lambda) = (self.phys.mu, self.phys.lambda);
        let mut q = zeros_q();
        for c in 0..d {
            for ax in 0..d {
                q[c][ax] = -mu * &nd.grad[c][ax];
            }
            q[c][c] -= (mu + lambda) * &div_u;
        }
        terms.push(("viscous", self.basis.project_weak(&zeros_r(), &q)));

        if eps > 0.0 {
            let grad_rho: Vec<DVector<f64>> = state
                .rho
                .gradient()?
                .components()
                .iter()
                .map(to_vec)
                .collect();
            let mut r = zeros_r();
            for c in 0..d {
                for ax in 0..d {
                    r[c] -= eps * grad_rho[ax].component_mul(&nd.grad[c][ax]);
                }
            }
            terms.push(("eps_gradient", self.basis.project_weak(&r, &zeros_q())));

            let lap = to_vec(&state.rho.laplacian()?);
            let flux = VectorField::new(
                state.u.components().iter().map(|uc| state.rho.mul(uc)).collect(),
            )?;
            let div_flux = to_vec(&flux.divergence()?);
            let src = -(eps * lap - div_flux);
            let r: Vec<DVector<f64>> = (0..d).map(|c| src.component_mul(&nd.u[c])).collect();
            terms.push(("eps_source", self.basis.project_weak(&r, &zeros_q())));
        }

        if let Some(f) = self.forcing_nodes(state.t) {
            let r: Vec<DVector<f64>> = f.iter().map(|fc| rho.component_mul(fc)).collect();
            terms.push(("forcing", self.basis.project_weak(&r, &zeros_q())));
        }

        let total = terms.iter().fold(DVector::zeros(a.len()), |acc, (_, t)| {
            acc + DVector::from_column_slice(t)
        });
        let (chol, regularized) = factor(self.basis.mass_matrix(&state.rho))?;
        Ok(MomentumRhs {
            derivative: chol.solve(&total).as_slice().to_vec(),
            terms,
            regularized,
        })
    }

    /// Advance `(rho, Z, u)` by one time step with damped Picard iteration on the velocity.
    pub fn coupled_step(&self, state: &State) -> Result<(State, StepInfo)> {
        let grid = self.grid().clone();
        let d = grid.dim();
        let n = grid.len();
        let dt = self.approx.dt;
        let eps = self.approx.epsilon;
        let delta = self.approx.delta;
        let t_new = state.t + dt;

        let a_old = DVector::from_vec(self.basis.project(&state.u));
        let mass = self.basis.mass_matrix(&state.rho);
        let (chol, regularized) = factor(&mass / dt + &self.stiffness)?;
        let inertia = &mass * &a_old / dt;
        let rho_old = to_vec(&state.rho);
        let z_old = to_vec(&state.z);
        let forcing = self.forcing_nodes(t_new);

        let sweep = |a: &DVector<f64>| -> Result<(DVector<f64>, Field, Field)> {
            let u = self.basis.velocity(a.as_slice());
            check_stability(&u, dt)?;
            let nd = self.nodes(a.as_slice());
            let (rho_new, div_rho) = density_update(&state.rho, &u, eps, dt)?;
            let (z_new, _) = density_update(&state.z, &u, eps, dt)?;
            let div_rho = to_vec(&div_rho);
            let rho_n = to_vec(&rho_new);
            // eps Lap rho^{n+1}, exactly as realized by the density step
            let eps_lap = (&rho_n - &rho_old) / dt + &div_rho;
            let grad_rho: Vec<DVector<f64>> = if eps > 0.0 {
                rho_new.gradient()?.components().iter().map(to_vec).collect()
            } else {
                vec![DVector::zeros(n); d]
            };
            let pp = z_new.map(|v| self.phys.potential_prime(v, delta));
            let grad_pp: Vec<DVector<f64>> = pp.gradient()?.components().iter().map(to_vec).collect();

            let mut r = Vec::with_capacity(d);
            let mut q = Vec::with_capacity(d);
            for c in 0..d {
                let mut rc = DVector::zeros(n);
                let mut qc = Vec::with_capacity(d);
                for ax in 0..d {
                    let ru = rho_old.component_mul(&nd.u[ax]);
                    rc -= 0.5 * ru.component_mul(&nd.grad[c][ax]);
                    let mut qa = 0.5 * ru.component_mul(&nd.u[c]);
                    if eps > 0.0 {
                        rc -= 0.5 * eps * grad_rho[ax].component_mul(&nd.grad[c][ax]);
                        qa += 0.5 * eps * grad_rho[ax].component_mul(&nd.u[c]);
                    }
                    qc.push(qa);
                }
                rc += 0.5 * div_rho.component_mul(&nd.u[c]);
                rc -= 0.5 * eps_lap.component_mul(&nd.u[c]);
                rc -= z_old.component_mul(&grad_pp[c]);
                if let Some(f) = &forcing {
                    rc += rho_old.component_mul(&f[c]);
                }
                r.push(rc);
                q.push(qc);
            }
            let b = DVector::from_vec(self.basis.project_weak(&r, &q));
            Ok((chol.solve(&(&inertia + b)), rho_new, z_new))
        };

        let omega = self.approx.relaxation;
        let tol = self.approx.picard_tol;
        let mut a = a_old.clone();
        let mut history = Vec::new();
        let mut converged = None;
        for it in 1..=self.approx.picard_max_iter {
            let (a_new, _, _) = sweep(&a)?;
            let diff = (&a_new - &a).norm();
            history.push(diff);
            if !diff.is_finite() {
                break;
            }
            if diff <= tol * a_new.norm().max(1.0) {
                converged = Some((it, a_new));
                break;
            }
            a += omega * (a_new - &a);
        }
        let Some((iters, a_new)) = converged else {
            return Err(Error::Picard {
                iterations: history.len(),
                last: history.last().copied().unwrap_or(f64::NAN),
                history,
            });
        };

        let u = self.basis.velocity(a_new.as_slice());
        check_stability(&u, dt)?;
        let (rho, _) = density_update(&state.rho, &u, eps, dt)?;
        let (z, _) = density_update(&state.z, &u, eps, dt)?;

        let dissipation = dt * a_new.dot(&(&self.stiffness * &a_new));
        let (eps_gamma_term, eps_beta_term) = self.eps_terms(&z)?;
        let forcing_work = match &forcing {
            Some(f) => {
                let w = self.basis.weights();
                dt * (0..d)
                    .map(|c| {
                        let uc = self.basis.eval_component(a_new.as_slice(), c);
                        w.component_mul(&rho_old).component_mul(&f[c]).dot(&uc)
                    })
                    .sum::<f64>()
            }
            None => 0.0,
        };
        let info = StepInfo {
            picard_iters: iters,
            history,
            dissipation,
            eps_gamma_term: dt * eps_gamma_term,
            eps_beta_term: dt * eps_beta_term,
            forcing_work,
            regularized,
            min_rho: rho.min(),
            min_z: z.min(),
        };
        Ok((State { t: t_new, rho, z, u }, info))
    }

    /// Instantaneous `int eps gamma Z^{gamma-2} |grad Z|^2` and `int eps delta beta Z^{beta-2} |grad Z|^2`.
    pub fn eps_terms(&self, z: &Field) -> Result<(f64, f64)> {
        let eps = self.approx.epsilon;
        if eps == 0.0 {
            return Ok((0.0, 0.0));
        }
        let g2 = z.gradient()?.norm_sqr_field();
        let (gamma, beta, delta) = (self.phys.gamma, self.phys.beta, self.approx.delta);
        let weight = |p: f64| {
            z.zip_map(&g2, move |zv, gv| if zv > 0.0 { zv.powf(p - 2.0) * gv } else { 0.0 })
                .integrate()
        };
        let eg = eps * gamma * weight(gamma);
        let eb = if delta > 0.0 { eps * delta * beta * weight(beta) } else { 0.0 };
        Ok((eg, eb))
    }

    /// `E_delta = int (rho |u|^2 / 2 + Z^gamma/(gamma-1) + delta Z^beta/(beta-1))`.
    pub fn energy(&self, state: &State) -> f64 {
        let delta = self.approx.delta;
        let kin = 0.5 * state.rho.zip_map(&state.u.norm_sqr_field(), |r, q| r * q).integrate();
        let pot = state.z.map(|v| self.phys.potential(v, delta)).integrate();
        kin + pot
    }
}
