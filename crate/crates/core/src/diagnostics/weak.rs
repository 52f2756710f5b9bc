//! Space-time weak residuals of balance laws `c_t + div G = S`.
//!
//! For a test function `phi(t, x) = tau(t) phi_s(x)` the residual is
//! `int c(T) phi(T) - int c(0) phi(0) - int_0^T int (c phi_t + G . grad phi + S phi)`,
//! with the time integral taken by the trapezoid rule over the stored slices.
//! The epsilon-regularization enters each formulation through its flux and
//! source so that residuals vanish for the regularized system itself.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bridge::BridgeSeries;
use crate::error::{Error, Result};
use crate::fields::{Field, Grid, TestFn, TestFunctionBank};
use crate::galerkin::{Galerkin, State, Trajectory};

/// Balance-law data at one time instant.
pub(crate) struct Slice {
    pub t: f64,
    pub c: Field,
    pub flux: Vec<Field>,
    pub source: Option<Field>,
}

fn residual_one(grid: &Arc<Grid>, slices: &[Slice], phi: &TestFn) -> f64 {
    let (t0, t1) = (slices[0].t, slices[slices.len() - 1].t);
    // time factors are written on [0, T]; shift in case the series does not start at 0
    let tf = t1 - t0;
    let ps = phi.spatial_field(grid);
    let pg = phi.spatial_gradient(grid);
    let integrand = |s: &Slice| {
        let (tau, dtau) = phi.time_factor(s.t - t0, tf);
        let mut v = s.c.dot(&ps) * dtau;
        let mut inner: f64 = s.flux.iter().zip(&pg).map(|(g, d)| g.dot(d)).sum();
        if let Some(src) = &s.source {
            inner += src.dot(&ps);
        }
        v += tau * inner;
        v
    };
    let mut time_int = 0.0;
    let mut prev = integrand(&slices[0]);
    for w in slices.windows(2) {
        let next = integrand(&w[1]);
        time_int += 0.5 * (w[1].t - w[0].t) * (prev + next);
        prev = next;
    }
    let (tau_end, _) = phi.time_factor(tf, tf);
    let (tau_0, _) = phi.time_factor(0.0, tf);
    let first = &slices[0];
    let last = &slices[slices.len() - 1];
    last.c.dot(&ps) * tau_end - first.c.dot(&ps) * tau_0 - time_int
}

/// Residual for every bank member, in bank order.
pub(crate) fn balance_residuals(slices: &[Slice], bank: &TestFunctionBank) -> Result<Vec<f64>> {
    if slices.len() < 2 {
        return Err(Error::InvalidArgument(
            "weak residual needs at least two time slices".into(),
        ));
    }
    let grid = slices[0].c.grid().clone();
    Ok(bank
        .functions
        .par_iter()
        .map(|phi| residual_one(&grid, slices, phi))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Formulation {
    Continuity,
    ZEquation,
    RhoS,
    ZetaTransport,
    Momentum,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Formulation::Continuity => "cont",
            Formulation::ZEquation => "Z-eq",
            Formulation::RhoS => "rho-s-eq",
            Formulation::ZetaTransport => "zeta-transport",
            Formulation::Momentum => "momentum",
        }
    }

    pub fn parse(s: &str) -> Option<Formulation> {
        [
            Formulation::Continuity,
            Formulation::ZEquation,
            Formulation::RhoS,
            Formulation::ZetaTransport,
            Formulation::Momentum,
        ]
        .into_iter()
        .find(|f| f.name() == s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakResidual {
    pub name: String,
    /// `|r_phi|` per test function (per component for vector balances).
    pub per_test: Vec<f64>,
    pub max: f64,
    /// `sup_t int |c|`, a natural size for the residuals.
    pub scale: f64,
}

impl WeakResidual {
    fn new(name: &str, per_test: Vec<f64>, scale: f64) -> WeakResidual {
        let per_test: Vec<f64> = per_test.into_iter().map(f64::abs).collect();
        let max = per_test.iter().copied().fold(0.0, f64::max);
        WeakResidual {
            name: name.to_string(),
            per_test,
            max,
            scale,
        }
    }

    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max / self.scale
        } else {
            self.max
        }
    }
}

fn scale_of(slices: &[Slice]) -> f64 {
    slices
        .iter()
        .map(|s| s.c.map(f64::abs).integrate())
        .fold(0.0, f64::max)
}

fn eps_flux(c: &Field, u_flux: Vec<Field>, eps: f64) -> Result<Vec<Field>> {
    if eps == 0.0 {
        return Ok(u_flux);
    }
    let g = c.gradient()?;
    Ok(u_flux
        .into_iter()
        .zip(g.components())
        .map(|(f, d)| f.sub(&d.scale(eps)))
        .collect())
}

fn advective(c: &Field, s: &State) -> Vec<Field> {
    s.u.components().iter().map(|uc| c.mul(uc)).collect()
}

/// `c_t + div(c u) = eps Lap c` for `c` = rho or Z.
fn density_slices(traj: &Trajectory, eps: f64, pick: fn(&State) -> &Field) -> Result<Vec<Slice>> {
    traj.snapshots
        .iter()
        .map(|s| {
            let c = pick(s).clone();
            let flux = eps_flux(&c, advective(&c, s), eps)?;
            Ok(Slice {
                t: s.t,
                c,
                flux,
                source: None,
            })
        })
        .collect()
}

/// `eps (div(rho grad theta) + grad rho . grad theta) / rho`: the regularization seen by `theta = Z/rho`.
fn theta_forcing(rho: &Field, theta: &Field, eps: f64) -> Result<Option<Field>> {
    if eps == 0.0 {
        return Ok(None);
    }
    let gr = rho.gradient()?;
    let gt = theta.gradient()?;
    let mut acc = Field::zeros(rho.grid(), rho.basis().to_vec());
    for (a, (dr, dt)) in gr.components().iter().zip(gt.components()).enumerate() {
        let d = rho.mul(dt).differentiate(a)?;
        acc = acc.add(&d).add(&dr.zip_map(dt, |x, y| x * y));
    }
    Ok(Some(acc.zip_map(rho, move |v, r| eps * v / r)))
}

/// Transport of `g(theta)` in conservative form:
/// `g_t + div(g u) = g div u + g'(theta) eps R_theta`.
pub(crate) fn g_transport_slices<F>(
    traj: &Trajectory,
    theta: &[Field],
    eps: f64,
    g: F,
) -> Result<Vec<Slice>>
where
    F: Fn(f64) -> (f64, f64) + Sync,
{
    check_series(traj, theta.len())?;
    traj.snapshots
        .iter()
        .zip(theta)
        .map(|(s, th)| {
            let c = th.map(|v| g(v).0);
            let dg = th.map(|v| g(v).1);
            let div = s.u.divergence()?;
            let mut src = c.zip_map(&div, |a, b| a * b);
            if let Some(r) = theta_forcing(&s.rho, th, eps)? {
                src = src.add(&dg.zip_map(&r, |a, b| a * b));
            }
            Ok(Slice {
                t: s.t,
                flux: advective(&c, s),
                c,
                source: Some(src),
            })
        })
        .collect()
}

/// `(rho s)_t + div(rho s u) = eps Lap(rho s) - eps rho s''(theta) |grad theta|^2`.
pub(crate) fn rho_s_slices(traj: &Trajectory, bridge: &BridgeSeries, eps: f64) -> Result<Vec<Slice>> {
    check_series(traj, bridge.theta.len())?;
    traj.snapshots
        .iter()
        .zip(&bridge.theta)
        .map(|(s, th)| {
            let ent = bridge.entropy(th)?;
            let c = s.rho.mul(&ent).with_basis(s.rho.basis().to_vec())?;
            let flux = eps_flux(&c, advective(&c, s), eps)?;
            let source = if eps > 0.0 {
                let g2 = th.gradient()?.norm_sqr_field();
                let d2 = th.map(|v| bridge.pair.entropy_derivs(v, bridge.gamma).2);
                Some(
                    s.rho
                        .zip_map(&d2, |r, d| r * d)
                        .zip_map(&g2, move |a, b| -eps * a * b),
                )
            } else {
                None
            };
            Ok(Slice {
                t: s.t,
                c,
                flux,
                source,
            })
        })
        .collect()
}

fn check_series(traj: &Trajectory, n: usize) -> Result<()> {
    if n != traj.snapshots.len() {
        return Err(Error::MissingField(format!(
            "derived series has {n} slices, trajectory has {}",
            traj.snapshots.len()
        )));
    }
    Ok(())
}

fn forcing_field(gal: &Galerkin, t: f64, c: usize) -> Option<Field> {
    gal.forcing()
        .map(|f| Field::scalar_fn(gal.grid(), |x| f(t, c, x)))
}

/// Momentum component `c`: `(rho u_c)_t + div(rho u u_c + p e_c - S_c) = -eps grad rho . grad u_c + rho f_c`.
pub(crate) fn momentum_slices(gal: &Galerkin, traj: &Trajectory, c: usize) -> Result<Vec<Slice>> {
    let (mu, lambda) = (gal.phys().mu, gal.phys().lambda);
    let eps = gal.approx().epsilon;
    let delta = gal.approx().delta;
    let phys = gal.phys().clone();
    traj.snapshots
        .iter()
        .map(|s| {
            let uc = s.u.component(c);
            let m = s.rho.mul(uc);
            let du = uc.gradient()?;
            let div = s.u.divergence()?;
            let p = s.z.map(|z| phys.pressure(z, delta));
            let mut flux = Vec::with_capacity(s.u.dim());
            for (a, ua) in s.u.components().iter().enumerate() {
                let mut g = m.mul(ua).sub(&du.component(a).scale(mu));
                if a == c {
                    g = g.add(&p).sub(&div.scale(mu + lambda));
                }
                flux.push(g);
            }
            let mut src: Option<Field> = None;
            if eps > 0.0 {
                let gr = s.rho.gradient()?;
                let dot = gr
                    .components()
                    .iter()
                    .zip(du.components())
                    .fold(Field::zeros(gal.grid(), m.basis().to_vec()), |acc, (x, y)| {
                        acc.add(&x.zip_map(y, |a, b| a * b))
                    });
                src = Some(dot.scale(-eps));
            }
            if let Some(f) = forcing_field(gal, s.t, c) {
                let rf = s.rho.zip_map(&f, |a, b| a * b);
                src = Some(match src {
                    Some(x) => x.add(&rf),
                    None => rf,
                });
            }
            Ok(Slice {
                t: s.t,
                c: m,
                flux,
                source: src,
            })
        })
        .collect()
}

/// Weak residual of one formulation over a bank; vector balances use each member once per component.
pub fn weak_residual(
    gal: &Galerkin,
    traj: &Trajectory,
    form: Formulation,
    bank: &TestFunctionBank,
    bridge: Option<&BridgeSeries>,
) -> Result<WeakResidual> {
    let eps = gal.approx().epsilon;
    let need = || {
        bridge.ok_or_else(|| {
            Error::MissingField(format!("{} needs the bridge series (theta, s)", form.name()))
        })
    };
    let (per, scale) = match form {
        Formulation::Continuity | Formulation::ZEquation => {
            let pick: fn(&State) -> &Field = if form == Formulation::Continuity {
                |s| &s.rho
            } else {
                |s| &s.z
            };
            let sl = density_slices(traj, eps, pick)?;
            (balance_residuals(&sl, bank)?, scale_of(&sl))
        }
        Formulation::RhoS => {
            let sl = rho_s_slices(traj, need()?, eps)?;
            (balance_residuals(&sl, bank)?, scale_of(&sl))
        }
        Formulation::ZetaTransport => {
            let sl = g_transport_slices(traj, &need()?.theta, eps, |th| {
                (1.0 / th, -1.0 / (th * th))
            })?;
            (balance_residuals(&sl, bank)?, scale_of(&sl))
        }
        Formulation::Momentum => {
            if bank.functions.iter().any(|f| !f.is_compact(gal.grid())) {
                return Err(Error::InvalidArgument(
                    "momentum tests must vanish on walls".into(),
                ));
            }
            let mut per = Vec::new();
            let mut scale: f64 = 0.0;
            for c in 0..gal.grid().dim() {
                let sl = momentum_slices(gal, traj, c)?;
                per.extend(balance_residuals(&sl, bank)?);
                scale = scale.max(scale_of(&sl));
            }
            (per, scale)
        }
    };
    Ok(WeakResidual::new(form.name(), per, scale))
}

/// Renormalizing function with its first two derivatives.
#[derive(Clone, Copy, Debug)]
pub struct Renormalizer {
    pub name: &'static str,
    pub b: fn(f64) -> f64,
    pub db: fn(f64) -> f64,
    pub d2b: fn(f64) -> f64,
    /// Declared exponent `l` in `|b'(z)| <= C z^l` for large `z`.
    pub growth: f64,
}

impl Renormalizer {
    pub fn identity() -> Renormalizer {
        Renormalizer {
            name: "z",
            b: |z| z,
            db: |_| 1.0,
            d2b: |_| 0.0,
            growth: 0.0,
        }
    }

    /// `b(z) = z^2 / (1 + z)`.
    pub fn rational() -> Renormalizer {
        Renormalizer {
            name: "z^2/(1+z)",
            b: |z| z * z / (1.0 + z),
            db: |z| z * (z + 2.0) / ((1.0 + z) * (1.0 + z)),
            d2b: |z| 2.0 / ((1.0 + z) * (1.0 + z) * (1.0 + z)),
            growth: 0.0,
        }
    }

    pub fn square() -> Renormalizer {
        Renormalizer {
            name: "z^2",
            b: |z| z * z,
            db: |z| 2.0 * z,
            d2b: |_| 2.0,
            growth: 1.0,
        }
    }
}

/// Residual of `b(Z)_t + div(b u) + (b' Z - b) div u = eps Lap b - eps b'' |grad Z|^2`.
///
/// `integrability` is the exponent `q` with `Z in L^q`; renormalizers growing
/// faster than `|b'| ~ z^{q/2 - 1}` are rejected (the identity is always allowed).
pub fn renorm_residual(
    gal: &Galerkin,
    traj: &Trajectory,
    b: &Renormalizer,
    bank: &TestFunctionBank,
    integrability: f64,
) -> Result<WeakResidual> {
    let limit = (integrability / 2.0 - 1.0).max(0.0);
    if b.growth > limit {
        return Err(Error::InvalidArgument(format!(
            "renormalizer {} grows like z^{} beyond the admissible z^{limit}",
            b.name, b.growth
        )));
    }
    let eps = gal.approx().epsilon;
    let slices: Vec<Slice> = traj
        .snapshots
        .iter()
        .map(|s| {
            let c = s.z.map(b.b);
            let flux = eps_flux(&c, advective(&c, s), eps)?;
            let div = s.u.divergence()?;
            let defect = s.z.map(|z| (b.db)(z) * z - (b.b)(z));
            let mut src = defect.zip_map(&div, |a, d| -a * d);
            if eps > 0.0 {
                let g2 = s.z.gradient()?.norm_sqr_field();
                let d2 = s.z.map(b.d2b);
                src = src.add(&d2.zip_map(&g2, move |a, g| -eps * a * g));
            }
            Ok(Slice {
                t: s.t,
                c,
                flux,
                source: Some(src),
            })
        })
        .collect::<Result<_>>()?;
    Ok(WeakResidual::new(
        &format!("renorm[{}]", b.name),
        balance_residuals(&slices, bank)?,
        scale_of(&slices),
    ))
}
