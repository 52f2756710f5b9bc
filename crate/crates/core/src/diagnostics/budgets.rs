//! Budgets and functionals: Z ln Z, effective viscous flux, oscillation defect, pressure test.

use serde::Serialize;

use super::cutoff::{cutoff_field, cutoff_tk};
use crate::error::{Error, Result};
use crate::fields::{Field, TestFn, VectorField};
use crate::galerkin::{Galerkin, PhysParams, State, Trajectory};
use crate::operators::OperatorContext;

#[derive(Clone, Debug, Serialize)]
pub struct ZlogzBudget {
    /// `sum dt int Z^n u^{n+1} . grad ln Z^{n+1}` with the sign of `int int Z div u`.
    pub lhs: f64,
    /// `int Z_0 ln Z_0 - int Z(T) ln Z(T)`.
    pub rhs: f64,
    /// `lhs - rhs`; non-positive for the regularized scheme.
    pub gap: f64,
}

fn zlnz(z: &Field) -> f64 {
    z.map(|v| v * v.ln()).integrate()
}

/// Discrete Z ln Z budget, paired the way the density step is built.
pub fn zlogz_budget(traj: &Trajectory) -> Result<ZlogzBudget> {
    if traj.cadence != 1 {
        return Err(Error::Cadence(format!(
            "Z ln Z budget needs every step, trajectory kept every {}",
            traj.cadence
        )));
    }
    for s in &traj.snapshots {
        if s.z.min() <= 0.0 {
            return Err(Error::Vacuum(format!("Z <= 0 at t = {}", s.t)));
        }
    }
    let mut lhs = 0.0;
    for w in traj.snapshots.windows(2) {
        let (old, new) = (&w[0], &w[1]);
        let dt = new.t - old.t;
        let gl = new.z.map(f64::ln).gradient()?;
        let pair: f64 = new
            .u
            .components()
            .iter()
            .zip(gl.components())
            .map(|(uc, g)| old.z.zip_map(uc, |a, b| a * b).dot(g))
            .sum();
        lhs -= dt * pair;
    }
    let rhs = zlnz(&traj.snapshots[0].z) - zlnz(&traj.last().z);
    Ok(ZlogzBudget {
        lhs,
        rhs,
        gap: lhs - rhs,
    })
}

/// `psi int phi (Z^gamma + delta Z^beta - (lambda + 2 mu) div u) T_k(Z)` at one time slice.
pub fn evf_functional(
    state: &State,
    k: f64,
    phi: &TestFn,
    psi: f64,
    phys: &PhysParams,
    delta: f64,
) -> Result<f64> {
    let grid = state.rho.grid();
    if !phi.is_compact(grid) {
        return Err(Error::InvalidArgument(
            "effective viscous flux needs an interior-supported test function".into(),
        ));
    }
    let (tk, _) = cutoff_field(&state.z, k)?;
    let div = state.u.divergence()?;
    let visc = phys.lambda + 2.0 * phys.mu;
    let flux = state
        .z
        .zip_map(&div, |z, d| phys.pressure(z, delta) - visc * d);
    Ok(psi * flux.mul(&tk).dot(&phi.spatial_field(grid)))
}

#[derive(Clone, Debug, Serialize)]
pub struct OscillationDefect {
    /// Maximum of the profile.
    pub value: f64,
    /// `(k, ||T_k(Z_finest) - T_k(Z)||_q)`.
    pub profile: Vec<(f64, f64)>,
}

/// Oscillation defect of a ladder against a reference, evaluated at the finest (last) rung.
pub fn oscillation_defect(
    ladder: &[Field],
    reference: &Field,
    q: f64,
    ks: &[f64],
) -> Result<OscillationDefect> {
    let finest = ladder
        .last()
        .ok_or_else(|| Error::InvalidArgument("oscillation defect needs a non-empty ladder".into()))?;
    if !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("exponent q = {q} must exceed 1")));
    }
    if ks.is_empty() {
        return Err(Error::InvalidArgument("empty list of cut-off levels".into()));
    }
    let profile = ks
        .iter()
        .map(|&k| {
            let a = finest.map(|z| cutoff_tk(z, k).unwrap_or(f64::NAN));
            let b = reference.map(|z| cutoff_tk(z, k).unwrap_or(f64::NAN));
            if !a.is_finite() {
                return Err(Error::InvalidArgument(format!("cut-off level k = {k} must be >= 1")));
            }
            Ok((k, a.sub(&b).lp_norm(q)))
        })
        .collect::<Result<Vec<_>>>()?;
    let value = profile.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(OscillationDefect { value, profile })
}

#[derive(Clone, Debug, Serialize)]
pub struct PressureCheck {
    pub theta_int: f64,
    /// `int int Z^{gamma+theta} + delta Z^{beta+theta}`.
    pub integrability: f64,
    /// `int int p (Z^theta - mean)`, the pressure term seen by the test field.
    pub pressure_term: f64,
    /// Remaining imbalance of the tested momentum identity.
    pub gap: f64,
    /// The test field matches only the normal trace on walls.
    pub normal_trace_only: bool,
}

fn grad_pairing(g: &[VectorField], psi: &VectorField) -> Result<f64> {
    let mut acc = 0.0;
    for (c, gc) in g.iter().enumerate() {
        let dpsi = psi.component(c).gradient()?;
        acc += gc
            .components()
            .iter()
            .zip(dpsi.components())
            .map(|(x, y)| x.dot(y))
            .sum::<f64>();
    }
    Ok(acc)
}

/// Momentum identity tested with `psi = inverse_divergence(Z^theta - mean)` per slice.
pub fn pressure_estimate_check(
    gal: &Galerkin,
    traj: &Trajectory,
    theta_int: f64,
) -> Result<PressureCheck> {
    let phys = gal.phys();
    let bound = phys.theta_int_max();
    if !(theta_int > 0.0 && theta_int <= bound + 1e-15) {
        return Err(Error::InvalidArgument(format!(
            "theta_int = {theta_int} outside (0, {bound}]"
        )));
    }
    let (mu, lambda) = (phys.mu, phys.lambda);
    let eps = gal.approx().epsilon;
    let delta = gal.approx().delta;
    let ctx = OperatorContext::new(gal.grid());
    let mut normal_only = false;

    struct Tested {
        t: f64,
        m: Vec<Field>,
        psi: VectorField,
        flux_pair: f64,
        pressure: f64,
        integrability: f64,
    }
    let tested = traj
        .snapshots
        .iter()
        .map(|s| {
            let zt = s.z.map(|z| z.max(0.0).powf(theta_int));
            let mut centered = zt.shift(-zt.mean());
            // rounding-level deviations carry no information and fail the mean-free guard
            if centered.sup_norm() <= 1e-13 * zt.sup_norm() {
                centered = centered.map(|_| 0.0);
            }
            let inv = ctx.inverse_divergence(&centered)?;
            normal_only |= inv.normal_trace_only;
            let psi = inv.v;
            let p = s.z.map(|z| phys.pressure(z, delta));
            let div = s.u.divergence()?;
            let d = s.u.dim();
            // stress rows G_c = rho u u_c + p e_c - mu grad u_c - (mu + lambda) div u e_c
            let mut rows = Vec::with_capacity(d);
            let mut src = 0.0;
            let gr = if eps > 0.0 { Some(s.rho.gradient()?) } else { None };
            for c in 0..d {
                let uc = s.u.component(c);
                let du = uc.gradient()?;
                let m = s.rho.mul(uc);
                let comps = (0..d)
                    .map(|a| {
                        let mut g = m.mul(s.u.component(a)).sub(&du.component(a).scale(mu));
                        if a == c {
                            g = g.add(&p).sub(&div.scale(mu + lambda));
                        }
                        g
                    })
                    .collect();
                rows.push(VectorField::new(comps)?);
                if let Some(gr) = &gr {
                    let dot: f64 = gr
                        .components()
                        .iter()
                        .zip(du.components())
                        .map(|(x, y)| x.zip_map(y, |a, b| a * b).dot(psi.component(c)))
                        .sum();
                    src -= eps * dot;
                }
                if let Some(f) = gal.forcing() {
                    let ff = Field::scalar_fn(gal.grid(), |x| f(s.t, c, x));
                    src += s.rho.zip_map(&ff, |a, b| a * b).dot(psi.component(c));
                }
            }
            let flux_pair = grad_pairing(&rows, &psi)? + src;
            Ok(Tested {
                t: s.t,
                m: (0..d).map(|c| s.rho.mul(s.u.component(c))).collect(),
                pressure: p.dot(&centered),
                integrability: s
                    .z
                    .map(|z| {
                        let z = z.max(0.0);
                        z.powf(phys.gamma + theta_int) + delta * z.powf(phys.beta + theta_int)
                    })
                    .integrate(),
                psi,
                flux_pair,
            })
        })
        .collect::<Result<Vec<Tested>>>()?;

    let (mut gap, mut pressure, mut integ) = (0.0, 0.0, 0.0);
    for w in tested.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dt = b.t - a.t;
        let dm: f64 = (0..a.m.len())
            .map(|c| {
                let psi_avg = a.psi.component(c).add(b.psi.component(c)).scale(0.5);
                b.m[c].sub(&a.m[c]).dot(&psi_avg)
            })
            .sum();
        gap += dm - 0.5 * dt * (a.flux_pair + b.flux_pair);
        pressure += 0.5 * dt * (a.pressure + b.pressure);
        integ += 0.5 * dt * (a.integrability + b.integrability);
    }
    Ok(PressureCheck {
        theta_int,
        integrability: integ,
        pressure_term: pressure,
        gap,
        normal_trace_only: normal_only,
    })
}
