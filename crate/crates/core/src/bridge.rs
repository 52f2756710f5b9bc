//! Potential temperature, entropy recovery and cross-checks between the
//! density/entropy, transported-entropy and Z formulations.

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{balance_residuals, g_transport_slices, rho_s_slices};
use crate::diagnostics::{refinement_trend, DiagnosticsReport, Entry};
use crate::error::{Error, Result};
use crate::fields::{Field, TestFn, TestFunctionBank};
use crate::galerkin::{transport_step, EntropyLaw, Galerkin, Trajectory, BAND_TOL};

/// Relative density level below which a node counts as vacuum.
pub const VACUUM_THRESHOLD: f64 = 1e-10;

/// Default ladder of ratio regularizations.
pub const DEFAULT_LAMBDAS: [f64; 3] = [1e-2, 1e-4, 1e-6];

/// Factor a residual must shrink by under one refinement doubling.
pub const REFINEMENT_FACTOR: f64 = 1.5;

/// Closed-form entropy law `T` and its inverse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Default)]
pub enum TFunctionPair {
    /// `T(s) = e^s`.
    #[default]
    Exponential,
    /// `T(s) = s^p`.
    Power(f64),
}

impl TFunctionPair {
    pub fn from_law(law: EntropyLaw, gamma: f64) -> TFunctionPair {
        match law {
            EntropyLaw::Exponential => TFunctionPair::Exponential,
            EntropyLaw::Power => TFunctionPair::Power(gamma),
        }
    }

    pub fn forward(self, s: f64) -> f64 {
        match self {
            TFunctionPair::Exponential => s.exp(),
            TFunctionPair::Power(p) => s.max(0.0).powf(p),
        }
    }

    pub fn inverse(self, y: f64) -> f64 {
        match self {
            TFunctionPair::Exponential => y.ln(),
            TFunctionPair::Power(p) => y.powf(1.0 / p),
        }
    }

    /// `s = T^{-1}(theta^gamma)` and its first two derivatives in `theta`.
    pub fn entropy_derivs(self, theta: f64, gamma: f64) -> (f64, f64, f64) {
        match self {
            TFunctionPair::Exponential => {
                (gamma * theta.ln(), gamma / theta, -gamma / (theta * theta))
            }
            TFunctionPair::Power(p) => {
                let r = gamma / p;
                (
                    theta.powf(r),
                    r * theta.powf(r - 1.0),
                    r * (r - 1.0) * theta.powf(r - 2.0),
                )
            }
        }
    }
}

/// `(Z + lambda A) / (rho + lambda)`, written as `A + (Z - rho A) / (rho + lambda)`
/// so that vacuum and exact-ratio nodes return `A` without rounding.
pub fn theta_lambda(rho: &Field, z: &Field, a: &Field, lambda: f64) -> Result<Field> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda_reg = {lambda} must be positive")));
    }
    let defect = z.sub(&rho.mul(a)).zip_map(rho, |d, r| d / (r + lambda));
    Ok(a.add(&defect))
}

/// `s = T^{-1}(theta^gamma)`.
pub fn recover_entropy(theta: &Field, pair: TFunctionPair, gamma: f64) -> Result<Field> {
    let bad = theta.data().iter().filter(|&&v| !(v > 0.0)).count();
    if bad > 0 {
        return Err(Error::InvalidArgument(format!(
            "entropy recovery needs theta > 0; {bad} nodes are not"
        )));
    }
    Ok(theta.map(|v| pair.entropy_derivs(v, gamma).0))
}

/// Initial ratio field: `Z0/rho0` off vacuum, the band midpoint on it, clipped to the band.
pub fn initial_ratio(rho0: &Field, z0: &Field, c_lo: f64, c_hi: f64) -> Field {
    let thr = VACUUM_THRESHOLD * rho0.sup_norm();
    rho0.zip_map(z0, |r, z| {
        if r > thr {
            (z / r).clamp(c_lo, c_hi)
        } else {
            0.5 * (c_lo + c_hi)
        }
    })
}

/// Ratio, entropy law and the transported vacuum field along a trajectory.
#[derive(Clone, Debug)]
pub struct BridgeSeries {
    pub theta: Vec<Field>,
    pub a: Vec<Field>,
    pub pair: TFunctionPair,
    pub gamma: f64,
    pub lambda: f64,
}

impl BridgeSeries {
    /// Transports `A` with the trajectory's velocity and forms `theta_lambda` per slice.
    pub fn build(gal: &Galerkin, traj: &Trajectory, pair: TFunctionPair, lambda: f64) -> Result<BridgeSeries> {
        let first = &traj.snapshots[0];
        let phys = gal.phys();
        let eps = gal.approx().epsilon;
        let mut a = vec![initial_ratio(&first.rho, &first.z, phys.c_lo, phys.c_hi)];
        for w in traj.snapshots.windows(2) {
            let next = transport_step(&a[a.len() - 1], &w[1].u, eps, w[1].t - w[0].t)?;
            a.push(next);
        }
        let theta = traj
            .snapshots
            .iter()
            .zip(&a)
            .map(|(s, af)| theta_lambda(&s.rho, &s.z, af, lambda))
            .collect::<Result<Vec<_>>>()?;
        Ok(BridgeSeries {
            theta,
            a,
            pair,
            gamma: phys.gamma,
            lambda,
        })
    }

    pub fn entropy(&self, theta: &Field) -> Result<Field> {
        recover_entropy(theta, self.pair, self.gamma)
    }

    pub fn zeta(&self, i: usize) -> Field {
        self.theta[i].map(|v| 1.0 / v)
    }
}

fn max_residual(v: Vec<f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Named residuals computed by the bridge, in report order.
#[derive(Clone, Debug, Serialize)]
pub struct BridgeResiduals {
    pub theta_transport: f64,
    pub theta_renormalized: f64,
    pub s_transport: f64,
    pub zeta_transport: f64,
    pub rho_s: f64,
}

impl BridgeResiduals {
    fn named(&self) -> [(&'static str, &'static str, f64); 5] {
        [
            ("theta-transport", "system-1.6", self.theta_transport),
            ("theta-renormalized", "system-1.6", self.theta_renormalized),
            ("s-transport", "system-1.6", self.s_transport),
            ("zeta-transport", "system-1.7", self.zeta_transport),
            ("rho-s-eq", "system-1.1", self.rho_s),
        ]
    }
}

/// `G(theta) = theta^2 / (1 + theta)`, the renormalization used for the ratio.
fn renorm_g(th: f64) -> (f64, f64) {
    (th * th / (1.0 + th), th * (th + 2.0) / ((1.0 + th) * (1.0 + th)))
}

pub fn bridge_residuals(
    gal: &Galerkin,
    traj: &Trajectory,
    series: &BridgeSeries,
    bank: &TestFunctionBank,
) -> Result<BridgeResiduals> {
    let eps = gal.approx().epsilon;
    let (pair, gamma) = (series.pair, series.gamma);
    let run = |g: &(dyn Fn(f64) -> (f64, f64) + Sync)| -> Result<f64> {
        let sl = g_transport_slices(traj, &series.theta, eps, g)?;
        Ok(max_residual(balance_residuals(&sl, bank)?))
    };
    let rs = rho_s_slices(traj, series, eps)?;
    Ok(BridgeResiduals {
        theta_transport: run(&|th| (th, 1.0))?,
        theta_renormalized: run(&renorm_g)?,
        s_transport: run(&|th| {
            let (s, ds, _) = pair.entropy_derivs(th, gamma);
            (s, ds)
        })?,
        zeta_transport: run(&|th| (1.0 / th, -1.0 / (th * th)))?,
        rho_s: max_residual(balance_residuals(&rs, bank)?),
    })
}

const RHO_S_GATE: &str = "informational (outside gamma >= 9/5 range)";

/// Single-run bridge report at the smallest ladder rung.
pub fn bridge_check(
    gal: &Galerkin,
    traj: &Trajectory,
    pair: TFunctionPair,
    ladder: &[f64],
    bank: &TestFunctionBank,
) -> Result<(DiagnosticsReport, BridgeResiduals)> {
    let lambda = ladder
        .iter()
        .copied()
        .fold(None, |m: Option<f64>, l| Some(m.map_or(l, |m| m.min(l))))
        .ok_or_else(|| Error::InvalidArgument("empty lambda_reg ladder".into()))?;
    let series = BridgeSeries::build(gal, traj, pair, lambda)?;
    let phys = gal.phys();
    let mut rep = DiagnosticsReport::default();

    // pointwise identities
    let mut zeta_err: f64 = 0.0;
    let mut ratio_err: f64 = 0.0;
    let mut band_err: f64 = 0.0;
    for (i, (s, th)) in traj.snapshots.iter().zip(&series.theta).enumerate() {
        let zeta = series.zeta(i);
        zeta_err = zeta_err.max(zeta.zip_map(th, |a, b| (a * b - 1.0).abs()).max());
        let thr = VACUUM_THRESHOLD * s.rho.sup_norm();
        for ((&r, &z), &t) in s.rho.data().iter().zip(s.z.data()).zip(th.data()) {
            if r > thr && z > 0.0 {
                ratio_err = ratio_err.max((z - r * t).abs() / z);
            }
        }
        let a = &series.a[i];
        let lo = phys.c_lo.min(a.min()) - BAND_TOL;
        let hi = phys.c_hi.max(a.max()) + BAND_TOL;
        band_err = band_err.max((lo - th.min()).max(th.max() - hi).max(0.0));
    }
    rep.push(Entry::upper("zeta_theta_identity", zeta_err, "max |zeta theta - 1|", 1e-12));
    rep.push(
        Entry::upper("ratio_consistency", ratio_err, "max |Z - rho theta| / Z off vacuum", 1e-10)
            .informational(),
    );
    let banded = crate::fields::check_band(&traj.snapshots[0].rho, &traj.snapshots[0].z, phys.c_lo, phys.c_hi).is_ok();
    let band = Entry::upper("theta_band", band_err, "max excess over the band", 0.0);
    rep.push(if banded { band } else { band.informational() });

    let res = bridge_residuals(gal, traj, &series, bank)?;
    let (tlo, thi) = series
        .theta
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), t| (lo.min(t.min()), hi.max(t.max())));
    // G' is increasing on the positive axis
    let lip = renorm_g(thi).1.max(renorm_g(tlo.max(0.0)).1);
    rep.push(Entry::upper(
        "renorm_consistency",
        res.theta_renormalized - lip * res.theta_transport,
        "r[G(theta)] - Lip(G) r[theta]",
        1e-10,
    ));
    for (name, tag, v) in res.named() {
        let mut e = Entry::upper(name, v, "max |r_phi| over bank", f64::INFINITY)
            .with_formulation(tag)
            .informational();
        e.pass = v.is_finite();
        if name == "rho-s-eq" && !phys.rho_s_admissible() {
            e.trend = Some(RHO_S_GATE.into());
        }
        rep.push(e);
    }
    Ok((rep, res))
}

/// Bridge reports on a refinement sequence plus trend verdicts for every residual.
pub fn bridge_refinement(
    levels: &[(&Galerkin, &Trajectory)],
    pair: TFunctionPair,
    ladder: &[f64],
    bank_for: impl Fn(&Galerkin) -> TestFunctionBank + Sync,
) -> Result<DiagnosticsReport> {
    let results = levels
        .par_iter()
        .map(|(g, t)| bridge_check(g, t, pair, ladder, &bank_for(g)))
        .collect::<Result<Vec<_>>>()?;
    let mut rep = DiagnosticsReport::default();
    let admissible = levels.first().is_none_or(|(g, _)| g.phys().rho_s_admissible());
    for (i, (r, _)) in results.iter().enumerate() {
        for e in &r.entries {
            let mut e = e.clone();
            e.name = format!("{}[level {i}]", e.name);
            rep.push(e);
        }
    }
    let names = ["theta-transport", "theta-renormalized", "s-transport", "zeta-transport", "rho-s-eq"];
    for (j, name) in names.iter().enumerate() {
        let vals: Vec<f64> = results.iter().map(|(_, r)| r.named()[j].2).collect();
        let (ok, txt) = refinement_trend(&vals, REFINEMENT_FACTOR);
        let tag = results
            .first()
            .map(|(_, r)| r.named()[j].1)
            .unwrap_or_default();
        let mut e = Entry::upper(
            &format!("{name}_trend"),
            *vals.last().unwrap_or(&f64::NAN),
            "max |r_phi| at finest level",
            f64::INFINITY,
        )
        .with_formulation(tag);
        if *name == "rho-s-eq" && !admissible {
            e.trend = Some(format!("{RHO_S_GATE}; {txt}"));
            e.informational = true;
        } else {
            e = e.with_trend(txt, ok);
        }
        rep.push(e);
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EndpointField {
    Rho,
    Z,
    RhoS,
    Zeta,
}

impl EndpointField {
    pub fn parse(s: &str) -> Option<EndpointField> {
        match s {
            "rho" => Some(EndpointField::Rho),
            "Z" | "z" => Some(EndpointField::Z),
            "rho_s" => Some(EndpointField::RhoS),
            "zeta" => Some(EndpointField::Zeta),
            _ => None,
        }
    }
}

/// Integral of the piecewise-linear interpolant of `(t_i, v_i)` over `[a, b]`.
fn integrate_linear(t: &[f64], v: &[f64], a: f64, b: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..t.len() - 1 {
        let (t0, t1) = (t[i], t[i + 1]);
        let lo = a.max(t0);
        let hi = b.min(t1);
        if hi <= lo {
            continue;
        }
        let at = |x: f64| v[i] + (v[i + 1] - v[i]) * (x - t0) / (t1 - t0);
        acc += 0.5 * (hi - lo) * (at(lo) + at(hi));
    }
    acc
}

/// Ramp-averaged endpoint pairings `(1/tau) int_0^tau int f phi(tau)` and its mirror at `T`.
pub fn endpoint_weak_value(
    traj: &Trajectory,
    field: EndpointField,
    phi: &TestFn,
    tau: f64,
    series: Option<&BridgeSeries>,
) -> Result<(f64, f64)> {
    let t0 = traj.snapshots[0].t;
    let tf = traj.last().t - t0;
    if !(tau > 0.0 && tau < 0.5 * tf) {
        return Err(Error::InvalidArgument(format!(
            "tau = {tau} must lie in (0, T/2) with T = {tf}"
        )));
    }
    let grid = traj.snapshots[0].rho.grid();
    let ps = phi.spatial_field(grid);
    let need = || {
        series.ok_or_else(|| Error::MissingField("endpoint value needs the bridge series".into()))
    };
    let mut pairing = Vec::with_capacity(traj.snapshots.len());
    for (i, s) in traj.snapshots.iter().enumerate() {
        let f = match field {
            EndpointField::Rho => s.rho.clone(),
            EndpointField::Z => s.z.clone(),
            EndpointField::RhoS => {
                let b = need()?;
                s.rho.zip_map(&b.entropy(&b.theta[i])?, |r, e| r * e)
            }
            EndpointField::Zeta => need()?.zeta(i),
        };
        pairing.push(f.dot(&ps));
    }
    let times: Vec<f64> = traj.snapshots.iter().map(|s| s.t - t0).collect();
    let (w0, _) = phi.time_factor(tau, tf);
    let (w1, _) = phi.time_factor(tf - tau, tf);
    let v0 = w0 * integrate_linear(&times, &pairing, 0.0, tau) / tau;
    let v1 = w1 * integrate_linear(&times, &pairing, tf - tau, tf) / tau;
    Ok((v0, v1))
}

#[cfg(test)]
mod tests;
