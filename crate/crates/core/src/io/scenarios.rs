//! Initial-data library: constant state, band-scaled pulse, vacuum pulse and a
//! manufactured solution with body force.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Boundary, Field, Grid, VectorField};
use crate::galerkin::{ApproxParams, ForcingFn, Galerkin, PhysParams, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Constant,
    BandScaled,
    Pulse,
    Mms,
}

impl ScenarioKind {
    pub fn parse(s: &str) -> Option<ScenarioKind> {
        match s {
            "constant" => Some(ScenarioKind::Constant),
            "band-scaled" => Some(ScenarioKind::BandScaled),
            "pulse" => Some(ScenarioKind::Pulse),
            "mms" => Some(ScenarioKind::Mms),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Constant => "constant",
            ScenarioKind::BandScaled => "band-scaled",
            ScenarioKind::Pulse => "pulse",
            ScenarioKind::Mms => "mms",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Initial velocity amplitude.
    pub velocity: f64,
    /// Density floor of the pulse.
    pub floor: f64,
    /// `Z / rho` for the constant and band-scaled cases.
    pub ratio: f64,
    pub theta_mean: f64,
    pub theta_amp: f64,
    /// Manufactured solution: density modulation, drift speed and momentum offset.
    pub mms_amp: f64,
    pub mms_drift: f64,
    pub mms_flux: f64,
    /// Manufactured solution: multiple of the fundamental wavenumber.
    pub mms_mode: u32,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Constant,
            velocity: 0.5,
            floor: 1e-3,
            ratio: 1.0,
            theta_mean: 1.2,
            theta_amp: 0.6,
            mms_amp: 0.5,
            mms_drift: 0.5,
            mms_flux: 0.2,
            mms_mode: 3,
        }
    }
}

impl ScenarioSpec {
    pub fn of(kind: ScenarioKind) -> ScenarioSpec {
        ScenarioSpec {
            kind,
            ..ScenarioSpec::default()
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.floor > 0.0) {
            v.push(format!("floor = {} must be positive", self.floor));
        }
        if !(self.ratio > 0.0) {
            v.push(format!("ratio = {} must be positive", self.ratio));
        }
        if !(self.theta_amp.abs() < self.theta_mean) {
            v.push(format!(
                "theta_amp = {} must be smaller than theta_mean = {}",
                self.theta_amp, self.theta_mean
            ));
        }
        if !(self.mms_amp.abs() < 1.0) {
            v.push(format!("mms_amp = {} must lie in (-1, 1)", self.mms_amp));
        }
        if self.mms_mode == 0 {
            v.push("mms_mode must be >= 1".into());
        }
        v
    }
}

/// Angular wavenumber of the fundamental even mode along an axis.
fn fundamental(grid: &Grid, a: usize) -> f64 {
    let ax = grid.axis(a);
    match ax.boundary {
        Boundary::Periodic => 2.0 * PI / ax.length,
        Boundary::Wall => PI / ax.length,
    }
}

/// `floor + prod_a cos^8(pi (x_a - L_a/2) / L_a)`.
fn pulse_density(grid: &Arc<Grid>, floor: f64) -> Field {
    let g = grid.clone();
    Field::scalar_fn(grid, move |x| {
        floor
            + x.iter()
                .zip(g.axes())
                .map(|(&xi, ax)| (PI * (xi - 0.5 * ax.length) / ax.length).cos().powi(8))
                .product::<f64>()
    })
}

fn theta_profile(grid: &Arc<Grid>, mean: f64, amp: f64) -> Field {
    let k: Vec<f64> = (0..grid.dim()).map(|a| fundamental(grid, a)).collect();
    let d = grid.dim() as f64;
    Field::scalar_fn(grid, move |x| {
        mean + amp * x.iter().zip(&k).map(|(&xi, &ki)| (ki * xi).cos()).sum::<f64>() / d
    })
}

fn velocity_profile(grid: &Arc<Grid>, amp: f64) -> VectorField {
    let k: Vec<f64> = (0..grid.dim()).map(|a| fundamental(grid, a)).collect();
    VectorField::from_fn(grid, move |c, x| {
        amp * (k[c] * x[c]).sin()
            * x.iter()
                .enumerate()
                .filter(|&(a, _)| a != c)
                .map(|(a, &xa)| (k[a] * xa).cos())
                .product::<f64>()
    })
}

fn momentum(rho: &Field, u: &VectorField) -> Result<VectorField> {
    VectorField::new(u.components().iter().map(|uc| rho.mul(uc)).collect())
}

/// Manufactured solution `rho = 1 + a prod cos(k (x - c t))`, `u = c + K / rho`, `Z = theta0 rho`.
///
/// Both density equations hold exactly; the momentum equation is closed by the body force.
#[derive(Clone, Debug)]
pub struct Manufactured {
    pub amp: f64,
    pub drift: Vec<f64>,
    pub flux: Vec<f64>,
    pub k: Vec<f64>,
    pub theta0: f64,
    pub phys: PhysParams,
}

impl Manufactured {
    /// `rho`, its gradient and Hessian at `(t, x)`.
    fn density(&self, t: f64, x: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let d = x.len();
        let arg: Vec<f64> = (0..d).map(|a| self.k[a] * (x[a] - self.drift[a] * t)).collect();
        let (c, s): (Vec<f64>, Vec<f64>) = arg.iter().map(|v| (v.cos(), v.sin())).unzip();
        let prod_except = |skip: &[usize]| -> f64 {
            (0..d).filter(|a| !skip.contains(a)).map(|a| c[a]).product()
        };
        let rho = 1.0 + self.amp * prod_except(&[]);
        let grad = (0..d)
            .map(|a| -self.amp * self.k[a] * s[a] * prod_except(&[a]))
            .collect();
        let hess = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| {
                        if a == b {
                            -self.amp * self.k[a] * self.k[a] * prod_except(&[])
                        } else {
                            self.amp * self.k[a] * self.k[b] * s[a] * s[b] * prod_except(&[a, b])
                        }
                    })
                    .collect()
            })
            .collect();
        (rho, grad, hess)
    }

    pub fn rho(&self, t: f64, x: &[f64]) -> f64 {
        self.density(t, x).0
    }

    pub fn u(&self, t: f64, c: usize, x: &[f64]) -> f64 {
        self.drift[c] + self.flux[c] / self.rho(t, x)
    }

    /// Body force per unit mass closing the momentum equation (`eps = delta = 0`).
    pub fn forcing(&self, t: f64, c: usize, x: &[f64]) -> f64 {
        let (r, g, h) = self.density(t, x);
        let d = x.len();
        let (mu, lambda, gamma) = (self.phys.mu, self.phys.lambda, self.phys.gamma);
        let kg: f64 = (0..d).map(|a| self.flux[a] * g[a]).sum();
        let inertia = -self.flux[c] * kg / (r * r);
        let pressure = gamma * self.theta0.powf(gamma) * r.powf(gamma - 1.0) * g[c];
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let lap: f64 = (0..d).map(|a| h[a][a]).sum();
        let lap_u = self.flux[c] * (2.0 * g2 / (r * r * r) - lap / (r * r));
        let grad_div: f64 = -(0..d)
            .map(|a| self.flux[a] * (h[c][a] / (r * r) - 2.0 * g[a] * g[c] / (r * r * r)))
            .sum::<f64>();
        (inertia + pressure - mu * lap_u - (mu + lambda) * grad_div) / r
    }

    pub fn state(&self, grid: &Arc<Grid>, t: f64) -> Result<State> {
        let rho = Field::scalar_fn(grid, |x| self.rho(t, x));
        let z = rho.scale(self.theta0);
        let u = VectorField::from_fn(grid, |c, x| self.u(t, c, x));
        Ok(State { t, rho, z, u })
    }
}

pub struct Built {
    pub gal: Galerkin,
    pub initial: State,
    pub exact: Option<Manufactured>,
    /// The initial mass matrix needed a diagonal shift.
    pub regularized: bool,
}

pub fn build(spec: &ScenarioSpec, grid: &Arc<Grid>, phys: &PhysParams, approx: &ApproxParams) -> Result<Built> {
    let v = spec.violations();
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    let mut gal = Galerkin::new(grid, phys.clone(), approx.clone())?;
    let mut exact = None;
    let (rho, z, q) = match spec.kind {
        ScenarioKind::Constant => {
            let rho = Field::scalar_constant(grid, 1.0);
            let z = rho.scale(spec.ratio);
            (rho, z, VectorField::zeros(grid))
        }
        ScenarioKind::BandScaled => {
            let rho = pulse_density(grid, spec.floor);
            let z = rho.scale(spec.ratio);
            let q = momentum(&rho, &velocity_profile(grid, spec.velocity))?;
            (rho, z, q)
        }
        ScenarioKind::Pulse => {
            let rho = pulse_density(grid, spec.floor);
            let th = theta_profile(grid, spec.theta_mean, spec.theta_amp);
            let z = rho.zip_map(&th, |r, t| r * t);
            let q = momentum(&rho, &velocity_profile(grid, spec.velocity))?;
            (rho, z, q)
        }
        ScenarioKind::Mms => {
            if !grid.is_periodic() {
                return Err(Error::Config(vec![
                    "the manufactured solution needs a periodic grid".into(),
                ]));
            }
            let d = grid.dim();
            let m = Manufactured {
                amp: spec.mms_amp,
                drift: (0..d).map(|a| spec.mms_drift / (a + 1) as f64).collect(),
                flux: (0..d).map(|a| spec.mms_flux * if a % 2 == 0 { 1.0 } else { -1.0 }).collect(),
                k: (0..d).map(|a| spec.mms_mode as f64 * fundamental(grid, a)).collect(),
                theta0: spec.theta_mean,
                phys: phys.clone(),
            };
            let s0 = m.state(grid, 0.0)?;
            let shared = Arc::new(m.clone());
            let f: ForcingFn = Arc::new(move |t, c, x| shared.forcing(t, c, x));
            gal = gal.with_forcing(f);
            let q = momentum(&s0.rho, &s0.u)?;
            exact = Some(m);
            (s0.rho, s0.z, q)
        }
    };
    let (initial, regularized) = gal.initial_state(rho, z, &q)?;
    Ok(Built {
        gal,
        initial,
        exact,
        regularized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mms(d: usize) -> (Manufactured, Arc<Grid>) {
        let g = Grid::torus(d, 16, 2.0 * PI).unwrap();
        let m = Manufactured {
            amp: 0.4,
            drift: vec![0.5, -0.3][..d].to_vec(),
            flux: vec![0.2, 0.1][..d].to_vec(),
            k: vec![1.0; d],
            theta0: 1.3,
            phys: PhysParams { lambda: 0.3, ..PhysParams::default() },
        };
        (m, g)
    }

    #[test]
    fn manufactured_density_satisfies_continuity() {
        for d in [1, 2] {
            let (m, _) = mms(d);
            let x = vec![0.7, 2.1][..d].to_vec();
            let (t, h) = (0.3, 1e-5);
            let drho = (m.rho(t + h, &x) - m.rho(t - h, &x)) / (2.0 * h);
            let div: f64 = (0..d)
                .map(|a| {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[a] += h;
                    xm[a] -= h;
                    (m.rho(t, &xp) * m.u(t, a, &xp) - m.rho(t, &xm) * m.u(t, a, &xm)) / (2.0 * h)
                })
                .sum();
            assert!((drho + div).abs() < 1e-8, "d={d}: {}", drho + div);
        }
    }

    #[test]
    fn manufactured_forcing_matches_finite_differences() {
        let d = 2;
        let (m, _) = mms(d);
        let x = vec![0.9, 1.7];
        let t = 0.2;
        let h = 1e-4;
        let (mu, lambda, gamma) = (m.phys.mu, m.phys.lambda, m.phys.gamma);
        let shift = |x: &[f64], a: usize, s: f64| {
            let mut y = x.to_vec();
            y[a] += s;
            y
        };
        let mom = |t: f64, x: &[f64], c: usize| m.rho(t, x) * m.u(t, c, x);
        let div_u = |x: &[f64]| -> f64 {
            (0..d)
                .map(|a| (m.u(t, a, &shift(x, a, h)) - m.u(t, a, &shift(x, a, -h))) / (2.0 * h))
                .sum()
        };
        for c in 0..d {
            let dt = (mom(t + h, &x, c) - mom(t - h, &x, c)) / (2.0 * h);
            let conv: f64 = (0..d)
                .map(|a| {
                    let f = |y: &[f64]| mom(t, y, c) * m.u(t, a, y);
                    (f(&shift(&x, a, h)) - f(&shift(&x, a, -h))) / (2.0 * h)
                })
                .sum();
            let p = |y: &[f64]| (m.theta0 * m.rho(t, y)).powf(gamma);
            let dp = (p(&shift(&x, c, h)) - p(&shift(&x, c, -h))) / (2.0 * h);
            let lap: f64 = (0..d)
                .map(|a| {
                    (m.u(t, c, &shift(&x, a, h)) - 2.0 * m.u(t, c, &x) + m.u(t, c, &shift(&x, a, -h)))
                        / (h * h)
                })
                .sum();
            let gd = (div_u(&shift(&x, c, h)) - div_u(&shift(&x, c, -h))) / (2.0 * h);
            let want = (dt + conv + dp - mu * lap - (mu + lambda) * gd) / m.rho(t, &x);
            let got = m.forcing(t, c, &x);
            assert!((want - got).abs() < 1e-5 * (1.0 + got.abs()), "c={c}: {want} vs {got}");
        }
    }

    #[test]
    fn scenarios_build_and_respect_band() {
        let g = Grid::torus(1, 32, 2.0 * PI).unwrap();
        let phys = PhysParams::default();
        let ap = ApproxParams::default();
        for kind in [ScenarioKind::Constant, ScenarioKind::BandScaled, ScenarioKind::Pulse, ScenarioKind::Mms] {
            let spec = ScenarioSpec { ratio: 1.5, ..ScenarioSpec::of(kind) };
            let b = build(&spec, &g, &phys, &ap).unwrap();
            let (lo, hi) = crate::galerkin::ratio_range(&b.initial.rho, &b.initial.z);
            assert!(lo >= 0.5 && hi <= 2.0, "{kind:?}: {lo} {hi}");
            assert_eq!(b.exact.is_some(), kind == ScenarioKind::Mms);
        }
        let walled = Grid::walled(1, 16, 1.0).unwrap();
        assert!(build(&ScenarioSpec::of(ScenarioKind::Mms), &walled, &phys, &ap).is_err());
        assert!(build(&ScenarioSpec::of(ScenarioKind::Pulse), &walled, &phys, &ap).is_ok());
    }
}
