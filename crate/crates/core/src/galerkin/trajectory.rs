//! Time integration driver with per-step invariant checks and the energy ledger.

use std::fmt::Write as _;

use serde::Serialize;

use super::solver::Galerkin;
use super::State;
use crate::error::{Error, Result};
use crate::fields::Field;

/// Relative slack of the energy inequality.
pub const ENERGY_TOL: f64 = 1e-6;
/// Relative drift allowed in the density integrals.
pub const MASS_TOL: f64 = 1e-10;
/// Slack on the ratio band.
pub const BAND_TOL: f64 = 1e-6;
/// Nodes with `rho` below this fraction of `sup rho` count as vacuum.
pub const VACUUM_FRACTION: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    pub e_delta: f64,
    /// Cumulative viscous dissipation.
    pub dissipation: f64,
    pub eps_gamma_term: f64,
    pub eps_beta_term: f64,
    pub mass_rho: f64,
    pub mass_z: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub picard_iters: usize,
    /// Cumulative work of the body force (not a CSV column).
    #[serde(skip)]
    pub forcing_work: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    pub const HEADER: &'static str =
        "t,E_delta,dissipation,eps_gamma_term,eps_beta_term,mass_rho,mass_Z,min_ratio,max_ratio,picard_iters";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                r.t,
                r.e_delta,
                r.dissipation,
                r.eps_gamma_term,
                r.eps_beta_term,
                r.mass_rho,
                r.mass_z,
                r.min_ratio,
                r.max_ratio,
                r.picard_iters
            );
        }
        s
    }

    /// Largest `(E + D - W) / E(0) - 1` along the run.
    pub fn worst_energy_excess(&self) -> f64 {
        let Some(first) = self.rows.first() else {
            return 0.0;
        };
        let e0 = first.e_delta;
        self.rows
            .iter()
            .map(|r| {
                let lhs = r.e_delta + r.dissipation - r.forcing_work;
                if e0 > 0.0 {
                    lhs / e0 - 1.0
                } else {
                    lhs - e0
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Band,
    Mass,
    Energy,
    /// Non-positive density sample with eps > 0 (flagged, not fatal).
    Positivity,
    /// Singular mass matrix replaced by a shifted one.
    Vacuum,
}

impl ViolationKind {
    pub fn is_fatal(self) -> bool {
        matches!(self, ViolationKind::Band | ViolationKind::Mass | ViolationKind::Energy)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub step: usize,
    pub t: f64,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

/// Space-time norms recorded along a run; values only, no asserted bounds.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Estimates {
    /// `eps int_0^T ||grad rho||^2`.
    pub eps_grad_rho_sq: f64,
    pub eps_grad_z_sq: f64,
    /// `int_0^T int |eps grad rho . grad u|`.
    pub eps_cross_l1: f64,
    /// `delta int_0^T int Z^beta`.
    pub delta_z_beta: f64,
    /// `int_0^T int Z^{gamma + theta} + delta Z^{beta + theta}`.
    pub pressure_integrability: f64,
    pub theta_int: f64,
    /// `int_0^T ||grad u||^2`.
    pub grad_u_sq: f64,
    pub sup_energy: f64,
    pub sup_z_gamma: f64,
    pub sup_rho_l2: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<State>,
    pub cadence: usize,
    pub dt: f64,
    pub steps: usize,
    pub ledger: EnergyLedger,
    pub violations: Vec<Violation>,
    pub estimates: Estimates,
    pub picard_histories: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn passed(&self) -> bool {
        !self.violations.iter().any(|v| v.kind.is_fatal())
    }

    pub fn last(&self) -> &State {
        self.snapshots.last().expect("initial snapshot")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

/// `(min, max)` of `Z / rho` over non-vacuum nodes.
pub fn ratio_range(rho: &Field, z: &Field) -> (f64, f64) {
    let floor = VACUUM_FRACTION * rho.sup_norm();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&r, &zv) in rho.data().iter().zip(z.data().iter()) {
        if r > floor {
            let q = zv / r;
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    (lo, hi)
}

/// Largest band excess in absolute (state-tolerance) and ratio form, both required to trip.
fn band_excess(rho: &Field, z: &Field, c_lo: f64, c_hi: f64) -> f64 {
    let floor = VACUUM_FRACTION * rho.sup_norm();
    let tol = 1e-8 * rho.sup_norm();
    let mut worst: f64 = 0.0;
    for (&r, &zv) in rho.data().iter().zip(z.data().iter()) {
        let abs = (c_lo * r - zv).max(zv - c_hi * r);
        if abs <= tol {
            continue;
        }
        if r > floor {
            let q = zv / r;
            let ex = (c_lo - BAND_TOL - q).max(q - c_hi - BAND_TOL);
            if ex > 0.0 {
                worst = worst.max(ex);
            }
        } else {
            worst = worst.max(abs);
        }
    }
    worst
}

struct Accumulator {
    est: Estimates,
}

impl Accumulator {
    fn add(&mut self, gal: &Galerkin, s: &State, w: f64) -> Result<()> {
        let phys = gal.phys();
        let ap = gal.approx();
        let e = &mut self.est;
        let grad_rho = s.rho.gradient()?;
        let g_rho = grad_rho.dot(&grad_rho);
        let grad_z = s.z.gradient()?;
        e.eps_grad_rho_sq += w * ap.epsilon * g_rho;
        e.eps_grad_z_sq += w * ap.epsilon * grad_z.dot(&grad_z);
        let d = s.u.dim();
        let du: Vec<Vec<Field>> = (0..d)
            .map(|c| (0..d).map(|a| s.u.component(c).differentiate(a)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        if ap.epsilon > 0.0 {
            let n = s.rho.data().len();
            let mut mag = vec![0.0; n];
            for row in &du {
                let mut comp = vec![0.0; n];
                for (a, dca) in row.iter().enumerate() {
                    let ga = grad_rho.component(a).data();
                    for ((o, &g), &v) in comp.iter_mut().zip(ga.iter()).zip(dca.data().iter()) {
                        *o += g * v;
                    }
                }
                for (m, v) in mag.iter_mut().zip(comp) {
                    *m += v * v;
                }
            }
            let weights = s.rho.grid().weights();
            let l1: f64 = weights.iter().zip(&mag).map(|(w, m)| w * m.sqrt()).sum();
            e.eps_cross_l1 += w * ap.epsilon * l1;
        }
        let th = phys.theta_int_max();
        let (gamma, beta, delta) = (phys.gamma, phys.beta, ap.delta);
        e.delta_z_beta += w * delta * s.z.map(|v| v.max(0.0).powf(beta)).integrate();
        e.pressure_integrability += w
            * s.z
                .map(|v| {
                    let v = v.max(0.0);
                    v.powf(gamma + th) + delta * v.powf(beta + th)
                })
                .integrate();
        e.grad_u_sq += w * du.iter().flatten().map(|f| f.dot(f)).sum::<f64>();
        e.sup_energy = e.sup_energy.max(gal.energy(s));
        e.sup_z_gamma = e.sup_z_gamma.max(s.z.map(|v| v.max(0.0).powf(gamma)).integrate());
        e.sup_rho_l2 = e.sup_rho_l2.max(s.rho.l2_norm());
        e.theta_int = th;
        Ok(())
    }
}

/// Integrate to `approx.t_final`, keeping every `cadence`-th state.
pub fn run_trajectory(gal: &Galerkin, initial: State, cadence: usize) -> Result<Trajectory> {
    if cadence == 0 {
        return Err(Error::Cadence("cadence must be >= 1".into()));
    }
    let phys = gal.phys();
    let ap = gal.approx();
    let steps = ap.steps();
    let (c_lo, c_hi) = (phys.c_lo, phys.c_hi);
    let check_band = band_excess(&initial.rho, &initial.z, c_lo, c_hi) == 0.0;
    let positive_start = initial.rho.min() > 0.0 && initial.z.min() > 0.0;
    let mass0 = (initial.rho.integrate(), initial.z.integrate());
    let e0 = gal.energy(&initial);

    let row = |s: &State, diss: f64, eg: f64, eb: f64, work: f64, iters: usize| {
        let (lo, hi) = ratio_range(&s.rho, &s.z);
        LedgerRow {
            t: s.t,
            e_delta: gal.energy(s),
            dissipation: diss,
            eps_gamma_term: eg,
            eps_beta_term: eb,
            mass_rho: s.rho.integrate(),
            mass_z: s.z.integrate(),
            min_ratio: lo,
            max_ratio: hi,
            picard_iters: iters,
            forcing_work: work,
        }
    };

    let mut ledger = EnergyLedger::default();
    ledger.rows.push(row(&initial, 0.0, 0.0, 0.0, 0.0, 0));
    let mut acc = Accumulator {
        est: Estimates::default(),
    };
    let mut violations = Vec::new();
    let mut histories = Vec::with_capacity(steps);
    let mut snapshots = vec![initial.clone()];
    let (mut diss, mut eg, mut eb, mut work) = (0.0, 0.0, 0.0, 0.0);
    let mut state = initial;

    for step in 1..=steps {
        let (next, info) = match gal.coupled_step(&state) {
            Ok(r) => r,
            Err(Error::Picard { last, .. }) if !last.is_finite() => {
                return Err(Error::Diverged {
                    t: state.t,
                    last_good: Box::new(state),
                });
            }
            Err(e) => return Err(e),
        };
        if !(next.rho.is_finite() && next.z.is_finite() && next.u.is_finite()) {
            return Err(Error::Diverged {
                t: state.t,
                last_good: Box::new(state),
            });
        }
        diss += info.dissipation;
        eg += info.eps_gamma_term;
        eb += info.eps_beta_term;
        work += info.forcing_work;
        let r = row(&next, diss, eg, eb, work, info.picard_iters);
        let t = next.t;
        let mut flag = |kind, magnitude| {
            violations.push(Violation {
                step,
                t,
                kind,
                magnitude,
            })
        };
        if info.regularized {
            flag(ViolationKind::Vacuum, 1.0);
        }
        for (m, m0) in [(r.mass_rho, mass0.0), (r.mass_z, mass0.1)] {
            let rel = if m0 != 0.0 { ((m - m0) / m0).abs() } else { m.abs() };
            if rel > MASS_TOL {
                flag(ViolationKind::Mass, rel);
            }
        }
        let excess = if e0 > 0.0 {
            (r.e_delta + diss - work) / e0 - 1.0
        } else {
            r.e_delta + diss - work - e0
        };
        if excess > ENERGY_TOL {
            flag(ViolationKind::Energy, excess);
        }
        if check_band {
            let b = band_excess(&next.rho, &next.z, c_lo, c_hi);
            if b > 0.0 {
                flag(ViolationKind::Band, b);
            }
        }
        if ap.epsilon > 0.0 && positive_start && (info.min_rho <= 0.0 || info.min_z <= 0.0) {
            flag(ViolationKind::Positivity, info.min_rho.min(info.min_z));
        }
        acc.add(gal, &next, ap.dt)?;
        ledger.rows.push(r);
        histories.push(info.history);
        state = next;
        if step % cadence == 0 || step == steps {
            snapshots.push(state.clone());
        }
    }

    Ok(Trajectory {
        snapshots,
        cadence,
        dt: ap.dt,
        steps,
        ledger,
        violations,
        estimates: acc.est,
        picard_histories: histories,
    })
}
