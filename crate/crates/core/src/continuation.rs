//! Parameter sweeps toward the vanishing-viscosity and vanishing-pressure limits.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{evf_functional, oscillation_defect, DiagnosticsReport, Entry, OscillationDefect, DEFAULT_KS};
use crate::error::{Error, Result};
use crate::fields::{Field, Grid, TestFn, TestFunctionBank};
use crate::galerkin::{run_trajectory, ApproxParams, Estimates, PhysParams, Trajectory};
use crate::io::{build_scenario, ScenarioSpec};

pub const EPSILON_LADDER: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
pub const DELTA_LADDER: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Largest admissible factor between adjacent `eps ||grad rho||^2` values.
pub const EPS_BOUND_FACTOR: f64 = 4.0;
/// Smallest admissible decay of `delta int int Z^beta` per rung.
pub const DELTA_DECAY: f64 = 5.0;
/// Cut-off level of the effective viscous flux functional.
const EVF_K: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Epsilon,
    Delta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::Delta => "delta",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub phys: PhysParams,
    pub approx: ApproxParams,
    pub param: SweepParam,
    /// Strictly decreasing, positive.
    pub ladder: Vec<f64>,
    pub grid: Arc<Grid>,
    pub scenario: ScenarioSpec,
    pub cadence: usize,
    /// Exponent of the weak distance.
    pub q: f64,
    /// Delta sweeps only: run members at `epsilon = delta^2` instead of `epsilon = 0`.
    pub tie_epsilon: bool,
    pub seed: u64,
}

impl SweepPlan {
    pub fn new(
        param: SweepParam,
        ladder: Vec<f64>,
        grid: Arc<Grid>,
        scenario: ScenarioSpec,
        phys: PhysParams,
        approx: ApproxParams,
    ) -> SweepPlan {
        SweepPlan {
            phys,
            approx,
            param,
            ladder,
            grid,
            scenario,
            cadence: 1,
            q: 2.0,
            tie_epsilon: false,
            seed: 0,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.ladder.is_empty() {
            v.push("sweep ladder is empty".into());
        }
        if self.ladder.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            v.push(format!("ladder {:?} must be positive", self.ladder));
        }
        if self.ladder.windows(2).any(|w| !(w[1] < w[0])) {
            v.push(format!("ladder {:?} must be strictly decreasing", self.ladder));
        }
        if self.cadence == 0 {
            v.push("cadence must be >= 1".into());
        }
        if !(self.q >= 1.0) {
            v.push(format!("distance exponent q = {} must be >= 1", self.q));
        }
        match self.param {
            SweepParam::Epsilon if !(self.approx.delta > 0.0) => {
                v.push("an epsilon sweep needs a fixed delta > 0".into());
            }
            SweepParam::Delta if self.phys.beta < self.phys.gamma.max(4.0) => {
                v.push(format!(
                    "a delta sweep needs beta >= max(4, gamma), got beta = {}",
                    self.phys.beta
                ));
            }
            _ => {}
        }
        v.extend(self.phys.violations());
        v.extend(self.approx.violations());
        v
    }

    fn member(&self, value: f64) -> ApproxParams {
        let mut ap = self.approx.clone();
        match self.param {
            SweepParam::Epsilon => ap.epsilon = value,
            SweepParam::Delta => {
                ap.delta = value;
                ap.epsilon = if self.tie_epsilon { value * value } else { 0.0 };
            }
        }
        ap
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RungRecord {
    pub value: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub estimates: Estimates,
    /// Weak distance to the previous rung.
    pub distance_prev: Option<f64>,
    /// Effective viscous flux functional at the final time, with pressure `Z^gamma`.
    pub evf: f64,
    pub evf_gap_prev: Option<f64>,
    pub fatal_violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub seed: u64,
    pub tied_epsilon: bool,
    pub rungs: Vec<RungRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oscillation: Option<OscillationDefect>,
    pub report: DiagnosticsReport,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "rung,value,epsilon,delta,eps_grad_rho_sq,eps_grad_z_sq,eps_cross_l1,delta_z_beta,grad_u_sq,sup_energy,distance_prev,evf,evf_gap_prev,fatal_violations\n",
        );
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for (i, r) in self.rungs.iter().enumerate() {
            let e = &r.estimates;
            let _ = writeln!(
                s,
                "{i},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{},{}",
                r.value,
                r.epsilon,
                r.delta,
                e.eps_grad_rho_sq,
                e.eps_grad_z_sq,
                e.eps_cross_l1,
                e.delta_z_beta,
                e.grad_u_sq,
                e.sup_energy,
                opt(r.distance_prev),
                r.evf,
                opt(r.evf_gap_prev),
                r.fatal_violations
            );
        }
        s
    }
}

/// Completed sweep with its member trajectories, in ladder order.
pub struct Sweep {
    pub report: SweepReport,
    pub runs: Vec<Trajectory>,
}

fn spatial_bank(grid: &Arc<Grid>) -> Vec<TestFn> {
    TestFunctionBank::standard(grid)
        .functions
        .into_iter()
        .filter(|f| f.time == [1.0, 0.0, 0.0])
        .collect()
}

/// `max_t max_chi |int (f_a - f_b) chi| / ||chi||_{q'}` over rho, Z and the momentum components.
pub fn weak_distance(a: &Trajectory, b: &Trajectory, q: f64) -> Result<f64> {
    let (ha, hb) = (a.cadence as f64 * a.dt, b.cadence as f64 * b.dt);
    if (ha - hb).abs() > 1e-9 * ha.max(hb) || a.snapshots.len() != b.snapshots.len() {
        return Err(Error::Cadence(format!(
            "trajectories differ: sampling interval {ha:e} vs {hb:e}, {} vs {} snapshots",
            a.snapshots.len(),
            b.snapshots.len()
        )));
    }
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("exponent q = {q} must be >= 1")));
    }
    let grid = a.last().rho.grid();
    if !Grid::same(grid, b.last().rho.grid()) {
        return Err(Error::Grid("trajectories live on different grids".into()));
    }
    let dual = if q > 1.0 { q / (q - 1.0) } else { f64::INFINITY };
    let tests: Vec<Field> = spatial_bank(grid)
        .iter()
        .map(|f| {
            let chi = f.spatial_field(grid);
            let n = if dual.is_finite() { chi.lp_norm(dual) } else { chi.sup_norm() };
            chi.scale(1.0 / n)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let mut diffs = vec![sa.rho.sub(&sb.rho), sa.z.sub(&sb.z)];
        for c in 0..sa.u.dim() {
            diffs.push(sa.rho.mul(sa.u.component(c)).sub(&sb.rho.mul(sb.u.component(c))));
        }
        for d in &diffs {
            for chi in &tests {
                worst = worst.max(d.dot(chi).abs());
            }
        }
    }
    Ok(worst)
}

fn evf_test(grid: &Arc<Grid>) -> TestFn {
    TestFunctionBank::compact(grid)
        .functions
        .into_iter()
        .find(|f| f.time == [1.0, 0.0, 0.0])
        .expect("compact bank is non-empty")
}

/// Adjacent factor `max(a / b, b / a)`, with `0 / 0` counted as 1.
fn spread(a: f64, b: f64) -> f64 {
    let (lo, hi) = (a.min(b), a.max(b));
    if hi == 0.0 {
        1.0
    } else if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn ratios_text(values: &[f64]) -> String {
    values
        .windows(2)
        .map(|w| format!("{:.3}", if w[1] > 0.0 { w[0] / w[1] } else { f64::INFINITY }))
        .collect::<Vec<_>>()
        .join("/")
}

/// Largest `next / prev`; a sequence that sits at zero counts as non-increasing.
fn worst_growth(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| {
            if w[1] == 0.0 {
                0.0
            } else if w[0] == 0.0 {
                f64::INFINITY
            } else {
                w[1] / w[0]
            }
        })
        .fold(0.0, f64::max)
}

fn decreasing_entry(name: &str, values: &[f64], norm: &str) -> Entry {
    let g = worst_growth(values);
    let strict = values.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
    Entry::upper(name, g, norm, 1.0).with_trend(format!("ratios {}", ratios_text(values)), strict)
}

/// Runs every rung concurrently and assembles the report.
pub fn run_sweep(plan: &SweepPlan) -> Result<Sweep> {
    let v = plan.violations();
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    let members: Vec<ApproxParams> = plan.ladder.iter().map(|&x| plan.member(x)).collect();
    let runs = members
        .par_iter()
        .map(|ap| {
            let built = build_scenario(&plan.scenario, &plan.grid, &plan.phys, ap)?;
            let tr = run_trajectory(&built.gal, built.initial, plan.cadence)
                .map_err(|e| Error::Run(format!("{} = {:e}: {e}", plan.param.name(), value_of(plan, ap))))?;
            let phi = evf_test(&plan.grid);
            // limit pressure only: the artificial part is tracked by delta_z_beta
            let evf = evf_functional(tr.last(), EVF_K, &phi, 1.0, &plan.phys, 0.0)?;
            Ok((tr, evf))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rungs = Vec::with_capacity(runs.len());
    for (i, ((tr, evf), ap)) in runs.iter().zip(&members).enumerate() {
        let (distance_prev, evf_gap_prev) = if i > 0 {
            (
                Some(weak_distance(&runs[i - 1].0, tr, plan.q)?),
                Some((runs[i - 1].1 - evf).abs()),
            )
        } else {
            (None, None)
        };
        rungs.push(RungRecord {
            value: plan.ladder[i],
            epsilon: ap.epsilon,
            delta: ap.delta,
            estimates: tr.estimates.clone(),
            distance_prev,
            evf: *evf,
            evf_gap_prev,
            fatal_violations: tr.violations.iter().filter(|v| v.kind.is_fatal()).count(),
        });
    }

    let mut report = DiagnosticsReport::default();
    for (i, r) in rungs.iter().enumerate() {
        report.push(Entry::upper(
            &format!("run[{}={:e}]", plan.param.name(), r.value),
            r.fatal_violations as f64,
            "fatal violations",
            0.0,
        ));
        if i == 0 && rungs.len() == 1 {
            let e = &r.estimates;
            for (name, v) in [
                ("eps_grad_rho_sq", e.eps_grad_rho_sq),
                ("eps_grad_z_sq", e.eps_grad_z_sq),
                ("eps_cross_l1", e.eps_cross_l1),
                ("delta_z_beta", e.delta_z_beta),
            ] {
                report.push(Entry::upper(name, v, "space-time", f64::INFINITY).informational());
            }
        }
    }

    let oscillation = if rungs.len() >= 2 {
        let finals: Vec<Field> = runs.iter().map(|(t, _)| t.last().z.clone()).collect();
        let (rest, finest) = finals.split_at(finals.len() - 1);
        Some(oscillation_defect(rest, &finest[0], 2.0, &DEFAULT_KS)?)
    } else {
        None
    };

    if rungs.len() >= 2 {
        let col = |f: fn(&Estimates) -> f64| rungs.iter().map(|r| f(&r.estimates)).collect::<Vec<f64>>();
        let dists: Vec<f64> = rungs.iter().filter_map(|r| r.distance_prev).collect();
        let gaps: Vec<f64> = rungs.iter().filter_map(|r| r.evf_gap_prev).collect();
        match plan.param {
            SweepParam::Epsilon => {
                let g = col(|e| e.eps_grad_rho_sq);
                let worst = g.windows(2).map(|w| spread(w[0], w[1])).fold(1.0, f64::max);
                report.push(
                    Entry::upper("eps_grad_rho_sq_bound", worst, "max adjacent factor", EPS_BOUND_FACTOR)
                        .with_trend(format!("ratios {}", ratios_text(&g)), true),
                );
                report.push(decreasing_entry("eps_cross_l1_trend", &col(|e| e.eps_cross_l1), "max next/prev"));
                let gz = col(|e| e.eps_grad_z_sq);
                let blowup = worst_growth(&g).max(worst_growth(&gz));
                report.push(Entry::upper("eps_terms_nonincreasing", blowup, "max next/prev", 1.0));
                if dists.len() >= 2 {
                    report.push(decreasing_entry("weak_distance_trend", &dists, "max next/prev"));
                }
            }
            SweepParam::Delta => {
                let dz = col(|e| e.delta_z_beta);
                let decay = dz
                    .windows(2)
                    .map(|w| if w[1] > 0.0 { w[0] / w[1] } else { f64::INFINITY })
                    .fold(f64::INFINITY, f64::min);
                report.push(
                    Entry::lower("delta_z_beta_decay", decay, "min prev/next", DELTA_DECAY)
                        .with_trend(format!("ratios {}", ratios_text(&dz)), true),
                );
                if dists.len() >= 2 {
                    report.push(decreasing_entry("weak_distance_trend", &dists, "max next/prev").informational());
                }
                if gaps.len() >= 2 {
                    report.push(decreasing_entry("evf_gap_trend", &gaps, "max next/prev").informational());
                }
                if let Some(o) = &oscillation {
                    report.push(
                        Entry::upper("oscillation_defect", o.value, "max_k ||T_k(Z) - T_k(Z_ref)||_2", f64::INFINITY)
                            .informational(),
                    );
                }
            }
        }
    }

    Ok(Sweep {
        report: SweepReport {
            param: plan.param,
            seed: plan.seed,
            tied_epsilon: plan.param == SweepParam::Delta && plan.tie_epsilon,
            rungs,
            oscillation,
            report,
        },
        runs: runs.into_iter().map(|(t, _)| t).collect(),
    })
}

fn value_of(plan: &SweepPlan, ap: &ApproxParams) -> f64 {
    match plan.param {
        SweepParam::Epsilon => ap.epsilon,
        SweepParam::Delta => ap.delta,
    }
}

pub fn sweep_epsilon(plan: &SweepPlan) -> Result<SweepReport> {
    if plan.param != SweepParam::Epsilon {
        return Err(Error::InvalidArgument("plan does not sweep epsilon".into()));
    }
    Ok(run_sweep(plan)?.report)
}

pub fn sweep_delta(plan: &SweepPlan) -> Result<SweepReport> {
    if plan.param != SweepParam::Delta {
        return Err(Error::InvalidArgument("plan does not sweep delta".into()));
    }
    Ok(run_sweep(plan)?.report)
}
