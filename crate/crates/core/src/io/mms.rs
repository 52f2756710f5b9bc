//! Convergence study against the manufactured solution.

use std::fmt::Write as _;
use std::sync::Arc;

use ndarray::{ArrayD, Slice};
use rayon::prelude::*;
use serde::Serialize;

use super::scenarios::{build, ScenarioKind, ScenarioSpec};
use crate::diagnostics::{DiagnosticsReport, Entry};
use crate::error::{Error, Result};
use crate::fields::Grid;
use crate::galerkin::{run_trajectory, ApproxParams, PhysParams, State};

/// Required error reduction between the two coarsest resolutions.
pub const SPACE_FACTOR: f64 = 10.0;
/// Admissible band of the observed temporal order.
pub const TIME_ORDER: (f64, f64) = (0.7, 1.3);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MmsStudy {
    pub dim: usize,
    pub length: f64,
    /// Increasing; the finest one is the spatial reference.
    pub resolutions: Vec<usize>,
    /// Step shared by the spatial runs.
    pub dt_space: f64,
    /// Resolution of the temporal runs.
    pub n_time: usize,
    /// Coarsest step of the temporal runs, halved `time_levels - 1` times.
    pub dt_time: f64,
    pub time_levels: usize,
    pub t_final: f64,
}

impl Default for MmsStudy {
    fn default() -> Self {
        MmsStudy {
            dim: 1,
            length: 2.0 * std::f64::consts::PI,
            resolutions: vec![32, 64, 128],
            dt_space: 2e-4,
            n_time: 64,
            dt_time: 0.02,
            time_levels: 3,
            t_final: 0.2,
        }
    }
}

impl MmsStudy {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.resolutions.len() < 2 {
            v.push("the spatial study needs at least two resolutions".into());
        }
        if self.resolutions.windows(2).any(|w| w[1] <= w[0] || w[1] % w[0] != 0) {
            v.push(format!(
                "resolutions {:?} must increase by integer factors",
                self.resolutions
            ));
        }
        if self.time_levels < 3 {
            v.push("the temporal study needs at least three levels".into());
        }
        if !(self.dt_space > 0.0 && self.dt_time > 0.0 && self.t_final > 0.0) {
            v.push("steps and final time must be positive".into());
        }
        v
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MmsRow {
    pub kind: &'static str,
    pub n: usize,
    pub dt: f64,
    pub err_rho: f64,
    pub err_z: f64,
    pub err_u: f64,
    /// Error reduction factor (space) or observed order (time) against the previous row.
    pub rate: Option<f64>,
}

impl MmsRow {
    pub fn err(&self) -> f64 {
        self.err_rho.max(self.err_z).max(self.err_u)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MmsReport {
    pub rows: Vec<MmsRow>,
    pub report: DiagnosticsReport,
}

impl MmsReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,n,dt,err_rho,err_z,err_u,err,rate\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e},{:e},{}",
                r.kind,
                r.n,
                r.dt,
                r.err_rho,
                r.err_z,
                r.err_u,
                r.err(),
                r.rate.map(|x| format!("{x:e}")).unwrap_or_default()
            );
        }
        s
    }
}

/// Relative l2 distance between `a` and `b` sampled on the nodes of `a`.
fn rel_err(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
    let stride = b.shape()[0] / a.shape()[0];
    let b = b.slice_each_axis(|_| Slice::new(0, None, stride as isize));
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        num += (x - y) * (x - y);
        den += y * y;
    }
    (num / den).sqrt()
}

fn errors(s: &State, r: &State) -> (f64, f64, f64) {
    let u = s
        .u
        .components()
        .iter()
        .zip(r.u.components())
        .map(|(a, b)| rel_err(a.data(), b.data()))
        .fold(0.0, f64::max);
    (rel_err(s.rho.data(), r.rho.data()), rel_err(s.z.data(), r.z.data()), u)
}

struct Outcome {
    last: State,
    exact: State,
}

fn solve(study: &MmsStudy, spec: &ScenarioSpec, phys: &PhysParams, n: usize, dt: f64) -> Result<Outcome> {
    let grid: Arc<Grid> = Grid::torus(study.dim, n, study.length)?;
    let ap = ApproxParams {
        epsilon: 0.0,
        delta: 0.0,
        dt,
        t_final: study.t_final,
        ..ApproxParams::default()
    };
    let b = build(spec, &grid, phys, &ap)?;
    let m = b.exact.clone().expect("manufactured scenario carries its solution");
    let steps = ap.steps();
    let tr = run_trajectory(&b.gal, b.initial, steps)?;
    if !tr.passed() {
        return Err(Error::Run(format!("manufactured run at n = {n}, dt = {dt:e} violated an invariant")));
    }
    let last = tr.last().clone();
    let exact = m.state(&grid, last.t)?;
    Ok(Outcome { last, exact })
}

/// Spatial errors against the finest resolution at a shared step, temporal
/// errors against the exact solution on a resolved grid.
pub fn mms_convergence(study: &MmsStudy, spec: &ScenarioSpec, phys: &PhysParams) -> Result<MmsReport> {
    let v = study.violations();
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    let spec = ScenarioSpec {
        kind: ScenarioKind::Mms,
        ..spec.clone()
    };
    let mut jobs: Vec<(usize, f64)> = study.resolutions.iter().map(|&n| (n, study.dt_space)).collect();
    let dts: Vec<f64> = (0..study.time_levels)
        .map(|i| study.dt_time / f64::powi(2.0, i as i32))
        .collect();
    jobs.extend(dts.iter().map(|&dt| (study.n_time, dt)));
    let outs = jobs
        .par_iter()
        .map(|&(n, dt)| solve(study, &spec, phys, n, dt))
        .collect::<Result<Vec<_>>>()?;
    let (space, time) = outs.split_at(study.resolutions.len());

    let mut rows = Vec::new();
    let reference = &space.last().expect("two resolutions").last;
    for (i, o) in space[..space.len() - 1].iter().enumerate() {
        let (er, ez, eu) = errors(&o.last, reference);
        rows.push(MmsRow {
            kind: "space",
            n: study.resolutions[i],
            dt: study.dt_space,
            err_rho: er,
            err_z: ez,
            err_u: eu,
            rate: None,
        });
    }
    let n_space = rows.len();
    for (o, &dt) in time.iter().zip(&dts) {
        let (er, ez, eu) = errors(&o.last, &o.exact);
        rows.push(MmsRow {
            kind: "time",
            n: study.n_time,
            dt,
            err_rho: er,
            err_z: ez,
            err_u: eu,
            rate: None,
        });
    }
    for i in 1..rows.len() {
        if rows[i].kind != rows[i - 1].kind {
            continue;
        }
        let ratio = rows[i - 1].err() / rows[i].err();
        rows[i].rate = Some(if rows[i].kind == "space" { ratio } else { ratio.log2() });
    }

    let mut report = DiagnosticsReport::default();
    for r in rows[..n_space].iter().skip(1) {
        report.push(Entry::lower(
            &format!("space_reduction[n={}]", r.n),
            r.rate.unwrap_or(0.0),
            "relative l2 vs finest",
            SPACE_FACTOR,
        ));
    }
    for r in rows[n_space..].iter().skip(1) {
        let p = r.rate.unwrap_or(0.0);
        report.push(
            Entry::lower(&format!("time_order[dt={:e}]", r.dt), p, "log2 error ratio", TIME_ORDER.0)
                .with_trend(format!("order in [{}, {}]", TIME_ORDER.0, TIME_ORDER.1), p <= TIME_ORDER.1),
        );
    }
    Ok(MmsReport { rows, report })
}
