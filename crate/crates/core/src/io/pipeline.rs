//! Subcommand pipelines: runs, sweeps, diagnostics, bridge and MMS studies,
//! each writing its artifacts plus a checksummed manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::mms::mms_convergence;
use super::scenarios::{build, Built};
use crate::bridge::{bridge_check, bridge_refinement, TFunctionPair};
use crate::continuation::{run_sweep, SweepParam, SweepPlan, DELTA_LADDER, EPSILON_LADDER};
use crate::diagnostics::{
    pressure_estimate_check, renorm_residual, weak_residual, zlogz_budget, DiagnosticsReport, Entry, Formulation,
    Renormalizer,
};
use crate::error::{Error, Result};
use crate::fields::{load_snapshot, save_snapshot, Snapshot, TestFunctionBank, VectorField};
use crate::galerkin::{
    run_trajectory, EnergyLedger, Estimates, Galerkin, State, Trajectory, BAND_TOL, ENERGY_TOL, MASS_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Run,
    SweepEps,
    SweepDelta,
    Diagnose,
    Bridge,
    Mms,
}

impl Subcommand {
    pub fn parse(s: &str) -> Option<Subcommand> {
        Some(match s {
            "run" => Subcommand::Run,
            "sweep-eps" => Subcommand::SweepEps,
            "sweep-delta" => Subcommand::SweepDelta,
            "diagnose" => Subcommand::Diagnose,
            "bridge" => Subcommand::Bridge,
            "mms" => Subcommand::Mms,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Run => "run",
            Subcommand::SweepEps => "sweep-eps",
            Subcommand::SweepDelta => "sweep-delta",
            Subcommand::Diagnose => "diagnose",
            Subcommand::Bridge => "bridge",
            Subcommand::Mms => "mms",
        }
    }
}

/// Exit status of a pipeline: 0 passed, 1 an asserted invariant failed, 2 an error.
pub fn exit_code(outcome: &Result<Outcome>) -> i32 {
    match outcome {
        Ok(o) if o.passed => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}

/// Machine-readable summary printed on failure.
pub fn failure_json(outcome: &Result<Outcome>) -> String {
    let v = match outcome {
        Ok(o) => json!({ "status": if o.passed { "passed" } else { "failed" }, "failures": o.failures }),
        Err(e) => {
            let details = match e {
                Error::Config(list) => list.clone(),
                other => vec![other.to_string()],
            };
            json!({ "status": "error", "error": e.to_string(), "details": details })
        }
    };
    serde_json::to_string(&v).expect("summary serializes")
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub passed: bool,
    pub failures: Vec<String>,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
}

struct Writer {
    root: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(root: &Path) -> Result<Writer> {
        fs::create_dir_all(root)?;
        Ok(Writer {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn text(&mut self, rel: &str, body: &str) -> Result<()> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&p, body)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn snapshot(&mut self, rel: &str, s: &Snapshot) -> Result<()> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        save_snapshot(&p, s)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn manifest(mut self, cmd: Subcommand, cfg: &RunConfig, started: Instant, passed: bool) -> Result<Vec<String>> {
        self.files.sort();
        let outputs = self
            .files
            .iter()
            .map(|rel| {
                let bytes = fs::read(self.root.join(rel))?;
                Ok(json!({
                    "path": rel,
                    "bytes": bytes.len(),
                    "sha256": format!("{:x}", Sha256::digest(&bytes)),
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let m = json!({
            "tool": "nsentropy",
            "subcommand": cmd.name(),
            "versions": { "nsentropy": env!("CARGO_PKG_VERSION"), "format": 1 },
            "seed": cfg.seed,
            "config": cfg,
            "timings": { "wall_seconds": started.elapsed().as_secs_f64() },
            "threads": rayon::current_num_threads(),
            "passed": passed,
            "outputs": outputs,
        });
        fs::write(self.root.join("manifest.json"), serde_json::to_string_pretty(&m)?)?;
        Ok(self.files)
    }
}

fn state_snapshot(step: usize, s: &State) -> Snapshot {
    let mut fields = vec![("rho".to_string(), s.rho.clone()), ("z".to_string(), s.z.clone())];
    for (c, f) in s.u.components().iter().enumerate() {
        fields.push((format!("u{c}"), f.clone()));
    }
    Snapshot { step, t: s.t, fields }
}

fn snapshot_state(s: &Snapshot) -> Result<State> {
    let get = |name: &str| {
        s.get(name)
            .cloned()
            .ok_or_else(|| Error::MissingField(format!("snapshot at step {} lacks '{name}'", s.step)))
    };
    let rho = get("rho")?;
    let d = rho.grid().dim();
    let u = VectorField::new((0..d).map(|c| get(&format!("u{c}"))).collect::<Result<_>>()?)?;
    Ok(State {
        t: s.t,
        rho,
        z: get("z")?,
        u,
    })
}

/// Writes the ledger and, when enabled, the snapshots with an index.
fn write_trajectory(w: &mut Writer, prefix: &str, cfg: &RunConfig, tr: &Trajectory) -> Result<()> {
    w.text(&format!("{prefix}ledger.csv"), &tr.ledger.to_csv())?;
    if cfg.snapshots {
        let mut index = String::from("step,t,file\n");
        for (i, s) in tr.snapshots.iter().enumerate() {
            let step = (i * tr.cadence).min(tr.steps);
            let file = format!("step_{step:06}.bin");
            w.snapshot(&format!("{prefix}snapshots/{file}"), &state_snapshot(step, s))?;
            index.push_str(&format!("{step},{:?},{file}\n", s.t));
        }
        w.text(&format!("{prefix}snapshots/index.csv"), &index)?;
    }
    Ok(())
}

fn rel_drift(m: f64, m0: f64) -> f64 {
    if m0 != 0.0 {
        ((m - m0) / m0).abs()
    } else {
        m.abs()
    }
}

/// Invariants asserted on every run.
pub fn run_report(tr: &Trajectory, band: Option<(f64, f64)>) -> DiagnosticsReport {
    let mut rep = DiagnosticsReport::default();
    let rows = &tr.ledger.rows;
    let (r0, z0) = (rows[0].mass_rho, rows[0].mass_z);
    let mr = rows.iter().map(|r| rel_drift(r.mass_rho, r0)).fold(0.0, f64::max);
    let mz = rows.iter().map(|r| rel_drift(r.mass_z, z0)).fold(0.0, f64::max);
    rep.push(Entry::upper("mass_rho_drift", mr, "relative", MASS_TOL));
    rep.push(Entry::upper("mass_z_drift", mz, "relative", MASS_TOL));
    rep.push(Entry::upper("energy_excess", tr.ledger.worst_energy_excess(), "(E + D - W) / E(0) - 1", ENERGY_TOL));
    let lo = rows.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.max_ratio).fold(f64::NEG_INFINITY, f64::max);
    let norm = format!("Z/rho in [{lo:e}, {hi:e}]");
    rep.push(match band {
        Some((c_lo, c_hi)) => Entry::upper("band_excess", (c_lo - lo).max(hi - c_hi).max(0.0), &norm, BAND_TOL),
        None => Entry::upper("band_excess", f64::NAN, &norm, f64::INFINITY).informational(),
    });
    let fatal = tr.violations.iter().filter(|v| v.kind.is_fatal()).count();
    rep.push(Entry::upper("fatal_violations", fatal as f64, "count", 0.0));
    let soft = tr.violations.len() - fatal;
    rep.push(Entry::upper("soft_flags", soft as f64, "positivity/vacuum count", f64::INFINITY).informational());
    let e: &Estimates = &tr.estimates;
    for (name, v) in [
        ("eps_grad_rho_sq", e.eps_grad_rho_sq),
        ("eps_grad_z_sq", e.eps_grad_z_sq),
        ("eps_cross_l1", e.eps_cross_l1),
        ("delta_z_beta", e.delta_z_beta),
        ("pressure_integrability", e.pressure_integrability),
        ("grad_u_sq", e.grad_u_sq),
    ] {
        rep.push(Entry::upper(name, v, "space-time", f64::INFINITY).informational());
    }
    rep
}

fn built(cfg: &RunConfig, factor: usize) -> Result<Built> {
    let grid = cfg.grid.scaled(factor)?;
    let mut ap = cfg.approx.clone();
    ap.dt /= factor as f64;
    build(&cfg.scenario, &grid, &cfg.phys, &ap)
}

/// The band asserted on a run, if the initial data respect it.
fn initial_band(b: &Built, cfg: &RunConfig) -> Option<(f64, f64)> {
    let (lo, hi) = crate::galerkin::ratio_range(&b.initial.rho, &b.initial.z);
    (lo >= cfg.phys.c_lo - BAND_TOL && hi <= cfg.phys.c_hi + BAND_TOL).then_some((cfg.phys.c_lo, cfg.phys.c_hi))
}

fn finish(w: Writer, cmd: Subcommand, cfg: &RunConfig, started: Instant, rep: &DiagnosticsReport) -> Result<Outcome> {
    let passed = rep.passed();
    let failures = rep.failures().iter().map(|e| e.name.clone()).collect();
    let files = w.manifest(cmd, cfg, started, passed)?;
    Ok(Outcome {
        passed,
        failures,
        files,
    })
}

fn run(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let started = Instant::now();
    let mut w = Writer::new(out)?;
    let b = built(cfg, 1)?;
    let band = initial_band(&b, cfg);
    let tr = run_trajectory(&b.gal, b.initial, cfg.cadence)?;
    write_trajectory(&mut w, "", cfg, &tr)?;
    let rep = run_report(&tr, band);
    w.text("report.json", &rep.to_json())?;
    finish(w, Subcommand::Run, cfg, started, &rep)
}

fn sweep(cfg: &RunConfig, out: &Path, param: SweepParam) -> Result<Outcome> {
    let started = Instant::now();
    let mut w = Writer::new(out)?;
    let default = match param {
        SweepParam::Epsilon => EPSILON_LADDER.to_vec(),
        SweepParam::Delta => DELTA_LADDER.to_vec(),
    };
    let mut plan = SweepPlan::new(
        param,
        cfg.sweep.ladder.clone().unwrap_or(default),
        cfg.grid.build()?,
        cfg.scenario.clone(),
        cfg.phys.clone(),
        cfg.approx.clone(),
    );
    plan.cadence = cfg.cadence;
    plan.q = cfg.sweep.q;
    plan.tie_epsilon = cfg.sweep.tie_epsilon;
    plan.seed = cfg.seed;
    let s = run_sweep(&plan)?;
    for (i, tr) in s.runs.iter().enumerate() {
        write_trajectory(&mut w, &format!("rung_{i:02}/"), cfg, tr)?;
    }
    w.text("sweep.csv", &s.report.to_csv())?;
    w.text("report.json", &s.report.to_json())?;
    let cmd = match param {
        SweepParam::Epsilon => Subcommand::SweepEps,
        SweepParam::Delta => Subcommand::SweepDelta,
    };
    finish(w, cmd, cfg, started, &s.report.report)
}

/// Loads the snapshots listed in `dir/snapshots/index.csv`.
pub fn load_trajectory(dir: &Path, gal: &Galerkin) -> Result<Trajectory> {
    let index_path = dir.join("snapshots").join("index.csv");
    let index = fs::read_to_string(&index_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingSnapshot(index_path.display().to_string()),
        _ => Error::Io(e),
    })?;
    let mut steps = Vec::new();
    let mut snapshots = Vec::new();
    for line in index.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Format(format!("bad index line '{line}'")));
        }
        let step: usize = cols[0]
            .parse()
            .map_err(|_| Error::Format(format!("bad step in '{line}'")))?;
        let snap = load_snapshot(&dir.join("snapshots").join(cols[2]), Some(gal.grid()))?;
        steps.push(step);
        snapshots.push(snapshot_state(&snap)?);
    }
    if snapshots.len() < 2 {
        return Err(Error::MissingSnapshot(format!(
            "{} lists fewer than two snapshots",
            index_path.display()
        )));
    }
    let cadence = steps[1] - steps[0];
    if cadence == 0 {
        return Err(Error::Format("repeated step in snapshot index".into()));
    }
    Ok(Trajectory {
        snapshots,
        cadence,
        dt: gal.approx().dt,
        steps: *steps.last().expect("non-empty"),
        ledger: EnergyLedger::default(),
        violations: Vec::new(),
        estimates: Estimates::default(),
        picard_histories: Vec::new(),
    })
}

/// Weak residuals, the Z ln Z budget and the pressure test on a stored trajectory.
pub fn diagnose_report(gal: &Galerkin, tr: &Trajectory) -> Result<DiagnosticsReport> {
    let mut rep = DiagnosticsReport::default();
    let grid = gal.grid();
    let bank = TestFunctionBank::standard(grid);
    let compact = TestFunctionBank::compact(grid);
    for form in [Formulation::Continuity, Formulation::ZEquation, Formulation::Momentum] {
        let b = if form == Formulation::Momentum { &compact } else { &bank };
        let r = weak_residual(gal, tr, form, b, None)?;
        rep.push(Entry::upper(form.name(), r.max, "max over bank", f64::INFINITY).informational());
    }
    let phys = gal.phys();
    let integrability = if gal.approx().delta > 0.0 {
        phys.beta
    } else {
        phys.gamma + phys.theta_int_max()
    };
    let renorm = Renormalizer::rational();
    let r = renorm_residual(gal, tr, &renorm, &bank, integrability)?;
    rep.push(Entry::upper(&format!("renorm[{}]", renorm.name), r.max, "max over bank", f64::INFINITY).informational());

    if tr.cadence == 1 && tr.snapshots.iter().all(|s| s.z.min() > 0.0) {
        let z = zlogz_budget(tr)?;
        let e0 = gal.energy(&tr.snapshots[0]).max(1.0);
        rep.push(Entry::upper("zlogz_gap", z.gap, "lhs - rhs", ENERGY_TOL * e0));
    } else {
        rep.push(
            Entry::upper("zlogz_gap", f64::NAN, "needs cadence 1 and Z > 0", f64::INFINITY).informational(),
        );
    }
    let p = pressure_estimate_check(gal, tr, phys.theta_int_max())?;
    rep.push(Entry::upper("pressure_gap", p.gap.abs(), "tested momentum identity", f64::INFINITY).informational());
    rep.push(
        Entry::upper("pressure_term", p.pressure_term, "int int p (Z^theta - mean)", f64::INFINITY).informational(),
    );
    Ok(rep)
}

fn diagnose(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let started = Instant::now();
    // reading from the output directory keeps the run's own manifest intact
    let (input, target) = match &cfg.diagnose_input {
        Some(p) => (PathBuf::from(p), out.to_path_buf()),
        None => (out.to_path_buf(), out.join("diagnose")),
    };
    let b = built(cfg, 1)?;
    let tr = load_trajectory(&input, &b.gal)?;
    let mut w = Writer::new(&target)?;
    let rep = diagnose_report(&b.gal, &tr)?;
    w.text("diagnostics.json", &rep.to_json())?;
    w.text("diagnostics.csv", &rep.to_csv())?;
    finish(w, Subcommand::Diagnose, cfg, started, &rep)
}

fn bridge(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let started = Instant::now();
    let mut w = Writer::new(out)?;
    let pair = TFunctionPair::from_law(cfg.phys.entropy_law, cfg.phys.gamma);
    let levels: Vec<(Galerkin, Trajectory)> = (0..cfg.bridge.levels)
        .map(|i| {
            let b = built(cfg, 1 << i)?;
            let tr = run_trajectory(&b.gal, b.initial, 1)?;
            Ok((b.gal, tr))
        })
        .collect::<Result<_>>()?;
    for (i, (_, tr)) in levels.iter().enumerate() {
        w.text(&format!("level_{i}/ledger.csv"), &tr.ledger.to_csv())?;
    }
    let (gal, tr) = levels.last().expect("levels >= 1");
    let (mut rep, _) = bridge_check(gal, tr, pair, &cfg.bridge.lambdas, &TestFunctionBank::standard(gal.grid()))?;
    if levels.len() >= 2 {
        let refs: Vec<(&Galerkin, &Trajectory)> = levels.iter().map(|(g, t)| (g, t)).collect();
        rep.extend(bridge_refinement(&refs, pair, &cfg.bridge.lambdas, |g| {
            TestFunctionBank::standard(g.grid())
        })?);
    }
    w.text("report.json", &rep.to_json())?;
    w.text("bridge.csv", &rep.to_csv())?;
    finish(w, Subcommand::Bridge, cfg, started, &rep)
}

fn mms(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let started = Instant::now();
    let mut w = Writer::new(out)?;
    let mut study = cfg.mms.clone();
    study.dim = cfg.grid.dim;
    study.length = cfg.grid.length;
    let r = mms_convergence(&study, &cfg.scenario, &cfg.phys)?;
    w.text("convergence.csv", &r.to_csv())?;
    w.text("report.json", &r.report.to_json())?;
    finish(w, Subcommand::Mms, cfg, started, &r.report)
}

/// Executes a pipeline, writing artifacts under `out`.
pub fn dispatch(cmd: Subcommand, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    match cmd {
        Subcommand::Run => run(cfg, out),
        Subcommand::SweepEps => sweep(cfg, out, SweepParam::Epsilon),
        Subcommand::SweepDelta => sweep(cfg, out, SweepParam::Delta),
        Subcommand::Diagnose => diagnose(cfg, out),
        Subcommand::Bridge => bridge(cfg, out),
        Subcommand::Mms => mms(cfg, out),
    }
}
