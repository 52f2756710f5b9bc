//! INI-style run configuration.

use std::str::FromStr;

use ini::Ini;
use serde::Serialize;

use super::mms::MmsStudy;
use super::scenarios::{ScenarioKind, ScenarioSpec};
use crate::bridge::DEFAULT_LAMBDAS;
use crate::error::{Error, Result};
use crate::fields::{Axis, Boundary, Grid};
use crate::galerkin::{ApproxParams, EntropyLaw, PhysParams};

/// Recognized keys per section. Key names are unique across sections, so a
/// key outside any section is attributed to its owner.
const SCHEMA: &[(&str, &[&str])] = &[
    ("phys", &["gamma", "beta", "mu", "lambda", "c_lo", "c_hi", "entropy_law"]),
    (
        "approx",
        &["epsilon", "delta", "n_modes", "dt", "picard_tol", "picard_max_iter", "relaxation", "t_final"],
    ),
    ("grid", &["dim", "n", "length", "boundary"]),
    (
        "scenario",
        &[
            "kind", "velocity", "floor", "ratio", "theta_mean", "theta_amp", "mms_amp", "mms_drift", "mms_flux",
            "mms_mode",
        ],
    ),
    ("output", &["cadence", "seed", "snapshots"]),
    ("sweep", &["ladder", "q", "tie_epsilon"]),
    ("bridge", &["lambdas", "levels"]),
    ("mms", &["resolutions", "dt_space", "n_time", "dt_time", "time_levels"]),
    ("diagnose", &["input"]),
];

fn owner(key: &str) -> Option<&'static str> {
    SCHEMA.iter().find(|(_, keys)| keys.contains(&key)).map(|(s, _)| *s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub boundary: String,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            dim: 1,
            n: 64,
            length: 2.0 * std::f64::consts::PI,
            boundary: "periodic".into(),
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<std::sync::Arc<Grid>> {
        self.scaled(1)
    }

    /// Grid with `factor` times the nodes per axis.
    pub fn scaled(&self, factor: usize) -> Result<std::sync::Arc<Grid>> {
        let b = Boundary::parse(&self.boundary)
            .ok_or_else(|| Error::Config(vec![format!("unknown boundary '{}'", self.boundary)]))?;
        Grid::new(vec![Axis::new(self.n * factor, self.length, b); self.dim])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSpec {
    /// `None` selects the default ladder of the sweep.
    pub ladder: Option<Vec<f64>>,
    pub q: f64,
    pub tie_epsilon: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BridgeSpec {
    pub lambdas: Vec<f64>,
    /// Resolutions `n, 2n, ...` with the step halved alongside.
    pub levels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub phys: PhysParams,
    pub approx: ApproxParams,
    pub grid: GridSpec,
    pub scenario: ScenarioSpec,
    pub cadence: usize,
    pub seed: u64,
    pub snapshots: bool,
    pub sweep: SweepSpec,
    pub bridge: BridgeSpec,
    pub mms: MmsStudy,
    /// Trajectory directory read by `diagnose`; defaults to the output directory.
    pub diagnose_input: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            phys: PhysParams::default(),
            approx: ApproxParams::default(),
            grid: GridSpec::default(),
            scenario: ScenarioSpec::default(),
            cadence: 1,
            seed: 0,
            snapshots: true,
            sweep: SweepSpec {
                ladder: None,
                q: 2.0,
                tie_epsilon: false,
            },
            bridge: BridgeSpec {
                lambdas: DEFAULT_LAMBDAS.to_vec(),
                levels: 2,
            },
            mms: MmsStudy::default(),
            diagnose_input: None,
        }
    }
}

fn num<T: FromStr>(v: &str, slot: &mut T) -> std::result::Result<(), String> {
    *slot = v
        .parse()
        .map_err(|_| format!("expected {}, got '{v}'", std::any::type_name::<T>()))?;
    Ok(())
}

fn list<T: FromStr>(v: &str, slot: &mut Vec<T>) -> std::result::Result<(), String> {
    *slot = v
        .split(',')
        .map(|x| x.trim().parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| format!("expected a comma-separated list of {}, got '{v}'", std::any::type_name::<T>()))?;
    Ok(())
}

fn flag(v: &str, slot: &mut bool) -> std::result::Result<(), String> {
    *slot = match v {
        "true" | "yes" | "1" => true,
        "false" | "no" | "0" => false,
        _ => return Err(format!("expected a boolean, got '{v}'")),
    };
    Ok(())
}

impl RunConfig {
    fn set(&mut self, section: &str, key: &str, v: &str) -> std::result::Result<(), String> {
        let (p, a, s) = (&mut self.phys, &mut self.approx, &mut self.scenario);
        match (section, key) {
            ("phys", "gamma") => num(v, &mut p.gamma),
            ("phys", "beta") => num(v, &mut p.beta),
            ("phys", "mu") => num(v, &mut p.mu),
            ("phys", "lambda") => num(v, &mut p.lambda),
            ("phys", "c_lo") => num(v, &mut p.c_lo),
            ("phys", "c_hi") => num(v, &mut p.c_hi),
            ("phys", "entropy_law") => {
                p.entropy_law = match v {
                    "exponential" => EntropyLaw::Exponential,
                    "power" => EntropyLaw::Power,
                    _ => return Err(format!("expected exponential or power, got '{v}'")),
                };
                Ok(())
            }
            ("approx", "epsilon") => num(v, &mut a.epsilon),
            ("approx", "delta") => num(v, &mut a.delta),
            ("approx", "n_modes") => {
                let mut n = 0usize;
                num(v, &mut n)?;
                a.n_modes = Some(n);
                Ok(())
            }
            ("approx", "dt") => num(v, &mut a.dt),
            ("approx", "picard_tol") => num(v, &mut a.picard_tol),
            ("approx", "picard_max_iter") => num(v, &mut a.picard_max_iter),
            ("approx", "relaxation") => num(v, &mut a.relaxation),
            ("approx", "t_final") => num(v, &mut a.t_final),
            ("grid", "dim") => num(v, &mut self.grid.dim),
            ("grid", "n") => num(v, &mut self.grid.n),
            ("grid", "length") => num(v, &mut self.grid.length),
            ("grid", "boundary") => {
                Boundary::parse(v).ok_or_else(|| format!("expected periodic or wall, got '{v}'"))?;
                self.grid.boundary = v.to_string();
                Ok(())
            }
            ("scenario", "kind") => {
                s.kind = ScenarioKind::parse(v)
                    .ok_or_else(|| format!("expected constant, band-scaled, pulse or mms, got '{v}'"))?;
                Ok(())
            }
            ("scenario", "velocity") => num(v, &mut s.velocity),
            ("scenario", "floor") => num(v, &mut s.floor),
            ("scenario", "ratio") => num(v, &mut s.ratio),
            ("scenario", "theta_mean") => num(v, &mut s.theta_mean),
            ("scenario", "theta_amp") => num(v, &mut s.theta_amp),
            ("scenario", "mms_amp") => num(v, &mut s.mms_amp),
            ("scenario", "mms_drift") => num(v, &mut s.mms_drift),
            ("scenario", "mms_flux") => num(v, &mut s.mms_flux),
            ("scenario", "mms_mode") => num(v, &mut s.mms_mode),
            ("output", "cadence") => num(v, &mut self.cadence),
            ("output", "seed") => num(v, &mut self.seed),
            ("output", "snapshots") => flag(v, &mut self.snapshots),
            ("sweep", "ladder") => {
                let mut l = Vec::new();
                list(v, &mut l)?;
                self.sweep.ladder = Some(l);
                Ok(())
            }
            ("sweep", "q") => num(v, &mut self.sweep.q),
            ("sweep", "tie_epsilon") => flag(v, &mut self.sweep.tie_epsilon),
            ("bridge", "lambdas") => list(v, &mut self.bridge.lambdas),
            ("bridge", "levels") => num(v, &mut self.bridge.levels),
            ("mms", "resolutions") => list(v, &mut self.mms.resolutions),
            ("mms", "dt_space") => num(v, &mut self.mms.dt_space),
            ("mms", "n_time") => num(v, &mut self.mms.n_time),
            ("mms", "dt_time") => num(v, &mut self.mms.dt_time),
            ("mms", "time_levels") => num(v, &mut self.mms.time_levels),
            ("diagnose", "input") => {
                self.diagnose_input = Some(v.to_string());
                Ok(())
            }
            _ => Err("unknown key".into()),
        }
    }

    /// Every violated constraint of the owning modules.
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.phys.violations();
        v.extend(self.approx.violations());
        v.extend(self.scenario.violations());
        v.extend(self.mms.violations());
        if !(1..=3).contains(&self.grid.dim) {
            v.push(format!("grid dim = {} must be 1, 2 or 3", self.grid.dim));
        }
        if self.grid.n < 4 {
            v.push(format!("grid n = {} must be >= 4", self.grid.n));
        }
        if !(self.grid.length > 0.0) {
            v.push(format!("grid length = {} must be positive", self.grid.length));
        }
        if self.cadence == 0 {
            v.push("cadence must be >= 1".into());
        }
        if self.bridge.lambdas.iter().any(|&l| !(l > 0.0)) || self.bridge.lambdas.is_empty() {
            v.push(format!("bridge lambdas {:?} must be non-empty and positive", self.bridge.lambdas));
        }
        if self.bridge.levels == 0 {
            v.push("bridge levels must be >= 1".into());
        }
        v
    }
}

/// Drops a trailing `; ...` or `# ...` comment.
fn strip_comment(value: &str) -> &str {
    let cut = value
        .char_indices()
        .find(|&(i, c)| (c == ';' || c == '#') && (i == 0 || value[..i].ends_with(char::is_whitespace)))
        .map_or(value.len(), |(i, _)| i);
    value[..cut].trim()
}

/// Parses and validates; every problem is reported, not just the first.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let ini = Ini::load_from_str(text).map_err(|e| Error::Config(vec![format!("syntax error: {e}")]))?;
    let mut cfg = RunConfig::default();
    let mut errs = Vec::new();
    for (section, props) in ini.iter() {
        if let Some(s) = section {
            if !SCHEMA.iter().any(|(name, _)| *name == s) {
                errs.push(format!("unknown section [{s}]"));
                continue;
            }
        }
        for (key, value) in props.iter() {
            let Some(sec) = section.or_else(|| owner(key)) else {
                errs.push(format!("unknown key '{key}'"));
                continue;
            };
            if let Err(m) = cfg.set(sec, key, strip_comment(value)) {
                errs.push(format!("[{sec}] {key}: {m}"));
            }
        }
    }
    errs.extend(cfg.violations());
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errs))
    }
}
