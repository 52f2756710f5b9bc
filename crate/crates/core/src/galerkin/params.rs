use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form entropy law `T` relating `theta^gamma = T(s)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyLaw {
    Exponential,
    Power,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub gamma: f64,
    pub beta: f64,
    pub mu: f64,
    pub lambda: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    pub entropy_law: EntropyLaw,
    pub forcing: bool,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            gamma: 2.0,
            beta: 4.0,
            mu: 1.0,
            lambda: 0.0,
            c_lo: 0.5,
            c_hi: 2.0,
            entropy_law: EntropyLaw::Exponential,
            forcing: false,
        }
    }
}

impl PhysParams {
    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.gamma > 1.0) {
            v.push(format!("gamma = {} must exceed 1", self.gamma));
        }
        if !(self.beta >= self.gamma.max(4.0)) {
            v.push(format!("beta = {} must be >= max(4, gamma)", self.beta));
        }
        if !(self.mu > 0.0) {
            v.push(format!("mu = {} must be positive", self.mu));
        }
        if !(3.0 * self.lambda + 2.0 * self.mu > 0.0) {
            v.push(format!(
                "3 lambda + 2 mu = {} must be positive",
                3.0 * self.lambda + 2.0 * self.mu
            ));
        }
        if !(self.c_lo > 0.0 && self.c_lo <= self.c_hi) {
            v.push(format!("band [{}, {}] must satisfy 0 < c_lo <= c_hi", self.c_lo, self.c_hi));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.gamma <= 1.5 {
            w.push(format!("gamma = {} is outside the existence range gamma > 3/2", self.gamma));
        }
        w
    }

    /// Whether the rho*s formulation is inside its proven range.
    pub fn rho_s_admissible(&self) -> bool {
        self.gamma >= 1.8
    }

    pub fn pressure(&self, z: f64, delta: f64) -> f64 {
        let z = z.max(0.0);
        z.powf(self.gamma) + delta * z.powf(self.beta)
    }

    /// Pressure potential `Z^gamma/(gamma-1) + delta Z^beta/(beta-1)`.
    pub fn potential(&self, z: f64, delta: f64) -> f64 {
        let z = z.max(0.0);
        z.powf(self.gamma) / (self.gamma - 1.0) + delta * z.powf(self.beta) / (self.beta - 1.0)
    }

    pub fn potential_prime(&self, z: f64, delta: f64) -> f64 {
        let z = z.max(0.0);
        self.gamma / (self.gamma - 1.0) * z.powf(self.gamma - 1.0)
            + delta * self.beta / (self.beta - 1.0) * z.powf(self.beta - 1.0)
    }

    /// Admissible integrability gain `min(2 gamma / 3 - 1, gamma / 2)`.
    pub fn theta_int_max(&self) -> f64 {
        (2.0 * self.gamma / 3.0 - 1.0).min(self.gamma / 2.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Retained vector basis functions; `None` keeps every resolved mode.
    pub n_modes: Option<usize>,
    pub dt: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub relaxation: f64,
    pub t_final: f64,
}

impl Default for ApproxParams {
    fn default() -> Self {
        ApproxParams {
            epsilon: 1e-3,
            delta: 1e-3,
            n_modes: None,
            dt: 1e-3,
            picard_tol: 1e-10,
            picard_max_iter: 400,
            relaxation: 0.5,
            t_final: 0.1,
        }
    }
}

impl ApproxParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.epsilon >= 0.0) {
            v.push(format!("epsilon = {} must be >= 0", self.epsilon));
        }
        if !(self.delta >= 0.0) {
            v.push(format!("delta = {} must be >= 0", self.delta));
        }
        if self.n_modes == Some(0) {
            v.push("n_modes must be >= 1".into());
        }
        if !(self.dt > 0.0) {
            v.push(format!("dt = {} must be positive", self.dt));
        }
        if !(self.picard_tol > 0.0) {
            v.push(format!("picard_tol = {} must be positive", self.picard_tol));
        }
        if self.picard_max_iter == 0 {
            v.push("picard_max_iter must be >= 1".into());
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            v.push(format!("relaxation = {} must lie in (0, 1]", self.relaxation));
        }
        if !(self.t_final > 0.0) {
            v.push(format!("t_final = {} must be positive", self.t_final));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }
}
