//! Certificates evaluated on trajectories: energies, cut-off calculus, weak
//! residuals, renormalized transport and flux functionals.

mod budgets;
mod cutoff;
mod energy;
mod weak;

#[cfg(test)]
mod tests;

use serde::Serialize;

pub use budgets::{
    evf_functional, oscillation_defect, pressure_estimate_check, zlogz_budget, OscillationDefect,
    PressureCheck, ZlogzBudget,
};
pub use cutoff::{
    capped_log_lk, convexity_violations, cutoff_field, cutoff_t, cutoff_t_prime, cutoff_tk,
    cutoff_tk_prime,
};
pub use energy::{energy_functional, EnergyKind};
pub use weak::{renorm_residual, weak_residual, Formulation, Renormalizer, WeakResidual};
pub(crate) use weak::{balance_residuals, g_transport_slices, rho_s_slices};

/// Default cut-off levels for the defect-measure supremum.
pub const DEFAULT_KS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Entry {
    pub name: String,
    pub value: f64,
    pub norm: String,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trend: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formulation: Option<String>,
    pub informational: bool,
}

impl Entry {
    /// Passes when `value <= tolerance`.
    pub fn upper(name: &str, value: f64, norm: &str, tolerance: f64) -> Entry {
        Entry {
            name: name.to_string(),
            value,
            norm: norm.to_string(),
            tolerance,
            pass: value <= tolerance,
            trend: None,
            formulation: None,
            informational: false,
        }
    }

    /// Passes when `value >= tolerance`.
    pub fn lower(name: &str, value: f64, norm: &str, tolerance: f64) -> Entry {
        Entry {
            pass: value >= tolerance,
            ..Entry::upper(name, value, norm, tolerance)
        }
    }

    pub fn with_trend(mut self, trend: String, pass: bool) -> Entry {
        self.trend = Some(trend);
        self.pass = self.pass && pass;
        self
    }

    pub fn with_formulation(mut self, tag: &str) -> Entry {
        self.formulation = Some(tag.to_string());
        self
    }

    pub fn informational(mut self) -> Entry {
        self.informational = true;
        self
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DiagnosticsReport {
    pub entries: Vec<Entry>,
}

impl DiagnosticsReport {
    pub fn push(&mut self, e: Entry) {
        self.entries.push(e);
    }

    pub fn extend(&mut self, other: DiagnosticsReport) {
        self.entries.extend(other.entries);
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Informational entries never fail a report.
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass || e.informational)
    }

    pub fn failures(&self) -> Vec<&Entry> {
        self.entries
            .iter()
            .filter(|e| !e.pass && !e.informational)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,value,norm,tolerance,pass,trend,formulation,informational\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{:e},{},{:e},{},{},{},{}\n",
                e.name,
                e.value,
                e.norm,
                e.tolerance,
                e.pass,
                e.trend.as_deref().unwrap_or(""),
                e.formulation.as_deref().unwrap_or(""),
                e.informational
            ));
        }
        s
    }
}

/// Verdict on a refinement sequence: every consecutive ratio must reach `factor`.
pub fn refinement_trend(values: &[f64], factor: f64) -> (bool, String) {
    if values.len() < 2 {
        return (false, "insufficient levels".into());
    }
    let ratios: Vec<f64> = values
        .windows(2)
        .map(|w| if w[1] > 0.0 { w[0] / w[1] } else { f64::INFINITY })
        .collect();
    let ok = ratios.iter().all(|&r| r >= factor);
    let txt = ratios
        .iter()
        .map(|r| format!("{r:.3}"))
        .collect::<Vec<_>>()
        .join("/");
    (ok, format!("ratios {txt} (need >= {factor})"))
}
