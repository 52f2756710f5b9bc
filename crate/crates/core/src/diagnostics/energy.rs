use serde::Serialize;

use crate::bridge::TFunctionPair;
use crate::error::{Error, Result};
use crate::fields::Field;
use crate::galerkin::{PhysParams, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EnergyKind {
    /// Kinetic plus `rho^gamma T(s) / (gamma - 1)`; needs the entropy.
    E1,
    /// Kinetic plus `Z^gamma / (gamma - 1)`.
    E2,
    /// `E2` plus the artificial pressure potential.
    Edelta,
}

pub fn energy_functional(
    state: &State,
    kind: EnergyKind,
    phys: &PhysParams,
    delta: f64,
    s: Option<&Field>,
) -> Result<f64> {
    let kinetic = 0.5
        * state
            .rho
            .zip_map(&state.u.norm_sqr_field(), |r, q| r * q)
            .integrate();
    let g = phys.gamma;
    let potential = match kind {
        EnergyKind::E1 => {
            let s = s.ok_or_else(|| Error::MissingField("entropy s required for E1".into()))?;
            let pair = TFunctionPair::from_law(phys.entropy_law, g);
            state
                .rho
                .zip_map(s, |r, sv| r.max(0.0).powf(g) * pair.forward(sv) / (g - 1.0))
                .integrate()
        }
        EnergyKind::E2 => state.z.map(|z| z.max(0.0).powf(g) / (g - 1.0)).integrate(),
        EnergyKind::Edelta => state.z.map(|z| phys.potential(z, delta)).integrate(),
    };
    Ok(kinetic + potential)
}
