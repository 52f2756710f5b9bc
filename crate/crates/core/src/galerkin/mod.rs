//! Faedo-Galerkin approximation of the regularized system.

mod basis;
mod params;
mod solver;
mod trajectory;

pub use basis::GalerkinBasis;
pub use params::{ApproxParams, EntropyLaw, PhysParams};
pub use solver::{advect_diffuse_step, transport_step, ForcingFn, Galerkin, MomentumRhs, StepInfo};
pub use trajectory::{
    ratio_range, run_trajectory, EnergyLedger, Estimates, LedgerRow, Trajectory, Violation, ViolationKind,
    BAND_TOL, ENERGY_TOL, MASS_TOL, VACUUM_FRACTION,
};

use crate::fields::{Field, VectorField};

#[derive(Clone, Debug)]
pub struct State {
    pub t: f64,
    pub rho: Field,
    pub z: Field,
    pub u: VectorField,
}
