//! Grids, spectral bases, field arithmetic, quadrature and initial-data regularization.

mod bank;
mod container;
mod field;
mod grid;
mod initial;
mod mollifier;
pub(crate) mod spectral;

pub use bank::{Mode, Ramp, TestFn, TestFunctionBank};
pub use container::{
    load_field, load_snapshot, read_field, read_snapshot, save_field, save_snapshot, write_field,
    write_snapshot, Snapshot,
};
pub use field::{Field, VectorField};
pub use grid::{Axis, Basis, Boundary, Grid};
pub use initial::{check_band, cutoff_profile, regularize_initial_data, RegularizedData};
pub use mollifier::{kernel as mollifier_kernel, kernel_symbol as mollifier_symbol};

#[cfg(test)]
mod tests;
