//! Transforms between node samples and extended periodic spectra.
//!
//! Wall axes are handled by even or odd reflection onto a periodic grid of
//! twice the length, so one complex FFT covers all three basis families.

use ndarray::{ArrayD, Axis as NdAxis, Dimension, IxDyn, Slice, Zip};
use num_complex::Complex64;

use super::grid::{Basis, Boundary, Grid};
use crate::error::{Error, Result};

pub(crate) fn check_basis(grid: &Grid, basis: &[Basis]) -> Result<()> {
    if basis.len() != grid.dim() {
        return Err(Error::Basis(format!(
            "{} basis tags for a {}-dimensional grid",
            basis.len(),
            grid.dim()
        )));
    }
    for (a, (ax, b)) in grid.axes().iter().zip(basis).enumerate() {
        let ok = match ax.boundary {
            Boundary::Periodic => *b == Basis::Exponential,
            Boundary::Wall => *b != Basis::Exponential,
        };
        if !ok {
            return Err(Error::Basis(format!(
                "axis {a}: {} basis on a {} axis",
                b.name(),
                ax.boundary.name()
            )));
        }
    }
    Ok(())
}

fn sign(b: Basis) -> f64 {
    if b == Basis::Sine {
        -1.0
    } else {
        1.0
    }
}

fn extend_1d(lane: impl Iterator<Item = f64>, n_nodes: usize, wall: bool, s: f64, buf: &mut Vec<Complex64>) {
    buf.clear();
    buf.extend(lane.map(|v| Complex64::new(v, 0.0)));
    debug_assert_eq!(buf.len(), n_nodes);
    if wall {
        let n = n_nodes - 1;
        for j in (1..n).rev() {
            let v = buf[j].re * s;
            buf.push(Complex64::new(v, 0.0));
        }
    }
}

/// Extend samples to the periodic grid and transform along every axis.
pub(crate) fn forward(grid: &Grid, data: &ArrayD<f64>, basis: &[Basis]) -> ArrayD<Complex64> {
    let mut cur: ArrayD<Complex64> = data.mapv(|v| Complex64::new(v, 0.0));
    for (a, ax) in grid.axes().iter().enumerate() {
        if ax.boundary == Boundary::Wall {
            let n = ax.n;
            let mut shape = cur.shape().to_vec();
            shape[a] = 2 * n;
            let mut ext = ArrayD::<Complex64>::zeros(IxDyn(&shape));
            ext.slice_axis_mut(NdAxis(a), Slice::from(0..=n))
                .assign(&cur);
            let s = sign(basis[a]);
            let mirror = cur.slice_axis(NdAxis(a), Slice::new(1, Some(n as isize), -1));
            ext.slice_axis_mut(NdAxis(a), Slice::from(n + 1..2 * n))
                .zip_mut_with(&mirror, |e, m| *e = *m * s);
            cur = ext;
        }
        transform_axis(grid, &mut cur, a, false);
    }
    cur
}

/// Inverse of [`forward`], restricted to the node set (real part).
pub(crate) fn inverse(grid: &Grid, mut spec: ArrayD<Complex64>) -> ArrayD<f64> {
    let total: usize = grid.ext_shape().iter().product();
    for a in 0..grid.dim() {
        transform_axis(grid, &mut spec, a, true);
    }
    let mut view = spec.view();
    for (a, ax) in grid.axes().iter().enumerate() {
        view.slice_axis_inplace(NdAxis(a), Slice::from(0..ax.nodes()));
    }
    let scale = 1.0 / total as f64;
    view.mapv(|c| c.re * scale)
}

fn transform_axis(grid: &Grid, arr: &mut ArrayD<Complex64>, a: usize, inv: bool) {
    let plan = if inv {
        &grid.plans[a].inverse
    } else {
        &grid.plans[a].forward
    };
    let len = arr.shape()[a];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for mut lane in arr.lanes_mut(NdAxis(a)) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        plan.process(&mut buf);
        for (v, b) in lane.iter_mut().zip(&buf) {
            *v = *b;
        }
    }
}

/// Apply a Fourier multiplier indexed by extended multi-index.
pub(crate) fn apply_multiplier<F>(grid: &Grid, data: &ArrayD<f64>, basis: &[Basis], symbol: F) -> ArrayD<f64>
where
    F: Fn(&[usize]) -> Complex64,
{
    let mut spec = forward(grid, data, basis);
    for (idx, c) in spec.indexed_iter_mut() {
        *c *= symbol(idx.slice());
    }
    inverse(grid, spec)
}

/// Apply a one-dimensional multiplier along a single axis, lane by lane.
pub(crate) fn apply_axis_multiplier<F>(
    grid: &Grid,
    data: &ArrayD<f64>,
    basis: &[Basis],
    a: usize,
    symbol: F,
) -> ArrayD<f64>
where
    F: Fn(usize) -> Complex64,
{
    let ax = grid.axis(a);
    let wall = ax.boundary == Boundary::Wall;
    let nodes = ax.nodes();
    let len = ax.ext_len();
    let s = sign(basis[a]);
    let mult: Vec<Complex64> = (0..len).map(&symbol).collect();
    let scale = 1.0 / len as f64;
    let plans = &grid.plans[a];
    let mut out = ArrayD::<f64>::zeros(data.raw_dim());
    let mut buf = Vec::with_capacity(len);
    Zip::from(out.lanes_mut(NdAxis(a)))
        .and(data.lanes(NdAxis(a)))
        .for_each(|mut o, d| {
            extend_1d(d.iter().copied(), nodes, wall, s, &mut buf);
            plans.forward.process(&mut buf);
            for (b, m) in buf.iter_mut().zip(&mult) {
                *b *= m;
            }
            plans.inverse.process(&mut buf);
            for (ov, b) in o.iter_mut().zip(&buf) {
                *ov = b.re * scale;
            }
        });
    out
}

/// Normalized spectral coefficients on the extended grid.
pub(crate) fn coefficients(grid: &Grid, data: &ArrayD<f64>, basis: &[Basis]) -> ArrayD<Complex64> {
    let total: usize = grid.ext_shape().iter().product();
    let scale = 1.0 / total as f64;
    forward(grid, data, basis).mapv(|c| c * scale)
}
