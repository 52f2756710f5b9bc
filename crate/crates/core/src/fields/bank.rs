//! Versioned banks of smooth space-time test functions.
//!
//! Each function is a tensor product of low-order trigonometric factors in
//! space times a quadratic polynomial in normalized time, optionally ramped
//! near the time endpoints.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{ArrayD, Dimension, IxDyn};
use serde::Serialize;

use super::field::Field;
use super::grid::{Axis, Boundary, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    Const,
    Cos(u32),
    Sin(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Ramp {
    None,
    /// Linear ramps to zero on `[0, tau]` and `[T - tau, T]`.
    Interior(f64),
    /// Complement of the interior ramp: supported near the endpoints only.
    Endpoint(f64),
}

/// Integer-exact evaluation of `sin(pi * r / n)` and `cos(pi * r / n)`.
fn trig_pi(num: u64, den: u64) -> (f64, f64) {
    let r = num % (2 * den);
    if r == 0 {
        return (0.0, 1.0);
    }
    if r == den {
        return (0.0, -1.0);
    }
    let a = PI * r as f64 / den as f64;
    (a.sin(), a.cos())
}

impl Mode {
    /// Angular wavenumber of the factor along an axis.
    pub fn wavenumber(self, ax: &Axis) -> f64 {
        let m = match self {
            Mode::Const => return 0.0,
            Mode::Cos(m) | Mode::Sin(m) => m as f64,
        };
        match ax.boundary {
            Boundary::Periodic => 2.0 * PI * m / ax.length,
            Boundary::Wall => PI * m / ax.length,
        }
    }

    /// Value and derivative at node `j`.
    fn at_node(self, ax: &Axis, j: usize) -> (f64, f64) {
        let (m, s_or_c) = match self {
            Mode::Const => return (1.0, 0.0),
            Mode::Cos(m) => (m as u64, false),
            Mode::Sin(m) => (m as u64, true),
        };
        let num = match ax.boundary {
            Boundary::Periodic => 2 * m * j as u64,
            Boundary::Wall => m * j as u64,
        };
        let (s, c) = trig_pi(num, ax.n as u64);
        let k = self.wavenumber(ax);
        if s_or_c {
            (s, k * c)
        } else {
            (c, -k * s)
        }
    }

    pub fn value(self, ax: &Axis, x: f64) -> f64 {
        let k = self.wavenumber(ax);
        match self {
            Mode::Const => 1.0,
            Mode::Cos(_) => (k * x).cos(),
            Mode::Sin(_) => (k * x).sin(),
        }
    }

    fn vanishes_on_walls(self) -> bool {
        matches!(self, Mode::Sin(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFn {
    pub spatial: Vec<Mode>,
    /// Coefficients of `c0 + c1 s + c2 s^2` in `s = t / T`.
    pub time: [f64; 3],
    pub ramp: Ramp,
}

impl TestFn {
    pub fn new(spatial: Vec<Mode>, time: [f64; 3]) -> TestFn {
        TestFn {
            spatial,
            time,
            ramp: Ramp::None,
        }
    }

    pub fn with_ramp(mut self, ramp: Ramp) -> TestFn {
        self.ramp = ramp;
        self
    }

    fn poly(&self, t: f64, t_final: f64) -> (f64, f64) {
        let s = t / t_final;
        let [c0, c1, c2] = self.time;
        (c0 + s * (c1 + s * c2), (c1 + 2.0 * c2 * s) / t_final)
    }

    /// Time factor and its derivative at `t` on `[0, t_final]`.
    pub fn time_factor(&self, t: f64, t_final: f64) -> (f64, f64) {
        let interior = |tau: f64| -> (f64, f64) {
            if t < tau {
                let (p, _) = self.poly(tau, t_final);
                (t / tau * p, p / tau)
            } else if t > t_final - tau {
                let (p, _) = self.poly(t_final - tau, t_final);
                ((t_final - t) / tau * p, -p / tau)
            } else {
                self.poly(t, t_final)
            }
        };
        match self.ramp {
            Ramp::None => self.poly(t, t_final),
            Ramp::Interior(tau) => interior(tau),
            Ramp::Endpoint(tau) => {
                let (v, d) = self.poly(t, t_final);
                let (vi, di) = interior(tau);
                (v - vi, d - di)
            }
        }
    }

    pub fn spatial_value(&self, grid: &Grid, x: &[f64]) -> f64 {
        self.spatial
            .iter()
            .zip(grid.axes())
            .zip(x)
            .map(|((m, ax), &xi)| m.value(ax, xi))
            .product()
    }

    /// Node values of the spatial factor.
    pub fn spatial_field(&self, grid: &Arc<Grid>) -> Field {
        let mut data = ArrayD::zeros(IxDyn(grid.shape()));
        for (idx, v) in data.indexed_iter_mut() {
            *v = self
                .spatial
                .iter()
                .zip(grid.axes())
                .zip(idx.slice())
                .map(|((m, ax), &j)| m.at_node(ax, j).0)
                .product();
        }
        Field::from_parts(grid.clone(), data, grid.scalar_basis())
    }

    /// Node values of the spatial gradient, one field per axis.
    pub fn spatial_gradient(&self, grid: &Arc<Grid>) -> Vec<Field> {
        (0..grid.dim())
            .map(|a| {
                let mut data = ArrayD::zeros(IxDyn(grid.shape()));
                for (idx, v) in data.indexed_iter_mut() {
                    *v = self
                        .spatial
                        .iter()
                        .zip(grid.axes())
                        .zip(idx.slice())
                        .enumerate()
                        .map(|(b, ((m, ax), &j))| {
                            let (val, der) = m.at_node(ax, j);
                            if a == b {
                                der
                            } else {
                                val
                            }
                        })
                        .product();
                }
                Field::from_parts(grid.clone(), data, grid.scalar_basis())
            })
            .collect()
    }

    /// True when the spatial factor vanishes on every wall.
    pub fn is_compact(&self, grid: &Grid) -> bool {
        self.spatial
            .iter()
            .zip(grid.axes())
            .all(|(m, ax)| ax.boundary == Boundary::Periodic || m.vanishes_on_walls())
    }

    pub fn is_spatial_constant(&self) -> bool {
        self.spatial.iter().all(|m| *m == Mode::Const)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TestFunctionBank {
    pub version: u32,
    pub functions: Vec<TestFn>,
}

const TIME_FACTORS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, -1.0]];

fn tensor(lists: &[Vec<Mode>]) -> Vec<Vec<Mode>> {
    let mut out = vec![Vec::new()];
    for l in lists {
        out = out
            .into_iter()
            .flat_map(|p| {
                l.iter().map(move |m| {
                    let mut q = p.clone();
                    q.push(*m);
                    q
                })
            })
            .collect();
    }
    out
}

impl TestFunctionBank {
    fn build(spatial: Vec<Vec<Mode>>) -> TestFunctionBank {
        let functions = spatial
            .into_iter()
            .flat_map(|s| TIME_FACTORS.iter().map(move |t| TestFn::new(s.clone(), *t)))
            .collect();
        TestFunctionBank {
            version: 1,
            functions,
        }
    }

    /// General bank: functions need not vanish on walls.
    pub fn standard(grid: &Grid) -> TestFunctionBank {
        let per_axis = if grid.dim() == 1 {
            vec![Mode::Const, Mode::Cos(1), Mode::Sin(1), Mode::Cos(2), Mode::Sin(3)]
        } else {
            vec![Mode::Const, Mode::Cos(1), Mode::Sin(2)]
        };
        TestFunctionBank::build(tensor(&vec![per_axis; grid.dim()]))
    }

    /// Bank whose members vanish on all walls (vector-valued tests).
    pub fn compact(grid: &Grid) -> TestFunctionBank {
        let lists: Vec<Vec<Mode>> = grid
            .axes()
            .iter()
            .map(|ax| match (ax.boundary, grid.dim()) {
                (Boundary::Periodic, 1) => {
                    vec![Mode::Const, Mode::Cos(1), Mode::Sin(1), Mode::Cos(2), Mode::Sin(3)]
                }
                (Boundary::Periodic, _) => vec![Mode::Const, Mode::Cos(1), Mode::Sin(2)],
                (Boundary::Wall, 1) => vec![Mode::Sin(1), Mode::Sin(2), Mode::Sin(3)],
                (Boundary::Wall, _) => vec![Mode::Sin(1), Mode::Sin(2)],
            })
            .collect();
        TestFunctionBank::build(tensor(&lists))
    }

    /// Spatially constant members only.
    pub fn constants(grid: &Grid) -> TestFunctionBank {
        TestFunctionBank::build(vec![vec![Mode::Const; grid.dim()]])
    }

    pub fn with_ramp(&self, ramp: Ramp) -> TestFunctionBank {
        TestFunctionBank {
            version: self.version,
            functions: self
                .functions
                .iter()
                .cloned()
                .map(|f| f.with_ramp(ramp))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}
