use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Wall,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Wall => "wall",
        }
    }

    pub fn parse(s: &str) -> Option<Boundary> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodic" | "torus" => Some(Boundary::Periodic),
            "wall" => Some(Boundary::Wall),
            _ => None,
        }
    }
}

/// Spectral basis attached to one axis of a field.
///
/// On wall axes `Cosine` means even extension across the walls (Neumann
/// data) and `Sine` odd extension (Dirichlet data).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Exponential,
    Cosine,
    Sine,
}

impl Basis {
    pub fn flipped(self) -> Basis {
        match self {
            Basis::Exponential => Basis::Exponential,
            Basis::Cosine => Basis::Sine,
            Basis::Sine => Basis::Cosine,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::Exponential => "exponential",
            Basis::Cosine => "cosine",
            Basis::Sine => "sine",
        }
    }

    pub fn parse(s: &str) -> Option<Basis> {
        match s.trim() {
            "exponential" => Some(Basis::Exponential),
            "cosine" => Some(Basis::Cosine),
            "sine" => Some(Basis::Sine),
            _ => None,
        }
    }

    /// Parity of the product of two fields along one axis.
    pub fn product(self, other: Basis) -> Basis {
        match (self, other) {
            (Basis::Exponential, _) | (_, Basis::Exponential) => Basis::Exponential,
            (a, b) if a == b => Basis::Cosine,
            _ => Basis::Sine,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub n: usize,
    pub length: f64,
    pub boundary: Boundary,
}

impl Axis {
    pub fn new(n: usize, length: f64, boundary: Boundary) -> Axis {
        Axis {
            n,
            length,
            boundary,
        }
    }

    /// Number of sample nodes; wall axes carry both wall nodes.
    pub fn nodes(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.n,
            Boundary::Wall => self.n + 1,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Length of the periodic grid used by the transforms.
    pub fn ext_len(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.n,
            Boundary::Wall => 2 * self.n,
        }
    }

    pub fn ext_length(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.length,
            Boundary::Wall => 2.0 * self.length,
        }
    }

    pub fn coord(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn weight(&self, j: usize) -> f64 {
        let h = self.spacing();
        match self.boundary {
            Boundary::Periodic => h,
            Boundary::Wall if j == 0 || j == self.n => 0.5 * h,
            Boundary::Wall => h,
        }
    }

    /// Signed integer frequency of extended index `m`.
    pub fn frequency(&self, m: usize) -> i64 {
        let len = self.ext_len();
        if m <= len / 2 {
            m as i64
        } else {
            m as i64 - len as i64
        }
    }

    pub fn wavenumber(&self, m: usize) -> f64 {
        2.0 * PI * self.frequency(m) as f64 / self.ext_length()
    }

    pub fn is_nyquist(&self, m: usize) -> bool {
        m == self.ext_len() / 2
    }

    /// Largest wavenumber representable on the axis.
    pub fn k_max(&self) -> f64 {
        PI / self.spacing()
    }

    /// Distance from coordinate `x` to the nearest wall (infinite when periodic).
    pub fn wall_distance(&self, x: f64) -> f64 {
        match self.boundary {
            Boundary::Periodic => f64::INFINITY,
            Boundary::Wall => x.min(self.length - x).max(0.0),
        }
    }
}

pub(crate) struct Plans {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

/// Tensor-product box grid with cached transform plans.
pub struct Grid {
    axes: Vec<Axis>,
    shape: Vec<usize>,
    ext_shape: Vec<usize>,
    weights: ArrayD<f64>,
    volume: f64,
    pub(crate) plans: Vec<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("axes", &self.axes).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Grid) -> bool {
        self.axes == other.axes
    }
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Arc<Grid>> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::Grid(format!(
                "dimension must be 1, 2 or 3, got {}",
                axes.len()
            )));
        }
        for (a, ax) in axes.iter().enumerate() {
            if ax.n < 8 || !ax.n.is_power_of_two() {
                return Err(Error::Grid(format!(
                    "axis {a}: N = {} must be a power of two >= 8",
                    ax.n
                )));
            }
            if !(ax.length > 0.0 && ax.length.is_finite()) {
                return Err(Error::Grid(format!(
                    "axis {a}: length {} must be positive",
                    ax.length
                )));
            }
        }
        let shape: Vec<usize> = axes.iter().map(Axis::nodes).collect();
        let ext_shape: Vec<usize> = axes.iter().map(Axis::ext_len).collect();
        let mut weights = ArrayD::<f64>::zeros(IxDyn(&shape));
        for (idx, w) in weights.indexed_iter_mut() {
            *w = axes
                .iter()
                .enumerate()
                .map(|(a, ax)| ax.weight(idx[a]))
                .product();
        }
        let volume = axes.iter().map(|a| a.length).product();
        let mut planner = FftPlanner::new();
        let plans = axes
            .iter()
            .map(|ax| Plans {
                forward: planner.plan_fft_forward(ax.ext_len()),
                inverse: planner.plan_fft_inverse(ax.ext_len()),
            })
            .collect();
        Ok(Arc::new(Grid {
            axes,
            shape,
            ext_shape,
            weights,
            volume,
            plans,
        }))
    }

    pub fn uniform(d: usize, n: usize, length: f64, boundary: Boundary) -> Result<Arc<Grid>> {
        Grid::new(vec![Axis::new(n, length, boundary); d])
    }

    pub fn torus(d: usize, n: usize, length: f64) -> Result<Arc<Grid>> {
        Grid::uniform(d, n, length, Boundary::Periodic)
    }

    pub fn walled(d: usize, n: usize, length: f64) -> Result<Arc<Grid>> {
        Grid::uniform(d, n, length, Boundary::Wall)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ext_shape(&self) -> &[usize] {
        &self.ext_shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights(&self) -> &ArrayD<f64> {
        &self.weights
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn is_periodic(&self) -> bool {
        self.axes.iter().all(|a| a.boundary == Boundary::Periodic)
    }

    pub fn has_walls(&self) -> bool {
        !self.is_periodic()
    }

    pub fn coords(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.axes)
            .map(|(&j, ax)| ax.coord(j))
            .collect()
    }

    /// Basis tags for densities: cosine on wall axes.
    pub fn scalar_basis(&self) -> Vec<Basis> {
        self.axes
            .iter()
            .map(|a| match a.boundary {
                Boundary::Periodic => Basis::Exponential,
                Boundary::Wall => Basis::Cosine,
            })
            .collect()
    }

    /// Basis tags for velocity components: sine on wall axes.
    pub fn vector_basis(&self) -> Vec<Basis> {
        self.axes
            .iter()
            .map(|a| match a.boundary {
                Boundary::Periodic => Basis::Exponential,
                Boundary::Wall => Basis::Sine,
            })
            .collect()
    }

    /// Distance of a point to the nearest wall.
    pub fn wall_distance(&self, x: &[f64]) -> f64 {
        self.axes
            .iter()
            .zip(x)
            .map(|(a, &xi)| a.wall_distance(xi))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_wall_node(&self, idx: &[usize]) -> bool {
        self.axes
            .iter()
            .zip(idx)
            .any(|(a, &j)| a.boundary == Boundary::Wall && (j == 0 || j == a.n))
    }

    pub fn same(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
        Arc::ptr_eq(a, b) || **a == **b
    }

    /// Advective stability bound on the time step for a velocity of the given per-axis sup norms.
    pub fn advective_bound(&self, sup: &[f64]) -> f64 {
        let rate: f64 = self
            .axes
            .iter()
            .zip(sup)
            .map(|(a, &s)| a.k_max() * s)
            .sum();
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_axes() {
        assert!(Grid::torus(1, 6, 1.0).is_err());
        assert!(Grid::torus(1, 4, 1.0).is_err());
        assert!(Grid::torus(1, 8, 0.0).is_err());
        assert!(Grid::torus(4, 8, 1.0).is_err());
        assert!(Grid::torus(1, 8, 1.0).is_ok());
    }

    #[test]
    fn weights_sum_to_volume() {
        for b in [Boundary::Periodic, Boundary::Wall] {
            for d in 1..=3 {
                let g = Grid::new(
                    (0..d)
                        .map(|a| Axis::new(8 << a, 1.3 + a as f64, b))
                        .collect(),
                )
                .unwrap();
                let s: f64 = g.weights().iter().sum();
                assert!((s - g.volume()).abs() <= 1e-12 * g.volume());
            }
        }
    }

    #[test]
    fn wavenumbers_signed() {
        let ax = Axis::new(8, 2.0 * PI, Boundary::Periodic);
        assert_eq!(ax.wavenumber(1), 1.0);
        assert_eq!(ax.wavenumber(7), -1.0);
        assert!(ax.is_nyquist(4));
        let w = Axis::new(8, PI, Boundary::Wall);
        assert_eq!(w.ext_len(), 16);
        assert!((w.wavenumber(3) - 3.0).abs() < 1e-15);
    }
}
