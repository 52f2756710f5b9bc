use std::f64::consts::PI;

use super::grid::Axis;

/// Sampled, periodized Gaussian of width `eta` on the extended axis, summing to one.
pub fn kernel(ax: &Axis, eta: f64) -> Vec<f64> {
    let len = ax.ext_len();
    let h = ax.spacing();
    let period = ax.ext_length();
    let reps = (10.0 * eta / period).ceil() as i64 + 1;
    let mut g: Vec<f64> = (0..len)
        .map(|e| {
            let d = ax.frequency(e) as f64 * h;
            (-reps..=reps)
                .map(|p| {
                    let r = d + p as f64 * period;
                    (-r * r / (2.0 * eta * eta)).exp()
                })
                .sum()
        })
        .collect();
    let total: f64 = g.iter().sum();
    for v in &mut g {
        *v /= total;
    }
    g
}

/// Discrete Fourier symbol of [`kernel`], indexed like the extended spectrum.
pub fn kernel_symbol(ax: &Axis, eta: f64) -> Vec<f64> {
    let g = kernel(ax, eta);
    let len = g.len();
    (0..len)
        .map(|m| {
            g.iter()
                .enumerate()
                .map(|(e, v)| v * (2.0 * PI * (m * e % len) as f64 / len as f64).cos())
                .sum()
        })
        .collect()
}
