//! Concave truncations `T_k` and the capped logarithms `L_k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::Field;

/// `T(z) = z` on `[0,1]`, `1 + (z-1) - (z-1)^2/4` on `[1,3]`, `2` beyond. Negative input passes through.
pub fn cutoff_t(z: f64) -> f64 {
    if z <= 1.0 {
        z
    } else if z <= 3.0 {
        let y = z - 1.0;
        1.0 + y - 0.25 * y * y
    } else {
        2.0
    }
}

pub fn cutoff_t_prime(z: f64) -> f64 {
    if z <= 1.0 {
        1.0
    } else if z <= 3.0 {
        1.0 - 0.5 * (z - 1.0)
    } else {
        0.0
    }
}

fn check_k(k: f64) -> Result<()> {
    if k >= 1.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("cut-off scale k = {k} must be >= 1")))
    }
}

/// `T_k(z) = k T(z/k)`.
pub fn cutoff_tk(z: f64, k: f64) -> Result<f64> {
    check_k(k)?;
    Ok(scaled(z, k))
}

/// `k T(z/k)` with the linear and saturated pieces evaluated without rounding.
fn scaled(z: f64, k: f64) -> f64 {
    if z <= k {
        z
    } else if z >= 3.0 * k {
        2.0 * k
    } else {
        k * cutoff_t(z / k)
    }
}

pub fn cutoff_tk_prime(z: f64, k: f64) -> Result<f64> {
    check_k(k)?;
    Ok(cutoff_t_prime(z / k))
}

/// `T_k` applied node-wise; the flag reports clamped (negative) samples.
pub fn cutoff_field(f: &Field, k: f64) -> Result<(Field, bool)> {
    check_k(k)?;
    let negative = f.min() < 0.0;
    Ok((f.map(|z| scaled(z, k)), negative))
}

/// Continuous primitive of `T_k(s)/s^2`, zero at `s = 1`.
fn primitive(s: f64, k: f64) -> f64 {
    if s <= k {
        s.ln()
    } else if s <= 3.0 * k {
        s.ln() - (s - 2.0 * k * s.ln() - k * k / s) / (4.0 * k) - 0.5 * k.ln()
    } else {
        -2.0 * k / s + k.ln() + 1.5 * 3f64.ln()
    }
}

/// `L_k(z) = z int_1^z T_k(s)/s^2 ds`, in closed form.
pub fn capped_log_lk(z: f64, k: f64) -> Result<f64> {
    check_k(k)?;
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(format!("L_k needs z > 0, got {z}")));
    }
    Ok(z * primitive(z, k))
}

/// Count of pairs violating `(z^g - y^g)(T_k z - T_k y) >= |T_k z - T_k y|^{g+1}`.
pub fn convexity_violations(gamma: f64, ks: &[f64], pairs: usize, seed: u64) -> Result<usize> {
    if !(gamma >= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must be >= 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..pairs {
        let k = ks[rng.gen_range(0..ks.len())];
        check_k(k)?;
        let scale = 4.0 * k;
        let z: f64 = rng.gen_range(0.0..scale);
        let y: f64 = rng.gen_range(0.0..scale);
        let (tz, ty) = (k * cutoff_t(z / k), k * cutoff_t(y / k));
        let lhs = (z.powf(gamma) - y.powf(gamma)) * (tz - ty);
        let rhs = (tz - ty).abs().powf(gamma + 1.0);
        // relative rounding slack for near-equal pairs
        if lhs < rhs - 1e-12 * (1.0 + rhs.abs() + lhs.abs()) {
            bad += 1;
        }
    }
    Ok(bad)
}
