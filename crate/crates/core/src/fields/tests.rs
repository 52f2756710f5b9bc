use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use super::*;

fn torus(n: usize) -> Arc<Grid> {
    Grid::torus(1, n, 2.0 * PI).unwrap()
}

fn random_trig(grid: &Arc<Grid>, coeffs: &[f64], basis: Vec<Basis>) -> Field {
    let g = grid.clone();
    Field::from_fn(grid, basis, move |x| {
        let mut v = 0.0;
        for (i, c) in coeffs.iter().enumerate() {
            let m = (i / 2 + 1) as f64;
            let phase: f64 = x
                .iter()
                .zip(g.axes())
                .map(|(xi, ax)| m * 2.0 * PI * xi / ax.ext_length())
                .sum();
            v += if i % 2 == 0 { c * phase.cos() } else { c * phase.sin() };
        }
        v
    })
}

#[test]
fn integrate_zero_and_constant() {
    let g = torus(16);
    assert_eq!(Field::scalar_constant(&g, 0.0).integrate(), 0.0);
    let g2 = Grid::torus(2, 8, 2.0 * PI).unwrap();
    let one = Field::scalar_constant(&g2, 1.0).integrate();
    assert!((one - 4.0 * PI * PI).abs() < 1e-12 * 4.0 * PI * PI);
}

#[test]
fn integrate_sin_squared() {
    let g = torus(32);
    let f = Field::scalar_fn(&g, |x| x[0].sin().powi(2));
    assert!((f.integrate() - PI).abs() < 1e-13);
    let w = Grid::walled(1, 32, PI).unwrap();
    let f = Field::scalar_fn(&w, |x| x[0].cos().powi(2));
    assert!((f.integrate() - PI / 2.0).abs() < 1e-13);
}

#[test]
fn derivative_eigen_relations() {
    let g = torus(32);
    let c = Field::scalar_constant(&g, 3.5).differentiate(0).unwrap();
    assert!(c.sup_norm() < 1e-12);
    let f = Field::scalar_fn(&g, |x| (3.0 * x[0]).cos()).differentiate(0).unwrap();
    let exact = Field::scalar_fn(&g, |x| -3.0 * (3.0 * x[0]).sin());
    assert!(f.max_abs_diff(&exact) < 1e-12);

    let w = Grid::walled(1, 32, PI).unwrap();
    let s = Field::from_fn(&w, vec![Basis::Sine], |x| x[0].sin());
    let ds = s.differentiate(0).unwrap();
    assert_eq!(ds.basis(), &[Basis::Cosine]);
    let exact = Field::from_fn(&w, vec![Basis::Cosine], |x| x[0].cos());
    assert!(ds.max_abs_diff(&exact) < 1e-12);
    let c3 = Field::scalar_fn(&w, |x| (3.0 * x[0]).cos()).differentiate(0).unwrap();
    assert_eq!(c3.basis(), &[Basis::Sine]);
    let exact = Field::from_fn(&w, vec![Basis::Sine], |x| -3.0 * (3.0 * x[0]).sin());
    assert!(c3.max_abs_diff(&exact) < 1e-12);
}

#[test]
fn derivative_rejects_bad_basis() {
    let w = Grid::walled(1, 16, PI).unwrap();
    assert!(Field::new(w.clone(), ndarray::ArrayD::zeros(ndarray::IxDyn(&[17])), vec![Basis::Exponential]).is_err());
    let g = torus(16);
    assert!(Field::new(g, ndarray::ArrayD::zeros(ndarray::IxDyn(&[16])), vec![Basis::Sine]).is_err());
}

#[test]
fn mixed_two_dimensional_derivative() {
    let g = Grid::new(vec![
        Axis::new(16, PI, Boundary::Wall),
        Axis::new(16, 2.0 * PI, Boundary::Periodic),
    ])
    .unwrap();
    let f = Field::scalar_fn(&g, |x| (2.0 * x[0]).cos() * (x[1].sin() + 0.5));
    let dx = f.differentiate(0).unwrap();
    let dy = f.differentiate(1).unwrap();
    let ex = Field::scalar_fn(&g, |x| -2.0 * (2.0 * x[0]).sin() * (x[1].sin() + 0.5));
    let ey = Field::scalar_fn(&g, |x| (2.0 * x[0]).cos() * x[1].cos());
    assert!(dx.max_abs_diff(&ex) < 1e-12);
    assert!(dy.max_abs_diff(&ey) < 1e-12);
}

#[test]
fn mollify_identity_and_constants() {
    let g = torus(64);
    let f = Field::scalar_fn(&g, |x| x[0].sin() + 0.3 * (5.0 * x[0]).cos());
    assert_eq!(f.mollify(0.0).unwrap().data(), f.data());
    assert!(f.mollify(-1.0).is_err());
    let one = Field::scalar_constant(&g, 1.0).mollify(0.4).unwrap();
    assert!(one.max_abs_diff(&Field::scalar_constant(&g, 1.0)) < 1e-14);
}

/// Direct circular convolution with an independently built kernel.
fn brute_convolution(values: &[f64], h: f64, period: f64, eta: f64) -> Vec<f64> {
    let n = values.len();
    let mut w = vec![0.0; n];
    for (e, wv) in w.iter_mut().enumerate() {
        let d = e as f64 * h;
        for p in -3i32..=3 {
            let r = d + p as f64 * period;
            *wv += (-r * r / (2.0 * eta * eta)).exp();
        }
    }
    let s: f64 = w.iter().sum();
    (0..n)
        .map(|j| (0..n).map(|i| w[(j + n - i) % n] / s * values[i]).sum())
        .collect()
}

#[test]
fn mollify_matches_real_space_convolution() {
    let g = torus(64);
    let eta = 0.3;
    let mut last = 1.0;
    for k in 1..6 {
        let f = Field::scalar_fn(&g, |x| (k as f64 * x[0]).sin());
        let m = f.mollify(eta).unwrap();
        let direct = brute_convolution(f.data().as_slice().unwrap(), g.axis(0).spacing(), 2.0 * PI, eta);
        for (a, b) in m.data().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-13);
        }
        let a = m.dot(&f) / f.dot(&f);
        assert!(a > 0.0 && a <= 1.0 && a < last);
        let resid = m.sub(&f.scale(a)).sup_norm();
        assert!(resid < 1e-13);
        last = a;
    }
}

#[test]
fn mollify_wall_preserves_mass_and_parity() {
    let w = Grid::walled(1, 32, 1.0).unwrap();
    let f = Field::scalar_fn(&w, |x| (x[0] * 7.0).exp());
    let m = f.mollify(0.05).unwrap();
    assert!((m.integrate() - f.integrate()).abs() < 1e-12 * f.integrate());
    let s = Field::from_fn(&w, vec![Basis::Sine], |x| (PI * x[0]).sin());
    let ms = s.mollify(0.05).unwrap();
    assert!(ms.data()[0].abs() < 1e-14 && ms.data()[32].abs() < 1e-14);
}

#[test]
fn cutoff_profile_regions() {
    let g = torus(16);
    assert_eq!(cutoff_profile(&g, 0.1).unwrap().min(), 1.0);
    let w = Grid::walled(1, 256, 1.0).unwrap();
    let delta = 0.2;
    let phi = cutoff_profile(&w, delta).unwrap();
    let d = phi.data();
    assert_eq!(d[128], 1.0);
    assert_eq!(d[0], 0.0);
    let h = w.axis(0).spacing();
    let mut prev = -1.0;
    for j in 0..=128 {
        let x = j as f64 * h;
        let v = d[j];
        assert!((0.0..=1.0).contains(&v));
        assert!(v >= prev);
        prev = v;
        if x <= delta / 4.0 {
            assert_eq!(v, 0.0);
        }
        if x >= delta / 2.0 {
            assert_eq!(v, 1.0);
        }
        if (x - delta / 3.0).abs() < h / 2.0 {
            assert!(v > 0.0 && v < 1.0);
        }
    }
    assert!(cutoff_profile(&w, 2.0).is_err());
}

#[test]
fn regularize_constants() {
    let g = torus(32);
    let one = Field::scalar_constant(&g, 1.0);
    let q = VectorField::zeros(&g);
    let r = regularize_initial_data(&one, &one, &q, 0.1, (1.0, 1.0), 1.0).unwrap();
    let target = Field::scalar_constant(&g, 1.1);
    assert!(r.rho.max_abs_diff(&target) < 1e-14);
    assert!(r.z.max_abs_diff(&target) < 1e-14);
}

#[test]
fn regularize_vacuum_keeps_band() {
    for grid in [torus(64), Grid::walled(1, 64, 2.0 * PI).unwrap()] {
        let rho0 = Field::scalar_fn(&grid, |x| {
            let s = (0.5 * (x[0] - PI)).sin();
            s.powi(6)
        });
        let theta = Field::scalar_fn(&grid, |x| 1.2 + 0.6 * x[0].cos());
        let z0 = rho0.mul(&theta);
        let q = VectorField::zeros(&grid);
        let r = regularize_initial_data(&rho0, &z0, &q, 0.05, (0.5, 2.0), 1.2).unwrap();
        assert!(r.rho.min() > 0.0);
        assert!(r.z.min() > 0.0);
        let tol = 1e-13;
        for (zv, rv) in r.z.data().iter().zip(r.rho.data()) {
            assert!(*zv >= 0.5 * rv - tol && *zv <= 2.0 * rv + tol);
        }
        let bad = rho0.scale(3.0);
        assert!(regularize_initial_data(&rho0, &bad, &q, 0.05, (0.5, 2.0), 1.2).is_err());
    }
}

#[test]
fn regularize_converges_as_delta_shrinks() {
    let grid = torus(128);
    let rho0 = Field::scalar_fn(&grid, |x| (0.5 * (x[0] - PI)).sin().powi(4));
    let z0 = rho0.clone();
    let q = VectorField::zeros(&grid);
    let mut last = f64::INFINITY;
    for delta in [0.2, 0.1, 0.05] {
        let r = regularize_initial_data(&rho0, &z0, &q, delta, (0.5, 2.0), 1.0).unwrap();
        let err = r.rho.sub(&rho0).lp_norm(2.0);
        assert!(err < last);
        last = err;
    }
}

#[test]
fn wall_velocity_trace() {
    let w = Grid::walled(2, 16, 1.0).unwrap();
    let u = VectorField::from_fn(&w, |c, x| (PI * x[0]).sin() * (PI * x[1]).sin() * (c + 1) as f64);
    assert!(u.wall_trace_violation() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mollify_preserves_integral(coeffs in prop::collection::vec(-1.0f64..1.0, 1..8), mean in -2.0f64..2.0, eta in 0.0f64..1.0, wall in any::<bool>()) {
        let grid = if wall { Grid::walled(1, 32, 3.0).unwrap() } else { torus(32) };
        let basis = grid.scalar_basis();
        let f = random_trig(&grid, &coeffs, basis).shift(mean);
        let m = f.mollify(eta).unwrap();
        let i = f.integrate();
        prop_assert!((m.integrate() - i).abs() <= 1e-12 * i.abs() + 1e-14 * (1.0 + f.sup_norm()));
    }

    #[test]
    fn mollify_preserves_order(coeffs in prop::collection::vec(-1.0f64..1.0, 1..8), gap in prop::collection::vec(0.0f64..1.0, 1..8), eta in 0.01f64..1.0) {
        let grid = Grid::walled(1, 32, 3.0).unwrap();
        let f = random_trig(&grid, &coeffs, grid.scalar_basis());
        let bump = random_trig(&grid, &gap, grid.scalar_basis());
        let g = f.zip_map(&bump, |a, b| a + b.abs());
        let mf = f.mollify(eta).unwrap();
        let mg = g.mollify(eta).unwrap();
        let tol = 1e-14 * (1.0 + g.sup_norm());
        for (a, b) in mf.data().iter().zip(mg.data()) {
            prop_assert!(*a <= *b + tol);
        }
    }

    #[test]
    fn derivative_integrates_to_zero(coeffs in prop::collection::vec(-1.0f64..1.0, 1..8), wall in any::<bool>()) {
        let grid = if wall { Grid::walled(1, 32, 2.0).unwrap() } else { torus(32) };
        let basis = if wall { vec![Basis::Sine] } else { grid.scalar_basis() };
        let f = random_trig(&grid, &coeffs, basis);
        let f = if wall { f.zip_map(&Field::from_fn(&grid, vec![Basis::Sine], |x| (PI * x[0] / 2.0).sin()), |a, b| a * b) } else { f };
        let d = f.differentiate(0).unwrap();
        prop_assert!(d.integrate().abs() < 1e-12 * (1.0 + f.sup_norm()));
    }

    #[test]
    fn parseval(coeffs in prop::collection::vec(-1.0f64..1.0, 1..10), wall in any::<bool>(), two_d in any::<bool>()) {
        let d = if two_d { 2 } else { 1 };
        let grid = if wall { Grid::walled(d, 16, 1.7).unwrap() } else { Grid::torus(d, 16, 1.7).unwrap() };
        let f = random_trig(&grid, &coeffs, grid.scalar_basis());
        let a = f.l2_norm();
        let b = f.spectral_l2_norm();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }
}
