use std::f64::consts::{E, PI};
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::fields::{Grid, Mode};
use crate::galerkin::{run_trajectory, ApproxParams, PhysParams};
use crate::io::{build_scenario, ScenarioKind, ScenarioSpec};

fn torus1(n: usize) -> Arc<Grid> {
    Grid::torus(1, n, 2.0 * PI).unwrap()
}

fn run(n: usize, kind: ScenarioKind, gamma: f64) -> (Galerkin, Trajectory) {
    let g = torus1(n);
    let ap = ApproxParams {
        epsilon: 1e-3,
        delta: 1e-3,
        dt: 0.128 / n as f64,
        t_final: 0.2,
        ..ApproxParams::default()
    };
    let phys = PhysParams { gamma, ..PhysParams::default() };
    let spec = ScenarioSpec { floor: 0.05, ratio: 1.5, ..ScenarioSpec::of(kind) };
    let b = build_scenario(&spec, &g, &phys, &ap).unwrap();
    let tr = run_trajectory(&b.gal, b.initial, 1).unwrap();
    (b.gal, tr)
}

proptest! {
    #[test]
    fn pair_round_trip(y in 1e-3f64..1e3, p in 1.1f64..4.0) {
        for pair in [TFunctionPair::Exponential, TFunctionPair::Power(p)] {
            let back = pair.forward(pair.inverse(y));
            prop_assert!((back - y).abs() <= 1e-12 * y);
            prop_assert!(pair.forward(pair.inverse(y) + 1e-3) > y);
        }
    }

    #[test]
    fn entropy_derivatives_match_differences(th in 0.2f64..5.0, p in 1.1f64..4.0) {
        for pair in [TFunctionPair::Exponential, TFunctionPair::Power(p)] {
            let gamma = 1.7;
            let h = 1e-5 * th;
            let (s, ds, d2s) = pair.entropy_derivs(th, gamma);
            prop_assert!((pair.forward(s).powf(1.0 / gamma) - th).abs() < 1e-10 * th);
            let (sp, _, _) = pair.entropy_derivs(th + h, gamma);
            let (sm, _, _) = pair.entropy_derivs(th - h, gamma);
            prop_assert!(((sp - sm) / (2.0 * h) - ds).abs() < 1e-6 * (1.0 + ds.abs()));
            prop_assert!(((sp - 2.0 * s + sm) / (h * h) - d2s).abs() < 1e-3 * (1.0 + d2s.abs()));
        }
    }

    #[test]
    fn theta_lambda_stays_in_band(seed in 0.0f64..6.0, lambda in 1e-8f64..1.0) {
        let g = torus1(16);
        let rho = Field::scalar_fn(&g, |x| (0.5 * (x[0] - seed)).cos().powi(8));
        let th = Field::scalar_fn(&g, |x| 1.25 + 0.75 * (x[0] + seed).sin());
        let z = rho.zip_map(&th, |r, t| r * t);
        let a = Field::scalar_fn(&g, |x| 1.0 + 0.5 * x[0].cos());
        let out = theta_lambda(&rho, &z, &a, lambda).unwrap();
        let lo = 0.5f64.min(a.min()) - 1e-12;
        let hi = 2.0f64.max(a.max()) + 1e-12;
        prop_assert!(out.min() >= lo && out.max() <= hi);
    }
}

#[test]
fn theta_lambda_trivial_cases() {
    let g = torus1(16);
    let zero = Field::scalar_constant(&g, 0.0);
    let a = Field::scalar_fn(&g, |x| 1.0 + 0.3 * x[0].sin());
    let out = theta_lambda(&zero, &zero, &a, 1e-4).unwrap();
    assert_eq!(out.max_abs_diff(&a), 0.0);
    let rho = Field::scalar_fn(&g, |x| 1.0 + 0.5 * x[0].cos());
    let two = Field::scalar_constant(&g, 2.0);
    for l in [1e-2, 1e-6, 1.0] {
        let t = theta_lambda(&rho, &rho.scale(2.0), &two, l).unwrap();
        assert!(t.max_abs_diff(&two) < 1e-15);
    }
    assert!(theta_lambda(&rho, &rho, &two, 0.0).is_err());
}

#[test]
fn theta_lambda_ladder_converges_with_vacuum() {
    let g = torus1(64);
    let rho = Field::scalar_fn(&g, |x| (0.5 * (x[0] - PI)).cos().powi(8).max(0.0));
    let z = rho.zip_map(&Field::scalar_fn(&g, |x| 1.2 + 0.6 * x[0].cos()), |r, t| r * t);
    let a = Field::scalar_constant(&g, 1.0);
    let outs: Vec<Field> = DEFAULT_LAMBDAS
        .iter()
        .chain([1e-8].iter())
        .map(|&l| theta_lambda(&rho, &z, &a, l).unwrap())
        .collect();
    let incs: Vec<f64> = outs.windows(2).map(|w| w[0].sub(&w[1]).lp_norm(1.0)).collect();
    assert!(incs.windows(2).all(|w| w[1] < w[0]), "{incs:?}");
}

#[test]
fn recover_entropy_values() {
    let g = torus1(16);
    let gamma = 2.0;
    let one = Field::scalar_constant(&g, 1.0);
    let s = recover_entropy(&one, TFunctionPair::Exponential, gamma).unwrap();
    assert_eq!(s.sup_norm(), 0.0);
    let th = Field::scalar_constant(&g, E.powf(1.0 / gamma));
    let s = recover_entropy(&th, TFunctionPair::Exponential, gamma).unwrap();
    assert!(s.max_abs_diff(&one) < 1e-15);
    assert!(recover_entropy(&Field::scalar_constant(&g, 0.0), TFunctionPair::Exponential, gamma).is_err());
}

#[test]
fn round_trip_through_ratio() {
    let g = Grid::torus(2, 32, 2.0 * PI).unwrap();
    let gamma = 2.0;
    for pair in [TFunctionPair::Exponential, TFunctionPair::Power(gamma)] {
        for seed in 0..4 {
            let sd = seed as f64;
            let rho = Field::scalar_fn(&g, |x| 1.0 + 0.8 * (x[0] + sd).sin() * (x[1] - 0.3 * sd).cos());
            let s = Field::scalar_fn(&g, |x| 0.6 + 0.3 * (2.0 * x[0] - sd).cos() + 0.2 * (x[1] + sd).sin());
            let z = rho.zip_map(&s, |r, sv| r * pair.forward(sv).powf(1.0 / gamma));
            let a = initial_ratio(&rho, &z, 0.1, 10.0);
            let th = theta_lambda(&rho, &z, &a, 1e-8).unwrap();
            let back = recover_entropy(&th, pair, gamma).unwrap();
            assert!(back.max_abs_diff(&s) <= 1e-9, "{pair:?}: {}", back.max_abs_diff(&s));
        }
    }
}

#[test]
fn constant_state_bridge_is_clean() {
    let (gal, tr) = run(16, ScenarioKind::Constant, 2.0);
    let bank = TestFunctionBank::standard(gal.grid());
    let (rep, res) = bridge_check(&gal, &tr, TFunctionPair::Exponential, &DEFAULT_LAMBDAS, &bank).unwrap();
    for v in [res.theta_transport, res.theta_renormalized, res.s_transport, res.zeta_transport, res.rho_s] {
        assert!(v < 1e-12, "{res:?}");
    }
    assert!(rep.passed(), "{}", rep.to_json());
    assert!(bridge_check(&gal, &tr, TFunctionPair::Exponential, &[], &bank).is_err());
}

#[test]
fn scaled_run_has_constant_entropy() {
    let (gal, tr) = run(64, ScenarioKind::BandScaled, 2.0);
    let bank = TestFunctionBank::standard(gal.grid());
    let (rep, res) = bridge_check(&gal, &tr, TFunctionPair::Exponential, &[1e-8], &bank).unwrap();
    assert!(res.s_transport < 1e-9, "{res:?}");
    assert!(rep.passed(), "{}", rep.to_json());
}

#[test]
fn bridge_residuals_shrink_and_gate() {
    for gamma in [2.0, 1.6] {
        let runs: Vec<(Galerkin, Trajectory)> = [32, 64].into_iter().map(|n| run(n, ScenarioKind::Pulse, gamma)).collect();
        let levels: Vec<(&Galerkin, &Trajectory)> = runs.iter().map(|(g, t)| (g, t)).collect();
        let rep = bridge_refinement(&levels, TFunctionPair::Exponential, &[1e-8], |g| {
            TestFunctionBank::standard(g.grid())
        })
        .unwrap();
        let rho_s = rep.get("rho-s-eq_trend").unwrap();
        assert_eq!(rho_s.formulation.as_deref(), Some("system-1.1"));
        if gamma >= 1.8 {
            assert!(rep.passed(), "{}", rep.to_json());
            assert!(!rho_s.informational);
        } else {
            assert!(rho_s.informational);
            assert!(rho_s.trend.as_deref().unwrap().starts_with("informational"));
        }
    }
}

#[test]
fn endpoint_values() {
    let (_, tr) = run(16, ScenarioKind::Constant, 2.0);
    let one = TestFn::new(vec![Mode::Const], [1.0, 0.0, 0.0]);
    let (a, b) = endpoint_weak_value(&tr, EndpointField::Rho, &one, 0.03, None).unwrap();
    let m = tr.snapshots[0].rho.integrate();
    assert!((a - m).abs() < 1e-12 && (b - m).abs() < 1e-12);
    assert!(endpoint_weak_value(&tr, EndpointField::Rho, &one, 0.15, None).is_err());
    assert!(endpoint_weak_value(&tr, EndpointField::Zeta, &one, 0.03, None).is_err());

    let (gal, tr) = run(64, ScenarioKind::Pulse, 2.0);
    let series = BridgeSeries::build(&gal, &tr, TFunctionPair::Exponential, 1e-8).unwrap();
    let phi = TestFn::new(vec![Mode::Cos(1)], [1.0, 0.5, 0.0]);
    for field in [EndpointField::Rho, EndpointField::Z, EndpointField::RhoS, EndpointField::Zeta] {
        let taus = [0.064, 0.032, 0.016, 0.008];
        let v0: Vec<f64> = taus
            .iter()
            .map(|&t| endpoint_weak_value(&tr, field, &phi, t, Some(&series)).unwrap().0)
            .collect();
        let incs: Vec<f64> = v0.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
        assert!(incs.windows(2).all(|w| w[1] < w[0]), "{field:?}: {incs:?}");
        let ps = phi.spatial_field(gal.grid());
        let f0 = match field {
            EndpointField::Rho => tr.snapshots[0].rho.clone(),
            EndpointField::Z => tr.snapshots[0].z.clone(),
            EndpointField::RhoS => tr.snapshots[0].rho.mul(&series.entropy(&series.theta[0]).unwrap()),
            EndpointField::Zeta => series.zeta(0),
        };
        let direct = f0.dot(&ps) * phi.time_factor(0.0, tr.last().t).0;
        let gaps: Vec<f64> = v0.iter().map(|v| (v - direct).abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{field:?}: {gaps:?}");
    }
}
